"""Corpus scoring runs: sharded output, manifest, resume, downstream ops."""

import gzip
import json
import math
import shutil
from pathlib import Path

import pytest

from hks import DataError, SelectionSpec
from hks.pipeline import (RunConfig, config_hash, file_sha256,
                          load_score_records, run_corr, run_fsearch, run_hist,
                          run_score, run_select, run_split)

POOL_TSV = """\
machine learning\tscience
graph theory\tscience
jazz\tart
social contract\tsociety
meditation\tlife
"""

DOC_A = {"id": "doc-a",
         "text": "Machine learning and graph theory inform machine "
                 "learning practice.",
         "meta": {"subset": "enc"}}
DOC_B = {"id": "doc-b",
         "text": "Jazz, meditation, and the social contract.",
         "meta": {"subset": "web"}}
DOC_C = {"id": "doc-c", "text": "Nothing relevant here at all."}

A_HKS = (3 / 9) * math.log1p(2 / 5)
B_HKS = (3 / 6) * math.log1p(3 / 5)


def write_corpus(root: Path, shards) -> str:
    corpus = root / "shards"
    corpus.mkdir(exist_ok=True)
    for i, docs in enumerate(shards):
        path = corpus / f"shard-{i:03d}.jsonl"
        path.write_text("".join(json.dumps(d) + "\n" for d in docs),
                        encoding="utf-8")
    return str(corpus / "shard-*.jsonl")


def toy_config(root: Path, **kw) -> RunConfig:
    pool_path = root / "pool.tsv"
    if not pool_path.exists():
        pool_path.write_text(POOL_TSV, encoding="utf-8")
    corpus = write_corpus(root, [[DOC_A], [DOC_B], [DOC_C]])
    defaults = dict(pool_path=str(pool_path), corpus=corpus,
                    out_dir=str(root / "out"))
    defaults.update(kw)
    return RunConfig(**defaults)


def snapshot(out_dir: str) -> dict[str, bytes]:
    """Bytes of every deterministic output (run_stats.json excluded)."""
    out = Path(out_dir)
    files = sorted(p for p in out.iterdir()
                   if p.name == "manifest.json" or p.name.startswith("scores-"))
    return {p.name: p.read_bytes() for p in files}


class TestScoreRun:
    def test_hand_computed_records(self, tmp_path):
        config = toy_config(tmp_path)
        manifest = run_score(config)
        records = {r.doc_id: r for r in load_score_records(config.out_dir)}
        assert set(records) == {"doc-a", "doc-b", "doc-c"}

        a = records["doc-a"]
        assert (a.n_p, a.n_k, a.n_distinct) == (9, 3, 2)
        assert a.d == 3 / 9
        assert a.c == 2 / 5
        assert a.hks == A_HKS
        sci = a.domains["science"]
        assert (sci["n"], sci["distinct"]) == (3, 2)
        assert sci["c"] == 1.0
        assert sci["score"] == (3 / 9) * math.log1p(1.0)
        assert a.domains["art"]["score"] == 0.0
        assert a.domains["culture"] == {"n": 0, "distinct": 0, "d": 0.0,
                                        "c": 0.0, "score": 0.0}
        assert a.meta == {"subset": "enc"}

        b = records["doc-b"]
        assert (b.n_p, b.n_k, b.n_distinct) == (6, 3, 3)
        assert b.d == 0.5 and b.c == 3 / 5 and b.hks == B_HKS
        assert b.domains["art"]["d"] == 1 / 6
        assert b.domains["life"]["c"] == 1.0

        c = records["doc-c"]
        assert (c.n_k, c.d, c.c, c.hks) == (0, 0.0, 0.0, 0.0)
        assert c.meta is None

        assert manifest["records"] == 3
        assert len(manifest["shards"]) == 3

    def test_manifest_contents(self, tmp_path):
        config = toy_config(tmp_path)
        manifest = run_score(config)
        assert manifest["pool"]["sha256"] == file_sha256(config.pool_path)
        assert manifest["pool"]["elements"] == 5
        assert manifest["pool"]["per_domain"] == {
            "art": 1, "culture": 0, "life": 1, "science": 2, "society": 1}
        assert manifest["config_hash"] == config_hash(config)
        assert "workers" not in manifest["config"]
        for i, shard in enumerate(manifest["shards"]):
            assert shard["output"] == f"scores-{i:05d}.jsonl"
            assert shard["records"] == 1
        on_disk = json.loads(
            (Path(config.out_dir) / "manifest.json").read_text())
        assert on_disk == manifest

    def test_rerun_is_byte_identical(self, tmp_path):
        config = toy_config(tmp_path)
        run_score(config)
        first = snapshot(config.out_dir)
        shutil.rmtree(config.out_dir)
        run_score(config)
        assert snapshot(config.out_dir) == first

    def test_worker_count_never_changes_bytes(self, tmp_path):
        config = toy_config(tmp_path)
        run_score(config)
        serial = snapshot(config.out_dir)
        shutil.rmtree(config.out_dir)
        run_score(RunConfig(**{**config.canonical(), "workers": 2}))
        assert snapshot(config.out_dir) == serial

    def test_resume_regenerates_only_missing_shards(self, tmp_path):
        config = toy_config(tmp_path)
        run_score(config)
        first = snapshot(config.out_dir)
        out = Path(config.out_dir)
        (out / "scores-00001.jsonl").unlink()
        (out / "manifest.json").unlink()
        run_score(config)
        assert snapshot(config.out_dir) == first
        stats = json.loads((out / "run_stats.json").read_text())
        assert stats["resumed_shards"] == 2

    def test_gzip_shards(self, tmp_path):
        pool_path = tmp_path / "pool.tsv"
        pool_path.write_text(POOL_TSV, encoding="utf-8")
        shard = tmp_path / "part.jsonl.gz"
        with gzip.open(shard, "wt", encoding="utf-8") as f:
            f.write(json.dumps(DOC_A) + "\n")
        config = RunConfig(pool_path=str(pool_path),
                           corpus=str(tmp_path / "*.jsonl.gz"),
                           out_dir=str(tmp_path / "out"))
        run_score(config)
        (rec,) = load_score_records(config.out_dir)
        assert rec.doc_id == "doc-a" and rec.hks == A_HKS

    def test_no_matching_corpus(self, tmp_path):
        config = toy_config(tmp_path, corpus=str(tmp_path / "nope-*.jsonl"))
        with pytest.raises(DataError, match="no corpus files"):
            run_score(config)

    def test_empty_corpus_file_warns(self, tmp_path, caplog):
        pool_path = tmp_path / "pool.tsv"
        pool_path.write_text(POOL_TSV, encoding="utf-8")
        (tmp_path / "empty.jsonl").write_text("", encoding="utf-8")
        config = RunConfig(pool_path=str(pool_path),
                           corpus=str(tmp_path / "*.jsonl"),
                           out_dir=str(tmp_path / "out"))
        with caplog.at_level("WARNING", logger="hks.pipeline"):
            manifest = run_score(config)
        assert manifest["records"] == 0
        assert any("zero scored" in r.message for r in caplog.records)

    def test_malformed_lines_lenient_vs_strict(self, tmp_path):
        root = tmp_path / "lenient"
        root.mkdir()
        (root / "pool.tsv").write_text(POOL_TSV, encoding="utf-8")
        shard = root / "shards"
        shard.mkdir()
        (shard / "shard-000.jsonl").write_text(
            "this is not json\n" + json.dumps(DOC_A) + "\n"
            + json.dumps({"id": "no-text"}) + "\n",
            encoding="utf-8")
        config = RunConfig(pool_path=str(root / "pool.tsv"),
                           corpus=str(shard / "*.jsonl"),
                           out_dir=str(root / "out"))
        manifest = run_score(config)
        assert manifest["records"] == 1
        stats = json.loads((Path(config.out_dir) / "run_stats.json").read_text())
        assert stats["skipped_malformed"] == 2

        strict = RunConfig(**{**config.canonical(), "strict": True,
                              "out_dir": str(root / "out-strict")})
        with pytest.raises(DataError, match="shard-000.jsonl:1"):
            run_score(strict)

    def test_duplicate_id_within_shard(self, tmp_path):
        (tmp_path / "pool.tsv").write_text(POOL_TSV, encoding="utf-8")
        corpus = write_corpus(tmp_path, [[DOC_A, DOC_A]])
        config = RunConfig(pool_path=str(tmp_path / "pool.tsv"),
                           corpus=corpus, out_dir=str(tmp_path / "out"),
                           strict=True)
        with pytest.raises(DataError, match="duplicate id"):
            run_score(config)

    def test_duplicate_id_across_shards_allowed(self, tmp_path):
        (tmp_path / "pool.tsv").write_text(POOL_TSV, encoding="utf-8")
        corpus = write_corpus(tmp_path, [[DOC_A], [DOC_A]])
        config = RunConfig(pool_path=str(tmp_path / "pool.tsv"),
                           corpus=corpus, out_dir=str(tmp_path / "out"))
        assert run_score(config)["records"] == 2

    def test_degenerate_documents_excluded(self, tmp_path):
        (tmp_path / "pool.tsv").write_text(POOL_TSV, encoding="utf-8")
        corpus = write_corpus(
            tmp_path, [[DOC_A, {"id": "doc-x", "text": "!!! ??? ..."}]])
        config = RunConfig(pool_path=str(tmp_path / "pool.tsv"),
                           corpus=corpus, out_dir=str(tmp_path / "out"))
        manifest = run_score(config)
        assert manifest["records"] == 1
        stats = json.loads((Path(config.out_dir) / "run_stats.json").read_text())
        assert stats["skipped_degenerate"] == 1

    def test_density_above_one_counted(self, tmp_path):
        (tmp_path / "pool.tsv").write_text("ab\tscience\n", encoding="utf-8")
        corpus = write_corpus(tmp_path, [[{"id": "d", "text": "abab abab"}]])
        config = RunConfig(pool_path=str(tmp_path / "pool.tsv"),
                           corpus=corpus, out_dir=str(tmp_path / "out"),
                           boundary=False)
        run_score(config)
        (rec,) = load_score_records(config.out_dir)
        assert rec.d == 2.0  # 4 occurrences over 2 tokens
        stats = json.loads((Path(config.out_dir) / "run_stats.json").read_text())
        assert stats["density_gt_1"] == 1


@pytest.fixture()
def scored(tmp_path):
    config = toy_config(tmp_path)
    run_score(config)
    return tmp_path, config


class TestDownstream:
    def test_select_topk(self, scored):
        root, config = scored
        spec = SelectionSpec(strategy="topk", budget=15)
        summary = run_select(config.out_dir, spec, str(root / "sel"))
        assert summary["selected"] == 2
        assert summary["total_tokens"] == 15
        lines = [json.loads(s) for s in
                 (root / "sel" / "selected.jsonl").read_text().splitlines()]
        assert [l["id"] for l in lines] == ["doc-b", "doc-a"]
        assert lines[0] == {"id": "doc-b", "n_p": 6, "score": B_HKS}
        spec_json = json.loads((root / "sel" / "selection.json").read_text())
        assert spec_json["spec"]["strategy"] == "topk"
        assert spec_json["threshold"] == A_HKS

    def test_select_emit_corpus(self, scored):
        root, config = scored
        spec = SelectionSpec(strategy="topk", budget=15)
        emitted = root / "picked.jsonl"
        run_select(config.out_dir, spec, str(root / "sel"),
                   corpus_glob=config.corpus, emit_corpus=str(emitted))
        docs = [json.loads(s) for s in emitted.read_text().splitlines()]
        # Source documents come back in corpus order, untouched.
        assert docs == [DOC_A, DOC_B]

    def test_split(self, scored):
        root, config = scored
        summary = run_split(config.out_dir, 6, str(root / "split"))
        assert summary["threshold"] == B_HKS
        assert summary["high_records"] == 1
        assert summary["high_tokens"] == 6
        assert summary["low_records"] == 2
        high = [json.loads(s) for s in
                (root / "split" / "high.jsonl").read_text().splitlines()]
        assert [h["id"] for h in high] == ["doc-b"]
        low = [json.loads(s) for s in
               (root / "split" / "low.jsonl").read_text().splitlines()]
        assert [l["id"] for l in low] == ["doc-a", "doc-c"]

    def test_hist(self, scored):
        root, config = scored
        out = root / "hist.csv"
        run_hist(config.out_dir, "hks", "subset", 4, str(out))
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "group,bucket,lo,hi,count"
        assert len(lines) == 1 + 3 * 4  # groups enc, web, unknown
        assert sum(int(l.split(",")[-1]) for l in lines[1:]) == 3

    def test_corr_internal_columns(self, scored):
        root, config = scored
        out = root / "corr.json"
        result = run_corr(config.out_dir, ["d", "c", "hks"], str(out))
        # d, c, and hks all rank the toy docs identically.
        for row in result["rho"]:
            assert row == [1.0, 1.0, 1.0]
        assert json.loads(out.read_text()) == result

    def test_corr_external_join(self, scored, caplog):
        root, config = scored
        ext = root / "ext.jsonl"
        ext.write_text(
            json.dumps({"id": "doc-a", "ppl": 12.0}) + "\n"
            + json.dumps({"id": "doc-b", "ppl": 5.0}) + "\n",
            encoding="utf-8")
        with caplog.at_level("WARNING", logger="hks.pipeline"):
            result = run_corr(config.out_dir, ["hks", "ext:ppl"],
                              str(root / "corr.json"), ext_path=str(ext))
        # doc-c has no external value and is dropped from the join.
        assert any("lack external columns" in r.message
                   for r in caplog.records)
        names = result["columns"]
        i, j = names.index("hks"), names.index("ext:ppl")
        assert result["rho"][i][j] == -1.0

    def test_fsearch(self, scored):
        root, _ = scored
        pairs = root / "pairs.jsonl"
        rows = [
            {"a": {"d": 0.1, "c": 0.1}, "b": {"d": 0.9, "c": 0.9},
             "label": 1.0},
            {"a": {"d": 0.8, "c": 0.7}, "b": {"d": 0.1, "c": 0.2},
             "label": 0.0},
            {"a": {"d": 0.5, "c": 0.5}, "b": {"d": 0.6, "c": 0.4},
             "label": 0.6},
        ]
        pairs.write_text("".join(json.dumps(r) + "\n" for r in rows),
                         encoding="utf-8")
        out = root / "fsearch.csv"
        result = run_fsearch(str(pairs), str(out))
        assert len(result) == 9
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "formula,f,g,rho"
        assert len(lines) == 10

    def test_missing_scores_dir(self, tmp_path):
        with pytest.raises(DataError):
            run_split(str(tmp_path / "nowhere"), 10, str(tmp_path / "o"))
