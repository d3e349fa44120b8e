"""End-to-end runs: score a sharded corpus, select, split, analyze.

Scoring reads a glob of JSONL shards (optionally gzipped), annotates
every document against the pool automaton, and writes one score shard
per input shard plus a manifest. The manifest is a pure function of
(pool bytes, corpus bytes, config): checksums and counts only, no
timings. Wall-clock diagnostics go to a separate run_stats.json sidecar
so reruns and crash-resumed runs stay byte-identical.

Parallelism is per input shard over forked workers sharing the
immutable parent automaton; each shard's output order is its input
order, so worker count never changes any output byte.
"""

from __future__ import annotations

import glob
import gzip
import hashlib
import json
import logging
import multiprocessing
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .analysis import (PreferencePair, bucket_distribution, correlation_json,
                       correlation_matrix, function_search, function_search_csv)
from .errors import DataError, ResourceError
from .matcher import Automaton, Document, MatcherConfig, annotate, build_automaton
from .metrics import ScoreRecord, score_record
from .pool import KnowledgePool, PoolOptions, load_pool
from .selection import SelectionSpec, select

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
STATS_NAME = "run_stats.json"


@dataclass(frozen=True)
class RunConfig:
    """Scoring-run configuration; hashed into the manifest."""

    pool_path: str
    corpus: str
    out_dir: str
    workers: int = 1
    strict: bool = False
    boundary: bool = True
    domain_scores: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise DataError(f"worker count must be >= 1, got {self.workers}")

    def canonical(self) -> dict:
        return dict(sorted(asdict(self).items()))


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def _identity_config(config: RunConfig) -> dict:
    # Worker count never affects output bytes, so it is not identity.
    return {k: v for k, v in config.canonical().items() if k != "workers"}


def config_hash(config: RunConfig) -> str:
    payload = _identity_config(config)
    return hashlib.sha256(_canonical_json(payload).encode("utf-8")).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise ResourceError(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def _open_text(path: str, strict: bool):
    errors = "strict" if strict else "replace"
    if path.endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8", errors=errors)
    return open(path, "r", encoding="utf-8", errors=errors)


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class ShardOutcome:
    """Per-shard result; `records` and the output bytes are deterministic,
    the skip counters describe this run only."""

    index: int
    input_path: str
    output_name: str
    sha256: str
    records: int
    read: int = 0
    malformed: int = 0
    degenerate: int = 0
    density_gt_1: int = 0
    resumed: bool = False


# Worker state inherited through fork; set once in the parent before
# the pool spawns so children share one read-only automaton.
_G_AUTOMATON: Automaton | None = None
_G_POOL: KnowledgePool | None = None
_G_CONFIG: RunConfig | None = None


def _parse_doc(obj, shard: str, line_no: int, seen_ids: set,
               strict: bool) -> Document | None:
    if not isinstance(obj, dict):
        raise DataError(f"{shard}:{line_no}: document is not an object")
    doc_id = obj.get("id")
    text = obj.get("text")
    if not isinstance(doc_id, str) or not doc_id:
        raise DataError(f"{shard}:{line_no}: missing or empty 'id'")
    if not isinstance(text, str):
        raise DataError(f"{shard}:{line_no}: missing 'text'")
    if doc_id in seen_ids:
        raise DataError(f"{shard}:{line_no}: duplicate id {doc_id!r}")
    seen_ids.add(doc_id)
    meta = obj.get("meta")
    if meta is not None and not isinstance(meta, dict):
        raise DataError(f"{shard}:{line_no}: 'meta' is not an object")
    return Document(id=doc_id, text=text, meta=meta)


def _score_shard(task: tuple[int, str, str]) -> ShardOutcome:
    index, in_path, out_path = task
    automaton, pool, config = _G_AUTOMATON, _G_POOL, _G_CONFIG
    assert automaton is not None and pool is not None and config is not None
    out = Path(out_path)

    if out.exists():
        with open(out, "r", encoding="utf-8") as f:
            records = sum(1 for _ in f)
        return ShardOutcome(index=index, input_path=in_path,
                            output_name=out.name, sha256=file_sha256(out),
                            records=records, resumed=True)

    outcome = ShardOutcome(index=index, input_path=in_path,
                           output_name=out.name, sha256="", records=0)
    seen_ids: set[str] = set()
    lines: list[str] = []
    try:
        fh = _open_text(in_path, config.strict)
    except OSError as exc:
        raise ResourceError(f"cannot read corpus shard {in_path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            outcome.read += 1
            try:
                doc = _parse_doc(json.loads(line), in_path, line_no,
                                 seen_ids, config.strict)
            except (json.JSONDecodeError, DataError) as exc:
                if config.strict:
                    if isinstance(exc, DataError):
                        raise
                    raise DataError(f"{in_path}:{line_no}: invalid JSON "
                                    f"({exc})") from exc
                outcome.malformed += 1
                log.debug("%s:%d: skipped malformed line (%s)",
                          in_path, line_no, exc)
                continue
            profile = annotate(doc, automaton)
            if profile.n_p == 0:
                outcome.degenerate += 1
                log.debug("%s:%d: document %r has no tokens; excluded",
                          in_path, line_no, doc.id)
                continue
            rec = score_record(profile, pool,
                               with_domains=config.domain_scores,
                               meta=doc.meta)
            if rec.d > 1:
                outcome.density_gt_1 += 1
            lines.append(rec.to_json())

    data = "".join(line + "\n" for line in lines)
    _atomic_write(out, data)
    outcome.records = len(lines)
    outcome.sha256 = hashlib.sha256(data.encode("utf-8")).hexdigest()
    return outcome


def _resolve_shards(corpus_glob: str) -> list[str]:
    paths = sorted(glob.glob(corpus_glob, recursive=True))
    paths = [p for p in paths if os.path.isfile(p)]
    return paths


def run_score(config: RunConfig) -> dict:
    """Score every document in the corpus; returns the manifest dict.

    Existing output shards are kept as-is (crash resume); delete a shard
    file to force its regeneration. The manifest and shard bytes are
    identical whether a run was fresh, resumed, or parallel.
    """
    global _G_AUTOMATON, _G_POOL, _G_CONFIG
    started = time.monotonic()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pool = load_pool(config.pool_path, PoolOptions(strict=config.strict))
    automaton = build_automaton(pool, MatcherConfig(boundary=config.boundary))
    built_at = time.monotonic()

    shards = _resolve_shards(config.corpus)
    if not shards:
        raise DataError(f"no corpus files match {config.corpus!r}")

    tasks = [(i, path, str(out_dir / f"scores-{i:05d}.jsonl"))
             for i, path in enumerate(shards)]
    _G_AUTOMATON, _G_POOL, _G_CONFIG = automaton, pool, config
    workers = min(config.workers, len(tasks))
    try:
        if workers > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=workers) as procs:
                outcomes = procs.map(_score_shard, tasks, chunksize=1)
        else:
            outcomes = [_score_shard(t) for t in tasks]
    finally:
        _G_AUTOMATON, _G_POOL, _G_CONFIG = None, None, None
    outcomes.sort(key=lambda o: o.index)
    elapsed = time.monotonic() - started

    total_records = sum(o.records for o in outcomes)
    if total_records == 0:
        log.warning("corpus produced zero scored documents")
    manifest = {
        "version": 1,
        "config": _identity_config(config),
        "config_hash": config_hash(config),
        "pool": {
            "path": config.pool_path,
            "sha256": file_sha256(config.pool_path),
            "elements": pool.total,
            "per_domain": {d: int(n) for d, n in
                           sorted(pool.per_domain_total.items())},
        },
        "records": total_records,
        "shards": [
            {"input": o.input_path, "output": o.output_name,
             "sha256": o.sha256, "records": o.records}
            for o in outcomes
        ],
    }
    _atomic_write(out_dir / MANIFEST_NAME,
                  _canonical_json(manifest) + "\n")

    input_bytes = sum(os.path.getsize(p) for p in shards)
    read = sum(o.read for o in outcomes)
    stats = {
        "elapsed_s": round(elapsed, 3),
        "automaton_build_s": round(built_at - started, 3),
        "workers": workers,
        "input_bytes": input_bytes,
        "docs_read": read,
        "docs_scored": total_records,
        "docs_per_s": round(read / elapsed, 1) if elapsed > 0 else None,
        "mb_per_s": round(input_bytes / elapsed / 1e6, 2) if elapsed > 0 else None,
        "skipped_malformed": sum(o.malformed for o in outcomes),
        "skipped_degenerate": sum(o.degenerate for o in outcomes),
        "density_gt_1": sum(o.density_gt_1 for o in outcomes),
        "resumed_shards": sum(1 for o in outcomes if o.resumed),
        "pool_load": pool.report.to_dict() if pool.report else None,
    }
    _atomic_write(out_dir / STATS_NAME,
                  json.dumps(stats, sort_keys=True, indent=2) + "\n")
    log.info("scored %d documents from %d shards in %.1fs",
             read, len(shards), elapsed)
    return manifest


def read_score_records(scores_dir: str | Path) -> Iterator[ScoreRecord]:
    """Stream records from a scoring run's output directory.

    Uses the manifest's shard list when present, else every
    scores-*.jsonl in name order.
    """
    scores_dir = Path(scores_dir)
    manifest_path = scores_dir / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        names = [s["output"] for s in manifest["shards"]]
    else:
        names = sorted(p.name for p in scores_dir.glob("scores-*.jsonl"))
    if not names:
        raise DataError(f"no score shards found under {scores_dir}")
    for name in names:
        path = scores_dir / name
        try:
            fh = open(path, "r", encoding="utf-8")
        except OSError as exc:
            raise ResourceError(f"cannot read score shard {path}: {exc}") from exc
        with fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield ScoreRecord.from_json(line)


def load_score_records(scores_dir: str | Path) -> list[ScoreRecord]:
    records = list(read_score_records(scores_dir))
    if not records:
        raise DataError(f"score run under {scores_dir} holds zero records")
    return records


def run_select(scores_dir: str, spec: SelectionSpec, out_dir: str,
               corpus_glob: str | None = None,
               emit_corpus: str | None = None) -> dict:
    """Select from a scored run; writes selected.jsonl + selection.json.

    selected.jsonl has one {"id", "n_p", "score"} line per selected
    document in selection order. With corpus_glob and emit_corpus set,
    the matching source documents are also copied out (corpus order).
    """
    records = load_score_records(scores_dir)
    result = select(records, spec)
    by_id = {r.doc_id: r for r in records}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = []
    for doc_id in result.selected_ids:
        rec = by_id[doc_id]
        lines.append(_canonical_json({
            "id": doc_id, "n_p": rec.n_p,
            "score": rec.score(spec.score_field),
        }))
    _atomic_write(out / "selected.jsonl",
                  "".join(line + "\n" for line in lines))

    summary = {
        "spec": dict(sorted(asdict(spec).items())),
        **result.summary(),
    }
    _atomic_write(out / "selection.json",
                  json.dumps(summary, sort_keys=True, indent=2) + "\n")

    if emit_corpus:
        if not corpus_glob:
            raise DataError("emitting the selected corpus requires the "
                            "source corpus glob")
        wanted = set(result.selected_ids)
        emitted = []
        for shard in _resolve_shards(corpus_glob):
            with _open_text(shard, strict=False) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    if isinstance(obj, dict) and obj.get("id") in wanted:
                        emitted.append(line)
        _atomic_write(Path(emit_corpus),
                      "".join(line + "\n" for line in emitted))
    return summary


def run_split(scores_dir: str, token_budget: int, out_dir: str,
              score_field: str = "hks") -> dict:
    """Threshold-split a scored run into high.jsonl / low.jsonl."""
    from .selection import threshold_split
    records = load_score_records(scores_dir)
    high, low, threshold = threshold_split(records, token_budget, score_field)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("high.jsonl", high), ("low.jsonl", low)):
        _atomic_write(out / name,
                      "".join(r.to_json() + "\n" for r in part))
    summary = {
        "score_field": score_field,
        "token_budget": token_budget,
        "threshold": threshold,
        "high_records": len(high),
        "high_tokens": sum(r.n_p for r in high),
        "low_records": len(low),
        "low_tokens": sum(r.n_p for r in low),
    }
    _atomic_write(out / "split.json",
                  json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def run_hist(scores_dir: str, metric: str, group_by: str, n_buckets: int,
             out_path: str) -> None:
    records = load_score_records(scores_dir)
    hist = bucket_distribution(records, metric, group_by, n_buckets)
    _atomic_write(Path(out_path), hist.to_csv())


def _load_ext_columns(path: str) -> dict[str, dict[str, float]]:
    """External baseline columns: JSONL of {"id": ..., <name>: value}."""
    table: dict[str, dict[str, float]] = {}
    with _open_text(path, strict=False) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc_id = obj["id"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{line_no}: bad external column "
                                f"row ({exc})") from exc
            table[doc_id] = {k: float(v) for k, v in obj.items()
                             if k != "id" and isinstance(v, (int, float))}
    return table


def run_corr(scores_dir: str, columns: Sequence[str], out_path: str,
             ext_path: str | None = None) -> dict:
    """Pairwise Spearman between score columns, joined on document id.

    Columns are d/c/hks/domain names, or ext:<name> drawn from the
    external JSONL. Documents missing any external value are dropped
    from all columns (inner join) with a warning.
    """
    records = load_score_records(scores_dir)
    ext = _load_ext_columns(ext_path) if ext_path else {}

    def ext_value(rec: ScoreRecord, name: str) -> float | None:
        row = ext.get(rec.doc_id)
        return None if row is None else row.get(name)

    kept = records
    ext_names = [c.split(":", 1)[1] for c in columns if c.startswith("ext:")]
    if ext_names:
        if not ext_path:
            raise DataError("ext: columns require an external column file")
        kept = [r for r in records
                if all(ext_value(r, n) is not None for n in ext_names)]
        dropped = len(records) - len(kept)
        if dropped:
            log.warning("%d of %d records lack external columns; dropped "
                        "from the correlation", dropped, len(records))
    if len(kept) < 2:
        raise DataError("fewer than 2 records with all requested columns")

    data: dict[str, list[float]] = {}
    for col in columns:
        if col.startswith("ext:"):
            name = col.split(":", 1)[1]
            data[col] = [ext_value(r, name) for r in kept]
        else:
            data[col] = [r.score(col) for r in kept]
    result = correlation_matrix(data)
    _atomic_write(Path(out_path), correlation_json(result) + "\n")
    return result


def load_pairs(path: str) -> list[PreferencePair]:
    pairs = []
    with _open_text(path, strict=False) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pairs.append(PreferencePair.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON "
                                f"({exc})") from exc
    return pairs


def run_fsearch(pairs_path: str, out_path: str,
                per_pair_normalize: bool = False) -> list:
    pairs = load_pairs(pairs_path)
    rows = function_search(pairs, per_pair_normalize)
    _atomic_write(Path(out_path), function_search_csv(rows))
    return rows
