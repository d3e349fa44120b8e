"""Knowledge scores over match profiles.

Density is occurrences per token, coverage is the fraction of the pool's
distinct surfaces present in the document, and the composite score is
density * ln(coverage + 1). Domain scores apply the same formula with
counts restricted to one domain's sub-pool. A small 3x3 family of
alternative scoring functions f(d) * g(c) is provided for the function
search in the analysis layer.

Scores are computed in float64; the persisted record keeps the integer
counts (n_k, n_distinct, n_p, per-domain pairs) so any downstream tool
can recompute the ratios at full precision.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from .errors import DataError, DegenerateDocumentError, EmptyPoolError
from .matcher import KnowledgeProfile
from .pool import DOMAINS, KnowledgePool

log = logging.getLogger(__name__)

FUNC_KINDS = ("identity", "sin", "ln1p")


def density(profile: KnowledgeProfile) -> float:
    """Occurrences per token, n_k / n_p. May exceed 1 under overlaps."""
    if profile.n_p <= 0:
        raise DegenerateDocumentError(
            f"document {profile.doc_id!r} has no tokens; cannot score"
        )
    return profile.n_k / profile.n_p


def coverage(profile: KnowledgeProfile, pool: KnowledgePool) -> float:
    """Fraction of distinct pool surfaces present, n_distinct / N_k."""
    if pool.total <= 0:
        raise EmptyPoolError("coverage is undefined for an empty pool")
    return profile.n_distinct / pool.total


def hks_score(d: float, c: float) -> float:
    """Composite score d * ln(1 + c), accurate for small c via log1p."""
    if d < 0 or c < 0:
        raise DataError(f"negative score inputs d={d}, c={c}")
    return d * math.log1p(c)


def domain_score(profile: KnowledgeProfile, pool: KnowledgePool,
                 domain: str) -> tuple[float, float, float]:
    """(d_m, c_m, score_m) with counts restricted to one domain."""
    if domain not in DOMAINS:
        raise DataError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
    n_km = pool.per_domain_total.get(domain, 0)
    if n_km <= 0:
        raise EmptyPoolError(f"pool has no elements in domain {domain!r}")
    if profile.n_p <= 0:
        raise DegenerateDocumentError(
            f"document {profile.doc_id!r} has no tokens; cannot score"
        )
    occ, distinct = profile.per_domain.get(domain, (0, 0))
    d_m = occ / profile.n_p
    c_m = distinct / n_km
    return d_m, c_m, d_m * math.log1p(c_m)


@dataclass(frozen=True)
class ScoreFunction:
    """One member of the f(d) * g(c) family, f and g drawn from
    identity, sin, and ln(x+1). All three components are nondecreasing
    and concave on [0, 1]."""

    f_kind: str = "identity"
    g_kind: str = "ln1p"

    def __post_init__(self):
        for kind in (self.f_kind, self.g_kind):
            if kind not in FUNC_KINDS:
                raise DataError(f"unknown function kind {kind!r}")

    @property
    def name(self) -> str:
        parts = {"identity": "{v}", "sin": "sin({v})", "ln1p": "ln({v}+1)"}
        f = parts[self.f_kind].format(v="d")
        g = parts[self.g_kind].format(v="c")
        return f"{f}*{g}"


def _eval_component(kind: str, x: float) -> float:
    if kind == "identity":
        return x
    if kind == "sin":
        return math.sin(x)
    return math.log1p(x)


def eval_score_function(sf: ScoreFunction, d: float, c: float) -> float:
    """f(d) * g(c). d is passed raw even when > 1 (overlap semantics)."""
    return _eval_component(sf.f_kind, d) * _eval_component(sf.g_kind, c)


def all_score_functions() -> list[ScoreFunction]:
    """The 9 candidate scorers, in deterministic f-major order."""
    return [ScoreFunction(f, g) for f in FUNC_KINDS for g in FUNC_KINDS]


@dataclass
class ScoreRecord:
    """Persisted per-document score row.

    domains maps each domain name to its counts and score:
    {"n": occurrences, "distinct": distinct surfaces, "d": density,
    "c": coverage, "score": composite}. meta is an optional passthrough
    of the source document's metadata (used for grouping in analysis).
    """

    doc_id: str
    n_p: int
    n_k: int
    n_distinct: int
    d: float
    c: float
    hks: float
    domains: dict[str, dict] = field(default_factory=dict)
    meta: dict | None = None

    def score(self, score_field: str) -> float:
        """The score column named by `score_field`: one of d, c, hks,
        or a domain name (that domain's composite score)."""
        if score_field == "hks":
            return self.hks
        if score_field == "d":
            return self.d
        if score_field == "c":
            return self.c
        if score_field in self.domains:
            return self.domains[score_field]["score"]
        available = ["hks", "d", "c", *sorted(self.domains)]
        raise DataError(
            f"record {self.doc_id!r} has no score field {score_field!r}; "
            f"available: {', '.join(available)}"
        )

    def to_json(self) -> str:
        obj = {
            "id": self.doc_id,
            "n_p": self.n_p,
            "n_k": self.n_k,
            "n_distinct": self.n_distinct,
            "d": self.d,
            "c": self.c,
            "hks": self.hks,
        }
        if self.domains:
            obj["domains"] = self.domains
        if self.meta is not None:
            obj["meta"] = self.meta
        return json.dumps(obj, sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "ScoreRecord":
        obj = json.loads(line)
        try:
            return cls(
                doc_id=obj["id"],
                n_p=obj["n_p"],
                n_k=obj["n_k"],
                n_distinct=obj["n_distinct"],
                d=obj["d"],
                c=obj["c"],
                hks=obj["hks"],
                domains=obj.get("domains", {}),
                meta=obj.get("meta"),
            )
        except KeyError as exc:
            raise DataError(f"score record missing key {exc}") from exc


def score_record(profile: KnowledgeProfile, pool: KnowledgePool,
                 with_domains: bool = True,
                 meta: dict | None = None) -> ScoreRecord:
    """Assemble the persisted record for one profiled document.

    Domains with an empty sub-pool get a zero score (nothing can match
    there); the strict single-domain entry point for callers who want
    the error is domain_score().
    """
    d = density(profile)
    c = coverage(profile, pool)
    score = hks_score(d, c)
    if d > 1:
        log.debug("document %s has density %.3f > 1 (overlapping matches)",
                  profile.doc_id, d)
    domains: dict[str, dict] = {}
    if with_domains:
        totals = pool.per_domain_total
        for m in DOMAINS:
            occ, distinct = profile.per_domain.get(m, (0, 0))
            n_km = totals.get(m, 0)
            if n_km > 0:
                d_m = occ / profile.n_p
                c_m = distinct / n_km
                s_m = d_m * math.log1p(c_m)
            else:
                d_m, c_m, s_m = 0.0, 0.0, 0.0
            domains[m] = {"n": occ, "distinct": distinct,
                          "d": d_m, "c": c_m, "score": s_m}
    return ScoreRecord(
        doc_id=profile.doc_id,
        n_p=profile.n_p,
        n_k=profile.n_k,
        n_distinct=profile.n_distinct,
        d=d, c=c, hks=score,
        domains=domains,
        meta=meta,
    )
