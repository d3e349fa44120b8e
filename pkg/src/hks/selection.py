"""Selection strategies over scored records.

Three ways to carve a training subset out of a scored corpus: plain
top-k by score under a token or document budget, Gumbel top-k softmax
sampling without replacement, and high/low threshold mixtures at a
requested high-knowledge fraction alpha.

Determinism contract: every strategy is a pure function of (records,
spec). Randomness comes only from a counter-style PRNG keyed by
(seed, doc_id) hashes, so results never depend on input shard order or
worker count.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DataError, StratumExhaustedError
from .metrics import ScoreRecord

log = logging.getLogger(__name__)

STRATEGIES = ("topk", "sample", "mix")


@dataclass(frozen=True)
class SelectionSpec:
    """Knobs for one selection run.

    budget counts tokens (sum of selected n_p) unless by_docs is set.
    tau is the softmax temperature for sampling. normalize min-max
    rescales scores to [0, 1] before the softmax; disable it to divide
    raw scores by tau instead (selection probabilities differ).
    """

    strategy: str = "topk"
    budget: int = 0
    by_docs: bool = False
    tau: float = 2.0
    alpha: float | None = None
    seed: int = 0
    score_field: str = "hks"
    normalize: bool = True
    split_budget: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.tau <= 0:
            raise DataError(f"tau must be > 0, got {self.tau}")
        if self.budget < 0:
            raise DataError(f"budget must be >= 0, got {self.budget}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass
class SelectionResult:
    selected_ids: list[str] = field(default_factory=list)
    total_tokens: int = 0
    threshold: float | None = None
    seed_used: int = 0
    requested_alpha: float | None = None
    realized_alpha: float | None = None

    def summary(self) -> dict:
        return {
            "selected": len(self.selected_ids),
            "total_tokens": self.total_tokens,
            "threshold": self.threshold,
            "seed": self.seed_used,
            "requested_alpha": self.requested_alpha,
            "realized_alpha": self.realized_alpha,
        }


def _hash_uniform(seed: int, *parts: str) -> float:
    """Deterministic uniform in (0, 1) keyed by seed and string parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(seed.to_bytes(8, "big", signed=False))
    for p in parts:
        raw = p.encode("utf-8")
        h.update(len(raw).to_bytes(8, "big"))
        h.update(raw)
    bits = int.from_bytes(h.digest(), "big") >> 11
    return (bits + 0.5) * 2.0**-53


def _gumbel(seed: int, doc_id: str) -> float:
    u = _hash_uniform(seed, doc_id)
    return -math.log(-math.log(u))


def _budget_walk(ordered: Sequence[ScoreRecord], budget: int,
                 by_docs: bool) -> tuple[list[ScoreRecord], int]:
    """Greedy prefix under the budget; the crossing document is kept
    whole rather than truncated."""
    taken: list[ScoreRecord] = []
    tokens = 0
    for rec in ordered:
        used = len(taken) if by_docs else tokens
        if used >= budget:
            break
        taken.append(rec)
        tokens += rec.n_p
    return taken, tokens


def top_k(records: Sequence[ScoreRecord], spec: SelectionSpec) -> SelectionResult:
    """Highest-scoring records under the budget.

    Ordering is (score desc, doc_id asc); the id tie-break makes the
    result independent of input order.
    """
    ordered = sorted(records,
                     key=lambda r: (-r.score(spec.score_field), r.doc_id))
    taken, tokens = _budget_walk(ordered, spec.budget, spec.by_docs)
    if len(taken) == len(records) and records:
        corpus = len(records) if spec.by_docs else tokens
        if spec.budget > corpus:
            log.warning("budget %d exceeds corpus size %d; selecting all",
                        spec.budget, corpus)
    threshold = taken[-1].score(spec.score_field) if taken else None
    return SelectionResult(
        selected_ids=[r.doc_id for r in taken],
        total_tokens=tokens,
        threshold=threshold,
        seed_used=spec.seed,
    )


def gumbel_topk_sample(records: Sequence[ScoreRecord],
                       spec: SelectionSpec) -> SelectionResult:
    """Softmax sampling without replacement via the Gumbel top-k trick.

    Each record gets key = score/tau + G with G standard Gumbel drawn
    from a (seed, doc_id)-keyed hash; taking descending keys until the
    budget realizes Plackett-Luce sampling from softmax(score/tau).
    With normalize on, scores are first min-max rescaled to [0, 1]
    (constant score vectors rescale to all zeros, i.e. uniform).
    """
    scores = [r.score(spec.score_field) for r in records]
    if spec.normalize and scores:
        lo, hi = min(scores), max(scores)
        span = hi - lo
        scores = [(s - lo) / span if span > 0 else 0.0 for s in scores]
    keyed = [
        (scores[i] / spec.tau + _gumbel(spec.seed, r.doc_id), r)
        for i, r in enumerate(records)
    ]
    keyed.sort(key=lambda kr: (-kr[0], kr[1].doc_id))
    ordered = [r for _, r in keyed]
    taken, tokens = _budget_walk(ordered, spec.budget, spec.by_docs)
    threshold = (min(r.score(spec.score_field) for r in taken)
                 if taken else None)
    return SelectionResult(
        selected_ids=[r.doc_id for r in taken],
        total_tokens=tokens,
        threshold=threshold,
        seed_used=spec.seed,
    )


def threshold_split(records: Sequence[ScoreRecord], token_budget: int,
                    score_field: str = "hks",
                    ) -> tuple[list[ScoreRecord], list[ScoreRecord], float | None]:
    """Split the corpus at the score of the lowest record inside the
    top `token_budget` tokens.

    Returns (high, low, threshold) where high holds every record with
    score >= threshold (ties at the threshold all land high) and low is
    the complement; both preserve input order. Budget 0 puts everything
    in low with no threshold.
    """
    records = list(records)
    if token_budget < 0:
        raise DataError(f"token budget must be >= 0, got {token_budget}")
    if not records or token_budget == 0:
        return [], records, None
    total = sum(r.n_p for r in records)
    if token_budget > total:
        log.warning("split budget %d exceeds corpus tokens %d; "
                    "all records are high", token_budget, total)
    spec = SelectionSpec(strategy="topk", budget=token_budget,
                         score_field=score_field)
    prefix = top_k(records, spec)
    threshold = prefix.threshold
    high = [r for r in records if r.score(score_field) >= threshold]
    low = [r for r in records if r.score(score_field) < threshold]
    return high, low, threshold


def _sample_stratum(records: Sequence[ScoreRecord], target: float,
                    label: str, seed: int) -> tuple[list[ScoreRecord], int]:
    """Uniformly ordered greedy draw of about `target` tokens."""
    if target <= 0:
        return [], 0
    ordered = sorted(records,
                     key=lambda r: (_hash_uniform(seed, label, r.doc_id),
                                    r.doc_id))
    taken: list[ScoreRecord] = []
    tokens = 0
    for rec in ordered:
        if tokens >= target:
            break
        taken.append(rec)
        tokens += rec.n_p
    if tokens < target:
        raise StratumExhaustedError(label, int(math.ceil(target)), tokens)
    return taken, tokens


def mix(high: Sequence[ScoreRecord], low: Sequence[ScoreRecord],
        alpha: float, token_budget: int, seed: int,
        score_field: str = "hks") -> SelectionResult:
    """Merge uniform samples of alpha*budget high tokens and
    (1-alpha)*budget low tokens.

    Sampling is by whole document: each stratum is put in a
    (seed, stratum, doc_id)-hashed uniform order and documents are taken
    until the token target is reached, so the realized alpha can differ
    from the request by at most one document per stratum. A stratum too
    small for its target raises a stratum-exhausted error naming it.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DataError(f"alpha must be in [0, 1], got {alpha}")
    if token_budget < 0:
        raise DataError(f"token budget must be >= 0, got {token_budget}")
    high_taken, high_tokens = _sample_stratum(
        high, alpha * token_budget, "high", seed)
    low_taken, low_tokens = _sample_stratum(
        low, (1.0 - alpha) * token_budget, "low", seed)
    total = high_tokens + low_tokens
    realized = high_tokens / total if total > 0 else None
    return SelectionResult(
        selected_ids=[r.doc_id for r in high_taken] +
                     [r.doc_id for r in low_taken],
        total_tokens=total,
        threshold=None,
        seed_used=seed,
        requested_alpha=alpha,
        realized_alpha=realized,
    )


def select(records: Sequence[ScoreRecord], spec: SelectionSpec) -> SelectionResult:
    """Dispatch on spec.strategy; mix needs spec.alpha and
    spec.split_budget (tokens defining the high/low threshold)."""
    if spec.strategy == "topk":
        return top_k(records, spec)
    if spec.strategy == "sample":
        return gumbel_topk_sample(records, spec)
    if spec.alpha is None:
        raise DataError("mix strategy requires alpha")
    if spec.split_budget is None:
        raise DataError("mix strategy requires a split budget "
                        "(tokens defining the high/low threshold)")
    if spec.by_docs:
        raise DataError("mix strategy budgets tokens, not documents")
    high, low, threshold = threshold_split(records, spec.split_budget,
                                           spec.score_field)
    result = mix(high, low, spec.alpha, spec.budget, spec.seed,
                 spec.score_field)
    result.threshold = threshold
    return result
