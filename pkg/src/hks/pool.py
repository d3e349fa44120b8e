"""Knowledge-element pool: ingest, normalize, filter, deduplicate, index.

Pool files are UTF-8 TSV, one element per line::

    surface<TAB>domain[<TAB>source]

Surfaces are normalized (NFC, casefold, whitespace collapse) before the
length filter and dedup, so the stored pool is already in matchable form.
Surfaces shorter than 2 characters are dropped. The first occurrence of a
surface wins; later duplicates are counted, and duplicates that disagree
on the domain are additionally counted as conflicts.
"""

from __future__ import annotations

import functools
import gzip
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import DataError, EmptyPoolError, ResourceError
from .textnorm import normalize

log = logging.getLogger(__name__)

DOMAINS = ("science", "society", "culture", "art", "life")
SOURCES = ("title_keyword", "model_extracted", "unknown")

_DOMAIN_ID = {name: i for i, name in enumerate(DOMAINS)}
_SOURCE_ID = {name: i for i, name in enumerate(SOURCES)}

MIN_SURFACE_CHARS = 2


@dataclass(frozen=True)
class KnowledgeElement:
    """A normalized n-gram term with its domain and provenance tag."""

    surface: str
    domain: str
    source: str = "unknown"


@dataclass
class PoolOptions:
    strict: bool = False
    min_length: int = MIN_SURFACE_CHARS


@dataclass
class PoolLoadReport:
    """Per-load diagnostics; nothing is silently dropped."""

    read: int = 0
    kept: int = 0
    dropped_short: int = 0
    dropped_duplicate: int = 0
    domain_conflicts: int = 0
    unknown_domain: int = 0
    malformed: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))


class KnowledgePool:
    """Deduplicated element set with per-domain totals.

    Stored column-wise (surface list + uint8 domain/source arrays) so a
    5M-element pool stays within a couple of GB. Immutable once loaded;
    safe for concurrent readers.
    """

    def __init__(self, surfaces: list[str], domain_ids: np.ndarray,
                 source_ids: np.ndarray, report: PoolLoadReport | None = None):
        self.surfaces = surfaces
        self.domain_ids = domain_ids
        self.source_ids = source_ids
        self.report = report

    @classmethod
    def from_elements(cls, elements: Iterable[KnowledgeElement]) -> "KnowledgePool":
        """Build from already-normalized elements (no filtering applied)."""
        surfaces: list[str] = []
        domains: list[int] = []
        sources: list[int] = []
        for el in elements:
            surfaces.append(el.surface)
            domains.append(_DOMAIN_ID[el.domain])
            sources.append(_SOURCE_ID[el.source])
        return cls(surfaces, np.asarray(domains, dtype=np.uint8),
                   np.asarray(sources, dtype=np.uint8))

    @property
    def total(self) -> int:
        """N_k: number of distinct elements in the pool."""
        return len(self.surfaces)

    @functools.cached_property
    def per_domain_total(self) -> dict[str, int]:
        """N_km for every domain, zero included. Cached; the id arrays
        never change after construction."""
        counts = np.bincount(self.domain_ids, minlength=len(DOMAINS))
        return {name: int(counts[i]) for i, name in enumerate(DOMAINS)}

    def domain_total(self, domain: str) -> int:
        if domain not in _DOMAIN_ID:
            raise DataError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
        return int((self.domain_ids == _DOMAIN_ID[domain]).sum())

    def __len__(self) -> int:
        return len(self.surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index()

    def _index(self) -> dict[str, int]:
        # Built lazily: only dedup-by-construction paths need it.
        idx = getattr(self, "_surface_index", None)
        if idx is None:
            idx = {s: i for i, s in enumerate(self.surfaces)}
            self._surface_index = idx
        return idx

    def elements(self) -> Iterator[KnowledgeElement]:
        for i, surface in enumerate(self.surfaces):
            yield KnowledgeElement(surface, DOMAINS[self.domain_ids[i]],
                                   SOURCES[self.source_ids[i]])

    def restrict(self, domain: str) -> "KnowledgePool":
        """View containing exactly the elements of `domain`.

        The view's total equals N_km of the parent. An empty view is
        legal; scoring against it errors downstream.
        """
        if domain not in _DOMAIN_ID:
            raise DataError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
        mask = self.domain_ids == _DOMAIN_ID[domain]
        keep = np.flatnonzero(mask)
        surfaces = [self.surfaces[i] for i in keep]
        return KnowledgePool(surfaces, self.domain_ids[keep], self.source_ids[keep])


def _open_text(source: str | Path | TextIO) -> TextIO:
    if hasattr(source, "read"):
        return source  # caller-managed stream
    path = Path(source)
    try:
        if path.suffix == ".gz":
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ResourceError(f"cannot read pool file {path}: {exc}") from exc


def load_pool(source: str | Path | TextIO,
              options: PoolOptions | None = None) -> KnowledgePool:
    """Load a TSV element stream into a deduplicated pool.

    Lenient mode (default) counts and logs malformed or unknown-domain
    records and keeps going; strict mode raises on the first one. A pool
    with zero surviving elements is an error either way.
    """
    options = options or PoolOptions()
    report = PoolLoadReport()
    surfaces: list[str] = []
    domains: list[int] = []
    sources: list[int] = []
    index: dict[str, int] = {}

    stream = _open_text(source)
    close = stream is not source
    try:
        for lineno, line in enumerate(stream, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            report.read += 1
            parts = line.split("\t")
            if len(parts) < 2:
                report.malformed += 1
                msg = f"pool line {lineno}: expected surface<TAB>domain, got {line!r}"
                if options.strict:
                    raise DataError(msg)
                log.warning(msg)
                continue
            raw_surface, domain = parts[0], parts[1].strip()
            source_tag = parts[2].strip() if len(parts) > 2 and parts[2].strip() else "unknown"
            if domain not in _DOMAIN_ID:
                report.unknown_domain += 1
                msg = f"pool line {lineno}: unknown domain {domain!r}"
                if options.strict:
                    raise DataError(msg)
                log.warning(msg)
                continue
            if source_tag not in _SOURCE_ID:
                source_tag = "unknown"
            surface = normalize(raw_surface)
            if len(surface) < options.min_length:
                report.dropped_short += 1
                continue
            prev = index.get(surface)
            if prev is not None:
                report.dropped_duplicate += 1
                if domains[prev] != _DOMAIN_ID[domain]:
                    report.domain_conflicts += 1
                continue
            index[surface] = len(surfaces)
            surfaces.append(surface)
            domains.append(_DOMAIN_ID[domain])
            sources.append(_SOURCE_ID[source_tag])
    finally:
        if close:
            stream.close()

    report.kept = len(surfaces)
    if not surfaces:
        raise EmptyPoolError("no elements survived filtering; pool is empty")
    if report.dropped_short or report.dropped_duplicate or report.unknown_domain or report.malformed:
        log.info(
            "pool load: kept %d of %d (short=%d dup=%d conflicts=%d "
            "unknown_domain=%d malformed=%d)",
            report.kept, report.read, report.dropped_short,
            report.dropped_duplicate, report.domain_conflicts,
            report.unknown_domain, report.malformed,
        )
    pool = KnowledgePool(surfaces, np.asarray(domains, dtype=np.uint8),
                         np.asarray(sources, dtype=np.uint8), report=report)
    pool._surface_index = index
    return pool


def dump_pool(pool: KnowledgePool, dest: str | Path | TextIO) -> None:
    """Write the pool back out as TSV in insertion (first-seen) order."""
    own = not hasattr(dest, "write")
    out = open(dest, "w", encoding="utf-8") if own else dest
    try:
        for el in pool.elements():
            out.write(f"{el.surface}\t{el.domain}\t{el.source}\n")
    finally:
        if own:
            out.close()


@dataclass
class PoolStats:
    total: int
    per_domain: dict[str, int]
    per_source: dict[str, int]
    length_histogram: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "total": self.total,
            "per_domain": self.per_domain,
            "per_source": self.per_source,
            "length_histogram": {str(k): v for k, v in sorted(self.length_histogram.items())},
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def pool_stats(pool: KnowledgePool) -> PoolStats:
    """Per-domain counts and a surface-length histogram.

    Domain keys are emitted in alphabetical order so output is stable.
    """
    lengths: dict[int, int] = {}
    for surface in pool.surfaces:
        n = len(surface)
        lengths[n] = lengths.get(n, 0) + 1
    src_counts = np.bincount(pool.source_ids, minlength=len(SOURCES))
    return PoolStats(
        total=pool.total,
        per_domain={d: pool.per_domain_total[d] for d in sorted(DOMAINS)},
        per_source={s: int(src_counts[_SOURCE_ID[s]]) for s in sorted(SOURCES)},
        length_histogram=lengths,
    )
