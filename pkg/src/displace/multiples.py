"""Multiple-discovery pools: high-impact, displacing papers that share an anchor.

The anchor of a focal paper is its most-cited reference. Qualifying papers
are grouped by anchor; each group with enough members is a pool.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .corpus import CitationGraph
from .displacement import VARIANTS, DisplacementReport


@dataclass(frozen=True)
class PoolCriteria:
    min_citations: int = 100
    min_d: float = 0.2
    variant: str = "D0"
    min_pool_size: int = 2

    def __post_init__(self):
        if self.min_citations < 0:
            raise ValueError("min_citations must be >= 0")
        if not -1.0 <= self.min_d <= 1.0:
            raise ValueError("min_d must lie in [-1, 1]")
        if self.min_pool_size < 1:
            raise ValueError("min_pool_size must be >= 1")
        if self.variant.upper() not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def admits(self, report: DisplacementReport) -> bool:
        value = report.value(self.variant)
        return report.c_f >= self.min_citations and value is not None and value > self.min_d


@dataclass(frozen=True)
class MultiplePool:
    """Qualifying papers sharing one anchor, identified by external ids.

    ``members`` are sorted by (year, id).
    """

    anchor: str
    members: tuple[str, ...]
    span_years: tuple[int, int]

    @property
    def size(self) -> int:
        return len(self.members)


def qualifying(reports: Iterable[DisplacementReport], criteria: PoolCriteria) -> list[DisplacementReport]:
    return [r for r in reports if criteria.admits(r)]


def find_pools(
    graph: CitationGraph, reports: Iterable[DisplacementReport], criteria: PoolCriteria | None = None
) -> list[MultiplePool]:
    """Partition qualifying papers by anchor and keep the large enough groups.

    Pools come sorted by size (largest first), then by anchor id.

    Raises
    ------
    ValueError
        If a report does not belong to ``graph`` (unknown focal, or a top
        reference the focal paper does not cite).
    """
    criteria = criteria or PoolCriteria()
    groups: dict[int, list[int]] = {}
    seen: set[int] = set()
    for r in reports:
        if not 0 <= r.focal < graph.n_papers or r.top_reference not in graph.references(r.focal):
            raise ValueError(f"report for paper {r.focal} does not match the graph")
        if r.focal in seen:
            raise ValueError(f"duplicate report for paper {graph.ids[r.focal]}")
        seen.add(r.focal)
        if criteria.admits(r):
            groups.setdefault(r.top_reference, []).append(r.focal)
    ids, years = graph.ids, graph.years
    pools = []
    for anchor, members in groups.items():
        if len(members) < criteria.min_pool_size:
            continue
        members.sort(key=lambda m: (int(years[m]), ids[m]))
        pools.append(
            MultiplePool(
                anchor=ids[anchor],
                members=tuple(ids[m] for m in members),
                span_years=(int(years[members[0]]), int(max(years[m] for m in members))),
            )
        )
    pools.sort(key=lambda p: (-p.size, p.anchor))
    return pools


def pool_size_histogram(pools: Iterable[MultiplePool]) -> dict[int, int]:
    """Number of pools per pool size, keyed in ascending size."""
    counts = Counter(p.size for p in pools)
    return dict(sorted(counts.items()))


def pool_sizes(pools: Iterable[MultiplePool]) -> list[int]:
    return [p.size for p in pools]
