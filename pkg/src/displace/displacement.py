"""Citer classification, D-index variants and the displacement/burden decomposition.

For a focal paper ``f`` with references ``R``, every other paper ``p`` in the
citation window falls into at most one class:

* type i: cites ``f`` and none of ``R``
* type j: cites ``f`` and at least one of ``R``
* type k: cites at least one of ``R`` but not ``f``

All focal papers of a sweep are classified together with sparse products.
With ``A`` the ``citing x cited`` adjacency and ``B`` the rows of ``A`` for
the focal papers, ``(A @ B.T)[p, c]`` is the number of references of focal
``c`` that ``p`` cites and ``A[p, f_c]`` says whether ``p`` cites the focal.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .corpus import CitationGraph, CorpusFilter
from .errors import IneligibleFocalError, UndefinedMetricError

logger = logging.getLogger(__name__)

VARIANTS = ("D0", "D1", "D2", "D3", "D4")

DEFAULT_POPULAR_THRESHOLD = 24


@dataclass(frozen=True)
class CitationTriple:
    n_i: int
    n_j: int
    n_k: int
    w_j: int = 0

    def __post_init__(self):
        if min(self.n_i, self.n_j, self.n_k, self.w_j) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def c_f(self) -> int:
        return self.n_i + self.n_j


@dataclass(frozen=True)
class VariantConfig:
    """How citers are counted.

    ``popular_threshold`` is the citation floor for a reference to count
    under D2; setting ``popular_quantile`` (e.g. 0.75 for the top quartile)
    derives the floor from the corpus instead. ``time_filter`` drops citers
    published before the focal paper. ``lifetime_cmax`` counts every
    citation of the top reference; when false only citations from the
    focal paper's year onward are counted.
    """

    variant: str = "D0"
    popular_threshold: int | None = DEFAULT_POPULAR_THRESHOLD
    popular_quantile: float | None = None
    time_filter: bool = True
    lifetime_cmax: bool = True

    def __post_init__(self):
        v = self.variant.upper()
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "variant", v)
        if self.popular_threshold is not None and self.popular_threshold < 0:
            raise ValueError("popular_threshold must be >= 0")
        if self.popular_quantile is not None and not 0.0 <= self.popular_quantile <= 1.0:
            raise ValueError("popular_quantile must lie in [0, 1]")
        if self.popular_threshold is None and self.popular_quantile is None:
            raise ValueError("set popular_threshold or popular_quantile")


@dataclass(frozen=True)
class DisplacementReport:
    """Metric bundle for one focal paper.

    ``triple`` is the D0 classification. ``d1`` is ``None`` when every
    citer is a self-citation.
    """

    focal: int
    year: int
    triple: CitationTriple
    d0: float
    d1: float | None
    d2: float
    d3: float
    d4: float
    d_f: float
    r_k: float
    c_f: int
    c_max: int
    b_f: float
    top_reference: int
    n_references: int
    triple_d1: CitationTriple | None = None
    triple_d2: CitationTriple | None = None
    warnings: tuple[str, ...] = ()

    def value(self, variant: str) -> float | None:
        return getattr(self, variant.lower())

    def to_dict(self, ids=None) -> dict:
        """Flat mapping used for JSONL output; ``ids`` maps internal ids to external ones."""
        t = self.triple
        return {
            "focal": ids[self.focal] if ids is not None else self.focal,
            "year": self.year,
            "n_i": t.n_i,
            "n_j": t.n_j,
            "n_k": t.n_k,
            "w_j": t.w_j,
            "d0": self.d0,
            "d1": self.d1,
            "d2": self.d2,
            "d3": self.d3,
            "d4": self.d4,
            "d_f": self.d_f,
            "r_k": self.r_k,
            "c_f": self.c_f,
            "c_max": self.c_max,
            "b_f": self.b_f,
            "top_reference": ids[self.top_reference] if ids is not None else self.top_reference,
            "n_references": self.n_references,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: Mapping, index=None) -> "DisplacementReport":
        """Inverse of :meth:`to_dict`; ``index`` maps external ids back to internal ones."""
        conv = index if index is not None else (lambda x: int(x))

        def opt(key):
            # single-variant report files omit the other variants
            v = d.get(key)
            return None if v is None else float(v)

        return cls(
            focal=conv(d["focal"]),
            year=int(d["year"]),
            triple=CitationTriple(int(d["n_i"]), int(d["n_j"]), int(d["n_k"]), int(d["w_j"])),
            d0=opt("d0"),
            d1=opt("d1"),
            d2=opt("d2"),
            d3=opt("d3"),
            d4=opt("d4"),
            d_f=float(d["d_f"]),
            r_k=float(d["r_k"]),
            c_f=int(d["c_f"]),
            c_max=int(d["c_max"]),
            b_f=float(d["b_f"]),
            top_reference=conv(d["top_reference"]),
            n_references=int(d.get("n_references", 0)),
            warnings=tuple(d.get("warnings", ())),
        )


# -- scalar formulas --------------------------------------------------------


def d_index(triple: CitationTriple, variant: str = "D0") -> float:
    """Value of a D-index variant for an already-classified triple.

    D0, D1 and D2 share ``(n_i - n_j) / (n_i + n_j + n_k)``; they differ only
    in how the triple was classified. D3 is ``n_i / (n_i + n_j)`` and D4 is
    ``n_i / (n_i + w_j)``.
    """
    v = variant.upper()
    if v in ("D0", "D1", "D2"):
        den = triple.n_i + triple.n_j + triple.n_k
        num = triple.n_i - triple.n_j
    elif v == "D3":
        den = triple.n_i + triple.n_j
        num = triple.n_i
    elif v == "D4":
        den = triple.n_i + triple.w_j
        num = triple.n_i
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if den == 0:
        raise UndefinedMetricError(f"{v} undefined for {triple}: zero denominator")
    return num / den


def approx_d(d_f: float, b_f: float) -> float:
    """Displacement index predicted from local displacement and burden: ``d_f / (1 + b_f)``."""
    if b_f < 0:
        raise ValueError("b_f must be >= 0")
    return d_f / (1.0 + b_f)


def popular_threshold(graph: CitationGraph, config: VariantConfig) -> int:
    """Citation floor for popular references under ``config``."""
    if config.popular_quantile is None:
        return int(config.popular_threshold)
    counts = graph.citation_counts[graph.citation_counts > 0]
    if len(counts) == 0:
        return 0
    return int(math.ceil(np.quantile(counts, config.popular_quantile)))


# -- vectorised sweep -------------------------------------------------------


def _gather(offsets: np.ndarray, values: np.ndarray, nodes: np.ndarray):
    """Concatenate CSR slices for ``nodes``; returns (values, position-in-nodes)."""
    starts = offsets[nodes]
    lengths = offsets[nodes + 1] - starts
    total = int(lengths.sum())
    owner = np.repeat(np.arange(len(nodes), dtype=np.int64), lengths)
    if total == 0:
        return values[:0].astype(np.int64), owner
    shift = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    idx = np.arange(total, dtype=np.int64) + shift
    return values[idx].astype(np.int64), owner


def _classify(graph, focals, ref_matrix, citer_rows, citer_cols, big, time_filter, excluded_keys=None):
    """Per-focal (n_i, n_j, n_k, w_j) arrays for one reference selection.

    ``big`` must exceed every focal's reference count: it tags the
    "cites the focal" bit above the reference multiplicity.
    """
    n, m = graph.n_papers, len(focals)
    mult = (graph.adjacency @ ref_matrix.T).tocoo()
    rows = np.concatenate((citer_rows, mult.row.astype(np.int64)))
    cols = np.concatenate((citer_cols, mult.col.astype(np.int64)))
    vals = np.concatenate((np.full(len(citer_rows), big, dtype=np.int64), mult.data.astype(np.int64)))
    merged = sp.coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()
    merged.sum_duplicates()
    merged = merged.tocoo()
    p, c, v = merged.row.astype(np.int64), merged.col.astype(np.int64), merged.data
    keep = p != focals[c]
    if time_filter:
        keep &= graph.years[p] >= graph.years[focals[c]]
    if excluded_keys is not None and len(excluded_keys):
        keep &= ~np.isin(p * m + c, excluded_keys)
    c, v = c[keep], v[keep]
    cites_focal = v >= big
    refs_cited = v % big
    j = cites_focal & (refs_cited > 0)
    n_i = np.bincount(c[cites_focal & ~j], minlength=m)
    n_j = np.bincount(c[j], minlength=m)
    n_k = np.bincount(c[~cites_focal & (refs_cited > 0)], minlength=m)
    w_j = np.bincount(c[j], weights=refs_cited[j], minlength=m).astype(np.int64)
    return n_i, n_j, n_k, w_j


def _self_citation_keys(graph, focals):
    """Linear keys ``p * m + c`` of (paper, focal) pairs sharing an author."""
    m = len(focals)
    U = graph.author_matrix
    shared = (U @ U[focals].T).tocoo()
    return np.unique(shared.row.astype(np.int64) * m + shared.col.astype(np.int64))


@dataclass
class SweepStats:
    """Counters filled in by :func:`batch_reports`."""

    considered: int = 0
    reported: int = 0
    skipped: int = 0
    popular_threshold: int | None = None


def _sweep(graph: CitationGraph, focals: np.ndarray, config: VariantConfig, threshold: int):
    """Reports for ``focals`` (internal ids); ineligible entries come back as ``None``."""
    focals = np.asarray(focals, dtype=np.int64)
    m = len(focals)
    if m == 0:
        return []
    n = graph.n_papers
    A = graph.adjacency
    ref_matrix = A[focals]
    citer_rows, citer_cols = _gather(graph.in_offsets, graph.in_sources, focals)
    n_refs = graph.reference_counts[focals]
    big = int(n_refs.max()) + 1

    base = _classify(graph, focals, ref_matrix, citer_rows, citer_cols, big, config.time_filter)

    popular = graph.citation_counts >= threshold
    pop_matrix = ref_matrix @ sp.diags(popular.astype(np.int64), shape=(n, n))
    pop_matrix.eliminate_zeros()
    pop = _classify(graph, focals, pop_matrix, citer_rows, citer_cols, big, config.time_filter)

    has_authors = graph.has_authors[focals]
    if has_authors.any():
        keys = _self_citation_keys(graph, focals)
        selfx = _classify(graph, focals, ref_matrix, citer_rows, citer_cols, big, config.time_filter, keys)
    else:
        selfx = base

    refs, owner = _gather(graph.out_offsets, graph.out_targets, focals)
    top = np.full(m, -1, dtype=np.int64)
    if len(refs):
        # ranks are unique, so exactly one reference per focal attains the minimum
        rank = graph.citation_rank[refs]
        best = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, owner, rank)
        hit = rank == best[owner]
        top[owner[hit]] = refs[hit]

    out = []
    years = graph.years
    for c in range(m):
        f = int(focals[c])
        t0 = CitationTriple(int(base[0][c]), int(base[1][c]), int(base[2][c]), int(base[3][c]))
        if n_refs[c] == 0 or t0.c_f == 0:
            out.append(None)
            continue
        warnings = []
        t2 = CitationTriple(int(pop[0][c]), int(pop[1][c]), int(pop[2][c]), int(pop[3][c]))
        if has_authors[c]:
            t1 = CitationTriple(int(selfx[0][c]), int(selfx[1][c]), int(selfx[2][c]), int(selfx[3][c]))
        else:
            t1 = t0
            warnings.append("no_author_data_d1_equals_d0")
        try:
            d1 = d_index(t1, "D1")
        except UndefinedMetricError:
            d1 = None
            warnings.append("d1_undefined_all_citers_self")
        top_ref = int(top[c])
        if config.lifetime_cmax:
            c_max = int(graph.citation_counts[top_ref])
        else:
            c_max = int(np.count_nonzero(years[graph.citers(top_ref)] >= years[f]))
        c_f = t0.c_f
        out.append(
            DisplacementReport(
                focal=f,
                year=int(years[f]),
                triple=t0,
                d0=d_index(t0, "D0"),
                d1=d1,
                d2=d_index(t2, "D2"),
                d3=d_index(t0, "D3"),
                d4=d_index(t0, "D4"),
                d_f=(t0.n_i - t0.n_j) / c_f,
                r_k=t0.n_k / c_f,
                c_f=c_f,
                c_max=c_max,
                b_f=c_max / c_f,
                top_reference=top_ref,
                n_references=int(n_refs[c]),
                triple_d1=t1,
                triple_d2=t2,
                warnings=tuple(warnings),
            )
        )
    return out


def _check_focal(graph: CitationGraph, focal: int) -> int:
    focal = int(focal)
    if not 0 <= focal < graph.n_papers:
        raise IndexError(f"focal {focal} out of range")
    return focal


def decompose(graph: CitationGraph, focal: int, config: VariantConfig | None = None) -> DisplacementReport:
    """Full report for one focal paper (internal id).

    Raises :class:`IneligibleFocalError` when the paper has no references or
    no citers inside the citation window.
    """
    config = config or VariantConfig()
    focal = _check_focal(graph, focal)
    (report,) = _sweep(graph, np.array([focal]), config, popular_threshold(graph, config))
    if report is None:
        reason = "no eligible citers" if graph.reference_counts[focal] else "no references"
        raise IneligibleFocalError(f"paper {graph.ids[focal]!r} is ineligible: {reason}")
    return report


def classify_citers(graph: CitationGraph, focal: int, config: VariantConfig | None = None) -> CitationTriple:
    """Type i/j/k counts of one focal paper under ``config.variant``.

    D1 drops citers sharing an author string with the focal paper, D2 keeps
    only references with at least the popular-threshold citations; the other
    variants use the plain classification.
    """
    config = config or VariantConfig()
    report = decompose(graph, focal, config)
    if config.variant == "D1":
        return report.triple_d1
    if config.variant == "D2":
        return report.triple_d2
    return report.triple


def batch_reports(
    graph: CitationGraph,
    config: VariantConfig | None = None,
    parallelism: int = 1,
    filter: CorpusFilter | None = None,
    chunk_size: int = 2048,
    stats: SweepStats | None = None,
) -> Iterator[DisplacementReport]:
    """Reports for every eligible paper, in ascending internal id.

    Papers failing ``filter`` thresholds or lacking references/citers are
    skipped and counted in ``stats``. Output order and content do not
    depend on ``parallelism`` or ``chunk_size``.
    """
    config = config or VariantConfig()
    filter = filter or CorpusFilter()
    stats = stats if stats is not None else SweepStats()
    threshold = popular_threshold(graph, config)
    stats.popular_threshold = threshold
    candidates = np.flatnonzero(filter.focal_mask(graph)) if graph.n_papers else np.array([], dtype=np.int64)
    stats.considered = graph.n_papers
    chunks = [candidates[i : i + chunk_size] for i in range(0, len(candidates), chunk_size)]

    def run(chunk):
        return _sweep(graph, chunk, config, threshold)

    if parallelism > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = pool.map(run, chunks)
            for batch in results:
                yield from _emit(batch, stats)
    else:
        for chunk in chunks:
            yield from _emit(run(chunk), stats)
    stats.skipped = stats.considered - stats.reported


def _emit(batch, stats):
    for r in batch:
        if r is not None:
            stats.reported += 1
            yield r


def displacing_fraction_by_year(
    reports: Iterable[DisplacementReport], weighting: str = "unweighted", variant: str = "D0"
) -> dict[int, float]:
    """Share of papers per publication year with a positive D-index.

    ``citation-weighted`` weights each paper by its citation count ``c_f``.
    Years without papers are absent from the result.
    """
    if weighting not in ("unweighted", "citation-weighted"):
        raise ValueError(f"unknown weighting {weighting!r}")
    num: dict[int, float] = {}
    den: dict[int, float] = {}
    for r in reports:
        v = r.value(variant)
        if v is None:
            continue
        w = float(r.c_f) if weighting == "citation-weighted" else 1.0
        den[r.year] = den.get(r.year, 0.0) + w
        if v > 0:
            num[r.year] = num.get(r.year, 0.0) + w
    return {y: num.get(y, 0.0) / den[y] for y in sorted(den) if den[y] > 0}
