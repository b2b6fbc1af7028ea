"""Synthetic corpora with known structure, for tests, demos and calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CitationGraph, PaperRecord


def random_citation_graph(
    rng: np.random.Generator,
    n_papers: int,
    mean_references: float = 4.0,
    year_range: tuple[int, int] = (1990, 2020),
    author_pool: int = 30,
    p_missing_authors: float = 0.3,
    p_backward_only: float = 0.9,
    n_fields: int = 10,
) -> CitationGraph:
    """Random graph with random years, authors and field labels.

    Most citations point to papers that are not newer than the citer; a
    fraction ``1 - p_backward_only`` ignores years so that time filtering has
    something to remove.
    """
    years = rng.integers(year_range[0], year_range[1] + 1, size=n_papers)
    records = []
    for i in range(n_papers):
        if rng.random() < p_missing_authors:
            authors = None
        else:
            k = int(rng.integers(1, 4))
            authors = tuple(f"author{a}" for a in rng.choice(author_pool, size=k, replace=False))
        k_fields = int(rng.integers(0, 4))
        fields = tuple(int(f) for f in rng.choice(n_fields, size=k_fields, replace=False))
        records.append(PaperRecord(id=f"P{i}", year=int(years[i]), fields=fields, authors=authors))
    src, dst = [], []
    for i in range(n_papers):
        k = int(rng.poisson(mean_references))
        if k == 0 or n_papers < 2:
            continue
        if rng.random() < p_backward_only:
            pool = np.flatnonzero((years <= years[i]) & (np.arange(n_papers) != i))
        else:
            pool = np.flatnonzero(np.arange(n_papers) != i)
        if len(pool) == 0:
            continue
        targets = rng.choice(pool, size=min(k, len(pool)), replace=False)
        src.extend([i] * len(targets))
        dst.extend(int(t) for t in targets)
    return CitationGraph.from_arrays(records, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))


def zipf_counts(a: float, b: float, c: float, n_refs: int, rng=None, sigma: float = 0.0) -> np.ndarray:
    """Descending reference counts ``c / (b + r)**a`` with optional log-normal noise."""
    r = np.arange(1, n_refs + 1, dtype=np.float64)
    counts = c / (b + r) ** a
    if sigma:
        counts = counts * np.exp(sigma * rng.standard_normal(n_refs))
    return np.sort(counts)[::-1]


@dataclass(frozen=True)
class PlantedCorpus:
    """Synthetic corpus together with the pools planted in it.

    ``pools`` maps each anchor id to the ids of the papers planted around it.
    """

    graph: CitationGraph
    pools: dict[str, tuple[str, ...]]
    min_citations: int

    @property
    def histogram(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for members in self.pools.values():
            counts[len(members)] = counts.get(len(members), 0) + 1
        return dict(sorted(counts.items()))


def planted_pool_corpus(
    rng: np.random.Generator,
    n_papers: int = 10_000,
    n_pools: int = 400,
    alpha: float = 2.5,
    min_size: int = 2,
    max_size: int = 60,
    citers_per_member: int = 20,
    members_per_citer: int = 8,
    anchor_background_citations: int = 30,
) -> PlantedCorpus:
    """Corpus with pools of displacing papers around shared anchors.

    Pool sizes are discrete power-law draws (``x >= min_size``) capped at
    ``max_size``. Layout by era:

    * 1950: one anchor per pool, no references;
    * 1950-1975: background papers citing recent background papers and
      anchors (so each anchor out-cites every other reference of its pool);
    * 1980-2000: pool members, each citing its anchor and up to two
      background papers;
    * 2005-2020: citers, each citing several members but never an anchor.

    Every member is cited by ``citers_per_member`` papers that ignore its
    references, while its only type-k competitors are the other members of
    its pool. A member's D-index is then ``n / (n + k)`` with ``k`` at most
    ``max_size - 1``, which exceeds 0.2 whenever ``n > (max_size - 1) / 4``.
    The remaining papers form the background; they collect far fewer than
    ``citers_per_member`` citations, so no background paper qualifies.
    """
    from .distfit import sample_discrete_powerlaw

    sizes = np.minimum(sample_discrete_powerlaw(alpha, min_size, n_pools, rng), max_size)
    n_members = int(sizes.sum())
    n_citers = -(-n_members * citers_per_member // members_per_citer)
    n_background = n_papers - n_pools - n_members - n_citers
    if n_background < 300:
        raise ValueError(f"n_papers too small for {n_pools} pools of total size {n_members}")

    anchors = np.arange(n_pools)
    members = np.arange(n_pools, n_pools + n_members)
    citers = np.arange(members[-1] + 1, members[-1] + 1 + n_citers)
    background = np.arange(citers[-1] + 1, n_papers)

    years = np.empty(n_papers, dtype=np.int64)
    years[anchors] = 1950
    years[background] = np.sort(rng.integers(1950, 1976, size=len(background)))
    years[members] = rng.integers(1980, 2001, size=n_members)
    years[citers] = rng.integers(2005, 2021, size=n_citers)

    owner = np.repeat(anchors, sizes)
    src: list[np.ndarray] = []
    dst: list[np.ndarray] = []

    def add(a, b):
        src.append(np.asarray(a, dtype=np.int64))
        dst.append(np.asarray(b, dtype=np.int64))

    # background: a few references to recent background papers; the sliding
    # window keeps in-degrees near the mean instead of piling onto early papers
    for pos in range(300, len(background)):
        p, window = background[pos], background[pos - 300 : pos]
        k = int(rng.poisson(4))
        if k:
            add(np.full(k, p), rng.choice(window, size=k, replace=False))
    # background citations to anchors
    for a in anchors:
        add(rng.choice(background, size=anchor_background_citations, replace=False), np.full(anchor_background_citations, a))
    # members cite their anchor and up to two background papers no other
    # member cites, so their only type-k competitors are pool siblings
    add(members, owner)
    n_extra = rng.integers(0, 3, size=n_members)
    extra = rng.choice(background, size=int(n_extra.sum()), replace=False)
    add(np.repeat(members, n_extra), extra)
    # each member is cited by citers_per_member distinct citers
    for m in members:
        add(rng.choice(citers, size=citers_per_member, replace=False), np.full(citers_per_member, m))

    records = [PaperRecord(id=f"W{i}", year=int(years[i])) for i in range(n_papers)]
    graph = CitationGraph.from_arrays(records, np.concatenate(src), np.concatenate(dst))
    pools = {
        f"W{a}": tuple(f"W{m}" for m in members[owner == a]) for a in anchors
    }
    return PlantedCorpus(graph=graph, pools=pools, min_citations=citers_per_member)


def approximation_family(
    rng: np.random.Generator,
    n_refs: int,
    b_f: float,
    d_f: float = 0.01,
    c_f: int = 200,
    a: float = 2.0,
    b: float = 1.4,
    sigma: float = 0.1,
    nesting: float = 0.9,
) -> CitationGraph:
    """One focal paper (index 0) with prescribed ``d_f`` and ``b_f``.

    The focal paper has ``n_refs`` references whose citation counts follow a
    noisy rank curve ``c / (b + r)**a`` scaled so the most-cited reference
    has exactly ``b_f * c_f`` citations. Its ``c_f`` citers split into
    ``N_i`` focal-only citers and ``N_j`` citers that also cite the top
    reference, with ``(N_i - N_j) / c_f = d_f``.

    Each citation to a lesser reference comes, with probability ``nesting``,
    from a paper that already cites the top reference, and otherwise from a
    fresh paper. ``nesting`` therefore sets how far the type-k count exceeds
    the top reference's own citers.
    """
    n_i = int(round(c_f * (1 + d_f) / 2))
    n_j = c_f - n_i
    c_max = int(round(b_f * c_f))
    if not np.isclose((n_i - n_j) / c_f, d_f):
        raise ValueError(f"c_f={c_f} cannot realise d_f={d_f} exactly")
    if c_max <= n_j or n_refs < 1:
        raise ValueError("need b_f * c_f > N_j and at least one reference")

    counts = zipf_counts(a, b, 1.0, n_refs, rng, sigma)
    counts = np.clip(np.rint(counts / counts[0] * c_max), 1, c_max).astype(np.int64)
    counts[0] = c_max

    # 0 focal, 1..n_refs references, then type-j, type-i and top-only citers
    refs = np.arange(1, n_refs + 1)
    j_citers = np.arange(n_refs + 1, n_refs + 1 + n_j)
    i_citers = np.arange(j_citers[-1] + 1 if n_j else n_refs + 1, n_refs + 1 + n_j + n_i)
    # the focal paper's own citation counts towards every reference
    top_only = np.arange(n_refs + 1 + c_f, n_refs + 1 + c_f + c_max - n_j - 1)
    top_citers = np.concatenate([j_citers, top_only])
    nxt = int(top_only[-1] + 1 if len(top_only) else n_refs + 1 + c_f)

    src = [np.zeros(n_refs, dtype=np.int64), j_citers, i_citers, top_citers]
    dst = [refs, np.zeros(n_j, dtype=np.int64), np.zeros(n_i, dtype=np.int64), np.full(len(top_citers), 1)]
    for r in range(1, n_refs):
        k = int(counts[r]) - 1
        nested = int(rng.binomial(k, nesting))
        fresh = np.arange(nxt, nxt + k - nested)
        nxt += k - nested
        src.append(np.concatenate([rng.choice(top_citers, size=nested, replace=False), fresh]))
        dst.append(np.full(k, r + 1))

    years = np.full(nxt, 2010)
    years[0] = 2000
    years[refs] = 1990
    records = [PaperRecord(id=f"P{i}", year=int(years[i])) for i in range(nxt)]
    return CitationGraph.from_arrays(records, np.concatenate(src), np.concatenate(dst))
