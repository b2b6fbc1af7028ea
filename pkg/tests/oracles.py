"""Brute-force reference implementations used as test oracles.

Nothing here touches the sparse machinery in ``displace.displacement``: the
oracle walks every paper of the corpus with plain Python sets.
"""

from fractions import Fraction


def graph_to_plain(graph):
    """Dict-of-sets view of a CitationGraph: (years, refs, authors, ids)."""
    years = {i: int(graph.years[i]) for i in range(graph.n_papers)}
    refs = {i: set() for i in range(graph.n_papers)}
    for a, b in graph.edges():
        refs[a].add(b)
    authors = {i: graph.authors(i) for i in range(graph.n_papers)}
    return years, refs, authors, graph.ids


def enumerate_report(years, refs, authors, ids, focal, time_filter=True, popular_threshold=24):
    """Every metric of one focal paper by exhaustive enumeration, or None if ineligible."""
    counts = {p: 0 for p in years}
    for p, rs in refs.items():
        for r in rs:
            counts[r] += 1
    R = refs[focal]
    if not R:
        return None
    popular = {r for r in R if counts[r] >= popular_threshold}
    fa = set(authors[focal]) if authors[focal] else set()

    def triple(ref_set, drop_self):
        n_i = n_j = n_k = w_j = 0
        for p in years:
            if p == focal:
                continue
            if time_filter and years[p] < years[focal]:
                continue
            if drop_self and fa and authors[p] and fa & set(authors[p]):
                continue
            cites_focal = focal in refs[p]
            shared = len(refs[p] & ref_set)
            if cites_focal and shared:
                n_j += 1
                w_j += shared
            elif cites_focal:
                n_i += 1
            elif shared:
                n_k += 1
        return n_i, n_j, n_k, w_j

    t0 = triple(R, False)
    n_i, n_j, n_k, w_j = t0
    if n_i + n_j == 0:
        return None
    t1 = triple(R, True) if fa else t0
    t2 = triple(popular, False)
    top = min(R, key=lambda r: (-counts[r], years[r], ids[r]))

    def d0(t):
        den = t[0] + t[1] + t[2]
        return None if den == 0 else (t[0] - t[1]) / den

    c_f = n_i + n_j
    return {
        "triple": t0,
        "triple_d1": t1,
        "triple_d2": t2,
        "d0": d0(t0),
        "d1": d0(t1),
        "d2": d0(t2),
        "d3": n_i / (n_i + n_j),
        "d4": n_i / (n_i + w_j),
        "d_f": (n_i - n_j) / c_f,
        "r_k": n_k / c_f,
        "c_f": c_f,
        "c_max": counts[top],
        "b_f": counts[top] / c_f,
        "top_reference": top,
        # exact rational identity check material
        "d0_exact": Fraction(n_i - n_j, n_i + n_j + n_k),
    }


def report_as_oracle_dict(report):
    return {
        "triple": (report.triple.n_i, report.triple.n_j, report.triple.n_k, report.triple.w_j),
        "triple_d1": tuple(vars(report.triple_d1).values()),
        "triple_d2": tuple(vars(report.triple_d2).values()),
        "d0": report.d0,
        "d1": report.d1,
        "d2": report.d2,
        "d3": report.d3,
        "d4": report.d4,
        "d_f": report.d_f,
        "r_k": report.r_k,
        "c_f": report.c_f,
        "c_max": report.c_max,
        "b_f": report.b_f,
        "top_reference": report.top_reference,
    }
