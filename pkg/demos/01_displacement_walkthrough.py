"""How a paper's D-index splits into a local signal and a knowledge burden.

We build a nine-paper citation graph by hand, classify the citers of one
focal paper, and show that D0 equals d_f / (1 + R_k) exactly while the
cheaper d_f / (1 + b_f) is close but not equal.
"""

from displace.corpus import CitationGraph, PaperRecord
from displace.displacement import approx_d, classify_citers, decompose

years = {"R1": 1990, "R2": 1991, "F": 2000, "A": 2005, "B": 2006, "C": 2007, "D": 2008, "E": 2009, "G": 2010}
edges = [("F", "R1"), ("F", "R2"), ("A", "F"), ("B", "F"), ("B", "R1"), ("C", "R1"), ("D", "R2"), ("E", "F"), ("G", "F")]
graph = CitationGraph.from_records([PaperRecord(pid, y) for pid, y in years.items()], edges)
focal = graph.index_of("F")

t = classify_citers(graph, focal)
print(f"citers of F: {t.n_i} cite only F, {t.n_j} cite F and its references, {t.n_k} cite only the references")

r = decompose(graph, focal)
print(f"D0 = {r.d0:.4f}   D1..D4 = {r.d1:.4f}, {r.d2:.4f}, {r.d3:.4f}, {r.d4:.4f}")
print(f"local displacement d_f = {r.d_f:.4f}, type-k ratio R_k = {r.r_k:.4f}")
print(f"d_f / (1 + R_k) = {r.d_f / (1 + r.r_k):.4f}  (exact)")
print(f"knowledge burden b_f = c_max / c_f = {r.c_max}/{r.c_f} = {r.b_f:.4f}")
print(f"d_f / (1 + b_f) = {approx_d(r.d_f, r.b_f):.4f}  (approximation)")
print(f"most-cited reference: {graph.ids[r.top_reference]}")
