"""Do displacing papers share research fields with what they displace?

Under random labelling with 292 fields and two labels per paper, two papers
share a field with probability 1 - C(290,2)/C(292,2). We check that value by
simulation, then measure the observed rate on a random labelled corpus,
where no excess is expected.
"""

import numpy as np

from displace.displacement import batch_reports
from displace.overlap import FieldTaxonomy, empirical_overlap, monte_carlo_overlap, null_overlap_fraction
from displace.synth import random_citation_graph

exact = null_overlap_fraction(292, 2)
print(f"null overlap: {exact} = {float(exact):.6f}")
print(f"simulated from 10^6 random pairs: {monte_carlo_overlap(292, 2, 10**6, np.random.default_rng(1)):.6f}")

graph = random_citation_graph(np.random.default_rng(2), 3000, n_fields=10)
res = empirical_overlap(graph, batch_reports(graph), d_cutoff=0.21, taxonomy=FieldTaxonomy(f=10, l=2))
print(f"random corpus, 10 fields: {res.n_overlapping}/{res.n_pairs} pairs share a field")
print(f"observed {res.p_empirical:.3f} vs null {res.p_null:.3f} (ratio {res.ratio:.2f})")
