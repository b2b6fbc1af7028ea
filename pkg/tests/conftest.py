import sys
from pathlib import Path

import numpy as np
import pytest

from displace.corpus import CitationGraph, PaperRecord

sys.path.insert(0, str(Path(__file__).parent))


def make_graph(papers, edges):
    """papers: {id: year} or {id: (year, kwargs)}; edges: iterable of (citing, cited)."""
    records = []
    for pid, spec in papers.items():
        if isinstance(spec, tuple):
            year, kw = spec
        else:
            year, kw = spec, {}
        records.append(PaperRecord(id=pid, year=year, **kw))
    return CitationGraph.from_records(records, edges)


G1_PAPERS = {"R1": 1990, "R2": 1991, "F": 2000, "A": 2005, "B": 2006, "C": 2007, "D": 2008}
G1_EDGES = [("F", "R1"), ("F", "R2"), ("A", "F"), ("B", "F"), ("B", "R1"), ("C", "R1"), ("D", "R2")]


@pytest.fixture
def g1():
    return make_graph(G1_PAPERS, G1_EDGES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[n])
