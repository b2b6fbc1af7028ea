"""The same analysis through the ``displace`` command line.

Writes a synthetic corpus as papers.jsonl and edges.tsv, then runs ingest,
metrics, report, multiples and distfit, printing the files each step leaves
behind. Every step also writes a run manifest next to its output.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from displace.corpus import write_edges_tsv, write_papers_jsonl
from displace.synth import planted_pool_corpus


def displace(*args):
    cmd = [sys.executable, "-m", "displace.cli", *map(str, args)]
    print("$ displace", " ".join(map(str, args)), flush=True)
    subprocess.run(cmd, check=True)


corpus = planted_pool_corpus(np.random.default_rng(0))
with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    write_papers_jsonl(corpus.graph.records(), d / "papers.jsonl")
    write_edges_tsv(corpus.graph, d / "edges.tsv")
    displace("ingest", "--papers", d / "papers.jsonl", "--edges", d / "edges.tsv", "--out", d / "corpus.snap")
    displace("metrics", "--snapshot", d / "corpus.snap", "--out", d / "reports.jsonl")
    displace("report", "--reports", d / "reports.jsonl", "--out", d / "summary.json")
    displace("multiples", "--snapshot", d / "corpus.snap", "--reports", d / "reports.jsonl",
             "--min-citations", corpus.min_citations, "--out", d / "pools.csv", "--histogram", d / "hist.csv")
    displace("distfit", "--input", d / "hist.csv", "--truncation", 2, "--out", d / "fit.json")
    print("\nsummary:", json.loads((d / "summary.json").read_text())["d0"])
    print("pool sizes:", (d / "hist.csv").read_text().splitlines()[:6])
    print("verdict:", json.loads((d / "fit.json").read_text())["verdict"])
    print("manifest keys:", sorted(json.loads((d / "fit.json.manifest.json").read_text())))
