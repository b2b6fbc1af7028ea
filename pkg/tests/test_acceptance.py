"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runtimes are measured around the work each criterion budgets and compared
with its limit. Criteria that do not hold are marked ``xfail(strict=True)``
so the suite stays honest: they report FAIL, and turn into an error the day
they start passing.
"""

import csv
import json
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from acceptance_log import record
from oracles import enumerate_report, graph_to_plain, report_as_oracle_dict
from displace.cli import main as cli_main
from displace.corpus import CorpusFilter, write_edges_tsv, write_papers_jsonl
from displace.displacement import VariantConfig, approx_d, batch_reports, decompose
from displace.distfit import compare_models, sample_discrete_powerlaw, sample_truncated_poisson
from displace.llm import API_KEY_ENV, ClassificationRequest, RetryPolicy, classify_batch, classify_pair
from displace.mock_endpoint import MockEndpoint, fixed_logprobs, prompt_keyed
from displace.overlap import monte_carlo_overlap, null_overlap_probability
from displace.synth import approximation_family, planted_pool_corpus, random_citation_graph, zipf_counts
from displace.zipf import fit_zipf, ratio_theoretical

ALL = CorpusFilter(min_references=0, min_citations=0)


@pytest.fixture(scope="module")
def oracle_run():
    """1000 random graphs swept by the library and by exhaustive enumeration."""
    start = time.perf_counter()
    mismatches, reports = 0, []
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 201))
        g = random_citation_graph(rng, n)
        cfg = VariantConfig(time_filter=bool(rng.integers(2)), popular_threshold=int(rng.integers(0, 6)))
        got = {}
        for r in batch_reports(g, cfg, filter=ALL):
            got[r.focal] = report_as_oracle_dict(r)
            reports.append(r)
        plain = graph_to_plain(g)
        expected = {}
        for f in range(n):
            o = enumerate_report(*plain, f, time_filter=cfg.time_filter, popular_threshold=cfg.popular_threshold)
            if o is not None:
                o.pop("d0_exact")
                expected[f] = o
        mismatches += got != expected
    return mismatches, reports, time.perf_counter() - start


def test_criterion_1_oracle_equivalence(oracle_run):
    mismatches, reports, seconds = oracle_run
    ok = mismatches == 0 and seconds < 60
    record(1, ok, f"{1000 - mismatches}/1000 graphs match the enumeration oracle ({len(reports)} reports), {seconds:.1f} s < 60 s")
    assert ok


def test_criterion_2_decomposition_identity(oracle_run):
    _, reports, _ = oracle_run
    worst = max(abs(r.d0 - r.d_f / (1 + r.r_k)) for r in reports)
    ok = worst < 1e-12
    record(2, ok, f"max |D0 - d_f/(1+R_k)| = {worst:.2e} over {len(reports)} reports")
    assert ok


@pytest.mark.xfail(strict=True, reason="reference-length trend is set by how lesser references' citers overlap the top reference's")
def test_criterion_3_approximation_has_no_length_trend():
    lengths = [5, 10, 20, 50, 100, 200]
    rhos = {}
    for b_f in (1, 10, 100):
        means = []
        for n in lengths:
            rng = np.random.default_rng(1000 * n + b_f)
            errs = []
            for _ in range(10):
                r = decompose(approximation_family(rng, n, b_f, d_f=0.01), 0)
                assert r.d_f == pytest.approx(0.01, abs=1e-12) and r.b_f == pytest.approx(b_f, abs=1e-12)
                errs.append(abs(r.d0 - approx_d(r.d_f, r.b_f)))
            means.append(float(np.mean(errs)))
        rhos[b_f] = spearmanr(lengths, means)[0]
    ok = all(abs(rho) < 0.3 for rho in rhos.values())
    detail = ", ".join(f"b_f={k}: rho={v:+.2f}" for k, v in rhos.items())
    record(3, ok, f"Spearman of mean |D0 - d_f/(1+b_f)| vs reference count: {detail} (need |rho| < 0.3)")
    assert ok


def test_criterion_4_zipf_round_trip():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    hits = sum(abs(fit_zipf(zipf_counts(2.0, 1.4, 1000.0, 30, rng, 0.1)).a - 2.0) <= 0.2 for _ in range(1000))
    seconds = time.perf_counter() - start
    ratio = ratio_theoretical(2.0, 1.4)
    ok = hits >= 950 and abs(ratio - 0.416667) <= 1e-6 and seconds < 30
    record(4, ok, f"a within 10% in {hits}/1000 trials, ratio_theoretical(2.0, 1.4) = {ratio:.6f}, {seconds:.1f} s < 30 s")
    assert ok


def test_criterion_5_null_overlap():
    p = null_overlap_probability(292, 2)
    exact = 1 - math.comb(290, 2) / math.comb(292, 2)
    n = 10**6
    freq = monte_carlo_overlap(292, 2, n, np.random.default_rng(2024))
    se = math.sqrt(p * (1 - p) / n)
    ok = abs(p - exact) < 1e-10 and abs(freq - p) < 3 * se
    record(5, ok, f"p_null = {p:.10f}, Monte Carlo {freq:.6f} is {abs(freq - p) / se:.2f} standard errors away")
    assert ok


@pytest.mark.xfail(strict=True, reason="the Vuong statistic has infinite variance under alpha = 2.5; 3 of 20 seeds stay above p = 0.05")
def test_criterion_6_distribution_discrimination():
    start = time.perf_counter()
    pois = pl = 0
    for seed in range(20):
        y = sample_truncated_poisson(2, 2, 10**4, np.random.default_rng(seed))
        r = compare_models(y, truncation=2)
        pois += r.verdict == "poisson" and r.p_value < 0.05
        z = sample_discrete_powerlaw(2.5, 1, 10**4, np.random.default_rng(seed))
        r = compare_models(z, truncation=0)
        pl += r.verdict == "power_law" and r.p_value < 0.05
    seconds = time.perf_counter() - start
    ok = pois == 20 and pl == 20 and seconds < 60
    record(6, ok, f"truncated Poisson {pois}/20 seeds, power law {pl}/20 seeds, {seconds:.1f} s < 60 s")
    assert ok


def test_criterion_7_planted_pipeline(tmp_path):
    pc = planted_pool_corpus(np.random.default_rng(0))
    write_papers_jsonl(pc.graph.records(), tmp_path / "papers.jsonl")
    write_edges_tsv(pc.graph, tmp_path / "edges.tsv")
    p = {k: str(tmp_path / k) for k in ("papers.jsonl", "edges.tsv", "g.snap", "r.jsonl", "pools.csv", "hist.csv", "fit.json")}
    codes = [
        cli_main(["ingest", "--papers", p["papers.jsonl"], "--edges", p["edges.tsv"], "--out", p["g.snap"]]),
        cli_main(["metrics", "--snapshot", p["g.snap"], "--out", p["r.jsonl"]]),
        cli_main(["multiples", "--snapshot", p["g.snap"], "--reports", p["r.jsonl"], "--min-citations",
                  str(pc.min_citations), "--out", p["pools.csv"], "--histogram", p["hist.csv"]]),
        cli_main(["distfit", "--input", p["hist.csv"], "--truncation", "2", "--out", p["fit.json"]]),
    ]
    with open(p["hist.csv"]) as fh:
        got = {int(row["size"]): int(row["count"]) for row in csv.DictReader(fh)}
    fit = json.loads(open(p["fit.json"]).read())
    ok = codes == [0, 0, 0, 0] and got == pc.histogram and fit["verdict"] == "power_law"
    record(7, ok, f"{sum(got.values())} pools, histogram {'exact' if got == pc.histogram else 'differs'}, "
                  f"verdict {fit['verdict']} (p = {fit['p_value']:.2g})")
    assert ok


def test_criterion_8_classifier_contract(tmp_path, monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    policy = RetryPolicy(max_attempts=2, backoff_initial=0.0, timeout=5.0)
    reqs = [ClassificationRequest(f"Title {i} ", "a", "r", "b", key=f"k{i}") for i in range(12)]
    checks = {}
    with MockEndpoint(fixed_logprobs({"1": math.log(0.86), "2": math.log(0.14)})) as ep:
        res = classify_pair(ep.url, "m", reqs[0], policy)
        checks["p_theory = 0.86"] = abs(res.p_theory - 0.86) < 1e-12

    delays = np.random.default_rng(0).uniform(0, 0.03, size=12)

    def table(prompt):
        i = int(prompt.split("Title ")[1].split(" ")[0])
        return (500 if i == 7 else 0.5 + 0.01 * i), float(delays[i])

    journal = tmp_path / "journal.jsonl"
    with MockEndpoint(prompt_keyed(table)) as ep:
        items = list(classify_batch(ep.url, "m", reqs, 4, journal=journal, retry_policy=policy, sleep=lambda s: None))
        checks["ordered"] = [it.index for it in items] == list(range(12))
        checks["error isolated"] = [it.ok for it in items] == [i != 7 for i in range(12)]
        sent_before = len(ep.requests)
        again = list(classify_batch(ep.url, "m", reqs, 4, journal=journal, retry_policy=policy, sleep=lambda s: None))
        # only the failed item is re-sent on resume, twice because it fails again
        checks["resume"] = len(ep.requests) - sent_before == policy.max_attempts and [
            it.result for it in again if it.ok
        ] == [it.result for it in items if it.ok]
    ok = all(checks.values())
    record(8, ok, ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


@pytest.mark.skip(reason="needs a full bibliographic snapshot; run manually, not part of CI")
def test_criterion_9_full_corpus():
    pass


def test_criterion_9_reported_as_skipped():
    record(9, None, "full-corpus integration is optional and not run here")
