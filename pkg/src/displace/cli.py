"""``displace`` command-line entry point.

Every subcommand writes its data to files (or stdout when ``--out -``) and
its diagnostics to stderr, exits 0 on success and nonzero on any error, and
leaves a run manifest next to its main output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import CorpusFilter, ingest
from .displacement import (
    VARIANTS,
    DisplacementReport,
    SweepStats,
    VariantConfig,
    batch_reports,
    displacing_fraction_by_year,
)
from .distfit import compare_models, fit_powerlaw, histogram, load_external_histogram
from .errors import DisplaceError
from .llm import PROMPT_MODES, AuditLog, RetryPolicy, classify_batch, read_pairs
from .multiples import PoolCriteria, find_pools, pool_size_histogram
from .overlap import FieldTaxonomy, empirical_overlap
from .snapshot import FORMAT_VERSION, file_checksum, load_snapshot, save_snapshot
from .zipf import sample_fits

logger = logging.getLogger("displace")

SIG_DIGITS = 12


# -- output helpers -------------------------------------------------------------


def round_reals(obj):
    """Round every float in a JSON-like structure to 12 significant digits."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{SIG_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: round_reals(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_reals(v) for v in obj]
    if isinstance(obj, np.generic):
        return round_reals(obj.item())
    return obj


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


class _Output:
    """Text sink for a path, or stdout for ``-``; files are replaced atomically."""

    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self._buf = io.StringIO(newline="")
        return self._buf

    def __exit__(self, exc_type, *rest):
        if exc_type is not None:
            return False
        data = self._buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(data)
            sys.stdout.flush()
        else:
            path = Path(self.path)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_text(data, encoding="utf-8", newline="")
            os.replace(tmp, path)
        return False


def write_json(path, obj):
    with _Output(path) as fh:
        fh.write(json.dumps(round_reals(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with _Output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _dir_of(path):
    return None if path in (None, "-") else Path(path)


# -- shared loading -------------------------------------------------------------


def _config(args) -> VariantConfig:
    if getattr(args, "popular_quartile", False):
        return VariantConfig(popular_threshold=None, popular_quantile=0.75, time_filter=not args.no_time_filter)
    return VariantConfig(popular_threshold=args.popular_threshold, time_filter=not args.no_time_filter)


def _reports(args, graph):
    """Reports from ``--reports`` when given, else computed from the graph."""
    if getattr(args, "reports", None):
        index = graph.index_of
        out = []
        with open(args.reports, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        out.append(DisplacementReport.from_dict(json.loads(line), index))
                    except (ValueError, KeyError, TypeError) as exc:
                        raise ValueError(f"{args.reports}:{lineno}: bad report ({exc})") from None
        return out
    filt = CorpusFilter(min_citations=1, min_references=1)
    return list(batch_reports(graph, VariantConfig(), parallelism=args.threads, filter=filt))


# -- subcommands ------------------------------------------------------------------


def cmd_ingest(args):
    filt = CorpusFilter(
        journal_only=not args.all_doc_types,
        year_range=tuple(args.year_range) if args.year_range else None,
    )
    graph, stats = ingest(args.papers, args.edges, filt, strict=args.strict)
    save_snapshot(graph, args.out)
    for w in stats.warnings:
        logger.warning(w)
    if args.stats:
        write_json(args.stats, stats.as_dict())
    logger.info("ingested %d papers, %d edges", graph.n_papers, graph.n_edges)
    return {"inputs": [args.papers, args.edges], "outputs": [args.out] + ([args.stats] if args.stats else [])}


def cmd_metrics(args):
    graph = load_snapshot(args.snapshot)
    config = _config(args)
    filt = CorpusFilter(min_citations=args.min_citations, min_references=args.min_references)
    stats = SweepStats()
    keep = VARIANTS if args.variant == "all" else (args.variant.upper(),)
    drop = {v.lower() for v in VARIANTS if v not in keep}
    ids = graph.ids
    with _Output(args.out) as fh:
        for r in batch_reports(graph, config, parallelism=args.threads, filter=filt, stats=stats):
            d = {k: v for k, v in r.to_dict(ids).items() if k not in drop}
            fh.write(json.dumps(round_reals(d), sort_keys=False) + "\n")
    logger.info(
        "%d reports, %d papers skipped (popular threshold %s)", stats.reported, stats.skipped, stats.popular_threshold
    )
    return {"inputs": [args.snapshot], "outputs": [args.out]}


def _sign_fractions(values):
    n = len(values)
    return {
        "negative": sum(v < 0 for v in values) / n,
        "positive": sum(v > 0 for v in values) / n,
        "zero": sum(v == 0 for v in values) / n,
    }


def _hist_rows(values, bins, log=False):
    v = np.asarray(values, dtype=np.float64)
    if log:
        v = np.log10(v[v > 0])
    if not len(v):
        return []
    counts, edges = np.histogram(v, bins=bins)
    return [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))]


def cmd_report(args):
    reports = []
    with open(args.reports, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                reports.append(DisplacementReport.from_dict(json.loads(line), lambda x: x))
    reports = [r for r in reports if r.c_f >= args.min_citations]
    if not reports:
        raise ValueError(f"{args.reports}: no reports to summarise")
    d_f = [r.d_f for r in reports]
    b_f = [r.b_f for r in reports]
    d0 = [r.d0 for r in reports if r.d0 is not None]
    summary = {
        "n_reports": len(reports),
        "d_f": _sign_fractions(d_f),
        "d0": _sign_fractions(d0),
        "b_f": {
            "above_one": sum(b > 1 for b in b_f) / len(b_f),
            "equal_one": sum(b == 1 for b in b_f) / len(b_f),
            "below_one": sum(b < 1 for b in b_f) / len(b_f),
        },
        "mean": {"d_f": float(np.mean(d_f)), "b_f": float(np.mean(b_f)), "d0": float(np.mean(d0)) if d0 else None},
    }
    write_json(args.out, summary)
    outputs = [args.out]
    if args.histograms:
        out = Path(args.histograms)
        out.mkdir(parents=True, exist_ok=True)
        for name, vals, log in (("d_f", d_f, False), ("d0", d0, False), ("b_f", b_f, True)):
            path = out / f"hist_{name}.csv"
            label = "log10_" + name if log else name
            write_csv(path, [f"{label}_lo", f"{label}_hi", "count"], _hist_rows(vals, args.bins, log))
            outputs.append(str(path))
        unweighted = displacing_fraction_by_year(reports)
        weighted = displacing_fraction_by_year(reports, "citation-weighted")
        counts: dict[int, int] = {}
        for r in reports:
            counts[r.year] = counts.get(r.year, 0) + 1
        path = out / "displacing_by_year.csv"
        write_csv(
            path,
            ["year", "n_papers", "fraction_displacing", "fraction_displacing_citation_weighted"],
            [(y, counts[y], unweighted[y], weighted.get(y)) for y in sorted(unweighted)],
        )
        outputs.append(str(path))
    return {"inputs": [args.reports], "outputs": outputs}


def cmd_zipf(args):
    graph = load_snapshot(args.snapshot)
    ids, fits = sample_fits(graph, args.sample, args.seed, args.min_refs)
    rows = [
        (graph.ids[i], f.a, f.b, f.c, f.r2_log, f.ratio_empirical, f.ratio_theoretical) for i, f in zip(ids, fits)
    ]
    write_csv(args.out, ["paper_id", "a", "b", "c", "r2_log", "ratio_empirical", "ratio_theoretical"], rows)
    if fits:
        theo = [f.ratio_theoretical for f in fits if f.ratio_theoretical is not None]
        logger.info(
            "%d fits: mean a %.4g, mean b %.4g, mean empirical ratio %.4g, mean theoretical ratio %s",
            len(fits),
            np.mean([f.a for f in fits]),
            np.mean([f.b for f in fits]),
            np.mean([f.ratio_empirical for f in fits]),
            f"{np.mean(theo):.4g}" if theo else "n/a",
        )
    return {"inputs": [args.snapshot], "outputs": [args.out]}


def cmd_multiples(args):
    graph = load_snapshot(args.snapshot)
    crit = PoolCriteria(args.min_citations, args.min_d, args.variant.upper(), args.min_pool_size)
    pools = find_pools(graph, _reports(args, graph), crit)
    write_csv(
        args.out,
        ["anchor_id", "size", "member_ids", "min_year", "max_year"],
        [(p.anchor, p.size, ";".join(p.members), p.span_years[0], p.span_years[1]) for p in pools],
    )
    outputs = [args.out]
    if args.histogram:
        write_csv(args.histogram, ["size", "count"], sorted(pool_size_histogram(pools).items()))
        outputs.append(args.histogram)
    logger.info("%d pools", len(pools))
    inputs = [args.snapshot] + ([args.reports] if args.reports else [])
    return {"inputs": inputs, "outputs": outputs}


def cmd_distfit(args):
    samples = load_external_histogram(args.input)
    res = compare_models(samples, args.truncation, args.significance, support=args.support)
    ks = fit_powerlaw(samples)
    pl, po = res.powerlaw, res.poisson
    out = {
        "n_samples": int(len(samples)),
        "truncation": args.truncation,
        "support": args.support,
        "support_min": res.support_min,
        "n_compared": res.n,
        "significance": args.significance,
        "histogram": {str(k): v for k, v in histogram(samples).items()},
        "powerlaw": {"alpha": pl.alpha, "x_min": pl.x_min, "log_likelihood": pl.log_likelihood,
                     "ks_statistic": pl.ks_statistic, "n_tail": pl.n_tail},
        "powerlaw_ks_selected": {"alpha": ks.alpha, "x_min": ks.x_min, "log_likelihood": ks.log_likelihood,
                                 "ks_statistic": ks.ks_statistic, "n_tail": ks.n_tail},
        "poisson": {"lambda": po.lam, "truncation": po.truncation, "log_likelihood": po.log_likelihood, "n": po.n},
        "llr": res.llr,
        "statistic": res.statistic,
        "p_value": res.p_value,
        "verdict": res.verdict,
    }
    write_json(args.out, out)
    logger.info("verdict %s (llr %.4g, p %.3g)", res.verdict, res.llr, res.p_value)
    return {"inputs": [args.input], "outputs": [args.out]}


def cmd_overlap(args):
    graph = load_snapshot(args.snapshot)
    res = empirical_overlap(
        graph, _reports(args, graph), args.d_cutoff, FieldTaxonomy(args.fields, args.labels_per_paper), args.variant.upper()
    )
    out = res.to_dict()
    out.update({"d_cutoff": args.d_cutoff, "fields": args.fields, "labels_per_paper": args.labels_per_paper})
    write_json(args.out, out)
    inputs = [args.snapshot] + ([args.reports] if args.reports else [])
    return {"inputs": inputs, "outputs": [args.out]}


def cmd_classify(args):
    requests = read_pairs(args.pairs, args.mode)
    extra = []
    with open(args.pairs, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                extra.append(json.loads(line))
    policy = RetryPolicy(max_attempts=args.retries + 1, backoff_initial=args.backoff)
    audit = AuditLog(args.audit_log) if args.audit_log else None
    n_fail = 0
    with _Output(args.out) as fh:
        items = classify_batch(
            args.endpoint, args.model, requests, args.max_in_flight, journal=args.journal,
            restart=args.restart, retry_policy=policy, audit=audit,
        )
        for item in items:
            src = extra[item.index]
            row = {"index": item.index, "key": item.key, "status": "ok" if item.ok else "error"}
            if "focal_year" in src and "ref_year" in src:
                row["year_gap"] = int(src["focal_year"]) - int(src["ref_year"])
            if item.ok:
                r = item.result
                row.update(p_theory=r.p_theory, p_method=r.p_method, chosen_option=r.chosen_option, model_id=r.model_id)
                if r.p_other is not None:
                    row["p_other"] = r.p_other
            else:
                n_fail += 1
                row["error"] = item.error
            fh.write(json.dumps(round_reals(row)) + "\n")
    if n_fail:
        logger.warning("%d of %d requests failed", n_fail, len(requests))
    outputs = [args.out] + ([args.journal] if args.journal else [])
    return {"inputs": [args.pairs], "outputs": outputs, "failed": n_fail}


# -- parser -----------------------------------------------------------------------


def _add_metric_flags(p):
    p.add_argument("--popular-threshold", type=int, default=24, help="citation floor for D2 references")
    p.add_argument("--popular-quartile", action="store_true", help="use the corpus top quartile as the D2 floor")
    p.add_argument("--no-time-filter", action="store_true", help="count citers older than the focal paper")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="displace", description="Citation displacement analysis.")
    parser.add_argument("--version", action="version", version=f"displace {__version__} (snapshot format {FORMAT_VERSION})")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker cap (default: all cores)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--manifest", help="run manifest path (default: <out>.manifest.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a snapshot from papers.jsonl and edges.tsv")
    p.add_argument("--papers", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="fail on edges with unknown ids")
    p.add_argument("--all-doc-types", action="store_true", help="keep books, conference papers and others")
    p.add_argument("--year-range", type=int, nargs=2, metavar=("FIRST", "LAST"))
    p.add_argument("--stats", help="write ingest counts as JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("metrics", help="per-paper displacement reports (JSONL)")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--variant", default="all", choices=[v.lower() for v in VARIANTS] + ["all"])
    _add_metric_flags(p)
    p.add_argument("--min-citations", type=int, default=1)
    p.add_argument("--min-references", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="sign fractions and histograms of a reports file")
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--histograms", help="directory for histogram CSVs")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--min-citations", type=int, default=0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("zipf", help="rank-curve fits for a sample of papers")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-refs", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zipf)

    p = sub.add_parser("multiples", help="pools of displacing papers sharing a top reference")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--reports", help="reports from `metrics` (default: compute with default settings)")
    p.add_argument("--min-citations", type=int, default=100)
    p.add_argument("--min-d", type=float, default=0.2)
    p.add_argument("--min-pool-size", type=int, default=2)
    p.add_argument("--variant", default="d0", choices=[v.lower() for v in VARIANTS])
    p.add_argument("--out", required=True)
    p.add_argument("--histogram", help="write size,count rows")
    p.set_defaults(func=cmd_multiples)

    p = sub.add_parser("distfit", help="Poisson versus power law on a size histogram")
    p.add_argument("--input", required=True, help="CSV of value,count rows")
    p.add_argument("--truncation", type=int, required=True, help="smallest possible value (e.g. 2 for pools)")
    p.add_argument("--significance", type=float, default=0.05)
    p.add_argument("--support", choices=("declared", "tail"), default="declared")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distfit)

    p = sub.add_parser("overlap", help="field overlap of displacing papers with their top reference")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--reports")
    p.add_argument("--d-cutoff", type=float, default=0.21)
    p.add_argument("--fields", type=int, default=292)
    p.add_argument("--labels-per-paper", type=int, default=2)
    p.add_argument("--variant", default="d0", choices=[v.lower() for v in VARIANTS])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("classify", help="theory/method classification through a chat-completions endpoint")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--mode", default="zero_shot", choices=PROMPT_MODES)
    p.add_argument("--max-in-flight", type=int, default=8)
    p.add_argument("--journal", help="progress journal for resuming")
    p.add_argument("--restart", action="store_true", help="discard an existing journal")
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--backoff", type=float, default=0.5)
    p.add_argument("--audit-log", help="append request/response pairs as JSONL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)
    return parser


def _manifest(args, argv, info, seconds):
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    checksums = {}
    for path in info.get("inputs", []):
        if path and Path(path).is_file():
            checksums[str(path)] = file_checksum(path)
    return {
        "subcommand": args.command,
        "argv": list(argv),
        "flags": flags,
        "input_checksums": checksums,
        "outputs": [str(p) for p in info.get("outputs", [])],
        "snapshot_format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "wall_clock_seconds": seconds,
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format="displace: %(message)s", stream=sys.stderr
    )
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    start = time.perf_counter()
    try:
        info = args.func(args)
    except (DisplaceError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"displace: error: {msg}", file=sys.stderr)
        return 1
    manifest_path = args.manifest
    if manifest_path is None and args.out not in (None, "-"):
        manifest_path = f"{args.out}.manifest.json"
    if manifest_path:
        write_json(manifest_path, _manifest(args, argv, info, time.perf_counter() - start))
    return 1 if info.get("failed") else 0


if __name__ == "__main__":
    sys.exit(main())
