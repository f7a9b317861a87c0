"""Command-line interface: estimation, regression, prediction, imputation, simulation.

Every command is a thin shell over the library; outputs are decimal text with
12 significant digits so runs are byte-reproducible.  Exit codes: 0 success,
2 validation/usage errors, 3 numerical non-convergence.
"""

import argparse
import json
import os
import sys

from . import __version__
from .bridge import PAIR_KINDS, VariableCutoffs, forward
from .cutoffs import estimate_cutoffs
from .dataio import (correlation_report, load_csv, regression_report,
                     write_dataset_csv, write_report, write_schema, MixedDataset)
from .exceptions import (NonConvergenceError, NumericalError,
                         RetryExhaustedError, SgcrmError)
from .kendall import pair_order, tau_matrix, vk_hat
from .latent import build_transforms, impute_rows, predict_rows
from .latentcorr import bridge_matrix, nearest_pd
from .regress import (asymptotic_cov_beta, asymptotic_cov_sigma,
                      confidence_intervals, fit as regress_fit)
from .sim import (DEFAULT_SEED, SimScenario, VariableSpec, coverage_study,
                  glnpn_sample, random_corr, table3_variables)

_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3


def _meta(args):
    meta = {"seed": getattr(args, "seed", DEFAULT_SEED), "version": __version__}
    if getattr(args, "threads", None):
        meta["threads"] = args.threads
    return meta


def _estimate_pipeline(args):
    data = load_csv(args.data, args.schema)
    tau = tau_matrix(data)
    cuts = estimate_cutoffs(data)
    raw = bridge_matrix(tau, cuts, data.types)
    return data, tau, cuts, raw


def cmd_estimate_corr(args):
    data, tau, cuts, raw = _estimate_pipeline(args)
    result = raw if args.no_projection else nearest_pd(raw)
    meta = _meta(args)
    meta["n"] = data.n
    meta["missing_handling"] = "pairwise-complete"
    doc = correlation_report(result, names=data.names, meta=meta)
    if args.with_vcov:
        v = asymptotic_cov_sigma(data, tau, vk_hat(data), cuts)
        doc["vcov_sigma"] = [[float(f"{x:.12g}") for x in row] for row in v]
        doc["pair_order"] = [[int(j), int(k)] for j, k in pair_order(data.p)]
    write_report(doc, args.out, "json")
    return 0


def cmd_regress(args):
    data, tau, cuts, raw = _estimate_pipeline(args)
    sigma = nearest_pd(raw)
    outcome = data.index_of(args.outcome)
    predictors = [data.index_of(name.strip()) for name in args.predictors.split(",")]
    result = regress_fit(sigma, outcome, predictors)
    v_sigma = asymptotic_cov_sigma(data, tau, vk_hat(data), cuts)
    result.v_beta = asymptotic_cov_beta(sigma, v_sigma, outcome, predictors)
    result.ci = confidence_intervals(result, result.v_beta, data.n, args.confidence)
    doc = regression_report(result, data.names, data.n, args.confidence,
                            meta=_meta(args))
    write_report(doc, args.out, "json")
    return 0


def _fit_latent_inputs(args):
    data = load_csv(args.data, args.schema)
    tau = tau_matrix(data)
    cuts = estimate_cutoffs(data)
    sigma = nearest_pd(bridge_matrix(tau, cuts, data.types))
    transforms = build_transforms(data)
    return data, cuts, sigma, transforms


def cmd_predict_latent(args):
    data, cuts, sigma, transforms = _fit_latent_inputs(args)
    latent, _ = predict_rows(data, transforms, cuts, sigma)
    import csv as _csv

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow([f"{name}.latent" for name in data.names])
        for row in latent:
            w.writerow([f"{v:.12g}" for v in row])
    return 0


def cmd_impute(args):
    data, cuts, sigma, transforms = _fit_latent_inputs(args)
    completed, _, cells = impute_rows(data, transforms, cuts, sigma)
    out = MixedDataset(values=completed, schema=data.schema)
    write_dataset_csv(out, args.out)
    flags = {"imputed_cells": [[int(i), data.names[j]] for i, j in cells],
             "meta": _meta(args)}
    with open(args.flags, "w", encoding="utf-8") as fh:
        json.dump(flags, fh, indent=2)
        fh.write("\n")
    return 0


def _load_scenario(path, seed_override=None):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("table3"):
        variables = table3_variables()
    else:
        variables = [VariableSpec(type=v["type"],
                                  cutpoints=tuple(v.get("cutpoints", ())),
                                  name=v.get("name"))
                     for v in doc["variables"]]
    seed = seed_override if seed_override is not None else doc.get("seed", DEFAULT_SEED)
    return SimScenario(variables=variables, n=int(doc.get("n", 1000)),
                       seed=int(seed),
                       condition_cap=float(doc.get("condition_cap", 10.0)))


def cmd_simulate(args):
    scenario = _load_scenario(args.scenario, args.seed)
    sigma = random_corr(scenario.p, scenario.seed, scenario.condition_cap)
    data = glnpn_sample(sigma, scenario)
    write_dataset_csv(data, args.out)
    if args.schema_out:
        write_schema(data.schema, args.schema_out)
    return 0


def cmd_coverage(args):
    scenario = _load_scenario(args.scenario, args.seed)
    report = coverage_study(scenario, args.replicates, args.confidence)
    doc = {
        "confidence": args.confidence,
        "replicates": args.replicates,
        "beta_true": report.beta_true.tolist(),
        "coverage": report.coverage.tolist(),
        "hits": report.hits.tolist(),
        "failures": [[r, msg] for r, msg in report.failures],
        "meta": _meta(args),
    }
    write_report(doc, args.out, "json")
    return 0


def cmd_bridge_eval(args):
    kind = args.kind.lower()
    if kind not in PAIR_KINDS:
        raise SgcrmError(f"unknown pair kind {args.kind!r}; choose from {PAIR_KINDS}")

    def parse_cuts(text, letter):
        if letter == "c":
            return None
        if text is None:
            raise SgcrmError(f"kind {kind!r} requires cutoffs for the {letter!r} side")
        vals = [float(v) for v in text.split(",")]
        types = {"b": "binary", "t": "truncated", "o": "ordinal"}
        return VariableCutoffs(types[letter], vals)

    cut_j = parse_cuts(args.cutoffs_j, kind[0])
    cut_k = parse_cuts(args.cutoffs_k, kind[1])
    value = forward(kind, args.rho, cut_j, cut_k)
    print(f"{value:.12g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgcrm",
        description="Latent Gaussian copula correlation, regression, prediction "
                    "and imputation for mixed data types")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data=True):
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed for stochastic steps (default {DEFAULT_SEED})")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("SGCRM_THREADS", 0)) or None,
                       help="parallelism hint; outputs are identical for any value")
        p.add_argument("--json-errors", action="store_true",
                       help="emit machine-readable error JSON on stderr")
        if needs_data:
            p.add_argument("--data", required=True, help="input CSV path")
            p.add_argument("--schema", required=True, help="schema JSON path")

    p = sub.add_parser("estimate-corr", help="estimate the latent correlation matrix")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--no-projection", action="store_true",
                   help="report the raw bridged matrix without PD projection")
    p.add_argument("--with-vcov", action="store_true",
                   help="include the asymptotic covariance of the correlations")
    p.set_defaults(func=cmd_estimate_corr)

    p = sub.add_parser("regress", help="fit a latent regression with intervals")
    common(p)
    p.add_argument("--outcome", required=True)
    p.add_argument("--predictors", required=True,
                   help="comma-separated predictor column names")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("predict-latent", help="predict latent coordinates per row")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_latent)

    p = sub.add_parser("impute", help="fill missing cells by latent conditional means")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--flags", required=True,
                   help="sidecar JSON listing the imputed cells")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("simulate", help="draw a dataset from a scenario")
    common(p, needs_data=False)
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", default=None,
                   help="also write the matching schema JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="replicated confidence-interval coverage study")
    common(p, needs_data=False)
    p.add_argument("--scenario", required=True)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("bridge-eval", help="evaluate one bridging function")
    common(p, needs_data=False)
    p.add_argument("--kind", required=True, help="pair kind, e.g. cc, oo, to")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--cutoffs-j", default=None, help="comma-separated cutoffs")
    p.add_argument("--cutoffs-k", default=None, help="comma-separated cutoffs")
    p.set_defaults(func=cmd_bridge_eval)

    return parser


def _merge_negative_values(argv):
    """Join cutoff options with their values so argparse accepts lists that
    start with a minus sign, e.g. ``--cutoffs-j -0.1,0.6``."""
    out = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in ("--cutoffs-j", "--cutoffs-k") and i + 1 < len(argv):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
        else:
            out.append(arg)
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_merge_negative_values(list(argv)))
    if getattr(args, "seed", None) is None:
        args.seed = DEFAULT_SEED
    try:
        return args.func(args)
    except (NonConvergenceError, RetryExhaustedError, NumericalError) as exc:
        _report_error(args, exc)
        return _EXIT_NUMERICAL
    except SgcrmError as exc:
        _report_error(args, exc)
        return _EXIT_VALIDATION


def _report_error(args, exc):
    if getattr(args, "json_errors", False):
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
    else:
        print(f"sgcrm: error: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
