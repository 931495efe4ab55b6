"""Command-line interface.

Subcommands: ``run`` (full experiment from a JSON config), ``bounds``
(print the constant/bound breakdown for a box), ``simulate`` (write one
simulated dataset) and ``fit`` (fit the penalized estimator on CSV
data).  Exit codes: 0 success, 2 configuration error, 3 replicate
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .bounds import DEFAULT_KAPPA, DEFAULT_KAPPA_PRIME, lambda_threshold, oracle_rhs
from .errors import ConfigurationError, ReplicateError
from .estimator import FitConfig, fit_lasso, lambda_path
from .harness import ExperimentConfig, emit_report, run_oracle_experiment
from .model import ParameterBox
from .simulator import (
    SimSpec,
    save_bundle_json,
    save_dataset_csv,
    simulate_dataset,
    load_dataset_csv,
)


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def parse_lambda_grid(text: str) -> list:
    """Parse '0.5,0.2,0.1' or 'min=0.01,max=10,count=5' (log-spaced, descending)."""
    if "=" in text:
        kv = dict(part.split("=", 1) for part in text.split(","))
        lo, hi = float(kv["min"]), float(kv["max"])
        count = int(kv["count"])
        if not (0 < lo <= hi) or count < 1:
            raise ConfigurationError(f"bad lambda grid spec {text!r}")
        return [float(v) for v in np.geomspace(hi, lo, count)]
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ConfigurationError(f"empty lambda grid {text!r}")
    return values


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    report = run_oracle_experiment(config)
    paths = emit_report(report, config)
    for agg in report.aggregates:
        status = "satisfied" if agg.inequality_satisfied else "VIOLATED"
        print(
            f"lambda={agg.lambda_:.6g}  mean_kl={agg.mean_kl:.6g}  "
            f"rhs={agg.bound_report.oracle_rhs_total:.6g}  margin={agg.margin:.6g}  "
            f"bound {status}"
        )
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_bounds(args) -> int:
    box = ParameterBox.from_dict(_load_json(args.box))
    lam = args.lambda_
    if lam is None:
        lam = lambda_threshold(box, args.n, args.p, args.q, args.k,
                               x_max=args.x_max_n, kappa=args.kappa)
    report = oracle_rhs(
        box, args.n, args.p, args.q, args.k, lam,
        kl_ref=args.kl_ref, l1_ref=args.l1_ref,
        kappa=args.kappa, kappa_prime=args.kappa_prime, x_max=args.x_max_n,
    )
    d = report.to_dict()
    terms = d.pop("oracle_rhs_terms")
    print(f"{'quantity':<22} value")
    for key in ("x_max_n", "m_n", "c_mn", "r_n", "lambda_min", "kappa",
                "kappa_prime", "lambda", "tail_bound"):
        print(f"{key:<22} {d[key]:.10g}")
    for key in ("approximation_term", "lambda_term", "remainder_term"):
        print(f"{key:<22} {terms[key]:.10g}")
    print(f"{'oracle_rhs_total':<22} {d['oracle_rhs_total']:.10g}")
    print(f"{'threshold_satisfied':<22} {d['threshold_satisfied']}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    spec = SimSpec.from_dict(_load_json(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    truth, dataset, labels = simulate_dataset(spec)
    os.makedirs(args.out, exist_ok=True)
    design_path = os.path.join(args.out, "design.csv")
    responses_path = os.path.join(args.out, "responses.csv")
    bundle_path = os.path.join(args.out, "bundle.json")
    save_dataset_csv(dataset, design_path, responses_path)
    save_bundle_json(bundle_path, spec, truth, dataset, labels)
    for path in (design_path, responses_path, bundle_path):
        print(f"wrote {path}")
    return 0


def _cmd_fit(args) -> int:
    data = load_dataset_csv(args.design, args.responses)
    box = ParameterBox.from_dict(_load_json(args.box))
    grid = parse_lambda_grid(args.lambda_)
    config = FitConfig(
        lambda_=grid[0], box=box, seed=args.seed,
        n_restarts=args.restarts, max_em_iters=args.max_em_iters,
    )
    if len(grid) == 1:
        fits = [fit_lasso(data, args.k, config)]
        lam_max = None
    else:
        path_result = lambda_path(data, args.k, grid, config)
        fits = path_result.fits
        lam_max = path_result.lambda_max
    payload = {"fits": [f.to_dict() for f in fits]}
    if lam_max is not None:
        payload["lambda_max"] = lam_max
    for f in fits:
        print(
            f"lambda={f.lambda_:.6g}  objective={f.objective:.6g}  "
            f"l1={float(np.abs(f.params.coefficients).sum()):.6g}  "
            f"iters={f.n_iters}  converged={f.converged}"
        )
    if lam_max is not None:
        print(f"lambda_max={lam_max:.6g}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oracle-exp",
        description="Penalized mixture-of-regressions experiments and risk bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_b = sub.add_parser("bounds", help="print the bound breakdown for a box")
    p_b.add_argument("--n", type=int, required=True)
    p_b.add_argument("--p", type=int, required=True)
    p_b.add_argument("--q", type=int, required=True)
    p_b.add_argument("--k", type=int, required=True)
    p_b.add_argument("--box", required=True, help="JSON file with the box constants")
    p_b.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p_b.add_argument("--kappa-prime", type=float, default=DEFAULT_KAPPA_PRIME)
    p_b.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p_b.add_argument("--x-max-n", type=float, default=1.0)
    p_b.add_argument("--kl-ref", type=float, default=0.0)
    p_b.add_argument("--l1-ref", type=float, default=0.0)
    p_b.add_argument("--out", default=None)
    p_b.set_defaults(func=_cmd_bounds)

    p_s = sub.add_parser("simulate", help="simulate one dataset from a spec")
    p_s.add_argument("--spec", required=True, help="JSON file with the SimSpec")
    p_s.add_argument("--seed", type=int, default=None)
    p_s.add_argument("--out", required=True)
    p_s.set_defaults(func=_cmd_simulate)

    p_f = sub.add_parser("fit", help="fit the penalized estimator on CSV data")
    p_f.add_argument("--design", required=True)
    p_f.add_argument("--responses", required=True)
    p_f.add_argument("--k", type=int, required=True)
    p_f.add_argument("--lambda", dest="lambda_", required=True,
                     help="comma-separated values or min=..,max=..,count=..")
    p_f.add_argument("--box", required=True)
    p_f.add_argument("--seed", type=int, default=0)
    p_f.add_argument("--restarts", type=int, default=2)
    p_f.add_argument("--max-em-iters", type=int, default=200)
    p_f.add_argument("--out", default=None)
    p_f.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReplicateError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigurationError, ValueError, OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
