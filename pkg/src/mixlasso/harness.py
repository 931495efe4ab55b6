"""Experiment driver: simulate, fit, estimate risk, compare to the bound.

One experiment draws a ground truth, replicates datasets from it, fits
the penalized estimator at each configured penalty, estimates the
average KL risk by Monte Carlo and compares the replicate mean against
the assembled risk bound.  Everything is a pure function of the master
seed; emitted CSV/JSON artifacts are byte-identical across reruns.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from typing import List, Tuple

import numpy as np

from .bounds import (
    DEFAULT_KAPPA,
    DEFAULT_KAPPA_PRIME,
    BoundReport,
    lambda_threshold,
    m_n,
    oracle_rhs,
)
from .divergence import kl_n
from .errors import ConfigurationError, ReplicateError
from .estimator import FitConfig, fit_lasso
from .model import Dataset, l1_norm
from .seeding import (
    STREAM_DESIGN,
    STREAM_FIT,
    STREAM_KL,
    STREAM_RESPONSES,
    STREAM_TRUTH,
    child_seed,
)
from .simulator import SimSpec, make_ground_truth, sample_design, sample_responses, truncation_event

FORMATS = ("csv", "json", "svg")

CSV_COLUMNS = (
    "replicate", "lambda", "kl_n_estimate", "kl_std_error",
    "l1_fitted", "event_T", "n_iters", "converged",
)


@dataclass(frozen=True)
class LambdaPolicy:
    """How the penalty values of an experiment are chosen."""

    kind: str = "theorem-threshold"
    multipliers: Tuple[float, ...] = (0.5, 1.0, 2.0)
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("theorem-threshold", "explicit"):
            raise ConfigurationError(f"unknown lambda policy kind {self.kind!r}")
        if self.kind == "explicit" and len(self.values) == 0:
            raise ConfigurationError("explicit lambda policy needs at least one value")
        if self.kind == "theorem-threshold" and len(self.multipliers) == 0:
            raise ConfigurationError("threshold lambda policy needs at least one multiplier")

    def resolve(self, box, n, p, q, k, kappa) -> List[float]:
        if self.kind == "explicit":
            return [float(v) for v in self.values]
        base = lambda_threshold(box, n, p, q, k, x_max=1.0, kappa=kappa)
        return [m * base for m in self.multipliers]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "multipliers": list(self.multipliers),
            "values": list(self.values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LambdaPolicy":
        return cls(
            kind=str(d.get("kind", "theorem-threshold")),
            multipliers=tuple(float(v) for v in d.get("multipliers", (0.5, 1.0, 2.0))),
            values=tuple(float(v) for v in d.get("values", ())),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one oracle-inequality experiment."""

    sim: SimSpec
    fit: FitConfig
    lambda_policy: LambdaPolicy
    n_replicates: int
    kl_samples: int = 20000
    kappa: float = DEFAULT_KAPPA
    kappa_prime: float = DEFAULT_KAPPA_PRIME
    output_dir: str = "."
    formats: Tuple[str, ...] = ("csv", "json", "svg")
    master_seed: int = 0
    truth_per_replicate: bool = False

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ConfigurationError("n_replicates must be >= 1")
        if self.kl_samples < 1:
            raise ConfigurationError("kl_samples must be >= 1")
        if len(self.formats) == 0:
            raise ConfigurationError("at least one output format is required")
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ConfigurationError(f"unknown output format {fmt!r}")

    def to_dict(self) -> dict:
        return {
            "sim": self.sim.to_dict(),
            "fit": {
                "max_em_iters": self.fit.max_em_iters,
                "em_tol": self.fit.em_tol,
                "inner_prox_iters": self.fit.inner_prox_iters,
                "prox_step_rule": self.fit.prox_step_rule,
                "n_restarts": self.fit.n_restarts,
                "init_strategy": self.fit.init_strategy,
            },
            "lambda_policy": self.lambda_policy.to_dict(),
            "n_replicates": self.n_replicates,
            "kl_samples": self.kl_samples,
            "kappa": self.kappa,
            "kappa_prime": self.kappa_prime,
            "master_seed": self.master_seed,
            "truth_per_replicate": self.truth_per_replicate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        sim = SimSpec.from_dict(d["sim"])
        fit_section = dict(d.get("fit", {}))
        fit = FitConfig(lambda_=0.0, box=sim.box, **fit_section)
        return cls(
            sim=sim,
            fit=fit,
            lambda_policy=LambdaPolicy.from_dict(d.get("lambda_policy", {})),
            n_replicates=int(d["n_replicates"]),
            kl_samples=int(d.get("kl_samples", 20000)),
            kappa=float(d.get("kappa", DEFAULT_KAPPA)),
            kappa_prime=float(d.get("kappa_prime", DEFAULT_KAPPA_PRIME)),
            output_dir=str(d.get("output_dir", ".")),
            formats=tuple(d.get("formats", ("csv", "json", "svg"))),
            master_seed=int(d.get("master_seed", 0)),
            truth_per_replicate=bool(d.get("truth_per_replicate", False)),
        )


@dataclass(frozen=True)
class ReplicateRow:
    """One fitted replicate at one penalty value."""

    replicate: int
    lambda_: float
    kl_n_estimate: float
    kl_std_error: float
    l1_fitted: float
    event_T: bool
    n_iters: int
    converged: bool


@dataclass(frozen=True)
class LambdaAggregate:
    """Replicate aggregate and bound comparison at one penalty value."""

    lambda_: float
    mean_kl: float
    pooled_se: float
    replicate_se: float
    bound_report: BoundReport
    inequality_satisfied: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "mean_kl": self.mean_kl,
            "pooled_se": self.pooled_se,
            "replicate_se": self.replicate_se,
            "bound_report": self.bound_report.to_dict(),
            "inequality_satisfied": self.inequality_satisfied,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Rows plus per-penalty aggregates of one experiment."""

    rows: List[ReplicateRow]
    aggregates: List[LambdaAggregate]
    truth_l1: float
    config: ExperimentConfig


def run_oracle_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all replicates and aggregate them against the risk bound.

    The truth is drawn once and shared across replicates unless
    ``truth_per_replicate`` is set.  Replicate sub-seeds derive from the
    master seed and the replicate index only, so results do not depend
    on execution order.
    """
    sim = config.sim
    box = sim.box
    master = config.master_seed
    lambdas = config.lambda_policy.resolve(box, sim.n, sim.p, sim.q, sim.k, config.kappa)
    level = m_n(box, sim.n)

    shared_truth = None
    if not config.truth_per_replicate:
        shared_truth = make_ground_truth(replace(sim, seed=child_seed(master, STREAM_TRUTH)))

    rows: List[ReplicateRow] = []
    kl_values = np.empty((config.n_replicates, len(lambdas)))
    kl_ses = np.empty_like(kl_values)
    truth_l1s = []
    for i in range(config.n_replicates):
        rep_seed = child_seed(master, STREAM_DESIGN, i)
        try:
            truth = shared_truth
            if truth is None:
                truth = make_ground_truth(replace(sim, seed=child_seed(master, STREAM_TRUTH, i)))
            design = sample_design(replace(sim, seed=rep_seed))
            responses, _ = sample_responses(truth, design, child_seed(master, STREAM_RESPONSES, i))
            data = Dataset(design=design, responses=responses)
            event = truncation_event(responses, level)
            truth_l1s.append(l1_norm(truth))
            for j, lam in enumerate(lambdas):
                cfg = replace(config.fit, lambda_=lam, box=box,
                              seed=child_seed(master, STREAM_FIT, i, j))
                fit = fit_lasso(data, sim.k, cfg)
                est = kl_n(truth, fit.params, design, config.kl_samples,
                           child_seed(master, STREAM_KL, i, j))
                kl_values[i, j] = est.value
                kl_ses[i, j] = est.std_error
                rows.append(ReplicateRow(
                    replicate=i,
                    lambda_=lam,
                    kl_n_estimate=est.value,
                    kl_std_error=est.std_error,
                    l1_fitted=l1_norm(fit.params),
                    event_T=event,
                    n_iters=fit.n_iters,
                    converged=fit.converged,
                ))
        except Exception as err:  # noqa: BLE001 - annotate replicate and re-raise
            raise ReplicateError(i, rep_seed, err) from err

    truth_l1 = float(np.mean(truth_l1s))
    aggregates = []
    R = config.n_replicates
    for j, lam in enumerate(lambdas):
        mean_kl = float(kl_values[:, j].mean())
        pooled_se = float(np.sqrt(np.sum(kl_ses[:, j] ** 2)) / R)
        replicate_se = float(np.std(kl_values[:, j], ddof=1) / np.sqrt(R)) if R > 1 else 0.0
        report = oracle_rhs(
            box, sim.n, sim.p, sim.q, sim.k, lam,
            kl_ref=0.0, l1_ref=truth_l1,
            kappa=config.kappa, kappa_prime=config.kappa_prime, x_max=1.0,
        )
        aggregates.append(LambdaAggregate(
            lambda_=lam,
            mean_kl=mean_kl,
            pooled_se=pooled_se,
            replicate_se=replicate_se,
            bound_report=report,
            inequality_satisfied=bool(mean_kl + 2.0 * pooled_se <= report.oracle_rhs_total),
            margin=report.oracle_rhs_total - mean_kl,
        ))
    return ExperimentReport(rows=rows, aggregates=aggregates, truth_l1=truth_l1, config=config)


# ---------------------------------------------------------------------------
# artifact emission
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([
                _format_cell(r.replicate),
                _format_cell(r.lambda_),
                _format_cell(r.kl_n_estimate),
                _format_cell(r.kl_std_error),
                _format_cell(r.l1_fitted),
                _format_cell(r.event_T),
                _format_cell(r.n_iters),
                _format_cell(r.converged),
            ])


def read_report_csv(path) -> List[ReplicateRow]:
    """Parse a rows CSV back into replicate rows (exact float round trip)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        rows = []
        for rec in reader:
            rows.append(ReplicateRow(
                replicate=int(rec[0]),
                lambda_=float(rec[1]),
                kl_n_estimate=float(rec[2]),
                kl_std_error=float(rec[3]),
                l1_fitted=float(rec[4]),
                event_T=rec[5] == "true",
                n_iters=int(rec[6]),
                converged=rec[7] == "true",
            ))
    return rows


def write_report_json(report: ExperimentReport, path) -> None:
    payload = {
        "config": report.config.to_dict(),
        "truth_l1": report.truth_l1,
        "lambdas": [a.lambda_ for a in report.aggregates],
        "aggregates": [a.to_dict() for a in report.aggregates],
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _svg_points(xs, ys, sx, sy) -> str:
    return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))


def write_report_svg(report: ExperimentReport, path) -> None:
    """Static line plot: mean KL and the bound total versus the penalty."""
    aggs = sorted(report.aggregates, key=lambda a: a.lambda_)
    lams = [a.lambda_ for a in aggs]
    kl = [max(a.mean_kl, 1e-12) for a in aggs]
    rhs = [max(a.bound_report.oracle_rhs_total, 1e-12) for a in aggs]

    width, height = 720, 480
    left, right, top, bottom = 90, 30, 40, 70
    x_lo, x_hi = min(lams), max(lams)
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo = min(kl + rhs) / 2.0
    y_hi = max(kl + rhs) * 2.0
    ly_lo, ly_hi = np.log10(y_lo), np.log10(y_hi)

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(v):
        return height - bottom - (np.log10(v) - ly_lo) / (ly_hi - ly_lo) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" '
        f'points="{_svg_points(lams, kl, sx, sy)}"/>',
        f'<polyline fill="none" stroke="#d62728" stroke-width="2" '
        f'points="{_svg_points(lams, rhs, sx, sy)}"/>',
        f'<text x="{left}" y="{top - 12}" font-size="14" fill="#1f77b4">mean KL risk</text>',
        f'<text x="{left + 160}" y="{top - 12}" font-size="14" fill="#d62728">risk bound</text>',
        f'<text x="{(left + width - right) / 2:.0f}" y="{height - 20}" '
        f'font-size="14" text-anchor="middle">penalty</text>',
        f'<text x="{left}" y="{height - bottom + 20}" font-size="12" '
        f'text-anchor="middle">{x_lo:.4g}</text>',
        f'<text x="{width - right}" y="{height - bottom + 20}" font-size="12" '
        f'text-anchor="middle">{x_hi:.4g}</text>',
        f'<text x="{left - 8}" y="{height - bottom}" font-size="12" '
        f'text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{left - 8}" y="{top + 4}" font-size="12" text-anchor="end">{y_hi:.3g}</text>',
        "</svg>",
    ]
    with open(path, "w") as f:
        f.write("\n".join(parts))
        f.write("\n")


def emit_report(report: ExperimentReport, config: ExperimentConfig) -> List[str]:
    """Write the configured artifact files; returns the written paths."""
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    written = []
    if "csv" in config.formats:
        path = os.path.join(out, "replicates.csv")
        write_report_csv(report, path)
        written.append(path)
    if "json" in config.formats:
        path = os.path.join(out, "report.json")
        write_report_json(report, path)
        written.append(path)
    if "svg" in config.formats:
        path = os.path.join(out, "risk_vs_penalty.svg")
        write_report_svg(report, path)
        written.append(path)
    return written
