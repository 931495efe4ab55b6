"""Kullback-Leibler divergences between conditional densities.

Closed form between single Gaussians, Monte Carlo between conditional
mixtures at one covariate value, and the fixed-design average over the
rows of a design matrix.  Monte Carlo runs are deterministic given the
seed; per-row sub-seeds are derived with a splittable scheme so the
average is identical whether rows are processed serially or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .model import ModelParams, _mixture_log_density_rows
from .seeding import STREAM_ROW, child_seed


@dataclass(frozen=True)
class KlEstimate:
    """Monte Carlo KL estimate in nats, with its standard error."""

    value: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not np.isfinite(self.value):
            raise ValueError(f"KL estimate is not finite: {self.value}")
        if self.std_error < 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def kl_gaussian(mean_a, cov_a, mean_b, cov_b) -> float:
    """Closed-form KL divergence ``KL(N(mean_a, cov_a) || N(mean_b, cov_b))``.

    Returns ``[tr(cov_b^{-1} cov_a) + (mean_b - mean_a)^T cov_b^{-1}
    (mean_b - mean_a) - q + log det cov_b - log det cov_a] / 2``.
    """
    mean_a = np.atleast_1d(np.asarray(mean_a, dtype=float))
    mean_b = np.atleast_1d(np.asarray(mean_b, dtype=float))
    cov_a = np.atleast_2d(np.asarray(cov_a, dtype=float))
    cov_b = np.atleast_2d(np.asarray(cov_b, dtype=float))
    q = mean_a.shape[0]
    if mean_b.shape != (q,) or cov_a.shape != (q, q) or cov_b.shape != (q, q):
        raise ShapeError("mean/covariance shapes are inconsistent")
    try:
        La = np.linalg.cholesky(cov_a)
        Lb = np.linalg.cholesky(cov_b)
    except np.linalg.LinAlgError:
        raise DomainError("covariance is not positive definite") from None
    # tr(cov_b^{-1} cov_a) via triangular solves against the Cholesky factor.
    W = np.linalg.solve(Lb, La)
    trace = float(np.sum(W * W))
    d = mean_b - mean_a
    z = np.linalg.solve(Lb, d)
    maha = float(z @ z)
    logdet_a = 2.0 * float(np.log(np.diag(La)).sum())
    logdet_b = 2.0 * float(np.log(np.diag(Lb)).sum())
    val = 0.5 * (trace + maha - q + logdet_b - logdet_a)
    return max(val, 0.0)


def _sample_conditional(
    params: ModelParams, x: np.ndarray, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw responses from the conditional mixture at covariate ``x``."""
    means = params.coefficients @ x                     # (k, q)
    chols = np.linalg.cholesky(params.covariances)      # (k, q, q)
    labels = rng.choice(params.k, size=n_samples, p=params.weights)
    z = rng.standard_normal((n_samples, params.q))
    y = means[labels] + np.einsum("nij,nj->ni", chols[labels], z)
    return y


def kl_conditional_mc(
    truth: ModelParams,
    candidate: ModelParams,
    x: np.ndarray,
    n_samples: int,
    seed: int,
) -> KlEstimate:
    """Monte Carlo estimate of ``KL(truth(.|x) || candidate(.|x))``.

    Samples responses from the truth (component draw, then a Gaussian) and
    averages the log-density ratio; unbiased, with the sample standard
    deviation over ``sqrt(n_samples)`` as the standard error.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if truth.q != candidate.q:
        raise ShapeError(f"response dimensions differ: {truth.q} vs {candidate.q}")
    x = np.asarray(x, dtype=float).reshape(-1)
    rng = np.random.default_rng(int(seed))
    y = _sample_conditional(truth, x, n_samples, rng)
    X = np.broadcast_to(x, (n_samples, x.shape[0]))
    diffs = _mixture_log_density_rows(truth, X, y) - _mixture_log_density_rows(candidate, X, y)
    value = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return KlEstimate(value=value, std_error=se, n_samples=n_samples, seed=int(seed))


def kl_n(
    truth: ModelParams,
    candidate: ModelParams,
    design: np.ndarray,
    n_samples: int,
    seed: int,
) -> KlEstimate:
    """Average conditional KL over the rows of a fixed design.

    Each row gets an independent sub-seed derived from ``(seed, row)``;
    the standard error is propagated as ``sqrt(sum se_i^2) / n``.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[0] < 1:
        raise ValueError("design must be a non-empty 2-d array")
    n = design.shape[0]
    values = np.empty(n)
    variances = np.empty(n)
    for i in range(n):
        row_seed = child_seed(seed, STREAM_ROW, i)
        est = kl_conditional_mc(truth, candidate, design[i], n_samples, row_seed)
        values[i] = est.value
        variances[i] = est.std_error**2
    return KlEstimate(
        value=float(values.mean()),
        std_error=float(np.sqrt(variances.sum()) / n),
        n_samples=int(n_samples),
        seed=int(seed),
    )
