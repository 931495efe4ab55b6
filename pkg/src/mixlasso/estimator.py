"""Penalized EM for the l1-regularized mixture-of-regressions estimator.

The objective is the average negative conditional log-likelihood plus
``lambda`` times the l1 norm of all regression coefficients, minimized
over the parameter box.  The E-step computes responsibilities in log
space; the M-step updates weights in closed form (floored at ``a_pi``),
coefficients by proximal gradient with soft-thresholding, and
covariances as responsibility-weighted residual covariances clipped to
the eigenvalue box.  A penalty path with warm starts and the zero
coefficient threshold are provided on top.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateComponentError, ShapeError
from .model import (
    Dataset,
    ModelParams,
    ParameterBox,
    _mixture_log_density_rows,
    _project_weights,
    clip_covariance_eigenvalues,
    component_log_densities,
    l1_norm,
    project_to_box,
)
from .seeding import (
    STREAM_INIT,
    STREAM_REINIT,
    STREAM_RESTART,
    STREAM_WARM,
    child_seed,
    rng_for,
)

_STEP_RULES = ("fixed", "backtracking")
_INIT_STRATEGIES = ("random-in-box", "responsibility-split")

# Tolerance for the per-step non-increase assertion on the objective trace.
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class FitConfig:
    """Solver settings for one penalized fit."""

    lambda_: float
    box: ParameterBox
    max_em_iters: int = 200
    em_tol: float = 1e-8
    inner_prox_iters: int = 25
    prox_step_rule: str = "backtracking"
    n_restarts: int = 2
    init_strategy: str = "responsibility-split"
    seed: int = 0

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lambda_}")
        if self.em_tol <= 0:
            raise ConfigurationError(f"em_tol must be > 0, got {self.em_tol}")
        if self.max_em_iters < 1 or self.inner_prox_iters < 1 or self.n_restarts < 1:
            raise ConfigurationError("iteration caps and restart count must be >= 1")
        if self.prox_step_rule not in _STEP_RULES:
            raise ConfigurationError(f"prox_step_rule must be one of {_STEP_RULES}")
        if self.init_strategy not in _INIT_STRATEGIES:
            raise ConfigurationError(f"init_strategy must be one of {_INIT_STRATEGIES}")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one penalized fit."""

    params: ModelParams
    lambda_: float
    objective_trace: np.ndarray
    converged: bool
    n_iters: int
    slack_eta: float
    restart_index: int

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "lambda": self.lambda_,
            "objective_trace": [float(v) for v in self.objective_trace],
            "converged": self.converged,
            "n_iters": self.n_iters,
            "slack_eta": self.slack_eta,
            "restart_index": self.restart_index,
        }


@dataclass(frozen=True)
class PathResult:
    """Fits along a descending penalty grid plus the zero threshold."""

    fits: List[FitResult]
    lambda_max: float
    null_fit: FitResult


def penalized_nll(params: ModelParams, data: Dataset, lambda_: float) -> float:
    """Average negative log-likelihood plus ``lambda`` times the l1 norm."""
    logs = _mixture_log_density_rows(params, data.design, data.responses)
    nll = -float(np.mean(logs))
    penalty = l1_norm(params)
    return nll if penalty == 0.0 else nll + lambda_ * penalty


def e_step(params: ModelParams, data: Dataset) -> np.ndarray:
    """Responsibility matrix; each row sums to one, computed in log space."""
    comp = component_log_densities(params, data.design, data.responses)
    logp = comp + np.log(params.weights)[None, :]
    mx = logp.max(axis=1, keepdims=True)
    shifted = np.where(np.isfinite(mx), logp - mx, 0.0)
    w = np.exp(shifted)
    return w / w.sum(axis=1, keepdims=True)


def _soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _prox_coefficients(
    B0: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    w: np.ndarray,
    sigma_inv: np.ndarray,
    threshold: float,
    rule: str,
    iters: int,
) -> np.ndarray:
    """Proximal-gradient descent on one component's coefficient subproblem.

    Minimizes ``(1/2 n_r) sum_i w_i (y_i - B x_i)' sigma_inv (y_i - B x_i)
    + threshold * |B|_1``; each accepted step does not increase this
    composite objective.
    """
    n_r = float(w.sum())
    S = (X * w[:, None]).T @ X / n_r
    lip = float(np.linalg.eigvalsh(S)[-1]) * float(np.linalg.eigvalsh(sigma_inv)[-1])
    lip = max(lip, 1e-12)
    base_step = 1.0 / lip

    def smooth(B):
        E = Y - X @ B.T
        return 0.5 * float(np.einsum("ni,ij,nj,n->", E, sigma_inv, E, w)) / n_r

    def grad(B):
        E = Y - X @ B.T
        return -(sigma_inv @ (E.T * w) @ X) / n_r

    B = np.asarray(B0, dtype=float).copy()
    g_val = smooth(B)
    step = base_step
    for _ in range(iters):
        G = grad(B)
        if rule == "fixed":
            step = base_step
            Bn = _soft_threshold(B - step * G, step * threshold)
            g_new = smooth(Bn)
        else:
            step = min(step * 2.0, 1e6 * base_step)
            while True:
                Bn = _soft_threshold(B - step * G, step * threshold)
                D = Bn - B
                g_new = smooth(Bn)
                bound = g_val + float(np.sum(G * D)) + float(np.sum(D * D)) / (2.0 * step)
                if g_new <= bound + 1e-12 or step <= base_step:
                    break
                step = max(step * 0.5, base_step)
        move = float(np.max(np.abs(Bn - B)))
        B = Bn
        g_val = g_new
        if move <= 1e-12 * (1.0 + float(np.max(np.abs(B)))):
            break
    return B


def m_step(
    resp: np.ndarray,
    data: Dataset,
    lambda_: float,
    box: ParameterBox,
    prev: ModelParams,
    config: FitConfig,
    freeze_coefficients: bool = False,
) -> ModelParams:
    """One penalized M-step from the given responsibilities.

    Weights are the responsibility column means floored at ``a_pi``;
    coefficients take proximal-gradient steps (threshold ``lambda * n /
    n_r`` so the component subproblems sum to the global objective) with
    the previous covariances held fixed; covariances are the weighted
    residual covariances clipped to the eigenvalue box.
    """
    resp = np.asarray(resp, dtype=float)
    n, k = resp.shape
    if n != data.n or k != prev.k:
        raise ShapeError(f"responsibilities {resp.shape} do not match data/model")
    totals = resp.sum(axis=0)
    weak = int(np.argmin(totals))
    if totals[weak] < 1e-8:
        raise DegenerateComponentError(weak, float(totals[weak]))

    weights = _project_weights(totals / n, box.a_pi)

    X, Y = data.design, data.responses
    B = np.array(prev.coefficients)
    if not freeze_coefficients:
        for r in range(k):
            sigma_inv = np.linalg.inv(prev.covariances[r])
            threshold = lambda_ * n / totals[r]
            B[r] = _prox_coefficients(
                B[r], X, Y, resp[:, r], sigma_inv, threshold,
                config.prox_step_rule, config.inner_prox_iters,
            )

    covs = np.empty_like(np.asarray(prev.covariances))
    lo, hi = box.eig_lo, box.eig_hi
    for r in range(k):
        E = Y - X @ B[r].T
        S = (E * resp[:, r][:, None]).T @ E / totals[r]
        covs[r] = clip_covariance_eigenvalues(S, lo, hi)

    params = ModelParams(weights=weights, coefficients=B, covariances=covs)
    return project_to_box(params, box, design=X)


def _reinit_responsibilities(
    resp: np.ndarray, component: int, rng: np.random.Generator
) -> np.ndarray:
    """Give a collapsed component a fresh random share of every point."""
    resp = np.array(resp)
    k = resp.shape[1]
    resp[:, component] = rng.uniform(0.5, 1.5, size=resp.shape[0]) / k
    return resp / resp.sum(axis=1, keepdims=True)


def run_em(
    data: Dataset,
    init_params: ModelParams,
    config: FitConfig,
    seed: int = 0,
    freeze_coefficients: bool = False,
    restart_index: int = 0,
) -> FitResult:
    """Alternate E and M steps from explicit initial parameters.

    The recorded objective trace is non-increasing: a candidate M-step
    that would increase the penalized objective (possible only through
    the box projections) is rejected and the iteration stops at the
    previous parameters.  Components that lose all responsibility are
    re-initialized at most five times, then reported as a hard error.
    """
    params = project_to_box(init_params, config.box, design=data.design)
    trace = [penalized_nll(params, data, config.lambda_)]
    converged = False
    reinits = 0
    for _ in range(config.max_em_iters):
        resp = e_step(params, data)
        while True:
            try:
                candidate = m_step(
                    resp, data, config.lambda_, config.box, params, config,
                    freeze_coefficients=freeze_coefficients,
                )
                break
            except DegenerateComponentError as err:
                reinits += 1
                if reinits > 5:
                    raise
                warnings.warn(
                    f"re-initializing degenerate component {err.component} "
                    f"(attempt {reinits})",
                    RuntimeWarning,
                )
                rng = rng_for(seed, STREAM_REINIT, reinits)
                resp = _reinit_responsibilities(resp, err.component, rng)
        objective = penalized_nll(candidate, data, config.lambda_)
        if objective > trace[-1] + 1e-12:
            converged = True
            break
        params = candidate
        trace.append(objective)
        if trace[-2] - trace[-1] <= config.em_tol * (1.0 + abs(trace[-1])):
            converged = True
            break
    return FitResult(
        params=params,
        lambda_=config.lambda_,
        objective_trace=np.asarray(trace),
        converged=converged,
        n_iters=len(trace) - 1,
        slack_eta=0.0,
        restart_index=restart_index,
    )


def _sorted_components(params: ModelParams) -> ModelParams:
    """Deterministic labels: sort by the first coefficient row's l1 norm."""
    if params.k == 1:
        return params
    norms = np.abs(params.coefficients[:, 0, :]).sum(axis=1)
    order = np.argsort(-norms, kind="stable")
    if np.array_equal(order, np.arange(params.k)):
        return params
    return ModelParams(
        weights=params.weights[order],
        coefficients=params.coefficients[order],
        covariances=params.covariances[order],
    )


def _fit_single_component(data: Dataset, config: FitConfig) -> FitResult:
    """Plain k=1 penalized fit started from zero coefficients."""
    q, p = data.q, data.p
    cov0 = _pooled_covariance(data.responses, config.box)
    init = ModelParams(
        weights=np.ones(1),
        coefficients=np.zeros((1, q, p)),
        covariances=cov0[None, :, :],
    )
    cfg = replace(config, n_restarts=1)
    return run_em(data, init, cfg, seed=child_seed(config.seed, STREAM_INIT))


def _pooled_covariance(Y: np.ndarray, box: ParameterBox) -> np.ndarray:
    S = np.atleast_2d(np.cov(Y, rowvar=False)) if Y.shape[0] > 1 else np.eye(Y.shape[1])
    return clip_covariance_eigenvalues(S, box.eig_lo, box.eig_hi)


def _split_responsibilities(
    E: np.ndarray, k: int, rng: Optional[np.random.Generator]
) -> np.ndarray:
    """Soft split of residuals along their top principal direction."""
    n, q = E.shape
    C = np.atleast_2d(np.cov(E, rowvar=False)) if n > 1 else np.eye(q)
    _, vecs = np.linalg.eigh(C)
    scores = E @ vecs[:, -1]
    sd = float(scores.std()) + 1e-12
    centers = float(scores.mean()) + 0.5 * sd * np.linspace(-1.0, 1.0, k)
    logr = -0.5 * ((scores[:, None] - centers[None, :]) / (0.5 * sd)) ** 2
    if rng is not None:
        logr = logr + 0.3 * rng.standard_normal(logr.shape)
    logr -= logr.max(axis=1, keepdims=True)
    resp = np.exp(logr)
    resp /= resp.sum(axis=1, keepdims=True)
    # Blend with uniform responsibilities so no component starts empty.
    return 0.95 * resp + 0.05 / k


def _initial_params(
    data: Dataset, k: int, config: FitConfig, restart: int
) -> ModelParams:
    """Initial parameters for one restart under the configured strategy."""
    box = config.box
    rng = rng_for(config.seed, STREAM_RESTART, restart)
    if config.init_strategy == "random-in-box":
        weights = _project_weights(rng.dirichlet(np.ones(k)), box.a_pi)
        lo, hi = box.eig_lo, box.eig_hi
        covs = np.zeros((k, data.q, data.q))
        for r in range(k):
            covs[r] = np.diag(np.exp(rng.uniform(np.log(lo), np.log(hi), size=data.q)))
        scale = 0.3 * box.A_beta / np.sqrt(data.p)
        B = scale * rng.standard_normal((k, data.q, data.p))
        params = ModelParams(weights=weights, coefficients=B, covariances=covs)
        return project_to_box(params, box, design=data.design)

    base = _fit_single_component(data, config)
    if k == 1:
        return base.params
    E = data.responses - data.design @ base.params.coefficients[0].T
    resp = _split_responsibilities(E, k, rng if restart > 0 else None)
    prev = ModelParams(
        weights=np.full(k, 1.0 / k),
        coefficients=np.broadcast_to(base.params.coefficients[0], (k, data.q, data.p)).copy(),
        covariances=np.broadcast_to(base.params.covariances[0], (k, data.q, data.q)).copy(),
    )
    return m_step(resp, data, config.lambda_, box, prev, config)


def _finalize(best: FitResult, objectives: Sequence[float], index: int) -> FitResult:
    spread = float(np.median(objectives) - np.min(objectives))
    return replace(
        best,
        params=_sorted_components(best.params),
        slack_eta=max(spread, 0.0),
        restart_index=index,
    )


def _zero_coefficient_result(null_fit: FitResult, data: Dataset, config: FitConfig) -> FitResult:
    """Re-express the zero-coefficient fit at the requested penalty."""
    objective = penalized_nll(null_fit.params, data, config.lambda_)
    return FitResult(
        params=null_fit.params,
        lambda_=config.lambda_,
        objective_trace=np.asarray([objective]),
        converged=True,
        n_iters=0,
        slack_eta=0.0,
        restart_index=0,
    )


def fit_lasso(data: Dataset, k: int, config: FitConfig) -> FitResult:
    """Best of ``n_restarts`` independent penalized EM runs.

    The restart with the lowest penalized objective wins, ties broken by
    restart index; ``slack_eta`` records the spread between the median
    and best restart objectives as an optimization-quality diagnostic.
    Penalties at or above the zero-coefficient threshold (the gradient
    sup-norm of the zero-coefficient fit, where all-zero coefficients
    satisfy the subgradient stationarity condition) return that fit
    directly, so the sparsity contract holds exactly.
    """
    if data.n < k:
        raise ConfigurationError(f"need n >= k, got n={data.n}, k={k}")
    if config.lambda_ > 0.0:
        null_fit = fit_null_model(data, k, config)
        lam_max = zero_coefficient_gradient_sup(null_fit.params, data)
        if config.lambda_ >= lam_max:
            return _zero_coefficient_result(null_fit, data, config)
    results = []
    for r in range(config.n_restarts):
        init = _initial_params(data, k, config, r)
        results.append(
            run_em(data, init, config,
                   seed=child_seed(config.seed, STREAM_RESTART, r),
                   restart_index=r)
        )
    objectives = [res.objective for res in results]
    best_idx = int(np.argmin(objectives))
    return _finalize(results[best_idx], objectives, best_idx)


def fit_null_model(data: Dataset, k: int, config: FitConfig) -> FitResult:
    """Fit the zero-coefficient mixture (weights and covariances only)."""
    box = config.box
    cov0 = _pooled_covariance(data.responses, box)
    if k == 1:
        init = ModelParams(
            weights=np.ones(1),
            coefficients=np.zeros((1, data.q, data.p)),
            covariances=cov0[None, :, :],
        )
    else:
        resp = _split_responsibilities(data.responses, k, None)
        prev = ModelParams(
            weights=np.full(k, 1.0 / k),
            coefficients=np.zeros((k, data.q, data.p)),
            covariances=np.broadcast_to(cov0, (k, data.q, data.q)).copy(),
        )
        init = m_step(resp, data, 0.0, box, prev, config, freeze_coefficients=True)
    cfg = replace(config, lambda_=0.0)
    return run_em(
        data, init, cfg,
        seed=child_seed(config.seed, STREAM_INIT, 1),
        freeze_coefficients=True,
    )


def zero_coefficient_gradient_sup(params: ModelParams, data: Dataset) -> float:
    """Sup-norm of the smooth objective gradient in the coefficients.

    At a zero-coefficient stationary state this is the smallest penalty
    at which all-zero coefficients satisfy the subgradient condition.
    """
    resp = e_step(params, data)
    X, Y = data.design, data.responses
    sup = 0.0
    for r in range(params.k):
        sigma_inv = np.linalg.inv(params.covariances[r])
        E = Y - X @ params.coefficients[r].T
        G = sigma_inv @ (E.T * resp[:, r]) @ X / data.n
        sup = max(sup, float(np.abs(G).max()))
    return sup


def lambda_path(
    data: Dataset, k: int, grid: Sequence[float], config: FitConfig
) -> PathResult:
    """Fit along a strictly descending penalty grid with warm starts.

    Grid values at or above the zero-coefficient threshold yield the
    zero-coefficient fit, exactly as :func:`fit_lasso` does.  Below the
    threshold, the candidates per grid value are the standard restarts
    (same seeds as :func:`fit_lasso`) plus the warm start from the
    previous grid value's winner; the lowest objective wins, so with a
    single grid value the result is bit-identical to :func:`fit_lasso`.
    """
    grid = [float(v) for v in grid]
    if len(grid) == 0:
        raise ValueError("penalty grid is empty")
    if any(v < 0 for v in grid):
        raise ValueError("penalty grid values must be >= 0")
    if any(a <= b for a, b in zip(grid, grid[1:])):
        raise ValueError("penalty grid must be strictly descending")

    null_fit = fit_null_model(data, k, config)
    lam_max = zero_coefficient_gradient_sup(null_fit.params, data)

    fits: List[FitResult] = []
    previous: Optional[FitResult] = None
    for j, lam in enumerate(grid):
        cfg = replace(config, lambda_=lam)
        if lam > 0.0 and lam >= lam_max:
            best = _zero_coefficient_result(null_fit, data, cfg)
            fits.append(best)
            previous = best
            continue
        candidates = []
        for r in range(cfg.n_restarts):
            init = _initial_params(data, k, cfg, r)
            candidates.append(
                run_em(data, init, cfg,
                       seed=child_seed(cfg.seed, STREAM_RESTART, r),
                       restart_index=r)
            )
        if previous is not None:
            candidates.append(
                run_em(data, previous.params, cfg,
                       seed=child_seed(cfg.seed, STREAM_WARM, j),
                       restart_index=cfg.n_restarts)
            )
        objectives = [c.objective for c in candidates]
        best_idx = int(np.argmin(objectives))
        best = _finalize(candidates[best_idx], objectives, candidates[best_idx].restart_index)
        fits.append(best)
        previous = best
    return PathResult(fits=fits, lambda_max=lam_max, null_fit=null_fit)
