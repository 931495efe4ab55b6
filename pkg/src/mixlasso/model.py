"""Mixture-of-Gaussian-regressions model: parameters, density, penalty, box.

The conditional density of a response ``y`` in ``R^q`` given covariates
``x`` in ``R^p`` is a ``k``-component mixture

    s(y | x) = sum_r  pi_r * N(y; B_r x, Sigma_r)

with mixture weights ``pi``, per-component coefficient matrices ``B_r``
(shape ``q x p``) and covariances ``Sigma_r`` (``q x q`` SPD).  All
parameters live in a compact box (:class:`ParameterBox`); the box
convention used throughout the package is:

* weights: ``pi_r >= a_pi``;
* covariances: eigenvalues of ``Sigma_r`` in ``[1/A_sigma, A_sigma_tilde]``
  (equivalent to the entrywise bounds in the diagonal case);
* means: ``max_i |B_{r,z} . x_i| <= A_beta`` over the design rows, or the
  l1 envelope ``||B_{r,z}||_1 <= A_beta`` when no design is given (valid
  for any design with entries in ``[-1, 1]``).

All types are immutable values; every operation here is a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

LOG_2PI = float(np.log(2.0 * np.pi))

# Component log-densities more than this far below the row maximum are
# dropped from the log-sum-exp; they are below the double-precision
# contribution threshold.
_LSE_DROP = 700.0

_WEIGHT_TOL = 1e-12
_SYMMETRY_TOL = 1e-10
_REL_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector of a k-component mixture of Gaussian regressions.

    Attributes
    ----------
    weights : (k,) mixture proportions, positive, summing to one.
    coefficients : (k, q, p) regression coefficient matrices, one per component.
    covariances : (k, q, q) symmetric positive-definite covariance matrices.
    """

    weights: np.ndarray
    coefficients: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = _readonly(self.weights)
        B = _readonly(self.coefficients)
        S = _readonly(self.covariances)
        if w.ndim != 1 or B.ndim != 3 or S.ndim != 3:
            raise ShapeError(
                f"expected weights (k,), coefficients (k,q,p), covariances (k,q,q); "
                f"got {w.shape}, {B.shape}, {S.shape}"
            )
        k, q, p = B.shape
        if k < 1 or q < 1 or p < 1:
            raise ShapeError(f"k, q, p must all be >= 1; got ({k}, {q}, {p})")
        if w.shape != (k,) or S.shape != (k, q, q):
            raise ShapeError(
                f"inconsistent shapes: weights {w.shape}, coefficients {B.shape}, "
                f"covariances {S.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(B).all() and np.isfinite(S).all()):
            raise DomainError("parameters contain non-finite entries")
        if np.any(w <= 0.0):
            raise DomainError("mixture weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > _WEIGHT_TOL:
            raise DomainError(f"mixture weights sum to {w.sum()!r}, not 1")
        for r in range(k):
            asym = float(np.max(np.abs(S[r] - S[r].T))) if q > 1 else 0.0
            if asym > _SYMMETRY_TOL:
                raise DomainError(f"covariance {r} is asymmetric (max asymmetry {asym:.2e})")
            try:
                np.linalg.cholesky(S[r])
            except np.linalg.LinAlgError:
                raise DomainError(f"covariance {r} is not positive definite") from None
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "coefficients", B)
        object.__setattr__(self, "covariances", S)

    @property
    def k(self) -> int:
        return self.coefficients.shape[0]

    @property
    def q(self) -> int:
        return self.coefficients.shape[1]

    @property
    def p(self) -> int:
        return self.coefficients.shape[2]

    def to_dict(self) -> dict:
        """JSON-ready dict with row-major nested lists per component."""
        return {
            "k": self.k,
            "p": self.p,
            "q": self.q,
            "weights": self.weights.tolist(),
            "coefficients": self.coefficients.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        k, p, q = int(d["k"]), int(d["p"]), int(d["q"])
        w = np.asarray(d["weights"], dtype=float)
        B = np.asarray(d["coefficients"], dtype=float)
        S = np.asarray(d["covariances"], dtype=float)
        if w.shape != (k,) or B.shape != (k, q, p) or S.shape != (k, q, q):
            raise ShapeError(
                f"serialized shapes {w.shape}, {B.shape}, {S.shape} do not match "
                f"declared (k={k}, p={p}, q={q})"
            )
        return cls(weights=w, coefficients=B, covariances=S)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ParameterBox:
    """Bound constants defining the compact parameter set.

    ``a_beta``/``A_beta`` bound the magnitude of the component mean
    coordinates, ``a_sigma``/``A_sigma`` bound the inverse-covariance
    scale, ``a_sigma_tilde``/``A_sigma_tilde`` bound the covariance scale
    and ``a_pi`` is the smallest admissible mixture weight.  ``a_beta``
    may be zero: a strictly positive lower mean bound would exclude every
    sparse model, and it enters the bound formulas only through terms
    that are monotone in it.
    """

    a_beta: float
    A_beta: float
    a_sigma: float
    A_sigma: float
    a_sigma_tilde: float
    A_sigma_tilde: float
    a_pi: float

    def __post_init__(self):
        if not (0.0 <= self.a_beta <= self.A_beta):
            raise ConfigurationError(f"need 0 <= a_beta <= A_beta, got {self.a_beta}, {self.A_beta}")
        if not (0.0 < self.a_sigma <= self.A_sigma):
            raise ConfigurationError(f"need 0 < a_sigma <= A_sigma, got {self.a_sigma}, {self.A_sigma}")
        if not (0.0 < self.a_sigma_tilde <= self.A_sigma_tilde):
            raise ConfigurationError(
                f"need 0 < a_sigma_tilde <= A_sigma_tilde, got "
                f"{self.a_sigma_tilde}, {self.A_sigma_tilde}"
            )
        if not (0.0 < self.a_pi <= 1.0):
            raise ConfigurationError(f"need 0 < a_pi <= 1, got {self.a_pi}")
        if 1.0 / self.A_sigma > self.A_sigma_tilde * (1.0 + _REL_TOL):
            raise ConfigurationError(
                "empty eigenvalue box: 1/A_sigma > A_sigma_tilde "
                f"({1.0 / self.A_sigma} > {self.A_sigma_tilde})"
            )

    @property
    def eig_lo(self) -> float:
        """Lower bound on covariance eigenvalues."""
        return 1.0 / self.A_sigma

    @property
    def eig_hi(self) -> float:
        """Upper bound on covariance eigenvalues."""
        return self.A_sigma_tilde

    def to_dict(self) -> dict:
        return {
            "a_beta": self.a_beta,
            "A_beta": self.A_beta,
            "a_sigma": self.a_sigma,
            "A_sigma": self.A_sigma,
            "a_sigma_tilde": self.a_sigma_tilde,
            "A_sigma_tilde": self.A_sigma_tilde,
            "a_pi": self.a_pi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterBox":
        return cls(**{k: float(d[k]) for k in (
            "a_beta", "A_beta", "a_sigma", "A_sigma",
            "a_sigma_tilde", "A_sigma_tilde", "a_pi")})


@dataclass(frozen=True)
class Dataset:
    """Fixed design matrix plus observed responses."""

    design: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = _readonly(self.design)
        Y = _readonly(self.responses)
        if X.ndim != 2 or Y.ndim != 2:
            raise ShapeError(f"design and responses must be 2-d, got {X.shape}, {Y.shape}")
        if X.shape[0] != Y.shape[0]:
            raise ShapeError(f"row counts differ: design {X.shape[0]}, responses {Y.shape[0]}")
        if X.shape[0] < 1:
            raise ShapeError("need at least one observation")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DomainError("dataset contains non-finite entries")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "responses", Y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @property
    def q(self) -> int:
        return self.responses.shape[1]


@dataclass(frozen=True)
class BoxViolation:
    """One violated box constraint, naming the component it occurred in."""

    constraint: str
    component: int
    value: float
    bound: float

    def __str__(self):
        return (
            f"component {self.component}: {self.constraint} violated "
            f"(value {self.value:.6g} vs bound {self.bound:.6g})"
        )


# ---------------------------------------------------------------------------
# density and gradients
# ---------------------------------------------------------------------------

def component_log_densities(params: ModelParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Per-component Gaussian log-densities, without mixture weights.

    Parameters
    ----------
    X : (n, p) design rows.
    Y : (n, q) responses.

    Returns
    -------
    (n, k) array with entry ``[i, r] = log N(y_i; B_r x_i, Sigma_r)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2:
        raise ShapeError("X and Y must be 2-d")
    if X.shape[1] != params.p or Y.shape[1] != params.q or X.shape[0] != Y.shape[0]:
        raise ShapeError(
            f"shape mismatch: X {X.shape}, Y {Y.shape} vs model (p={params.p}, q={params.q})"
        )
    n = X.shape[0]
    out = np.empty((n, params.k))
    for r in range(params.k):
        E = Y - X @ params.coefficients[r].T
        try:
            L = np.linalg.cholesky(params.covariances[r])
        except np.linalg.LinAlgError:
            raise DomainError(f"covariance {r} is not positive definite") from None
        Z = np.linalg.solve(L, E.T)
        quad = np.einsum("ji,ji->i", Z, Z)
        logdet = 2.0 * float(np.log(np.diag(L)).sum())
        out[:, r] = -0.5 * (params.q * LOG_2PI + logdet + quad)
    return out


def _mixture_log_density_rows(params: ModelParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise mixture log-density via a max-shifted log-sum-exp."""
    comp = component_log_densities(params, X, Y) + np.log(params.weights)[None, :]
    mx = np.max(comp, axis=1)
    out = np.full(X.shape[0], -np.inf)
    ok = np.isfinite(mx)
    if np.any(ok):
        shifted = comp[ok] - mx[ok, None]
        shifted = np.where(shifted < -_LSE_DROP, -np.inf, shifted)
        out[ok] = mx[ok] + np.log(np.exp(shifted).sum(axis=1))
    return out


def mixture_log_density(params: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Log of the conditional mixture density ``log s(y | x)``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return float(_mixture_log_density_rows(params, x, y)[0])


def l1_norm(params: ModelParams) -> float:
    """Sum of absolute values of all regression coefficients.

    Weights and covariances are excluded; only the coefficient tensor is
    penalized.
    """
    return float(np.abs(params.coefficients).sum())


@dataclass(frozen=True)
class LogDensityGradient:
    """Partial derivatives of the mixture log-density at one ``(x, y)``.

    ``means[r]`` differentiates with respect to the component mean vector
    ``B_r x``, ``covariances[r]`` with respect to the entries of
    ``Sigma_r`` (entries treated as free variables), ``weights[r]`` with
    respect to ``pi_r`` (no simplex constraint applied).
    """

    means: np.ndarray        # (k, q)
    covariances: np.ndarray  # (k, q, q)
    weights: np.ndarray      # (k,)

    def max_abs(self) -> float:
        return max(
            float(np.abs(self.means).max()),
            float(np.abs(self.covariances).max()),
            float(np.abs(self.weights).max()),
        )


def log_density_gradient(params: ModelParams, x: np.ndarray, y: np.ndarray) -> LogDensityGradient:
    """Analytic score of ``log s(y | x)`` in means, covariance entries, weights.

    With responsibilities ``t_r`` and residuals ``e_r = y - B_r x``:

    * mean:        ``t_r * Sigma_r^{-1} e_r``
    * covariance:  ``t_r * ( -Sigma_r^{-1} + (Sigma_r^{-1} e_r)(Sigma_r^{-1} e_r)^T ) / 2``
    * weight:      ``t_r / pi_r``
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y1 = np.asarray(y, dtype=float).reshape(1, -1)
    comp = component_log_densities(params, x, y1)[0] + np.log(params.weights)
    mx = float(np.max(comp))
    if not np.isfinite(mx):
        raise DomainError("mixture density is zero at (x, y); gradient undefined")
    resp = np.exp(comp - mx)
    resp /= resp.sum()
    k, q = params.k, params.q
    g_mean = np.empty((k, q))
    g_cov = np.empty((k, q, q))
    g_w = np.empty(k)
    yv = y1[0]
    for r in range(k):
        e = yv - params.coefficients[r] @ x[0]
        Sinv = np.linalg.inv(params.covariances[r])
        se = Sinv @ e
        g_mean[r] = resp[r] * se
        g_cov[r] = resp[r] * 0.5 * (np.outer(se, se) - Sinv)
        g_w[r] = resp[r] / params.weights[r]
    return LogDensityGradient(means=g_mean, covariances=g_cov, weights=g_w)


def gradient_bound_constant(box: ParameterBox, q: int, y_sup: float) -> float:
    """Envelope on the log-density score for responses with ``|y|_inf <= y_sup``.

    Evaluates ``max(1/a_pi, A_sigma + (y_sup + A_beta)^2 A_sigma^2 / 2,
    q (y_sup + A_beta) A_sigma / 2)``.
    """
    if y_sup < 0:
        raise DomainError(f"y_sup must be >= 0, got {y_sup}")
    reach = y_sup + box.A_beta
    return max(
        1.0 / box.a_pi,
        box.A_sigma + 0.5 * reach * reach * box.A_sigma * box.A_sigma,
        0.5 * q * reach * box.A_sigma,
    )


# ---------------------------------------------------------------------------
# box projection and membership
# ---------------------------------------------------------------------------

def _project_weights(w: np.ndarray, a_pi: float) -> np.ndarray:
    """Clip weights to ``>= a_pi`` and renormalize the free mass.

    Entries that fall below ``a_pi`` are pinned there; the remaining mass
    is distributed proportionally over the others, iterating until no new
    entry drops below the floor.
    """
    k = w.shape[0]
    if k * a_pi > 1.0 + _WEIGHT_TOL:
        raise ConfigurationError(f"infeasible weight box: k * a_pi = {k * a_pi} > 1")
    w = np.maximum(np.asarray(w, dtype=float).copy(), 0.0)
    fixed = np.zeros(k, dtype=bool)
    for _ in range(k):
        free = ~fixed
        budget = 1.0 - a_pi * float(fixed.sum())
        total = float(w[free].sum())
        if total <= 0.0:
            w[free] = budget / max(int(free.sum()), 1)
        else:
            w[free] *= budget / total
        newly = free & (w < a_pi - _WEIGHT_TOL)
        if not newly.any():
            break
        fixed |= newly
        w[fixed] = a_pi
    w = np.maximum(w, a_pi)
    return w / w.sum()


def clip_covariance_eigenvalues(S: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Symmetrize, then clip the eigenvalues of ``S`` into ``[lo, hi]``."""
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    clipped = np.clip(vals, lo, hi)
    M = (vecs * clipped) @ vecs.T
    return 0.5 * (M + M.T)


def _row_mean_caps(B: np.ndarray, design: Optional[np.ndarray]) -> np.ndarray:
    """Per-(component, response) caps on the realized mean magnitude.

    With a design: ``max_i |B_{r,z} . x_i|``.  Without: the l1 norm of the
    row, an envelope valid for any design with entries in ``[-1, 1]``.
    """
    if design is None:
        return np.abs(B).sum(axis=2)
    M = np.einsum("rzp,ip->rzi", B, design)
    return np.abs(M).max(axis=2)


def project_to_box(
    params: ModelParams, box: ParameterBox, design: Optional[np.ndarray] = None
) -> ModelParams:
    """Return the nearest feasible parameters under the box convention.

    Weights are floored at ``a_pi`` and renormalized, covariance
    eigenvalues are clipped into ``[1/A_sigma, A_sigma_tilde]``, and
    coefficient rows are rescaled so the realized mean bound holds.  The
    lower mean bound ``a_beta`` is not enforced (it is non-convex); the
    membership check reports it instead.  Feasible inputs are returned
    unchanged, so projecting twice equals projecting once.
    """
    if params.k * box.a_pi > 1.0 + _WEIGHT_TOL:
        raise ConfigurationError(f"infeasible box: k * a_pi = {params.k * box.a_pi} > 1")
    changed = False

    w = params.weights
    if float(w.min()) < box.a_pi - _WEIGHT_TOL:
        w = _project_weights(w, box.a_pi)
        changed = True

    lo, hi = box.eig_lo, box.eig_hi
    S = params.covariances
    new_S = None
    for r in range(params.k):
        vals = np.linalg.eigvalsh(S[r])
        if vals[0] < lo * (1.0 - _REL_TOL) or vals[-1] > hi * (1.0 + _REL_TOL):
            if new_S is None:
                new_S = np.array(S)
            new_S[r] = clip_covariance_eigenvalues(S[r], lo, hi)
    if new_S is not None:
        S = new_S
        changed = True

    B = params.coefficients
    caps = _row_mean_caps(B, design)
    if np.any(caps > box.A_beta * (1.0 + _REL_TOL)):
        B = np.array(B)
        scale = np.minimum(1.0, box.A_beta / np.maximum(caps, 1e-300))
        B *= scale[:, :, None]
        changed = True

    if not changed:
        return params
    return ModelParams(weights=w, coefficients=B, covariances=S)


def check_box_membership(
    params: ModelParams, box: ParameterBox, design: Optional[np.ndarray] = None
) -> list:
    """List every violated box constraint; empty means the params are feasible."""
    violations = []
    for r in range(params.k):
        w = float(params.weights[r])
        if w < box.a_pi - _WEIGHT_TOL:
            violations.append(BoxViolation("weight_lower_bound", r, w, box.a_pi))
    lo, hi = box.eig_lo, box.eig_hi
    for r in range(params.k):
        vals = np.linalg.eigvalsh(params.covariances[r])
        if vals[0] < lo * (1.0 - _REL_TOL):
            violations.append(BoxViolation("covariance_lower_bound", r, float(vals[0]), lo))
        if vals[-1] > hi * (1.0 + _REL_TOL):
            violations.append(BoxViolation("covariance_upper_bound", r, float(vals[-1]), hi))
    caps = _row_mean_caps(params.coefficients, design)
    for r in range(params.k):
        cap = float(caps[r].max())
        if cap > box.A_beta * (1.0 + _REL_TOL):
            violations.append(BoxViolation("mean_upper_bound", r, cap, box.A_beta))
        if box.a_beta > 0.0:
            low = float(caps[r].min())
            if low < box.a_beta * (1.0 - _REL_TOL):
                violations.append(BoxViolation("mean_lower_bound", r, low, box.a_beta))
    return violations
