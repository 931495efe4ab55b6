"""Explicit constants and risk bounds for the penalized mixture estimator.

Every quantity here is a pure closed-form function of the parameter box
and the problem dimensions: the design max-norm, the response truncation
level, the score envelope at that level, the log-ratio sup bound, the
complexity term, the packing-number bound (in log form), the penalty
threshold, the truncated-risk tail bounds and the assembled right-hand
side of the oracle inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import ParameterBox, gradient_bound_constant

#: Default scaling constant for the penalty threshold.
DEFAULT_KAPPA = 36.0
#: Default scaling constant for the remainder term of the risk bound.
DEFAULT_KAPPA_PRIME = 332.0


@dataclass(frozen=True)
class BoundReport:
    """All computed bound constants plus the oracle RHS decomposition.

    ``oracle_rhs_total`` is exactly the sum of ``approximation_term``,
    ``lambda_term`` and ``remainder_term``.  ``threshold_satisfied`` is
    false when the supplied penalty is below ``lambda_min``, in which
    case the risk bound is not guaranteed to apply.
    """

    x_max_n: float
    m_n: float
    c_mn: float
    r_n: float
    lambda_min: float
    kappa: float
    kappa_prime: float
    lambda_: float
    approximation_term: float
    lambda_term: float
    remainder_term: float
    oracle_rhs_total: float
    tail_bound: float
    threshold_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "x_max_n": self.x_max_n,
            "m_n": self.m_n,
            "c_mn": self.c_mn,
            "r_n": self.r_n,
            "lambda_min": self.lambda_min,
            "kappa": self.kappa,
            "kappa_prime": self.kappa_prime,
            "lambda": self.lambda_,
            "oracle_rhs_terms": {
                "approximation_term": self.approximation_term,
                "lambda_term": self.lambda_term,
                "remainder_term": self.remainder_term,
            },
            "oracle_rhs_total": self.oracle_rhs_total,
            "tail_bound": self.tail_bound,
            "threshold_satisfied": self.threshold_satisfied,
        }


def x_max_n(design: np.ndarray) -> float:
    """Root mean square over rows of the largest absolute design entry.

    ``sqrt( (1/n) sum_i max_j |x_{i,j}|^2 )``.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[0] < 1:
        raise ValueError("design must be a non-empty 2-d array")
    row_max = np.abs(design).max(axis=1)
    return float(np.sqrt(np.mean(row_max**2)))


def _check_n(n: float) -> float:
    n = float(n)
    if n < 2:
        raise ValueError(f"need n >= 2 so that log(n) > 0, got {n}")
    return n


def m_n(box: ParameterBox, n: float) -> float:
    """Response truncation level balancing the tail term against ``1/n``.

    Positive solution of ``log(n) - (t^2 - 2 t A_beta) a_sigma / 4 = 0``:
    ``A_beta + sqrt(A_beta^2 + 4 log(n) / a_sigma)``.  ``n`` may be any
    real ``>= 2``.
    """
    n = _check_n(n)
    A = box.A_beta
    return A + math.sqrt(A * A + 4.0 * math.log(n) / box.a_sigma)


def c_mn(box: ParameterBox, level: float, q: int) -> float:
    """Score envelope at truncation level ``level``.

    Same expression as :func:`mixlasso.model.gradient_bound_constant`
    evaluated with ``y_sup = level``.
    """
    if level < 0:
        raise DomainError(f"truncation level must be >= 0, got {level}")
    return gradient_bound_constant(box, q, level)


def r_n(box: ParameterBox, k: int, c_mn_value: float) -> float:
    """Sup bound on the empirical norm of in-box log-density ratios.

    ``2 c (1 + k (A_beta + A_sigma_tilde))``.
    """
    return 2.0 * c_mn_value * (1.0 + k * (box.A_beta + box.A_sigma_tilde))


def delta_m(
    m: float, x_max: float, n: float, k: int, p: int, box: ParameterBox
) -> float:
    """Complexity term for the l1 ball of radius ``m``.

    ``m * x_max * log(n) * sqrt(k log(2p+1)) + 6 (1 + k (A_beta +
    A_sigma_tilde))``; affine in ``m``.
    """
    if m < 0:
        raise ValueError(f"radius m must be >= 0, got {m}")
    n = _check_n(n)
    slope = x_max * math.log(n) * math.sqrt(k * math.log(2 * p + 1))
    return m * slope + 6.0 * (1.0 + k * (box.A_beta + box.A_sigma_tilde))


def packing_bound(
    delta: float,
    m: float,
    c_mn_value: float,
    k: int,
    p: int,
    q: int,
    x_max: float,
    A_sigma: float,
) -> float:
    """Natural log of the packing-number bound for the log-ratio class.

    ``log N <= (4 c^2 k^2 q^2 m^2 x_max^2 / delta^2) log(2p+1)
    + k log(1 + 8 c q^2 k A_sigma / delta) + k log(1 + 8 c / delta)``.
    Returned in log form to avoid overflow.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    c = c_mn_value
    exponent = 4.0 * c * c * k * k * q * q * m * m * x_max * x_max / (delta * delta)
    term1 = exponent * math.log(2 * p + 1)
    term2 = k * math.log1p(8.0 * c * q * q * k * A_sigma / delta)
    term3 = k * math.log1p(8.0 * c / delta)
    return term1 + term2 + term3


def _threshold_bracket(box: ParameterBox, n: float, q: int) -> float:
    """``(A_sigma v 1/a_pi)(1 + 4(q+1) A_sigma (A_beta^2 + log(n)/a_sigma))``."""
    lead = max(box.A_sigma, 1.0 / box.a_pi)
    inner = 1.0 + 4.0 * (q + 1) * box.A_sigma * (
        box.A_beta**2 + math.log(n) / box.a_sigma
    )
    return lead * inner


def lambda_threshold(
    box: ParameterBox,
    n: float,
    p: int,
    q: int,
    k: int,
    x_max: float,
    kappa: float = DEFAULT_KAPPA,
) -> float:
    """Smallest penalty for which the oracle risk bound is guaranteed.

    ``kappa (A_sigma v 1/a_pi)(1 + 4(q+1) A_sigma (A_beta^2 +
    log(n)/a_sigma)) sqrt(k/n) (1 + q x_max log(n) sqrt(k log(2p+1)))``.
    """
    n = _check_n(n)
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    entropy = 1.0 + q * x_max * math.log(n) * math.sqrt(k * math.log(2 * p + 1))
    return kappa * _threshold_bracket(box, n, q) * math.sqrt(k / n) * entropy


def tail_bound(box: ParameterBox, n: float, k: int, q: int, level: float) -> float:
    """Bound on the truncated-risk contribution of large responses.

    ``(e^{-1/2} pi^{q/2} / (q A_sigma)^{q/2}) sqrt(2 k n q a_pi)
    exp(-(level^2 - 2 level A_beta + a_beta^2) a_sigma / 4)``.
    """
    if level < 0:
        raise DomainError(f"truncation level must be >= 0, got {level}")
    cap = math.exp(-0.5) * math.pi ** (q / 2.0) / (q * box.A_sigma) ** (q / 2.0)
    expo = -0.25 * (level * level - 2.0 * level * box.A_beta + box.a_beta**2) * box.a_sigma
    return cap * math.sqrt(2.0 * k * n * q * box.a_pi) * math.exp(expo)


def tail_probability_bound(
    box: ParameterBox, n: float, k: int, q: int, level: float
) -> float:
    """Bound on the probability that any response coordinate exceeds ``level``.

    ``2 k n q a_pi exp(-(level^2 - 2 level A_beta + a_beta^2) a_sigma / 2)``.
    This is the sharper-exponent variant of :func:`tail_bound`'s tail
    factor; both are exposed because they are not interchangeable.
    """
    if level < 0:
        raise DomainError(f"truncation level must be >= 0, got {level}")
    expo = -0.5 * (level * level - 2.0 * level * box.A_beta + box.a_beta**2) * box.a_sigma
    return 2.0 * k * n * q * box.a_pi * math.exp(expo)


def oracle_rhs(
    box: ParameterBox,
    n: float,
    p: int,
    q: int,
    k: int,
    lambda_: float,
    kl_ref: float,
    l1_ref: float,
    kappa: float = DEFAULT_KAPPA,
    kappa_prime: float = DEFAULT_KAPPA_PRIME,
    x_max: float = 1.0,
    sqrt_weight_variant: bool = False,
) -> BoundReport:
    """Assemble the full right-hand side of the oracle risk bound.

    ``(1 + 1/kappa)(kl_ref + lambda l1_ref) + lambda + sqrt(k/n)
    kappa' [ tail cap + threshold bracket * k (1 + A_beta +
    A_sigma_tilde)^2 ]`` where the tail cap is ``e^{-1/2 - a_beta^2
    a_sigma / 4} pi^{q/2} a_pi sqrt(2q) / (q A_sigma)^{q/2}`` (or, with
    ``sqrt_weight_variant``, with ``a_pi sqrt(2q)`` replaced by
    ``sqrt(2 q a_pi)``).

    ``kl_ref`` and ``l1_ref`` describe the reference model: its risk and
    its coefficient l1 norm.  With the truth as reference, ``kl_ref`` is
    zero.
    """
    n = _check_n(n)
    if kl_ref < 0 or l1_ref < 0:
        raise ValueError("kl_ref and l1_ref must be >= 0")
    if lambda_ < 0:
        raise ValueError(f"lambda must be >= 0, got {lambda_}")
    level = m_n(box, n)
    c = c_mn(box, level, q)
    cap = (
        math.exp(-0.5 - 0.25 * box.a_beta**2 * box.a_sigma)
        * math.pi ** (q / 2.0)
        / (q * box.A_sigma) ** (q / 2.0)
    )
    if sqrt_weight_variant:
        cap *= math.sqrt(2.0 * q * box.a_pi)
    else:
        cap *= box.a_pi * math.sqrt(2.0 * q)
    bracket = cap + _threshold_bracket(box, n, q) * k * (
        1.0 + box.A_beta + box.A_sigma_tilde
    ) ** 2
    approximation = (1.0 + 1.0 / kappa) * (kl_ref + lambda_ * l1_ref)
    remainder = math.sqrt(k / n) * kappa_prime * bracket
    lam_min = lambda_threshold(box, n, p, q, k, x_max, kappa)
    return BoundReport(
        x_max_n=float(x_max),
        m_n=level,
        c_mn=c,
        r_n=r_n(box, k, c),
        lambda_min=lam_min,
        kappa=float(kappa),
        kappa_prime=float(kappa_prime),
        lambda_=float(lambda_),
        approximation_term=approximation,
        lambda_term=float(lambda_),
        remainder_term=remainder,
        oracle_rhs_total=approximation + lambda_ + remainder,
        tail_bound=tail_bound(box, n, k, q, level),
        threshold_satisfied=bool(lambda_ >= lam_min),
    )
