import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixlasso import ModelParams, ParameterBox
from mixlasso.model import _project_weights


def random_box(rng, k=1, diagonal_consistent=True, zero_a_beta=False):
    """Sample a plausible parameter box.

    ``A_sigma >= 1/2`` keeps the score envelope valid for the sampled
    parameters (see the gradient-bound tests); with
    ``diagonal_consistent`` the covariance-scale bounds are the exact
    reciprocals of the inverse-scale bounds, so the entrywise and
    eigenvalue conventions agree for diagonal covariances.
    ``zero_a_beta`` forces the lower mean bound to zero, which sampled
    sparse ground truths require.
    """
    A_sigma = rng.uniform(0.5, 4.0)
    a_sigma = A_sigma * rng.uniform(0.1, 1.0)
    if diagonal_consistent:
        a_tilde, A_tilde = 1.0 / A_sigma, 1.0 / a_sigma
    else:
        a_tilde = 1.0 / A_sigma * rng.uniform(0.5, 1.0)
        A_tilde = 1.0 / a_sigma * rng.uniform(1.0, 2.0)
    A_beta = rng.uniform(0.5, 3.0)
    if zero_a_beta or rng.random() < 0.5:
        a_beta = 0.0
    else:
        a_beta = A_beta * rng.uniform(0.0, 0.3)
    return ParameterBox(
        a_beta=a_beta,
        A_beta=A_beta,
        a_sigma=a_sigma,
        A_sigma=A_sigma,
        a_sigma_tilde=a_tilde,
        A_sigma_tilde=A_tilde,
        a_pi=rng.uniform(0.2, 1.0) / k,
    )


def random_in_box_params(rng, box, k, q, p, x=None, diagonal=True):
    """Sample parameters inside the box.

    Coefficient rows are rescaled against ``x`` when given, else against
    the l1 envelope, so the mean bound holds.
    """
    weights = _project_weights(rng.dirichlet(np.ones(k)), box.a_pi)
    lo, hi = box.eig_lo, box.eig_hi
    covs = np.zeros((k, q, q))
    for r in range(k):
        if diagonal:
            covs[r] = np.diag(rng.uniform(lo, hi, size=q))
        else:
            vals = rng.uniform(lo, hi, size=q)
            G = rng.standard_normal((q, q))
            Q, _ = np.linalg.qr(G)
            covs[r] = 0.5 * ((Q * vals) @ Q.T + ((Q * vals) @ Q.T).T)
    B = rng.standard_normal((k, q, p))
    for r in range(k):
        for z in range(q):
            reach = abs(B[r, z] @ x) if x is not None else np.abs(B[r, z]).sum()
            if reach > box.A_beta:
                B[r, z] *= rng.uniform(0.3, 1.0) * box.A_beta / reach
    return ModelParams(weights=weights, coefficients=B, covariances=covs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
