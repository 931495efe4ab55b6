"""Ground-truth generation, fixed designs and response sampling.

Designs are bounded in ``[-1, 1]`` so the design max-norm never exceeds
one and penalty thresholds are comparable across experiments.  Ground
truths use diagonal covariances, for which the eigenvalue and entrywise
box conventions coincide exactly.  Every operation is a pure function of
its spec and seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .model import Dataset, ModelParams, ParameterBox
from .seeding import STREAM_DESIGN, STREAM_RESPONSES, STREAM_TRUTH, rng_for

DESIGN_KINDS = ("iid-uniform", "iid-gaussian-clipped", "orthogonal-rows")


@dataclass(frozen=True)
class SimSpec:
    """Dimensions, sparsity and scales of one simulated problem."""

    n: int
    p: int
    q: int
    k: int
    sparsity: float
    box: ParameterBox
    design_kind: str = "iid-uniform"
    noise_scale: float = 1.0
    separation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.p, self.q, self.k) < 1:
            raise ConfigurationError("all dimensions must be >= 1")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigurationError(f"sparsity must be in [0, 1], got {self.sparsity}")
        if self.design_kind not in DESIGN_KINDS:
            raise ConfigurationError(
                f"unknown design kind {self.design_kind!r}; choose from {DESIGN_KINDS}"
            )
        lo, hi = self.box.eig_lo, self.box.eig_hi
        if not lo <= self.noise_scale <= hi:
            raise ConfigurationError(
                f"noise_scale {self.noise_scale} outside covariance eigenvalue "
                f"box [{lo}, {hi}]"
            )
        if self.separation < 0:
            raise ConfigurationError(f"separation must be >= 0, got {self.separation}")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "p": self.p, "q": self.q, "k": self.k,
            "sparsity": self.sparsity,
            "design_kind": self.design_kind,
            "noise_scale": self.noise_scale,
            "separation": self.separation,
            "seed": self.seed,
            "box": self.box.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        return cls(
            n=int(d["n"]), p=int(d["p"]), q=int(d["q"]), k=int(d["k"]),
            sparsity=float(d["sparsity"]),
            box=ParameterBox.from_dict(d["box"]),
            design_kind=str(d.get("design_kind", "iid-uniform")),
            noise_scale=float(d.get("noise_scale", 1.0)),
            separation=float(d.get("separation", 0.0)),
            seed=int(d.get("seed", 0)),
        )


def make_ground_truth(spec: SimSpec) -> ModelParams:
    """Draw an in-box truth: sparse coefficients, diagonal covariances.

    The coefficient support is chosen uniformly at random at the
    requested sparsity; nonzero entries are signed uniforms.  When
    ``separation > 0`` (and the model is not fully sparse) the first
    covariate's coefficients receive component-specific offsets so the
    component means differ by about ``separation`` in response units.
    Rows are rescaled so the l1 envelope stays within ``0.9 A_beta``,
    which guarantees box membership for any design bounded by one.
    """
    box = spec.box
    if box.a_pi > 1.0 / spec.k + 1e-12:
        raise ConfigurationError(
            f"a_pi = {box.a_pi} exceeds 1/k = {1.0 / spec.k}; uniform weights infeasible"
        )
    if box.a_beta > 0.0:
        raise ConfigurationError(
            "sparse ground truths have zero mean rows, so a positive lower mean "
            f"bound (a_beta = {box.a_beta}) cannot be guaranteed; use a_beta = 0"
        )
    rng = rng_for(spec.seed, STREAM_TRUTH)
    k, q, p = spec.k, spec.q, spec.p

    total = k * q * p
    n_nonzero = int(round((1.0 - spec.sparsity) * total))
    B = np.zeros(total)
    if n_nonzero > 0:
        support = rng.choice(total, size=n_nonzero, replace=False)
        B[support] = rng.uniform(0.5, 1.5, size=n_nonzero) * rng.choice([-1.0, 1.0], size=n_nonzero)
    B = B.reshape(k, q, p)
    if spec.separation > 0.0 and spec.sparsity < 1.0:
        offsets = spec.separation * (np.arange(k) - (k - 1) / 2.0) / max(k - 1, 1)
        B[:, :, 0] += offsets[:, None]

    # Row l1 envelope keeps max_i |B_{r,z} . x_i| <= 0.9 A_beta for |x| <= 1.
    cap = 0.9 * box.A_beta
    norms = np.abs(B).sum(axis=2)
    scale = np.minimum(1.0, cap / np.maximum(norms, 1e-300))
    B *= scale[:, :, None]

    weights = np.full(k, 1.0 / k)
    cov = np.broadcast_to(spec.noise_scale * np.eye(q), (k, q, q)).copy()
    return ModelParams(weights=weights, coefficients=B, covariances=cov)


def sample_design(spec: SimSpec) -> np.ndarray:
    """Draw the fixed design matrix; entries are bounded by one."""
    rng = rng_for(spec.seed, STREAM_DESIGN)
    n, p = spec.n, spec.p
    if spec.design_kind == "iid-uniform":
        return rng.uniform(-1.0, 1.0, size=(n, p))
    if spec.design_kind == "iid-gaussian-clipped":
        return np.clip(rng.normal(0.0, 0.5, size=(n, p)), -1.0, 1.0)
    # orthogonal-rows: mutually orthonormal rows whenever n <= p.
    m = max(n, p)
    G = rng.standard_normal((m, m))
    Q, _ = np.linalg.qr(G)
    return Q[:n, :p].copy()


def sample_responses(
    truth: ModelParams, design: np.ndarray, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw one response per design row; returns (responses, latent labels)."""
    design = np.asarray(design, dtype=float)
    n = design.shape[0]
    rng = rng_for(seed, STREAM_RESPONSES)
    labels = rng.choice(truth.k, size=n, p=truth.weights)
    means = np.einsum("rzp,ip->irz", truth.coefficients, design)
    chols = np.linalg.cholesky(truth.covariances)
    z = rng.standard_normal((n, truth.q))
    y = means[np.arange(n), labels] + np.einsum("nij,nj->ni", chols[labels], z)
    return y, labels


def truncation_event(responses: np.ndarray, level: float) -> bool:
    """True iff every response coordinate has absolute value <= ``level``."""
    responses = np.asarray(responses, dtype=float)
    return bool(np.all(np.abs(responses) <= level))


def simulate_dataset(spec: SimSpec) -> Tuple[ModelParams, Dataset, np.ndarray]:
    """Convenience wrapper: truth, dataset and latent labels for one spec."""
    truth = make_ground_truth(spec)
    design = sample_design(spec)
    responses, labels = sample_responses(truth, design, spec.seed)
    return truth, Dataset(design=design, responses=responses), labels


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_dataset_csv(dataset: Dataset, design_path, responses_path) -> None:
    """Write design and responses as CSV with indexed column headers."""
    for path, M, prefix in (
        (design_path, dataset.design, "x"),
        (responses_path, dataset.responses, "y"),
    ):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow([f"{prefix}{j}" for j in range(M.shape[1])])
            for row in M:
                w.writerow([repr(float(v)) for v in row])


def load_dataset_csv(design_path, responses_path) -> Dataset:
    design = _read_csv_matrix(design_path)
    responses = _read_csv_matrix(responses_path)
    return Dataset(design=design, responses=responses)


def _read_csv_matrix(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)


def save_bundle_json(
    path, spec: SimSpec, truth: ModelParams, dataset: Dataset,
    labels: Optional[np.ndarray] = None,
) -> None:
    """Write one JSON bundle holding the spec, truth and data."""
    bundle = {
        "spec": spec.to_dict(),
        "truth": truth.to_dict(),
        "design": dataset.design.tolist(),
        "responses": dataset.responses.tolist(),
    }
    if labels is not None:
        bundle["labels"] = [int(v) for v in labels]
    with open(path, "w") as f:
        json.dump(bundle, f, indent=2, sort_keys=True)
        f.write("\n")


def load_bundle_json(path) -> Tuple[SimSpec, ModelParams, Dataset, Optional[np.ndarray]]:
    with open(path) as f:
        bundle = json.load(f)
    spec = SimSpec.from_dict(bundle["spec"])
    truth = ModelParams.from_dict(bundle["truth"])
    dataset = Dataset(
        design=np.asarray(bundle["design"], dtype=float),
        responses=np.asarray(bundle["responses"], dtype=float),
    )
    labels = np.asarray(bundle["labels"]) if "labels" in bundle else None
    return spec, truth, dataset, labels
