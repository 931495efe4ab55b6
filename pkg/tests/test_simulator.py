import numpy as np
import pytest

from mixlasso import (
    ConfigurationError,
    ParameterBox,
    SimSpec,
    check_box_membership,
    make_ground_truth,
    sample_design,
    sample_responses,
    simulate_dataset,
    truncation_event,
    x_max_n,
)
from mixlasso.simulator import (
    load_bundle_json,
    load_dataset_csv,
    save_bundle_json,
    save_dataset_csv,
)

from conftest import random_box


def base_box(a_pi=0.25):
    return ParameterBox(a_beta=0.0, A_beta=3.0, a_sigma=0.5, A_sigma=2.0,
                        a_sigma_tilde=0.5, A_sigma_tilde=2.0, a_pi=a_pi)


def base_spec(**kw):
    defaults = dict(n=40, p=3, q=2, k=2, sparsity=0.5, box=base_box(), seed=5)
    defaults.update(kw)
    return SimSpec(**defaults)


class TestSimSpec:
    def test_noise_scale_outside_box_rejected(self):
        with pytest.raises(ConfigurationError):
            base_spec(noise_scale=10.0)

    def test_unknown_design_kind_rejected(self):
        with pytest.raises(ConfigurationError):
            base_spec(design_kind="adversarial")

    def test_round_trip(self):
        spec = base_spec(separation=1.0, design_kind="orthogonal-rows")
        assert SimSpec.from_dict(spec.to_dict()) == spec


class TestMakeGroundTruth:
    def test_full_sparsity_means_all_zero(self):
        truth = make_ground_truth(base_spec(sparsity=1.0, separation=2.0))
        assert np.all(truth.coefficients == 0.0)

    def test_dense_single_component(self):
        truth = make_ground_truth(base_spec(sparsity=0.0, k=1, box=base_box(a_pi=1.0)))
        assert np.all(truth.coefficients != 0.0)
        assert truth.weights[0] == 1.0

    def test_sparsity_fraction(self):
        spec = base_spec(n=10, p=50, q=2, k=2, sparsity=0.9, separation=0.0)
        truth = make_ground_truth(spec)
        zeros = float(np.mean(truth.coefficients == 0.0))
        assert zeros == pytest.approx(0.9, abs=0.01)

    def test_infeasible_weights_rejected(self):
        with pytest.raises(ConfigurationError):
            make_ground_truth(base_spec(k=3, box=base_box(a_pi=0.5)))

    def test_positive_lower_mean_bound_rejected(self):
        box = ParameterBox(a_beta=0.5, A_beta=3.0, a_sigma=0.5, A_sigma=2.0,
                           a_sigma_tilde=0.5, A_sigma_tilde=2.0, a_pi=0.25)
        with pytest.raises(ConfigurationError):
            make_ground_truth(base_spec(box=box))

    def test_always_in_box(self, rng):
        for trial in range(1000):
            k = int(rng.integers(1, 4))
            box = random_box(rng, k=k, zero_a_beta=True)
            spec = SimSpec(
                n=int(rng.integers(2, 20)),
                p=int(rng.integers(1, 6)),
                q=int(rng.integers(1, 3)),
                k=k,
                sparsity=float(rng.uniform(0, 1)),
                box=box,
                design_kind=("iid-uniform", "iid-gaussian-clipped", "orthogonal-rows")[trial % 3],
                noise_scale=float(rng.uniform(box.eig_lo, box.eig_hi)),
                separation=float(rng.uniform(0, 2)),
                seed=trial,
            )
            truth = make_ground_truth(spec)
            design = sample_design(spec)
            assert check_box_membership(truth, box, design=design) == []


class TestSampleDesign:
    def test_uniform_bounded(self):
        design = sample_design(base_spec(n=200, p=10))
        assert x_max_n(design) <= 1.0
        assert np.abs(design).max() <= 1.0

    def test_clipped_gaussian_bounded(self):
        design = sample_design(base_spec(n=500, p=4, design_kind="iid-gaussian-clipped"))
        assert np.abs(design).max() <= 1.0

    def test_orthogonal_rows(self):
        spec = base_spec(n=6, p=10, design_kind="orthogonal-rows")
        design = sample_design(spec)
        gram = design @ design.T
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-10

    def test_same_seed_bit_identical(self):
        a = sample_design(base_spec(seed=9))
        b = sample_design(base_spec(seed=9))
        np.testing.assert_array_equal(a, b)


class TestSampleResponses:
    def test_small_noise_concentrates_on_means(self):
        box = ParameterBox(a_beta=0.0, A_beta=3.0, a_sigma=0.5, A_sigma=100.0,
                           a_sigma_tilde=0.01, A_sigma_tilde=2.0, a_pi=1.0)
        spec = base_spec(k=1, box=box, noise_scale=box.eig_lo, sparsity=0.0, n=100)
        truth = make_ground_truth(spec)
        design = sample_design(spec)
        responses, _ = sample_responses(truth, design, seed=3)
        means = design @ truth.coefficients[0].T
        assert np.abs(responses - means).max() <= 6 * np.sqrt(box.eig_lo)

    def test_label_frequencies(self):
        spec = base_spec(n=10000, k=2, box=base_box(a_pi=0.5))
        truth = make_ground_truth(spec)
        design = sample_design(spec)
        _, labels = sample_responses(truth, design, seed=11)
        for r in range(2):
            freq = float(np.mean(labels == r))
            pi_r = truth.weights[r]
            assert abs(freq - pi_r) <= 4 * np.sqrt(pi_r * (1 - pi_r) / spec.n)

    def test_same_seed_bit_identical(self):
        spec = base_spec()
        truth = make_ground_truth(spec)
        design = sample_design(spec)
        ya, la = sample_responses(truth, design, seed=21)
        yb, lb = sample_responses(truth, design, seed=21)
        np.testing.assert_array_equal(ya, yb)
        np.testing.assert_array_equal(la, lb)


class TestTruncationEvent:
    def test_all_zero_within_level(self):
        assert truncation_event(np.zeros((5, 2)), 1.0)

    def test_single_exceedance(self):
        Y = np.zeros((5, 2))
        Y[3, 1] = 1.0 + 1e-9
        assert not truncation_event(Y, 1.0)


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        _, dataset, _ = simulate_dataset(base_spec())
        dpath = tmp_path / "design.csv"
        rpath = tmp_path / "responses.csv"
        save_dataset_csv(dataset, dpath, rpath)
        (line,) = [open(dpath).readline()]
        assert line.strip() == "x0,x1,x2"
        restored = load_dataset_csv(dpath, rpath)
        np.testing.assert_array_equal(restored.design, dataset.design)
        np.testing.assert_array_equal(restored.responses, dataset.responses)

    def test_bundle_round_trip(self, tmp_path):
        spec = base_spec(separation=0.7)
        truth, dataset, labels = simulate_dataset(spec)
        path = tmp_path / "bundle.json"
        save_bundle_json(path, spec, truth, dataset, labels)
        spec2, truth2, dataset2, labels2 = load_bundle_json(path)
        assert spec2 == spec
        np.testing.assert_array_equal(truth2.coefficients, truth.coefficients)
        np.testing.assert_array_equal(dataset2.responses, dataset.responses)
        np.testing.assert_array_equal(labels2, labels)
