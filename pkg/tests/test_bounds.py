import math

import numpy as np
import pytest

from mixlasso import (
    ParameterBox,
    c_mn,
    delta_m,
    lambda_threshold,
    m_n,
    oracle_rhs,
    packing_bound,
    r_n,
    tail_bound,
    tail_probability_bound,
    x_max_n,
)

from conftest import random_box
from oracles import (
    scripted_c_mn,
    scripted_delta_m,
    scripted_lambda_threshold,
    scripted_m_n,
    scripted_oracle_rhs_total,
    scripted_packing_bound,
    scripted_r_n,
    scripted_tail_bound,
    scripted_tail_probability_bound,
    scripted_x_max_n,
)

WORKED_BOX = ParameterBox(a_beta=0.0, A_beta=1.0, a_sigma=1.0, A_sigma=1.0,
                          a_sigma_tilde=1.0, A_sigma_tilde=1.0, a_pi=0.5)


def sample_dims(rng):
    return (
        int(rng.integers(2, 10**6)),   # n
        int(rng.integers(1, 500)),     # p
        int(rng.integers(1, 5)),       # q
        int(rng.integers(1, 5)),       # k
    )


class TestXMaxN:
    def test_all_ones(self):
        assert x_max_n(np.ones((7, 3))) == pytest.approx(1.0)

    def test_hand_value(self):
        X = np.array([[1.0, 2.0], [3.0, -4.0]])
        assert x_max_n(X) == pytest.approx(math.sqrt(10.0), rel=1e-12)
        assert x_max_n(X) == pytest.approx(3.16228, abs=1e-5)

    def test_zero_row(self):
        assert x_max_n(np.zeros((1, 4))) == 0.0

    def test_empty_design_rejected(self):
        with pytest.raises(ValueError):
            x_max_n(np.zeros((0, 3)))

    def test_matches_script(self, rng):
        for _ in range(50):
            X = rng.uniform(-5, 5, (int(rng.integers(1, 30)), int(rng.integers(1, 10))))
            assert x_max_n(X) == pytest.approx(scripted_x_max_n(X), rel=1e-12)


class TestMN:
    def test_defining_equation_residual(self, rng):
        for _ in range(50):
            box = random_box(rng)
            n = float(rng.integers(2, 10**9))
            level = m_n(box, n)
            resid = math.log(n) - 0.25 * (level**2 - 2 * level * box.A_beta) * box.a_sigma
            assert abs(resid) <= 1e-9

    def test_zero_mean_bound_specialization(self):
        box = ParameterBox(a_beta=0.0, A_beta=0.0, a_sigma=2.0, A_sigma=2.0,
                           a_sigma_tilde=0.5, A_sigma_tilde=1.0, a_pi=1.0)
        n = 100.0
        assert m_n(box, n) == pytest.approx(2 * math.sqrt(math.log(n) / 2.0), rel=1e-12)

    def test_synthetic_unit_log(self):
        # n = e gives log(n) = 1 exactly in double precision.
        assert m_n(WORKED_BOX, math.e) == pytest.approx(1 + math.sqrt(5), rel=1e-12)
        assert m_n(WORKED_BOX, math.e) == pytest.approx(3.23607, abs=1e-5)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            m_n(WORKED_BOX, 1)

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            n = float(rng.integers(2, 10**6))
            assert m_n(box, n) == pytest.approx(scripted_m_n(box, n), rel=1e-12)


class TestCMN:
    def test_hand_evaluation(self):
        assert c_mn(WORKED_BOX, 3.0, q=2) == pytest.approx(9.0)

    def test_small_scale_limit(self):
        box = ParameterBox(a_beta=0.0, A_beta=1.0, a_sigma=1e-9, A_sigma=1e-9,
                           a_sigma_tilde=1.0, A_sigma_tilde=1e12, a_pi=1.0)
        assert c_mn(box, 3.0, q=1) == pytest.approx(1.0)

    def test_majorant_inequality(self, rng):
        for _ in range(1000):
            box = random_box(rng, k=int(rng.integers(1, 5)))
            n, _, q, _ = sample_dims(rng)
            level = m_n(box, n)
            majorant = max(box.A_sigma, 1.0 / box.a_pi) * (
                1 + 4 * (q + 1) * box.A_sigma * (box.A_beta**2 + math.log(n) / box.a_sigma)
            )
            assert c_mn(box, level, q) <= majorant * (1 + 1e-12)

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            level = rng.uniform(0, 20)
            q = int(rng.integers(1, 5))
            assert c_mn(box, level, q) == pytest.approx(scripted_c_mn(box, level, q), rel=1e-12)


class TestRN:
    def test_hand_evaluation(self):
        box = ParameterBox(a_beta=0.0, A_beta=1.0, a_sigma=1.0, A_sigma=1.0,
                           a_sigma_tilde=0.5, A_sigma_tilde=1.0, a_pi=0.5)
        assert r_n(box, k=2, c_mn_value=9.0) == pytest.approx(90.0)

    def test_log_ratio_empirical_norm_bounded(self, rng):
        from conftest import random_in_box_params
        from mixlasso.model import _mixture_log_density_rows

        for _ in range(50):
            k = int(rng.integers(1, 4))
            q = int(rng.integers(1, 3))
            box = random_box(rng, k=k)
            n = 30
            X = rng.uniform(-1, 1, (n, 2))
            m0 = random_in_box_params(rng, box, k, q, 2)
            m1 = random_in_box_params(rng, box, k, q, 2)
            level = m_n(box, 100)
            Y = rng.uniform(-level, level, (n, q))
            ratios = (
                _mixture_log_density_rows(m1, X, Y) - _mixture_log_density_rows(m0, X, Y)
            )
            emp_norm = float(np.sqrt(np.mean(ratios**2)))
            assert emp_norm <= r_n(box, k, c_mn(box, level, q))

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            k = int(rng.integers(1, 6))
            c = rng.uniform(0.5, 50)
            assert r_n(box, k, c) == pytest.approx(scripted_r_n(box, k, c), rel=1e-12)


class TestDeltaM:
    def test_zero_radius(self):
        box = WORKED_BOX
        val = delta_m(0.0, 1.0, 100, k=2, p=5, box=box)
        assert val == pytest.approx(6 * (1 + 2 * (box.A_beta + box.A_sigma_tilde)), rel=1e-12)

    def test_hand_evaluation(self):
        # log(n) = 1 via n = e; k = p = 1, unit design norm and box scales.
        val = delta_m(1.0, 1.0, math.e, k=1, p=1, box=WORKED_BOX)
        assert val == pytest.approx(math.sqrt(math.log(3.0)) + 18.0, rel=1e-9)
        assert val == pytest.approx(19.04815, abs=1e-5)

    def test_affine_in_radius(self, rng):
        box = random_box(rng)
        n, p, _, k = sample_dims(rng)
        x = rng.uniform(0.1, 1.0)
        slope = x * math.log(n) * math.sqrt(k * math.log(2 * p + 1))
        v0 = delta_m(0.0, x, n, k, p, box)
        for m in (0.5, 1.0, 4.0, 32.0):
            assert delta_m(m, x, n, k, p, box) == pytest.approx(v0 + m * slope, rel=1e-12)

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            n, p, _, k = sample_dims(rng)
            m = rng.uniform(0, 10)
            x = rng.uniform(0, 1)
            assert delta_m(m, x, n, k, p, box) == pytest.approx(
                scripted_delta_m(m, x, n, k, p, box), rel=1e-12)


class TestPackingBound:
    def test_hand_evaluation(self):
        val = packing_bound(delta=1.0, m=0.0, c_mn_value=1.0, k=1, p=1, q=1,
                            x_max=1.0, A_sigma=1.0)
        assert val == pytest.approx(math.log(81.0), rel=1e-12)
        assert val == pytest.approx(4.39445, abs=1e-5)

    def test_nonincreasing_in_delta(self, rng):
        box = random_box(rng)
        deltas = np.sort(rng.uniform(0.01, 10, 20))
        vals = [
            packing_bound(d, 2.0, 5.0, k=2, p=10, q=2, x_max=1.0, A_sigma=box.A_sigma)
            for d in deltas
        ]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_radius_quadruples_first_term(self):
        kwargs = dict(delta=0.5, c_mn_value=3.0, k=2, p=7, q=2, x_max=0.8, A_sigma=2.0)
        base = packing_bound(m=0.0, **kwargs)
        v1 = packing_bound(m=1.0, **kwargs)
        v2 = packing_bound(m=2.0, **kwargs)
        assert v2 - base == pytest.approx(4 * (v1 - base), rel=1e-12)

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            packing_bound(0.0, 1.0, 1.0, 1, 1, 1, 1.0, 1.0)

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            _, p, q, k = sample_dims(rng)
            args = (rng.uniform(0.01, 5), rng.uniform(0, 10), rng.uniform(0.5, 50),
                    k, p, q, rng.uniform(0, 1), box.A_sigma)
            assert packing_bound(*args) == pytest.approx(scripted_packing_bound(*args), rel=1e-12)


class TestLambdaThreshold:
    def test_worked_value(self):
        val = lambda_threshold(WORKED_BOX, n=100, p=10, q=1, k=2, x_max=1.0, kappa=1.0)
        assert val == pytest.approx(160.30, rel=1e-3)
        assert val == pytest.approx(scripted_lambda_threshold(
            WORKED_BOX, 100, 10, 1, 2, 1.0, 1.0), rel=1e-12)

    def test_linear_in_kappa(self, rng):
        box = random_box(rng)
        n, p, q, k = sample_dims(rng)
        v1 = lambda_threshold(box, n, p, q, k, 1.0, kappa=3.0)
        v2 = lambda_threshold(box, n, p, q, k, 1.0, kappa=6.0)
        assert v2 == pytest.approx(2 * v1, rel=1e-12)

    def test_monotone_in_dimensions(self, rng):
        box = random_box(rng)
        base = dict(n=1000, p=10, q=2, k=2, x_max=0.5)
        v0 = lambda_threshold(box, **base)
        for key, larger in (("p", 50), ("q", 4), ("k", 5), ("x_max", 1.0)):
            args = dict(base)
            args[key] = larger
            assert lambda_threshold(box, **args) >= v0

    def test_dominates_truncated_event_threshold(self, rng):
        # At kappa = 36 the threshold is at least the sharper internal one
        # built from the score envelope at the optimized truncation level.
        for _ in range(1000):
            box = random_box(rng, k=int(rng.integers(1, 5)))
            n, p, q, k = sample_dims(rng)
            x = rng.uniform(0.01, 1.0)
            level = m_n(box, n)
            c = c_mn(box, level, q)
            internal = (4 * c / math.sqrt(n)) * math.sqrt(k) * (
                1 + 9 * q * x * math.log(n) * math.sqrt(k * math.log(2 * p + 1))
            )
            assert lambda_threshold(box, n, p, q, k, x, kappa=36.0) >= internal * (1 - 1e-12)

    def test_matches_script(self, rng):
        for _ in range(50):
            box = random_box(rng)
            n, p, q, k = sample_dims(rng)
            x = rng.uniform(0, 1)
            kappa = rng.uniform(1, 50)
            assert lambda_threshold(box, n, p, q, k, x, kappa) == pytest.approx(
                scripted_lambda_threshold(box, n, p, q, k, x, kappa), rel=1e-12)


class TestTailBounds:
    def test_decreasing_beyond_mean_bound(self, rng):
        box = random_box(rng)
        levels = np.linspace(box.A_beta, box.A_beta + 20, 30)
        vals = [tail_bound(box, 100, 2, 2, lv) for lv in levels]
        assert all(v > 0 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_direct_evaluation(self):
        # q=1, A_sigma=1, a_pi=1, k=1, n=1, level = A_beta = 0, a_beta = 0.
        box = ParameterBox(a_beta=0.0, A_beta=0.0, a_sigma=1.0, A_sigma=1.0,
                           a_sigma_tilde=1.0, A_sigma_tilde=1.0, a_pi=1.0)
        got = tail_bound(box, n=1, k=1, q=1, level=0.0)
        want = math.exp(-0.5) * math.sqrt(math.pi) * math.sqrt(2.0)
        assert got == pytest.approx(want, abs=1e-9)
        assert got == pytest.approx(scripted_tail_bound(box, 1, 1, 1, 0.0), rel=1e-12)

    def test_variants_match_scripts(self, rng):
        for _ in range(50):
            box = random_box(rng)
            n, _, q, k = sample_dims(rng)
            level = rng.uniform(0, 3) * m_n(box, n)
            assert tail_bound(box, n, k, q, level) == pytest.approx(
                scripted_tail_bound(box, n, k, q, level), rel=1e-12)
            assert tail_probability_bound(box, n, k, q, level) == pytest.approx(
                scripted_tail_probability_bound(box, n, k, q, level), rel=1e-12)

    def test_variants_are_distinct(self):
        box = WORKED_BOX
        level = m_n(box, 100)
        assert tail_bound(box, 100, 2, 2, level) != tail_probability_bound(box, 100, 2, 2, level)


class TestOracleRhs:
    def test_zero_reference_and_penalty(self, rng):
        box = random_box(rng, k=2)
        report = oracle_rhs(box, 100, 10, 2, 2, lambda_=0.0, kl_ref=0.0, l1_ref=0.0)
        assert report.approximation_term == 0.0
        assert report.lambda_term == 0.0
        assert report.oracle_rhs_total == pytest.approx(report.remainder_term, rel=1e-12)

    def test_affine_in_l1_ref(self, rng):
        box = random_box(rng, k=2)
        lam, kappa = 2.0, 12.0
        reports = [
            oracle_rhs(box, 200, 20, 2, 2, lam, 0.0, l1, kappa=kappa)
            for l1 in (0.0, 1.0, 3.0)
        ]
        slope = (1 + 1 / kappa) * lam
        # Only the approximation term moves, linearly with the stated slope.
        assert reports[1].approximation_term - reports[0].approximation_term == \
            pytest.approx(slope, rel=1e-12)
        assert reports[2].approximation_term - reports[0].approximation_term == \
            pytest.approx(3 * slope, rel=1e-12)
        for r in reports[1:]:
            assert r.remainder_term == reports[0].remainder_term
            assert r.lambda_term == reports[0].lambda_term
        scale = reports[0].oracle_rhs_total
        assert reports[1].oracle_rhs_total - reports[0].oracle_rhs_total == \
            pytest.approx(slope, abs=1e-9 * scale)

    def test_full_assembly_worked_box(self):
        lam = lambda_threshold(WORKED_BOX, 100, 10, 1, 2, 1.0, kappa=36.0)
        report = oracle_rhs(WORKED_BOX, 100, 10, 1, 2, lam, kl_ref=0.3, l1_ref=2.0,
                            kappa=36.0, kappa_prime=332.0, x_max=1.0)
        want = scripted_oracle_rhs_total(WORKED_BOX, 100, 10, 1, 2, lam, 0.3, 2.0, 36.0, 332.0)
        assert report.oracle_rhs_total == pytest.approx(want, rel=1e-9)
        assert report.threshold_satisfied

    def test_terms_sum_to_total(self, rng):
        for _ in range(50):
            box = random_box(rng, k=2)
            n, p, q, k = sample_dims(rng)
            report = oracle_rhs(box, n, p, q, k, rng.uniform(0, 10),
                                rng.uniform(0, 2), rng.uniform(0, 5))
            total = report.approximation_term + report.lambda_term + report.remainder_term
            assert report.oracle_rhs_total == pytest.approx(total, abs=1e-12, rel=1e-12)

    def test_threshold_warning_flag(self, rng):
        box = random_box(rng, k=2)
        report = oracle_rhs(box, 100, 10, 2, 2, lambda_=1e-9, kl_ref=0.0, l1_ref=0.0)
        assert not report.threshold_satisfied

    def test_matches_script_on_random_boxes(self, rng):
        for _ in range(50):
            box = random_box(rng, k=3)
            n, p, q, k = sample_dims(rng)
            lam = rng.uniform(0, 100)
            kl_ref, l1_ref = rng.uniform(0, 1), rng.uniform(0, 10)
            kappa = rng.uniform(1, 72)
            kp = rng.uniform(1, 500)
            report = oracle_rhs(box, n, p, q, k, lam, kl_ref, l1_ref, kappa, kp)
            want = scripted_oracle_rhs_total(box, n, p, q, k, lam, kl_ref, l1_ref, kappa, kp)
            assert report.oracle_rhs_total == pytest.approx(want, rel=1e-9)

    def test_report_serialization(self):
        report = oracle_rhs(WORKED_BOX, 100, 10, 1, 2, 170.0, 0.0, 1.0)
        d = report.to_dict()
        assert set(d["oracle_rhs_terms"]) == {
            "approximation_term", "lambda_term", "remainder_term",
        }
        assert d["lambda"] == 170.0
        assert d["oracle_rhs_total"] == report.oracle_rhs_total
