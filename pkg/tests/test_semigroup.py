import math

import numpy as np
import pytest

from hermiteflow.hermite import (
    basis_expansion,
    gauss_hermite_rule,
    random_expansion,
    synthesize_on_grid,
)
from hermiteflow.phasespace import fourier_transform
from hermiteflow.semigroup import (
    ExponentSet,
    FlowParams,
    apply_fractional_power,
    apply_semigroup,
    eigenvalue,
    mehler_apply,
    theoretical_constant,
)
from hermiteflow.hermite import project


class TestEigenvalue:
    def test_bottom_of_spectrum_d1(self):
        assert eigenvalue(0, 1, 1.0) == 1.0

    def test_square_root_case(self):
        assert eigenvalue(1, 2, 0.5) == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize("dim,beta", [(1, 0.5), (2, 1.0), (3, 2.0)])
    def test_ground_eigenvalue_drives_decay(self, dim, beta):
        assert eigenvalue(0, dim, beta) == pytest.approx(dim**beta, rel=1e-15)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            eigenvalue(-1, 1, 1.0)


class TestFractionalPower:
    def test_ground_state_d1(self):
        e = basis_expansion(1, 4, (0,))
        assert apply_fractional_power(e, 1.0).coeffs[0] == 1.0

    def test_beta_zero_is_identity(self):
        rng = np.random.default_rng(0)
        e = random_expansion(2, 6, rng)
        assert np.array_equal(apply_fractional_power(e, 0.0).coeffs, e.coeffs)

    def test_half_powers_compose(self):
        rng = np.random.default_rng(1)
        e = random_expansion(1, 10, rng)
        twice = apply_fractional_power(apply_fractional_power(e, 0.5), 0.5)
        once = apply_fractional_power(e, 1.0)
        assert np.abs(twice.coeffs - once.coeffs).max() < 1e-12 * np.abs(
            once.coeffs
        ).max()


class TestSemigroup:
    def test_ground_state_pure_decay(self):
        for dim, beta, t in [(1, 1.0, 0.7), (2, 0.5, 2.0), (3, 2.0, 0.1)]:
            e = basis_expansion(dim, 3, (0,) * dim)
            out = apply_semigroup(e, FlowParams(beta, t, dim))
            assert complex(out.coeffs[0]) == pytest.approx(
                math.exp(-t * dim**beta), rel=1e-14
            )

    def test_time_zero_identity(self):
        rng = np.random.default_rng(2)
        e = random_expansion(1, 8, rng)
        assert np.array_equal(
            apply_semigroup(e, FlowParams(1.0, 0.0, 1)).coeffs, e.coeffs
        )

    def test_semigroup_law(self):
        rng = np.random.default_rng(3)
        e = random_expansion(2, 9, rng)
        ab = apply_semigroup(
            apply_semigroup(e, FlowParams(1.3, 0.3, 2)), FlowParams(1.3, 0.7, 2)
        )
        once = apply_semigroup(e, FlowParams(1.3, 1.0, 2))
        assert np.abs(ab.coeffs - once.coeffs).max() < 1e-13

    def test_eigen_decay_exactness(self):
        for alpha, t, beta in [((4,), 0.9, 1.0), ((2, 3), 0.25, 0.7)]:
            dim = len(alpha)
            e = basis_expansion(dim, 6, alpha)
            out = apply_semigroup(e, FlowParams(beta, t, dim))
            factor = math.exp(-t * (2 * sum(alpha) + dim) ** beta)
            assert out.l2_norm() / e.l2_norm() == pytest.approx(factor, rel=1e-15)

    def test_monotone_contraction(self):
        rng = np.random.default_rng(4)
        e = random_expansion(1, 12, rng)
        for t in [0.05, 0.4, 2.0]:
            out = apply_semigroup(e, FlowParams(1.0, t, 1))
            assert out.l2_norm() <= math.exp(-t) * e.l2_norm() * (1 + 1e-14)

    def test_commutes_with_projection_exactly(self):
        rng = np.random.default_rng(5)
        e = random_expansion(2, 7, rng)
        p = FlowParams(0.8, 0.6, 2)
        a = project(apply_semigroup(e, p), 2)
        b = apply_semigroup(project(e, 2), p)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_commutes_with_fourier_exactly(self):
        rng = np.random.default_rng(6)
        e = random_expansion(1, 9, rng)
        p = FlowParams(1.5, 0.3, 1)
        a = fourier_transform(apply_semigroup(e, p), -1)
        b = apply_semigroup(fourier_transform(e, -1), p)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_deep_decay_flushes_to_zero(self):
        e = basis_expansion(1, 2, (2,))
        out = apply_semigroup(e, FlowParams(2.0, 40.0, 1))
        assert complex(out.coeffs[2]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_semigroup(basis_expansion(1, 2, (0,)), FlowParams(1.0, 1.0, 2))


class TestExponentSet:
    def test_smoothing_exponent_example(self):
        x = ExponentSet(math.inf, math.inf, 2.0, 2.0)
        assert x.sigma(2, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_no_smoothing_requested(self):
        x = ExponentSet(3.0, 1.5, 3.0, 1.5)
        assert x.sigma(1, 1.0) == 0.0
        assert math.isinf(x.ptilde) and math.isinf(x.qtilde)

    def test_reduction_replaces_targets_by_minima(self):
        x = ExponentSet(2.0, 1.0, 4.0, 3.0).reduced()
        assert (x.p2, x.q2) == (2.0, 1.0)

    def test_positive_exponents_required(self):
        with pytest.raises(ValueError):
            ExponentSet(0.0, 1.0, 1.0, 1.0)


class TestTheoreticalConstant:
    def test_large_time_branch(self):
        params = FlowParams(2.0, 2.0, 1)
        x = ExponentSet(2.0, 2.0, 2.0, 2.0)
        assert theoretical_constant(params, x, 1.0) == pytest.approx(
            math.exp(-2.0), rel=1e-15
        )

    def test_small_time_branch_uses_sigma(self):
        params = FlowParams(1.0, 0.25, 1)
        x = ExponentSet(math.inf, math.inf, 2.0, 2.0)  # sigma = 1/2
        assert theoretical_constant(params, x, 3.0) == pytest.approx(
            3.0 * 0.25**-0.5, rel=1e-15
        )

    def test_constant_scale_passes_through(self):
        params = FlowParams(1.0, 5.0, 2)
        x = ExponentSet(2.0, 2.0, 2.0, 2.0)
        assert theoretical_constant(params, x, 7.0) == pytest.approx(
            7.0 * math.exp(-10.0), rel=1e-15
        )

    def test_nonpositive_time_rejected(self):
        with pytest.raises(ValueError):
            theoretical_constant(
                FlowParams(1.0, 0.0, 1), ExponentSet(2, 2, 2, 2), 1.0
            )


class TestMehler:
    def quad_l2(self, rule, vals, dim):
        lw = rule.lifted_weights()
        w = lw if dim == 1 else np.multiply.outer(lw, lw)
        return math.sqrt(np.sum(w * np.abs(vals) ** 2))

    def test_ground_state_eigenrelation(self):
        rule = gauss_hermite_rule(120)
        e = basis_expansion(1, 0, (0,))
        f = synthesize_on_grid(e, (rule.nodes,))
        out = mehler_apply(f, 0.8, rule)
        assert np.abs(out - math.exp(-0.8) * f).max() < 1e-9

    def test_first_excited_eigenrelation(self):
        rule = gauss_hermite_rule(120)
        e = basis_expansion(1, 1, (1,))
        f = synthesize_on_grid(e, (rule.nodes,))
        out = mehler_apply(f, 0.4, rule)
        assert np.abs(out - math.exp(-3 * 0.4) * f).max() < 1e-9

    @pytest.mark.parametrize("t", [0.05, 0.5, 3.0])
    def test_matches_spectral_flow_d1(self, t):
        rng = np.random.default_rng(7)
        rule = gauss_hermite_rule(140)
        e = random_expansion(1, 12, rng)
        f = synthesize_on_grid(e, (rule.nodes,))
        kernel = mehler_apply(f, t, rule)
        spectral = synthesize_on_grid(
            apply_semigroup(e, FlowParams(1.0, t, 1)), (rule.nodes,)
        )
        rel = self.quad_l2(rule, kernel - spectral, 1) / self.quad_l2(
            rule, spectral, 1
        )
        assert rel < 1e-8

    def test_matches_spectral_flow_d2(self):
        rng = np.random.default_rng(8)
        rule = gauss_hermite_rule(140)
        e = random_expansion(2, 10, rng)
        f = synthesize_on_grid(e, (rule.nodes, rule.nodes))
        kernel = mehler_apply(f, 0.5, rule)
        spectral = synthesize_on_grid(
            apply_semigroup(e, FlowParams(1.0, 0.5, 2)), (rule.nodes, rule.nodes)
        )
        rel = self.quad_l2(rule, kernel - spectral, 2) / self.quad_l2(
            rule, spectral, 2
        )
        assert rel < 1e-8

    def test_time_zero_rejected(self):
        rule = gauss_hermite_rule(10)
        with pytest.raises(ValueError):
            mehler_apply(np.zeros(10), 0.0, rule)

    def test_three_dimensional_rejected(self):
        rule = gauss_hermite_rule(4)
        with pytest.raises(ValueError):
            mehler_apply(np.zeros((4, 4, 4)), 1.0, rule)
