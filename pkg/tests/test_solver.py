import math

import numpy as np
import pytest

from hermiteflow.estimator import generic_random_expansions
from hermiteflow.hermite import (
    basis_expansion,
    gauss_hermite_rule,
    hermite_matrix,
    random_expansion,
    synthesize_on_grid,
    zero_expansion,
)
from hermiteflow.phasespace import NormSpec, default_grid, gaussian_window, modulation_norm
from hermiteflow.semigroup import FlowParams, apply_semigroup
from hermiteflow.solver import (
    BlowupVerdict,
    PicardConvergenceError,
    SolverConfig,
    Trajectory,
    blowup_contrast,
    blowup_ode_oracle,
    calibrate_eps,
    dealias_order,
    decay_monitor,
    duhamel_map,
    integrate_free_constant,
    nonlinearity,
    picard_solve,
)


def small_cfg(**overrides):
    base = dict(
        beta=1.0,
        lam=1.0,
        k=1,
        dim=1,
        degree=12,
        dt=0.05,
        horizon=2.0,
        allow_out_of_theory=True,
    )
    base.update(overrides)
    return SolverConfig(**base)


class TestNonlinearity:
    def test_zero_in_zero_out(self):
        out = nonlinearity(zero_expansion(1, 6), 1, 1.0)
        assert np.abs(out.coeffs).max() == 0.0

    def test_ground_state_cubic_against_dense_grid(self):
        # |h_0|^2 h_0 = pi^{-3/4} exp(-3x^2/2); oracle by dense trapezoid
        x = np.linspace(-15, 15, 40001)
        w = math.pi**-0.75 * np.exp(-1.5 * x**2)
        H = hermite_matrix(12, x)
        oracle = np.trapezoid(w[None, :] * H, x, axis=1)
        out = nonlinearity(basis_expansion(1, 12, (0,)), 1, 1.0)
        assert np.abs(out.coeffs - oracle).max() < 1e-9

    def test_dealiased_projection_is_exact(self):
        # the default rule renders the projection exactly; doubling the
        # order must only move the coefficients at rounding level
        rng = np.random.default_rng(30)
        e = random_expansion(1, 8, rng)
        a = nonlinearity(e, 2, 1.0)
        b = nonlinearity(e, 2, 1.0, gauss_hermite_rule(2 * dealias_order(8, 2)))
        scale = np.abs(a.coeffs).max()
        assert np.abs(a.coeffs - b.coeffs).max() < 1e-13 * scale

    def test_coupling_scales_linearly(self):
        rng = np.random.default_rng(31)
        e = random_expansion(1, 6, rng)
        a = nonlinearity(e, 1, 2.0j)
        b = nonlinearity(e, 1, 1.0)
        assert np.abs(a.coeffs - 2.0j * b.coeffs).max() < 1e-12

    def test_insufficient_rule_rejected(self):
        with pytest.raises(ValueError, match="dealias"):
            nonlinearity(basis_expansion(1, 12, (0,)), 1, 1.0, gauss_hermite_rule(14))

    def test_multilinear_norm_bound(self):
        # ||NL(e)||_{M^{p,r}} <= C ||e||^{2k+1}_{M^{p,q}} with
        # 1/r = (2k+1)/q - 2k; constant measured on the corpus and frozen.
        k, q = 1, 1.2
        r = 1.0 / ((2 * k + 1) / q - 2 * k)
        grid = default_grid(1, 10)
        w = gaussian_window(1)
        for e in generic_random_expansions(10, 1, 10, n_modes=8, seed=3):
            e = (1.0 / e.l2_norm()) * e
            num = modulation_norm(nonlinearity(e, k, 1.0), NormSpec(2.0, r), grid, w)
            den = modulation_norm(e, NormSpec(2.0, q), grid, w)
            assert num <= 0.05 * den ** (2 * k + 1)


class TestDuhamel:
    def test_linear_part_independent_of_trajectory(self):
        cfg = small_cfg(lam=0.0)
        u0 = 0.3 * basis_expansion(1, 12, (0,))
        times = np.linspace(0.0, cfg.horizon, round(cfg.horizon / cfg.dt) + 1)
        rng = np.random.default_rng(32)
        arbitrary = [random_expansion(1, 12, rng) for _ in times]
        out = duhamel_map(arbitrary, u0, cfg, times)
        for t, state in zip(times, out):
            expected = apply_semigroup(u0, FlowParams(1.0, float(t), 1))
            assert np.abs(state.coeffs - expected.coeffs).max() < 1e-15

    def test_first_iterate_from_zero_is_linear_flow(self):
        cfg = small_cfg()
        u0 = basis_expansion(1, 12, (0,))
        times = np.linspace(0.0, cfg.horizon, round(cfg.horizon / cfg.dt) + 1)
        zeros = [zero_expansion(1, 12) for _ in times]
        out = duhamel_map(zeros, u0, cfg, times)
        for t, state in zip(times, out):
            expected = apply_semigroup(u0, FlowParams(1.0, float(t), 1))
            assert np.abs(state.coeffs - expected.coeffs).max() < 1e-15

    def test_mesh_mismatch_rejected(self):
        cfg = small_cfg()
        with pytest.raises(ValueError):
            duhamel_map([zero_expansion(1, 12)], basis_expansion(1, 12, (0,)), cfg)


class TestPicard:
    def test_linear_problem_converges_immediately(self):
        cfg = small_cfg(lam=0.0)
        tr = picard_solve(0.5 * basis_expansion(1, 12, (0,)), cfg, NormSpec(2, 2))
        assert len(tr.contraction_ratios) == 0  # one iteration
        assert tr.residual < cfg.picard_tol

    def test_small_data_contracts_and_stays_in_ball(self):
        cfg = small_cfg()
        u0 = 0.01 * basis_expansion(1, 12, (0,))
        tr = picard_solve(u0, cfg, NormSpec(2, 2))
        assert all(r <= 0.55 for r in tr.contraction_ratios)
        assert tr.residual < 1e-8
        assert tr.norms.max() <= cfg.eps

    def test_fixed_point_residual_definition(self):
        cfg = small_cfg()
        u0 = 0.01 * basis_expansion(1, 12, (0,))
        tr = picard_solve(u0, cfg, NormSpec(2, 2))
        recomputed = duhamel_map(list(tr.states), u0, cfg, tr.times)
        defect = max(
            modulation_norm(a - b, NormSpec(2, 2), default_grid(1, 12))
            for a, b in zip(recomputed, tr.states)
        )
        assert defect == pytest.approx(tr.residual, rel=1e-6, abs=1e-12)

    def test_time_step_refinement_is_second_order(self):
        u0 = 0.01 * basis_expansion(1, 12, (0,))
        finals = []
        for dt in [0.1, 0.05, 0.025]:
            cfg = small_cfg(dt=dt, picard_tol=1e-13)
            finals.append(picard_solve(u0, cfg, NormSpec(2, 2)).norms[-1])
        ratio = (finals[0] - finals[1]) / (finals[1] - finals[2])
        assert ratio == pytest.approx(4.0, abs=0.5)

    def test_continuity_modulus_improves_with_dt(self):
        u0 = 0.05 * basis_expansion(1, 12, (0,)) + 0.02 * basis_expansion(1, 12, (2,))
        mods = []
        grid = default_grid(1, 12)
        for dt in [0.04, 0.02]:
            cfg = small_cfg(dt=dt)
            tr = picard_solve(u0, cfg, NormSpec(2, 2))
            diffs = [
                modulation_norm(a - b, NormSpec(2, 2), grid)
                for a, b in zip(tr.states[1:], tr.states[:-1])
            ]
            mods.append(max(diffs))
        order = math.log2(mods[0] / mods[1])
        assert order >= 1.0 - 0.1

    def test_truncation_robustness(self):
        finals = {}
        for degree in [12, 16]:
            cfg = small_cfg(degree=degree)
            u0 = 0.01 * basis_expansion(1, degree, (0,))
            finals[degree] = picard_solve(u0, cfg, NormSpec(2, 2)).norms[-1]
        assert abs(finals[12] - finals[16]) <= 0.01 * finals[12]

    def test_local_mode_marches_to_horizon(self):
        cfg = small_cfg(lam=-1.0, eps=1e-6)  # force local mode
        u0 = 0.3 * basis_expansion(1, 12, (0,))
        tr = picard_solve(u0, cfg, NormSpec(2, 2))
        assert tr.times[-1] == pytest.approx(cfg.horizon)
        assert np.all(np.isfinite(tr.norms))

    def test_exponent_guard_raises_without_override(self):
        cfg = small_cfg(allow_out_of_theory=False)
        with pytest.raises(ValueError, match="q="):
            picard_solve(0.01 * basis_expansion(1, 12, (0,)), cfg, NormSpec(2, 2))

    def test_admissibility_inequality_guard(self):
        cfg = small_cfg(allow_out_of_theory=False, beta=0.4, k=2, dim=3, degree=4)
        with pytest.raises(ValueError, match="admissibility"):
            picard_solve(0.01 * basis_expansion(3, 4, (0, 0, 0)), cfg, NormSpec(2, 1.25))

    def test_quasi_banach_exponent_guard(self):
        cfg = small_cfg(allow_out_of_theory=False)
        with pytest.raises(ValueError, match="p must be"):
            picard_solve(0.01 * basis_expansion(1, 12, (0,)), cfg, NormSpec(0.5, 1.2))

    def test_layout_mismatch_rejected(self):
        cfg = small_cfg(degree=10)
        with pytest.raises(ValueError):
            picard_solve(basis_expansion(1, 12, (0,)), cfg, NormSpec(2, 2))


class TestDecayMonitor:
    def test_linear_flow_weight_cancels_exactly(self):
        cfg = small_cfg(lam=0.0)
        u0 = 0.4 * basis_expansion(1, 12, (0,))
        tr = picard_solve(u0, cfg, NormSpec(2, 2))
        x = decay_monitor(tr, cfg)
        assert x == pytest.approx(tr.norms[0], rel=1e-10)

    def test_horizon_stability_small_data(self):
        u0 = 0.01 * basis_expansion(1, 12, (0,))
        xs = []
        for horizon in [2.0, 4.0, 8.0]:
            cfg = small_cfg(horizon=horizon)
            xs.append(decay_monitor(picard_solve(u0, cfg, NormSpec(2, 2)), cfg))
        assert max(xs) / min(xs) <= 1.10

    def test_defocusing_no_larger_than_focusing(self):
        u0 = 0.01 * basis_expansion(1, 12, (0,))
        cfg_f = small_cfg(lam=1.0)
        cfg_d = small_cfg(lam=-1.0)
        x_f = decay_monitor(picard_solve(u0, cfg_f, NormSpec(2, 2)), cfg_f)
        x_d = decay_monitor(picard_solve(u0, cfg_d, NormSpec(2, 2)), cfg_d)
        assert x_d <= x_f * (1 + 1e-12)


class TestBlowup:
    def test_ode_oracle_closed_forms(self):
        assert blowup_ode_oracle(1.0, 1, 1.0) == 0.5
        assert blowup_ode_oracle(2.0, 1, 1.0) == 0.125
        assert blowup_ode_oracle(1.0, 2, 1.0) == 0.25

    def test_small_data_blows_up_later_not_never(self):
        assert blowup_ode_oracle(0.05, 1, 1.0) == pytest.approx(200.0)

    def test_oracle_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            blowup_ode_oracle(0.0, 1, 1.0)
        with pytest.raises(ValueError):
            blowup_ode_oracle(1.0, 1, -1.0)

    @pytest.mark.parametrize("a,k", [(1.0, 1), (2.0, 1), (1.0, 2)])
    def test_free_run_hits_oracle_time(self, a, k):
        t_num, _ = integrate_free_constant(a, k, 1.0)
        t_ode = blowup_ode_oracle(a, k, 1.0)
        assert abs(t_num - t_ode) / t_ode < 0.05

    def test_contrast_small_constant_datum(self):
        cfg = small_cfg(dt=0.02, eps=0.2)
        result = blowup_contrast(0.05, cfg)
        assert result.free.blew_up
        assert result.free.relative_gap < 0.05
        assert not result.trapped.blew_up
        assert math.isfinite(result.x_estimate)
        assert 0.0 < result.truncation_error < 1.0

    def test_contrast_zero_datum(self):
        result = blowup_contrast(0.0, small_cfg())
        assert not result.free.blew_up and not result.trapped.blew_up

    def test_contrast_large_datum_reports_divergence_as_verdict(self):
        cfg = small_cfg(dt=0.05, horizon=1.0, eps=0.2, picard_max_iters=8)
        result = blowup_contrast(1.0, cfg)
        assert result.free.blew_up
        assert result.trapped.blew_up
        assert result.trapped.t_star_numeric <= cfg.horizon

    def test_negative_datum_rejected(self):
        with pytest.raises(ValueError):
            blowup_contrast(-1.0, small_cfg())


class TestTrajectoryType:
    def test_times_must_increase_from_zero(self):
        e = zero_expansion(1, 2)
        with pytest.raises(ValueError):
            Trajectory(
                times=np.array([0.1, 0.2]),
                states=(e, e),
                norms=np.zeros(2),
                xnorm_running=np.zeros(2),
            )

    def test_states_must_share_layout(self):
        with pytest.raises(ValueError):
            Trajectory(
                times=np.array([0.0, 0.1]),
                states=(zero_expansion(1, 2), zero_expansion(1, 3)),
                norms=np.zeros(2),
                xnorm_running=np.zeros(2),
            )

    def test_verdict_requires_time_when_blown(self):
        with pytest.raises(ValueError):
            BlowupVerdict(blew_up=True)


class TestCalibration:
    def test_calibrated_radius_is_positive_and_bounded(self):
        cfg = small_cfg(horizon=1.5)
        eps = calibrate_eps(cfg, NormSpec(2, 2), lo=0.005, hi=0.32, rounds=4)
        assert 0.005 <= eps <= 0.32
