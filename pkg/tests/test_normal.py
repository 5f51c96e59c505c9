import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steinpert.normal import (
    ContinuousProblem,
    ContinuousTestFunction,
    GammaKind,
    Grid,
    SmoothProbe,
    bound_matrix,
    characterization_residual,
    default_grid,
    gamma_constants,
    hbar,
    random_bounded_probe,
    random_lipschitz_probe,
    random_smooth_probe,
    solve_by_scaling,
    stein_solve_normal,
    t_density,
    verify_normal_bounds,
)

SMALL = Grid(-6.0, 6.0, 1 / 64)
IDENT = ContinuousTestFunction.lipschitz(lambda x: x, 1.0, lambda x: np.ones_like(x), label="identity")


class TestHbar:
    def test_constant(self):
        assert hbar(ContinuousTestFunction.bounded(lambda x: np.full_like(x, 0.7), 0.7), 0.3) == pytest.approx(0.7)

    @pytest.mark.parametrize("psi", [0.0, 0.25, 0.5, 0.9])
    def test_indicator_symmetry(self, psi):
        assert hbar(ContinuousTestFunction.indicator(0.0), psi) == pytest.approx(0.5, abs=1e-15)

    def test_second_moment(self):
        sq = ContinuousTestFunction.lipschitz(lambda x: x * x, math.inf, label="square")
        assert hbar(sq, 0.5) == pytest.approx(2.0, abs=1e-10)


class TestSolver:
    def test_constant_gives_zero(self):
        h = ContinuousTestFunction.bounded(lambda x: np.full_like(x, 3.0), 3.0)
        sol = stein_solve_normal(h, 0.25, SMALL)
        assert np.max(np.abs(sol.y)) <= 1e-12

    def test_identity(self):
        sol = stein_solve_normal(IDENT, 0.0, SMALL)
        assert np.max(np.abs(sol.y + 1.0)) <= 1e-9

    def test_tightness_witness(self):
        sol = stein_solve_normal(ContinuousTestFunction.indicator(0.0), 0.0)
        i = int(np.argmin(np.abs(sol.x)))
        assert sol.x[i] == 0.0
        assert sol.y[i] == pytest.approx(math.sqrt(2 * math.pi) / 4, abs=1e-6)
        assert np.max(np.abs(sol.y)) == pytest.approx(math.sqrt(2 * math.pi) / 4, abs=1e-6)

    @pytest.mark.parametrize("psi", [0.0, 0.25, 0.5])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_ode_residual(self, psi, seed):
        rng = np.random.default_rng(seed)
        for h in (random_lipschitz_probe(rng), random_bounded_probe(rng), ContinuousTestFunction.indicator(rng.uniform(-2, 2))):
            assert stein_solve_normal(h, psi).ode_residual() <= 1e-8

    @pytest.mark.parametrize("psi", [0.25, 0.5])
    def test_scaling_covariance(self, psi):
        rng = np.random.default_rng(7)
        for h in (random_lipschitz_probe(rng), ContinuousTestFunction.indicator(0.5)):
            a = stein_solve_normal(h, psi)
            b = solve_by_scaling(h, psi)
            assert np.max(np.abs(a.y - b.y)) <= 1e-8


class TestBounds:
    def test_indicator_line_tight(self):
        rep = verify_normal_bounds(ContinuousTestFunction.indicator(0.0), 0.0)
        line = next(l for l in rep.lines if l.line == "sup|y|")
        assert line.estimate == pytest.approx(line.bound, abs=1e-6)
        assert rep.passed

    def test_bounded_xy(self):
        h = ContinuousTestFunction.bounded(lambda x: np.sign(x), 1.0, lambda x: np.zeros_like(x), (0.0,))
        rep = verify_normal_bounds(h, 0.5)
        line = next(l for l in rep.lines if l.line == "sup|xy|")
        assert line.bound == pytest.approx(4.0)
        assert rep.passed

    def test_lipschitz_second_derivative(self):
        rep = verify_normal_bounds(IDENT, 0.0)
        line = next(l for l in rep.lines if l.line == "sup|y''|")
        assert line.bound == pytest.approx(2.0)
        assert rep.passed

    def test_composite_second_derivative(self):
        # the bound 4 ||f'|| on (g_f)'' follows from c.iii at psi = 0 since 2 <= 4
        rng = np.random.default_rng(11)
        for _ in range(4):
            h = random_lipschitz_probe(rng)
            sol = stein_solve_normal(h, 0.0)
            assert np.max(np.abs(sol.ypp[sol.smooth_mask(0)])) <= 4 * h.const * (1 + 1e-6)

    def test_matrix_small(self):
        reps = bound_matrix(psis=(0.25,), zs=(-1.0, 1.0), lipschitz_probes=2, bounded_probes=2, seed=5)
        assert len(reps) == 6 and all(r.passed for r in reps)


class TestTFamily:
    def test_normal_case(self):
        k, x, p = t_density(7.0, 0.0)
        assert k == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
        assert np.allclose(p, np.exp(-x * x / 2) / math.sqrt(2 * math.pi), atol=1e-15)

    def test_normalizer(self):
        from scipy.integrate import quad

        k, _, _ = t_density(5.0, 0.3)
        val, _ = quad(lambda x: k * (1 + x * x / 5) ** (-6 * 0.3 / 2) * math.exp(-0.7 * x * x / 2), -np.inf, np.inf, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_even(self):
        _, x, p = t_density(4.0, 0.4)
        assert np.allclose(x, -x[::-1]) and np.allclose(p, p[::-1], rtol=0, atol=1e-16)

    def test_zero_probe(self):
        assert characterization_residual(SmoothProbe(lambda x: 0.0, lambda x: 0.0), 5.0, 0.3) == 0.0

    @pytest.mark.parametrize("m", [1.0, 5.0, 30.0])
    def test_sine_normal(self, m):
        assert characterization_residual(SmoothProbe(math.sin, math.cos), m, 0.0) <= 1e-8

    def test_cauchy_probe(self):
        probe = SmoothProbe(lambda x: 1 / (1 + x * x), lambda x: -2 * x / (1 + x * x) ** 2)
        assert characterization_residual(probe, 6.0, 0.4) <= 1e-8

    @given(st.integers(0, 10**6), st.sampled_from([0.0, 0.25, 0.4]), st.sampled_from([5.0, 10.0]))
    def test_random_probes(self, seed, psi, m):
        probe = random_smooth_probe(np.random.default_rng(seed))
        assert characterization_residual(probe, m, psi) <= 1e-8


class TestGammaConstants:
    def test_t_family(self):
        g = gamma_constants(ContinuousProblem(psi=0.1, m=10.0), GammaKind.T_FAMILY_SUP)
        assert g.value == pytest.approx(2 * 0.1 / 0.9 * 1.1) and g.contraction_ok

    def test_student_limit(self):
        g = gamma_constants(ContinuousProblem(psi=1.0, m=10.0), "t_family_sup")
        assert g.value == math.inf and not g.contraction_ok

    def test_jump_diffusion(self):
        p = ContinuousProblem(alpha=1.0, z=0.1)
        g = gamma_constants(p, GammaKind.JUMP_DIFFUSION_SUP)
        assert g.value == pytest.approx(math.sqrt(2 * math.pi) * 0.1) and g.contraction_ok
        assert gamma_constants(p, "jump_diffusion_norm1").value == pytest.approx((4 + math.sqrt(2 * math.pi)) * 0.1)
        assert gamma_constants(p, "jump_diffusion_centred_sup").value == pytest.approx(0.02)
        assert gamma_constants(p, "jump_diffusion_centred_deriv").value == pytest.approx(0.01)

    @given(st.floats(0, 0.99), st.floats(0.5, 50))
    def test_t_flag_threshold(self, psi, m):
        g = gamma_constants(ContinuousProblem(psi=psi, m=m), "t_family_sup")
        assert g.contraction_ok == (2 * psi / (1 - psi) * (1 + 1 / m) < 1)


class TestProblem:
    def test_grid_coverage(self):
        with pytest.raises(ValueError):
            ContinuousProblem(psi=0.5, grid=Grid(-5, 5))
        ContinuousProblem(psi=0.5, grid=default_grid(0.5))

    def test_psi_range(self):
        with pytest.raises(ValueError):
            ContinuousProblem(psi=1.5)
