import numpy as np
import pytest

from chemoflock import (
    GCache,
    ModelParams,
    cbar,
    g_infinity,
    g_of_t,
    integrate_cm,
    integrate_planar,
    lyapunov_constants,
    lyapunov_value,
    preset,
)

from .oracles import scipy_kernel_integral

PARAMS = preset(1).params  # beta=5, gamma=200, D=200, xi=0.5, N=10


class TestKernel:
    def test_direct_formula_value(self):
        # gamma = xi = D = 1 at z = 0.25: exp(-1 - 0.25) / (8 * 0.0625).
        p = ModelParams(beta=1.0, sigma=0.5, gamma=1.0, diffusion=1.0, xi=1.0, n_particles=1)
        assert cbar(0.25, p) == pytest.approx(2.0 * np.exp(-1.25), rel=1e-14)

    def test_vanishes_at_zero_and_infinity(self):
        assert cbar(0.0, PARAMS) == 0.0
        assert cbar(-1.0, PARAMS) == 0.0
        assert cbar(1e-9, PARAMS) == 0.0  # essential singularity dominates
        assert cbar(500.0, PARAMS) < 1e-200

    def test_linear_in_gamma(self):
        doubled = ModelParams(beta=5.0, sigma=0.5, gamma=400.0, diffusion=200.0,
                              xi=0.5, n_particles=10)
        z = np.array([0.01, 0.1, 1.0, 5.0])
        assert np.allclose(cbar(z, doubled), 2 * cbar(z, PARAMS), rtol=1e-14)


class TestGOfT:
    def test_empty_integral(self):
        assert g_of_t(0.0, PARAMS) == 0.0

    def test_monotone_nondecreasing(self):
        ts = [0.01, 0.05, 0.2, 1.0, 3.0, 10.0]
        vals = [g_of_t(t, PARAMS) for t in ts]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_agrees_with_scipy_quadrature(self):
        for t in (0.5, 1.0, 5.0):
            assert g_of_t(t, PARAMS) == pytest.approx(scipy_kernel_integral(PARAMS, 0.0, t), rel=1e-8)

    def test_g_infinity_cross_checked_against_second_scheme(self):
        ours = g_infinity(PARAMS)
        ref = scipy_kernel_integral(PARAMS, 0.0, 60.0)
        assert ours == pytest.approx(ref, rel=1e-8)

    def test_doubling_gamma_doubles_g(self):
        doubled = ModelParams(beta=5.0, sigma=0.5, gamma=400.0, diffusion=200.0,
                              xi=0.5, n_particles=10)
        assert g_of_t(2.0, doubled) == pytest.approx(2 * g_of_t(2.0, PARAMS), rel=1e-9)

    def test_cache_matches_direct_evaluation(self):
        cache = GCache(PARAMS, 10.0)
        for t in (0.003, 0.02, 0.7, 4.0, 9.5):
            assert cache(t) == pytest.approx(g_of_t(t, PARAMS), rel=1e-5)


@pytest.fixture(scope="module")
def constants():
    return lyapunov_constants(1.0, PARAMS)


class TestLyapunovConstants:
    def test_all_positive(self, constants):
        for name in ("g_lo", "g_hi", "psi_lo", "psi_hi", "psi_dot_hi", "k", "k1", "k2", "k3"):
            assert getattr(constants, name) > 0.0, name

    def test_orderings(self, constants):
        assert constants.g_lo <= constants.g_hi
        assert constants.psi_lo <= constants.psi_hi
        assert constants.k2 <= constants.k1

    def test_psi_hi_is_inverse_e(self, constants):
        assert constants.psi_hi == pytest.approx(np.exp(-1.0), rel=1e-14)

    def test_k_is_min_of_three_expressions(self, constants):
        c = constants
        beta = PARAMS.beta
        exprs = (
            c.psi_lo / c.psi_hi,
            c.g_lo * c.psi_lo / c.psi_hi,
            2 * beta * c.g_lo * c.psi_lo**2
            / (2 * c.g_lo * c.psi_lo * c.psi_hi + (c.psi_dot_hi + beta * c.psi_hi) ** 2),
        )
        assert c.k == pytest.approx(min(exprs), rel=1e-12)

    def test_regression_values_preset1_tbar1(self, constants):
        # Frozen from the first verified computation of this build.
        assert constants.g_lo == pytest.approx(2.479114, rel=1e-5)
        assert constants.g_hi == pytest.approx(2.479578, rel=1e-5)
        assert constants.k == pytest.approx(0.827112, rel=1e-4)
        assert constants.k1 == pytest.approx(1.064321, rel=1e-4)
        assert constants.k2 == pytest.approx(0.183905, rel=1e-4)
        assert constants.k3 == pytest.approx(0.377099, rel=1e-4)

    def test_requires_positive_tbar(self):
        with pytest.raises(ValueError):
            lyapunov_constants(0.0, PARAMS)


class TestLyapunovValue:
    def test_zero_state_gives_zero(self, constants):
        assert lyapunov_value(1.0, 0.0, 0.0, PARAMS, 1.0, constants=constants) == 0.0

    def test_reduces_to_v_squared_psi_when_x_zero(self, constants):
        t = 2.0
        g = g_of_t(t, PARAMS)
        psi = np.exp(-g / constants.g_lo)
        u = lyapunov_value(t, 0.7, 0.0, PARAMS, 1.0, constants=constants)
        assert u == pytest.approx(0.7**2 * psi, rel=1e-9)

    def test_sandwich_bounds_on_grid(self, constants):
        rng = np.random.default_rng(5)
        for _ in range(40):
            t = rng.uniform(1.0, 20.0)
            v, x = rng.uniform(-3, 3, size=2)
            u = lyapunov_value(t, v, x, PARAMS, 1.0, constants=constants)
            y2 = v * v + x * x
            assert constants.k2 * y2 - 1e-12 <= u <= constants.k1 * y2 + 1e-12

    def test_domain_error_below_tbar(self, constants):
        with pytest.raises(ValueError):
            lyapunov_value(0.5, 1.0, 1.0, PARAMS, 1.0, constants=constants)


class TestIntegratePlanar:
    def test_equilibrium_stays_zero(self):
        s = integrate_planar(0.0, 0.0, PARAMS, t_end=5.0, dt=1e-3)
        assert np.all(s.v == 0.0) and np.all(s.x == 0.0)

    def test_certificate_along_trajectory(self):
        s = integrate_planar(1.0, 0.5, PARAMS, t_end=25.0, dt=1e-3, t_bar=1.0)
        mask = s.t >= 1.0
        u = s.u[mask]
        assert np.all(np.diff(u) <= 1e-12 * u.max())
        ynorm = np.hypot(s.v[mask], s.x[mask])
        i_bar = np.searchsorted(s.t, 1.0)
        env = s.constants.decay_envelope(np.hypot(s.v[i_bar], s.x[i_bar]), s.t[mask])
        assert np.all(ynorm <= env * (1 + 1e-9))

    def test_udot_bounded_by_k3(self):
        s = integrate_planar(-0.5, 1.2, PARAMS, t_end=20.0, dt=1e-3, t_bar=1.0)
        mask = s.t >= 1.0
        t, u = s.t[mask], s.u[mask]
        v, x = s.v[mask], s.x[mask]
        du = np.diff(u) / np.diff(t)
        y2_mid = 0.5 * (v[1:] ** 2 + x[1:] ** 2 + v[:-1] ** 2 + x[:-1] ** 2)
        tol = 1e-6 * np.nanmax(s.u)
        assert np.all(du <= -s.constants.k3 * y2_mid + tol)


class TestPsiProperties:
    def test_psi_nonincreasing_beyond_tbar(self, constants):
        cache = GCache(PARAMS, 40.0)
        ts = np.linspace(1.0, 40.0, 400)
        psi = np.exp(-cache(ts) / constants.g_lo)
        assert np.all(np.diff(psi) <= 1e-15)

    def test_psi_dot_g_inequality(self, constants):
        # psi_dot g + psi g_dot = g_dot psi (1 - g/g_lo) <= 0 for t >= t_bar.
        cache = GCache(PARAMS, 40.0)
        ts = np.geomspace(1.0, 40.0, 300)
        g = cache(ts)
        gdot = PARAMS.n_particles * cbar(ts, PARAMS)
        psi = np.exp(-g / constants.g_lo)
        psidot = -psi * gdot / constants.g_lo
        assert np.all(psidot * g + psi * gdot <= 1e-15)

    def test_psi_dot_bound_holds_on_samples(self, constants):
        cache = GCache(PARAMS, 40.0)
        ts = np.geomspace(1.0, 40.0, 500)
        psidot = np.exp(-cache(ts) / constants.g_lo) * PARAMS.n_particles \
            * cbar(ts, PARAMS) / constants.g_lo
        assert psidot.max() <= constants.psi_dot_hi * (1 + 1e-9)


class TestIntegrateCm:
    def test_zero_initial_datum_stays_zero(self):
        s = integrate_cm(0.0, PARAMS, t_end=5.0, dt=0.01)
        assert np.all(s.v == 0.0)

    def test_positive_datum_decays_monotonically(self):
        s = integrate_cm(1.0, PARAMS, t_end=120.0, dt=0.01)
        assert np.all(s.v > 0.0)
        assert np.all(np.diff(s.v) < 0.0)
        assert s.v[-1] < 0.2

    def test_sign_symmetry_exact(self):
        pos = integrate_cm(0.7, PARAMS, t_end=10.0, dt=0.01)
        neg = integrate_cm(-0.7, PARAMS, t_end=10.0, dt=0.01)
        assert np.array_equal(neg.v, -pos.v)

    def test_never_crosses_zero(self):
        s = integrate_cm(0.1, PARAMS, t_end=200.0, dt=0.02)
        assert np.all(s.v > 0.0)
