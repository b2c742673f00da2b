import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoflock import (
    DimensionalParams,
    DomainSpec,
    ModelParams,
    ParticleState,
    Role,
    alignment_force,
    alignment_weight,
    alignment_weight_matrix,
    minimum_image,
    nondimensionalize,
    wrap_positions,
)

DOMAIN = DomainSpec(lx=50.0, ly=50.0, nx=200, ny=200)


def make_params(**kw):
    base = dict(beta=5.0, sigma=0.5, gamma=200.0, diffusion=200.0, xi=0.5, n_particles=10)
    base.update(kw)
    return ModelParams(**base)


class TestModelParams:
    def test_rejects_nonpositive_diffusion(self):
        with pytest.raises(ValueError):
            make_params(diffusion=0.0)

    def test_rejects_zero_particles(self):
        with pytest.raises(ValueError):
            make_params(n_particles=0)

    def test_rejects_negative_rates(self):
        for field in ("beta", "sigma", "gamma", "xi"):
            with pytest.raises(ValueError):
                make_params(**{field: -1.0})


class TestNondimensionalize:
    def test_unit_scales_are_identity(self):
        dim = DimensionalParams(beta=5.0, sigma=0.5, gamma=7.0, diffusion=3.0,
                                xi=0.25, n_particles=4, eta=1.0, radius=1.0, f_max=1.0)
        params, scales = nondimensionalize(dim)
        assert params.beta == 5.0
        assert params.gamma == 7.0
        assert params.diffusion == 3.0
        assert params.xi == 0.25
        assert scales.time == 1.0 and scales.length == 1.0

    def test_beta_scales_with_decay_rate(self):
        dim = DimensionalParams(beta=5.0, sigma=0.5, gamma=1.0, diffusion=1.0,
                                xi=1.0, n_particles=2, eta=0.5)
        params, _ = nondimensionalize(dim)
        assert params.beta == pytest.approx(10.0)

    def test_diffusion_scales_with_radius_squared(self):
        dim = DimensionalParams(beta=1.0, sigma=0.5, gamma=1.0, diffusion=8.0,
                                xi=1.0, n_particles=2, radius=2.0)
        params, scales = nondimensionalize(dim)
        assert params.diffusion == pytest.approx(2.0)
        assert scales.length == 2.0

    def test_rejects_nonpositive_scales(self):
        for field in ("eta", "radius", "f_max"):
            dim = DimensionalParams(beta=1.0, sigma=0.5, gamma=1.0, diffusion=1.0,
                                    xi=1.0, n_particles=2, **{field: 0.0})
            with pytest.raises(ValueError):
                nondimensionalize(dim)


class TestDomainSpec:
    def test_spacing(self):
        assert DOMAIN.dx == 0.25
        assert DOMAIN.dy == 0.25

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            DomainSpec(lx=1.0, ly=1.0, nx=3, ny=8)


class TestMinimumImage:
    def test_wraps_to_nearest_copy(self):
        d = minimum_image(np.array([49.0, -49.0]), np.array([50.0, 50.0]))
        assert np.allclose(d, [-1.0, 1.0])

    def test_identity_for_small_displacements(self):
        d = minimum_image(np.array([3.0, -4.0]), np.array([50.0, 50.0]))
        assert np.allclose(d, [3.0, -4.0])

    def test_wrap_positions_lands_in_cell(self):
        pos = np.array([[51.0, -0.5], [25.0, 25.0]])
        wrapped = wrap_positions(pos, DOMAIN)
        assert np.all(wrapped >= 0.0) and np.all(wrapped < 50.0)
        assert np.allclose(wrapped[0], [1.0, 49.5])


class TestAlignmentWeight:
    def test_zero_distance_gives_one(self):
        x = np.array([3.0, 4.0])
        assert alignment_weight(x, x, 0.5, DOMAIN) == 1.0

    def test_unit_distance_half_at_sigma_one(self):
        a = np.array([0.0, 0.0])
        b = np.array([1.0, 0.0])
        assert alignment_weight(a, b, 1.0, DOMAIN) == pytest.approx(0.5)

    def test_sigma_zero_is_flat(self):
        a = np.array([0.0, 0.0])
        b = np.array([13.0, 7.0])
        assert alignment_weight(a, b, 0.0, DOMAIN) == 1.0

    def test_uses_minimum_image_distance(self):
        a = np.array([0.5, 25.0])
        b = np.array([49.5, 25.0])
        w_periodic = alignment_weight(a, b, 1.0, DOMAIN)
        assert w_periodic == pytest.approx(0.5)  # distance 1 across the seam
        w_raw = alignment_weight(a, b, 1.0, DOMAIN, raw_distance=True)
        assert w_raw < 1e-3

    @given(
        st.floats(0.0, 49.9), st.floats(0.0, 49.9),
        st.floats(0.0, 49.9), st.floats(0.0, 49.9),
        st.floats(0.0, 3.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_in_unit_interval(self, ax, ay, bx, by, sigma):
        a, b = np.array([ax, ay]), np.array([bx, by])
        wab = alignment_weight(a, b, sigma, DOMAIN)
        wba = alignment_weight(b, a, sigma, DOMAIN)
        assert wab == pytest.approx(wba, rel=1e-12)
        assert 0.0 < wab <= 1.0

    @given(st.floats(0.01, 3.0), st.floats(0.0, 10.0), st.floats(0.1, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_nonincreasing_in_distance(self, sigma, d, extra):
        origin = np.array([0.0, 0.0])
        near = np.array([min(d, 24.0), 0.0])
        far = np.array([min(d + extra, 24.9), 0.0])
        assert alignment_weight(origin, near, sigma, DOMAIN) >= alignment_weight(
            origin, far, sigma, DOMAIN
        )


def random_state(rng, n=8, speed=3.0):
    pos = rng.uniform(0.0, 50.0, size=(n, 2))
    vel = rng.normal(0.0, speed, size=(n, 2))
    return ParticleState(pos, vel, np.full(n, Role.LEADER, dtype=np.int8))


class TestAlignmentForce:
    def test_equal_velocities_feel_nothing(self):
        rng = np.random.default_rng(0)
        pos = rng.uniform(0.0, 50.0, size=(6, 2))
        vel = np.tile([1.5, -2.0], (6, 1))
        state = ParticleState(pos, vel)
        for i in range(6):
            assert np.allclose(alignment_force(i, state, make_params(n_particles=6), DOMAIN), 0.0)

    def test_single_particle_zero(self):
        state = ParticleState(np.array([[25.0, 25.0]]), np.array([[1.0, 2.0]]))
        assert np.allclose(alignment_force(0, state, make_params(n_particles=1), DOMAIN), 0.0)

    def test_two_coincident_particles(self):
        state = ParticleState(
            np.array([[10.0, 10.0], [10.0, 10.0]]),
            np.array([[1.0, 0.0], [0.0, 0.0]]),
        )
        params = make_params(beta=1.0, n_particles=2)
        force = alignment_force(0, state, params, DOMAIN)
        assert np.allclose(force, [-0.5, 0.0])

    def test_index_out_of_range(self):
        state = ParticleState(np.array([[1.0, 1.0]]), np.array([[0.0, 0.0]]))
        with pytest.raises(IndexError):
            alignment_force(3, state, make_params(n_particles=1), DOMAIN)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_total_momentum_conserved(self, seed):
        rng = np.random.default_rng(seed)
        state = random_state(rng)
        params = make_params(n_particles=state.n)
        total = sum(alignment_force(i, state, params, DOMAIN) for i in range(state.n))
        scale = np.abs(state.velocities).max() * params.beta
        assert np.linalg.norm(total) <= 1e-12 * max(scale, 1.0)


class TestWeightMatrix:
    def test_matches_pairwise_weights(self):
        rng = np.random.default_rng(3)
        pos = rng.uniform(0.0, 50.0, size=(5, 2))
        w = alignment_weight_matrix(pos, 0.7, DOMAIN)
        for i in range(5):
            for j in range(5):
                assert w[i, j] == pytest.approx(
                    alignment_weight(pos[i], pos[j], 0.7, DOMAIN), rel=1e-12
                )

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        pos = rng.uniform(0.0, 50.0, size=(9, 2))
        w = alignment_weight_matrix(pos, 1.3, DOMAIN)
        assert np.array_equal(w, w.T)


class TestParticleState:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ParticleState(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_nonfinite_rejected(self):
        pos = np.array([[np.nan, 0.0]])
        with pytest.raises(ValueError):
            ParticleState(pos, np.zeros((1, 2)))

    def test_default_roles_all_leaders(self):
        state = ParticleState(np.zeros((4, 2)), np.zeros((4, 2)))
        assert state.leader_mask.all()
