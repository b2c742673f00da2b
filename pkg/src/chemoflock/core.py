"""Dimensionless model types and the alignment interaction.

The model couples N point particles to a diffusing chemoattractant field on a
periodic rectangle.  After nondimensionalization the particle radius and the
signal decay rate are both 1, so the remaining physical knobs are the
alignment strength ``beta``, the communication decay exponent ``sigma``, the
chemotactic sensitivity ``gamma``, the signal diffusivity ``diffusion`` and
the signal production rate ``xi``.

Everything in this module is a pure function of immutable inputs and is safe
to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

__all__ = [
    "ModelParams",
    "DimensionalParams",
    "NondimensionalScales",
    "DomainSpec",
    "Role",
    "ParticleState",
    "nondimensionalize",
    "minimum_image",
    "wrap_positions",
    "periodic_distance",
    "alignment_weight",
    "alignment_weight_matrix",
    "alignment_force",
]


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters (particle radius and decay rate are 1).

    beta : alignment strength, >= 0
    sigma : communication decay exponent, >= 0
    gamma : chemotactic sensitivity, >= 0
    diffusion : signal diffusion coefficient, > 0
    xi : signal production rate, >= 0
    n_particles : number of agents, >= 1
    """

    beta: float
    sigma: float
    gamma: float
    diffusion: float
    xi: float
    n_particles: int

    def __post_init__(self):
        if not self.diffusion > 0.0:
            raise ValueError(f"diffusion must be positive, got {self.diffusion}")
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        for name in ("beta", "sigma", "gamma", "xi"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class DimensionalParams:
    """Dimensional parameter set, converted by :func:`nondimensionalize`."""

    beta: float
    sigma: float
    gamma: float
    diffusion: float
    xi: float
    n_particles: int
    eta: float = 1.0
    radius: float = 1.0
    f_max: float = 1.0


@dataclass(frozen=True)
class NondimensionalScales:
    """Conversion factors between dimensional and dimensionless quantities.

    Dimensionless time is ``t * eta``, dimensionless length is ``x / radius``
    and dimensionless concentration is ``f / f_max``, so a dimensionless
    output is mapped back by multiplying with these scales.
    """

    time: float
    length: float
    concentration: float


def nondimensionalize(dim: DimensionalParams) -> tuple[ModelParams, NondimensionalScales]:
    """Rescale a dimensional parameter set to the unit-radius, unit-decay form.

    The rescalings are ``beta* = beta/eta``, ``gamma* = gamma f_max/(R^2 eta^2)``,
    ``D* = D/(R^2 eta)`` and ``xi* = xi/(f_max eta)``; ``sigma`` and the particle
    count are already dimensionless.

    Raises ValueError if eta, radius or f_max is not strictly positive.
    """
    for name in ("eta", "radius", "f_max"):
        value = getattr(dim, name)
        if not value > 0.0:
            raise ValueError(f"{name} must be positive, got {value}")
    eta, r, f_max = dim.eta, dim.radius, dim.f_max
    params = ModelParams(
        beta=dim.beta / eta,
        sigma=dim.sigma,
        gamma=dim.gamma * f_max / (r * r * eta * eta),
        diffusion=dim.diffusion / (r * r * eta),
        xi=dim.xi / (f_max * eta),
        n_particles=dim.n_particles,
    )
    scales = NondimensionalScales(time=1.0 / eta, length=r, concentration=f_max)
    return params, scales


@dataclass(frozen=True)
class DomainSpec:
    """Periodic rectangle ``[0, lx) x [0, ly)`` with an ``nx`` by ``ny`` grid.

    Grid nodes sit at ``(m*dx, n*dy)`` for ``m = 0..nx-1``, ``n = 0..ny-1``,
    with ``dx = lx/nx`` exactly.  Periodic boundaries are the only option.
    """

    lx: float
    ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if not (self.lx > 0.0 and self.ly > 0.0):
            raise ValueError("domain extent must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def extent(self) -> np.ndarray:
        return np.array([self.lx, self.ly])


class Role(IntEnum):
    """Particle role: leaders produce the chemoattractant, followers do not."""

    FOLLOWER = 0
    LEADER = 1


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Positions, velocities and roles of the N agents.

    positions : (N, 2) array, dimensionless length
    velocities : (N, 2) array
    roles : (N,) integer array of :class:`Role` values
    """

    positions: np.ndarray
    velocities: np.ndarray
    roles: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        if pos.shape != vel.shape or pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(
                f"positions and velocities must both be (N, 2), got {pos.shape} and {vel.shape}"
            )
        roles = self.roles
        if roles is None:
            roles = np.full(pos.shape[0], Role.LEADER, dtype=np.int8)
        roles = np.asarray(roles, dtype=np.int8)
        if roles.shape != (pos.shape[0],):
            raise ValueError(f"roles must be (N,), got {roles.shape}")
        if not (np.isfinite(pos).all() and np.isfinite(vel).all()):
            raise ValueError("positions and velocities must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "roles", roles)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def leader_mask(self) -> np.ndarray:
        return self.roles == Role.LEADER


def minimum_image(disp: np.ndarray, extent: np.ndarray) -> np.ndarray:
    """Map displacement vectors to their nearest periodic image, componentwise.

    The result lies in ``[-L/2, L/2)`` for each component of the extent ``L``.
    """
    disp = np.asarray(disp, dtype=float)
    extent = np.asarray(extent, dtype=float)
    return (disp + 0.5 * extent) % extent - 0.5 * extent


def wrap_positions(positions: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Fold positions into the fundamental cell ``[0, lx) x [0, ly)``."""
    return np.asarray(positions, dtype=float) % domain.extent


def periodic_distance(
    a: np.ndarray, b: np.ndarray, domain: DomainSpec, *, raw: bool = False
) -> np.ndarray:
    """Distance between points ``a`` and ``b`` on the periodic domain.

    With ``raw=True`` the plain Euclidean distance of the stored coordinates
    is used instead of the minimum-image distance (comparison toggle).
    """
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if not raw:
        diff = minimum_image(diff, domain.extent)
    return np.linalg.norm(diff, axis=-1)


def alignment_weight(
    xi: np.ndarray,
    xj: np.ndarray,
    sigma: float,
    domain: DomainSpec,
    *,
    raw_distance: bool = False,
) -> float:
    """Communication weight ``1 / (1 + d^2)^sigma`` between two positions.

    ``d`` is the minimum-image distance on the periodic domain (unit particle
    radius absorbed by nondimensionalization).  The weight is symmetric in its
    arguments, lies in (0, 1] and is non-increasing in distance.
    """
    d = periodic_distance(xi, xj, domain, raw=raw_distance)
    return float((1.0 + d * d) ** (-sigma))


def alignment_weight_matrix(
    positions: np.ndarray,
    sigma: float,
    domain: DomainSpec,
    *,
    raw_distance: bool = False,
) -> np.ndarray:
    """Symmetric (N, N) matrix of pairwise communication weights.

    The upper triangle is mirrored so the matrix is exactly symmetric in
    floating point (the periodic fold is not bit-antisymmetric on its own).
    """
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    if not raw_distance:
        diff = minimum_image(diff, domain.extent)
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    w = (1.0 + d2) ** (-sigma)
    upper = np.triu(w, 1)
    return upper + upper.T + np.diag(np.diag(w))


def alignment_force(
    i: int,
    state: ParticleState,
    params: ModelParams,
    domain: DomainSpec,
    *,
    raw_distance: bool = False,
) -> np.ndarray:
    """Velocity-consensus force ``(beta/N) * sum_j w(i,j) (V_j - V_i)`` on particle i.

    The self term vanishes identically; summing the force over all particles
    gives zero (total momentum is conserved by alignment alone).
    """
    n = state.n
    if not 0 <= i < n:
        raise IndexError(f"particle index {i} out of range for N={n}")
    diff = state.positions - state.positions[i]
    if not raw_distance:
        diff = minimum_image(diff, domain.extent)
    d2 = np.einsum("ij,ij->i", diff, diff)
    w = (1.0 + d2) ** (-params.sigma)
    dv = state.velocities - state.velocities[i]
    return (params.beta / n) * (w[:, None] * dv).sum(axis=0)
