"""Free-space heat-kernel oracle for the chemoattractant field.

The signal produced by unit disks moving along recorded trajectories has the
exact representation (unit decay rate, unit radius)

    f(x, t) = xi * sum_j int_0^t  e^{-(t-tau)} / (4 pi (t-tau) D)
              * int_{B(X_j(tau), 1)} e^{-|x - xbar|^2 / (4 (t-tau) D)} dxbar dtau

on the free plane.  This module evaluates f and its gradient by high-accuracy
quadrature: the integral over the first disk coordinate is done in closed form
(error functions), leaving one angular-like integral per disk and the history
integral over tau.  The substitution ``s = sqrt(t - tau)`` removes the
integrable ``1/sqrt(t-tau)`` endpoint behaviour, so both remaining integrals
have bounded smooth integrands and standard adaptive quadrature applies.

This solver-independent evaluation serves as the correctness oracle for the
grid PDE solver; comparisons are only meaningful while the diffusion length
stays well below the periodic box size, since the oracle lives on the free
plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .core import ModelParams
from .quadrature import adaptive_quad

__all__ = [
    "TrajectoryRecord",
    "QuadratureSpec",
    "oracle_f",
    "oracle_grad_f",
]


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Recorded particle trajectories: sample times, positions and roles.

    Positions are linearly interpolated between samples.  Times must be
    strictly increasing and start at 0.
    """

    times: np.ndarray
    positions: np.ndarray  # (K, N, 2)
    roles: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        roles = np.asarray(self.roles, dtype=np.int8)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-D array")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing and start at 0")
        if pos.shape != (times.size, roles.size, 2):
            raise ValueError(
                f"positions must be (K, N, 2) = {(times.size, roles.size, 2)}, got {pos.shape}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "roles", roles)

    @classmethod
    def stationary(cls, positions: np.ndarray, roles: np.ndarray, t_end: float) -> "TrajectoryRecord":
        """Record for particles that never move over [0, t_end]."""
        pos = np.asarray(positions, dtype=float)
        return cls(
            times=np.array([0.0, float(t_end)]),
            positions=np.stack([pos, pos]),
            roles=np.asarray(roles, dtype=np.int8),
        )

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def positions_at(self, t: float) -> np.ndarray:
        """Linearly interpolated positions (N, 2) at time t."""
        times = self.times
        if t <= times[0]:
            return self.positions[0]
        if t >= times[-1]:
            return self.positions[-1]
        k = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * self.positions[k] + w * self.positions[k + 1]

    def leader_indices(self) -> np.ndarray:
        return np.nonzero(self.roles == 1)[0]


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive-quadrature controls for the oracle evaluations."""

    tol_rel: float = 1e-6
    max_subdivisions: int = 400

    def __post_init__(self):
        if not 0.0 < self.tol_rel <= 1e-2:
            raise ValueError(f"tol_rel must be in (0, 1e-2], got {self.tol_rel}")
        if self.max_subdivisions < 8:
            raise ValueError("max_subdivisions must be >= 8")


def _inner_breakpoints(center: float, width: float) -> list[float]:
    """Initial splits around the moving Gaussian peak inside [-1, 1]."""
    pts = []
    for mult in (3.0, 10.0):
        pts.extend((center - mult * width, center + mult * width))
    return [p for p in pts if -1.0 < p < 1.0]


def _outer_breakpoints(s_max: float) -> list[float]:
    return [s_max * frac for frac in (1e-3, 1e-2, 0.05, 0.2, 0.5)]


def _f_integrand(t, x, traj, params, quad):
    """Outer integrand in s = sqrt(t - tau) for the field value."""
    d = params.diffusion
    leaders = traj.leader_indices()
    inner_tol = quad.tol_rel / 20.0

    def integrand(s_arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(s_arr, dtype=float))
        for idx, s in enumerate(np.atleast_1d(s_arr)):
            if s <= 0.0:
                continue
            tau = max(t - s * s, 0.0)
            centers = traj.positions_at(tau)
            kappa_sqrt = 2.0 * s * np.sqrt(d)  # sqrt(4 (t - tau) D)
            total = 0.0
            for j in leaders:
                dxj = x[0] - centers[j, 0]
                dyj = x[1] - centers[j, 1]

                def inner(y: np.ndarray) -> np.ndarray:
                    r = np.sqrt(np.maximum(1.0 - y * y, 0.0))
                    gauss = np.exp(-((dyj - y) / kappa_sqrt) ** 2)
                    return gauss * (
                        erf((dxj + r) / kappa_sqrt) - erf((dxj - r) / kappa_sqrt)
                    )

                val, _ = adaptive_quad(
                    inner,
                    -1.0,
                    1.0,
                    tol_rel=inner_tol,
                    tol_abs=1e-15,
                    max_subdivisions=quad.max_subdivisions,
                    breakpoints=_inner_breakpoints(dyj, kappa_sqrt),
                )
                total += val
            out[idx] = np.exp(-s * s) / (2.0 * np.sqrt(np.pi * d)) * total
        return out

    return integrand


def _grad_integrand(t, x, traj, params, quad, component):
    """Outer integrand in s for one gradient component (0 = x, 1 = y)."""
    d = params.diffusion
    leaders = traj.leader_indices()
    inner_tol = quad.tol_rel / 20.0

    def integrand(s_arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(s_arr, dtype=float))
        for idx, s in enumerate(np.atleast_1d(s_arr)):
            if s <= 0.0:
                continue
            tau = max(t - s * s, 0.0)
            centers = traj.positions_at(tau)
            kappa_sqrt = 2.0 * s * np.sqrt(d)
            total = 0.0
            for j in leaders:
                # "a" is the differentiated coordinate, "b" the transverse one.
                da = x[component] - centers[j, component]
                db = x[1 - component] - centers[j, 1 - component]

                def inner(u: np.ndarray) -> np.ndarray:
                    r = np.sqrt(np.maximum(1.0 - u * u, 0.0))
                    gauss = np.exp(-((db - u) / kappa_sqrt) ** 2)
                    return gauss * (
                        np.exp(-((da - r) / kappa_sqrt) ** 2)
                        - np.exp(-((da + r) / kappa_sqrt) ** 2)
                    )

                val, _ = adaptive_quad(
                    inner,
                    -1.0,
                    1.0,
                    tol_rel=inner_tol,
                    tol_abs=1e-15,
                    max_subdivisions=quad.max_subdivisions,
                    breakpoints=_inner_breakpoints(db, kappa_sqrt),
                )
                total += val
            out[idx] = -np.exp(-s * s) / (2.0 * np.pi * s * d) * total
        return out

    return integrand


def _check_args(x, t, traj):
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError(f"probe point must be a 2-vector, got shape {x.shape}")
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t > traj.t_end + 1e-12:
        raise ValueError(f"t={t} exceeds the recorded trajectory horizon {traj.t_end}")
    return x


def oracle_f(
    x: np.ndarray,
    t: float,
    traj: TrajectoryRecord,
    params: ModelParams,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Exact free-space field value at probe point ``x`` and time ``t``.

    Follower particles contribute zero.  The relative error of the adaptive
    evaluation is bounded by ``quad.tol_rel`` (Gauss/Kronrod refinement
    comparison); a :class:`~chemoflock.quadrature.QuadratureError` carrying the
    best estimate is raised if the subdivision cap is reached.
    """
    x = _check_args(x, t, traj)
    if t == 0.0 or traj.leader_indices().size == 0:
        return 0.0
    s_max = np.sqrt(t)
    integrand = _f_integrand(t, x, traj, params, quad)
    val, _ = adaptive_quad(
        integrand,
        0.0,
        s_max,
        tol_rel=quad.tol_rel,
        tol_abs=1e-13,
        max_subdivisions=quad.max_subdivisions,
        breakpoints=_outer_breakpoints(s_max),
    )
    return params.xi * val


def oracle_grad_f(
    x: np.ndarray,
    t: float,
    traj: TrajectoryRecord,
    params: ModelParams,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """Exact free-space field gradient (2-vector) at ``x`` and time ``t``."""
    x = _check_args(x, t, traj)
    if t == 0.0 or traj.leader_indices().size == 0:
        return np.zeros(2)
    s_max = np.sqrt(t)
    out = np.empty(2)
    for component in (0, 1):
        integrand = _grad_integrand(t, x, traj, params, quad, component)
        val, _ = adaptive_quad(
            integrand,
            0.0,
            s_max,
            tol_rel=quad.tol_rel,
            tol_abs=1e-13,
            max_subdivisions=quad.max_subdivisions,
            breakpoints=_outer_breakpoints(s_max),
        )
        out[component] = params.xi * val
    return out
