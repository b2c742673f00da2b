"""Chemoattractant field solver on a periodic grid.

The signal obeys ``df/dt = D lap(f) + xi * sum_j chi_{B(X_j, 1)} - f`` with
unit decay rate after nondimensionalization.  A Crank-Nicolson step handles
diffusion and the source; the linear decay is applied as a per-step
integrating factor ``exp(-dt)`` so that arbitrarily long horizons never
overflow.  The implicit system is diagonal in the discrete Fourier basis of
the periodic 5-point Laplacian, which is the default solve; a conjugate
gradient fallback is provided and must agree with it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import DomainSpec, ModelParams, ParticleState

__all__ = [
    "ScalarField",
    "SourceField",
    "SolverDivergedError",
    "rasterize_sources",
    "cn_step",
    "gradient_field",
    "sample_gradient",
    "sample_field",
    "write_snapshot",
    "read_snapshot",
]


class SolverDivergedError(RuntimeError):
    """Iterative solve failed to reach tolerance; carries the residual."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"conjugate gradient stalled after {iterations} iterations, residual={residual:.3e}"
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Grid of signal concentration values with its domain and current time.

    ``values[m, n]`` is the concentration at node ``(m*dx, n*dy)``.  Fields
    are immutable once returned by the solver and safe to share.
    """

    values: np.ndarray
    domain: DomainSpec
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.domain.nx, self.domain.ny):
            raise ValueError(
                f"values shape {vals.shape} does not match grid "
                f"{(self.domain.nx, self.domain.ny)}"
            )
        if not np.isfinite(vals).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, domain: DomainSpec, time: float = 0.0) -> "ScalarField":
        return cls(np.zeros((domain.nx, domain.ny)), domain, time)


@dataclass(frozen=True, eq=False)
class SourceField:
    """Per-node count of leader disks covering that node (0..N)."""

    values: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.domain.nx, self.domain.ny):
            raise ValueError("source shape does not match grid")
        object.__setattr__(self, "values", vals)


def rasterize_sources(state: ParticleState, domain: DomainSpec) -> SourceField:
    """Count, per grid node, the leader disks of unit radius containing it.

    A node belongs to a disk iff its minimum-image distance to the disk
    centre is <= 1; follower particles contribute nothing.
    """
    counts = np.zeros((domain.nx, domain.ny), dtype=np.int32)
    dx, dy = domain.dx, domain.dy
    half_w = int(np.ceil(1.0 / dx)) + 1
    half_h = int(np.ceil(1.0 / dy)) + 1
    local_ok = (2 * half_w + 1 <= domain.nx) and (2 * half_h + 1 <= domain.ny)

    for pos in state.positions[state.leader_mask]:
        if local_ok:
            m0 = int(np.floor(pos[0] / dx))
            n0 = int(np.floor(pos[1] / dy))
            ms = np.arange(m0 - half_w, m0 + half_w + 1)
            ns = np.arange(n0 - half_h, n0 + half_h + 1)
            ddx = ms * dx - pos[0]
            ddy = ns * dy - pos[1]
        else:
            # Tiny domain: the disk may wrap onto itself, evaluate every node
            # with minimum-image distances (indicator, never multiplicity).
            ms = np.arange(domain.nx)
            ns = np.arange(domain.ny)
            ddx = (ms * dx - pos[0] + 0.5 * domain.lx) % domain.lx - 0.5 * domain.lx
            ddy = (ns * dy - pos[1] + 0.5 * domain.ly) % domain.ly - 0.5 * domain.ly
        inside = ddx[:, None] ** 2 + ddy[None, :] ** 2 <= 1.0
        mi, ni = np.nonzero(inside)
        np.add.at(counts, (ms[mi] % domain.nx, ns[ni] % domain.ny), 1)
    return SourceField(counts, domain)


def _laplacian_symbol(domain: DomainSpec) -> np.ndarray:
    """Eigenvalues of the periodic 5-point Laplacian on the rfft2 grid."""
    kx = np.arange(domain.nx)
    ky = np.arange(domain.ny // 2 + 1)
    sx = np.sin(np.pi * kx / domain.nx) ** 2
    sy = np.sin(np.pi * ky / domain.ny) ** 2
    return -(4.0 / domain.dx**2) * sx[:, None] - (4.0 / domain.dy**2) * sy[None, :]


def _apply_laplacian(values: np.ndarray, domain: DomainSpec) -> np.ndarray:
    out = (
        np.roll(values, 1, axis=0)
        + np.roll(values, -1, axis=0)
        - 2.0 * values
    ) / domain.dx**2
    out += (
        np.roll(values, 1, axis=1)
        + np.roll(values, -1, axis=1)
        - 2.0 * values
    ) / domain.dy**2
    return out


def _solve_cg(
    rhs: np.ndarray, a_coef: float, domain: DomainSpec, rtol: float = 1e-12
) -> np.ndarray:
    """Solve ``(I - a_coef * lap) u = rhs`` by conjugate gradients."""

    def matvec(u: np.ndarray) -> np.ndarray:
        return u - a_coef * _apply_laplacian(u, domain)

    x = rhs.copy()
    r = rhs - matvec(x)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    target = rtol * float(np.linalg.norm(rhs))
    max_iter = 20 * (domain.nx + domain.ny)
    for it in range(max_iter):
        if np.sqrt(rs) <= target:
            return x
        ap = matvec(p)
        alpha = rs / float(np.vdot(p, ap).real)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.vdot(r, r).real)
        p = r + (rs_new / rs) * p
        rs = rs_new
    if np.sqrt(rs) <= target:
        return x
    raise SolverDivergedError(np.sqrt(rs), max_iter)


def cn_step(
    field: ScalarField,
    src: SourceField,
    params: ModelParams,
    dt: float,
    *,
    method: str = "fft",
) -> ScalarField:
    """Advance the field by one Crank-Nicolson step of length ``dt``.

    Solves ``(I - (dt D/2) lap) f' = (I + (dt D/2) lap) f + dt xi src`` and
    then multiplies by ``exp(-dt)`` for the unit-rate decay.  ``method`` is
    ``"fft"`` (exact diagonalization, default) or ``"cg"``.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    domain = field.domain
    a_coef = 0.5 * dt * params.diffusion
    rhs = field.values + a_coef * _apply_laplacian(field.values, domain)
    rhs = rhs + (dt * params.xi) * np.asarray(src.values, dtype=float)
    if method == "fft":
        sym = _laplacian_symbol(domain)
        rhs_hat = np.fft.rfft2(rhs)
        new_hat = rhs_hat / (1.0 - a_coef * sym)
        new_vals = np.fft.irfft2(new_hat, s=(domain.nx, domain.ny))
    elif method == "cg":
        new_vals = _solve_cg(rhs, a_coef, domain)
    else:
        raise ValueError(f"unknown method {method!r}")
    new_vals *= np.exp(-dt)
    return ScalarField(new_vals, domain, field.time + dt)


def gradient_field(
    field: ScalarField, *, one_sided: bool = False
) -> tuple[ScalarField, ScalarField]:
    """Spatial gradient of the field with periodic wraparound.

    Default is the second-order central difference
    ``(f[m+1,n] - f[m-1,n]) / (2 dx)``.  ``one_sided=True`` selects the
    forward variant ``(f[m+1,n] - f[m,n]) / (2 dx)`` kept as a comparison
    toggle; note it retains the central-difference denominator.
    """
    f = field.values
    domain = field.domain
    fwd_x = np.roll(f, -1, axis=0)
    fwd_y = np.roll(f, -1, axis=1)
    if one_sided:
        gx = (fwd_x - f) / (2.0 * domain.dx)
        gy = (fwd_y - f) / (2.0 * domain.dy)
    else:
        gx = (fwd_x - np.roll(f, 1, axis=0)) / (2.0 * domain.dx)
        gy = (fwd_y - np.roll(f, 1, axis=1)) / (2.0 * domain.dy)
    return (
        ScalarField(gx, domain, field.time),
        ScalarField(gy, domain, field.time),
    )


def _bilinear(values: np.ndarray, points: np.ndarray, domain: DomainSpec) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = pts[:, 0] / domain.dx
    v = pts[:, 1] / domain.dy
    i0 = np.floor(u).astype(int)
    j0 = np.floor(v).astype(int)
    fu = u - i0
    fv = v - j0
    i0 %= domain.nx
    j0 %= domain.ny
    i1 = (i0 + 1) % domain.nx
    j1 = (j0 + 1) % domain.ny
    return (
        values[i0, j0] * (1 - fu) * (1 - fv)
        + values[i1, j0] * fu * (1 - fv)
        + values[i0, j1] * (1 - fu) * fv
        + values[i1, j1] * fu * fv
    )


def _nearest(values: np.ndarray, points: np.ndarray, domain: DomainSpec) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    i = np.rint(pts[:, 0] / domain.dx).astype(int) % domain.nx
    j = np.rint(pts[:, 1] / domain.dy).astype(int) % domain.ny
    return values[i, j]


def sample_field(
    field: ScalarField, points: np.ndarray, *, interp: str = "bilinear"
) -> np.ndarray:
    """Interpolate field values at arbitrary points (periodic wrap)."""
    if interp == "bilinear":
        return _bilinear(field.values, points, field.domain)
    if interp == "nearest":
        return _nearest(field.values, points, field.domain)
    raise ValueError(f"unknown interpolation {interp!r}")


def sample_gradient(
    grad: tuple[ScalarField, ScalarField],
    points: np.ndarray,
    *,
    interp: str = "bilinear",
) -> np.ndarray:
    """Interpolate both gradient components at points; returns (N, 2).

    Bilinear interpolation from the four surrounding nodes by default;
    ``interp="nearest"`` snaps to the closest node instead.
    """
    gx, gy = grad
    out = np.stack(
        [sample_field(gx, points, interp=interp), sample_field(gy, points, interp=interp)],
        axis=-1,
    )
    return out


def write_snapshot(field: ScalarField, path: str) -> None:
    """Write a field snapshot in the flat text exchange format.

    Header is three lines: ``nx ny``, ``dx dy``, ``time``; then ``nx`` lines
    of ``ny`` values each (row ``m`` holds the values at ``x = m*dx``).
    The file is written atomically (temp file + rename).
    """
    domain = field.domain
    lines = [
        f"{domain.nx} {domain.ny}",
        f"{domain.dx:.17g} {domain.dy:.17g}",
        f"{field.time:.17g}",
    ]
    for row in field.values:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_snapshot(path: str) -> ScalarField:
    """Read a snapshot written by :func:`write_snapshot`."""
    with open(path) as fh:
        nx, ny = (int(tok) for tok in fh.readline().split())
        dx, dy = (float(tok) for tok in fh.readline().split())
        time = float(fh.readline())
        values = np.loadtxt(fh, ndmin=2)
    if values.shape != (nx, ny):
        raise ValueError(f"snapshot body {values.shape} does not match header {(nx, ny)}")
    domain = DomainSpec(lx=nx * dx, ly=ny * dy, nx=nx, ny=ny)
    return ScalarField(values, domain, time)
