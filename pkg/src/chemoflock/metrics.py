"""Flocking diagnostics: centre-of-mass fluctuations and derived statistics.

The convergence diagnostics are the summed squared deviations of positions
and velocities from the centre of mass,

    fl_x = sum_i |X_i - X_cm|^2,    fl_v = sum_i |V_i - V_cm|^2,

whose square roots are proportional to the standard deviations around the
centre of mass.  On a periodic domain the positional quantities use
minimum-image displacements about an iteratively refined centre of mass, so
that a cluster straddling the domain edge is measured correctly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DomainSpec, ParticleState, minimum_image

__all__ = [
    "MetricsSample",
    "compute_sample",
    "crossing_time",
    "trend_slope",
    "metrics_csv_header",
    "write_metrics_csv",
    "read_metrics_csv",
]

CSV_COLUMNS = ("t", "fl_x", "fl_v", "v_cm_norm", "x_cm_x", "x_cm_y")


@dataclass(frozen=True)
class MetricsSample:
    """Time-stamped flocking diagnostics."""

    t: float
    fl_x: float
    fl_v: float
    v_cm_norm: float
    x_cm: tuple[float, float]

    def value(self, field: str) -> float:
        """Metric accessor; ``"max_fl"`` selects max(fl_x, fl_v)."""
        if field == "max_fl":
            return max(self.fl_x, self.fl_v)
        if field in ("fl_x", "fl_v", "v_cm_norm", "t"):
            return getattr(self, field)
        raise KeyError(f"unknown metric field {field!r}")


def _periodic_center(positions: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Centre of mass on the torus: circular-mean seed, minimum-image refinement."""
    extent = domain.extent
    angles = positions * (2.0 * np.pi / extent)
    seed = np.arctan2(np.sin(angles).mean(axis=0), np.cos(angles).mean(axis=0))
    cm = (seed * extent / (2.0 * np.pi)) % extent
    for _ in range(32):
        shift = minimum_image(positions - cm, extent).mean(axis=0)
        cm = (cm + shift) % extent
        if np.abs(shift).max() < 1e-14:
            break
    return cm


def compute_sample(
    t: float, state: ParticleState, domain: DomainSpec | None = None
) -> MetricsSample:
    """Compute the diagnostics for one state.

    With a ``domain``, positions entering fl_x are unwrapped relative to the
    centre of mass via minimum-image displacements; for a cluster contained in
    a quarter of the domain this coincides with the naive computation.
    ``domain=None`` computes the naive (non-periodic) quantities.
    """
    pos = state.positions
    vel = state.velocities
    if domain is None:
        x_cm = pos.mean(axis=0)
        dev = pos - x_cm
    else:
        x_cm = _periodic_center(pos, domain)
        dev = minimum_image(pos - x_cm, domain.extent)
    v_cm = vel.mean(axis=0)
    fl_x = float(np.einsum("ij,ij->", dev, dev))
    dv = vel - v_cm
    fl_v = float(np.einsum("ij,ij->", dv, dv))
    return MetricsSample(
        t=float(t),
        fl_x=fl_x,
        fl_v=fl_v,
        v_cm_norm=float(np.linalg.norm(v_cm)),
        x_cm=(float(x_cm[0]), float(x_cm[1])),
    )


def crossing_time(
    samples: Sequence[MetricsSample], field: str, threshold: float
) -> float | None:
    """Earliest sample time after which the metric stays below ``threshold``.

    "Stays" means the metric is below the threshold at that sample and at
    every later sample of the series; returns None when no such time exists.
    """
    if not samples:
        raise ValueError("empty metrics series")
    values = np.array([s.value(field) for s in samples])
    below = values < threshold
    if not below[-1]:
        return None
    above = np.nonzero(~below)[0]
    if above.size == 0:
        return samples[0].t
    idx = above[-1] + 1
    return samples[idx].t if idx < len(samples) else None


def trend_slope(
    samples: Sequence[MetricsSample], field: str, t_lo: float, t_hi: float
) -> float:
    """Ordinary least-squares slope of the metric over the time window."""
    ts = np.array([s.t for s in samples])
    mask = (ts >= t_lo) & (ts <= t_hi)
    if mask.sum() < 2:
        raise ValueError(
            f"need at least 2 samples in [{t_lo}, {t_hi}], found {int(mask.sum())}"
        )
    t = ts[mask]
    y = np.array([s.value(field) for s in samples])[mask]
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def metrics_csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_metrics_csv(samples: Iterable[MetricsSample], path: str) -> None:
    """Write the metrics series as CSV (17 significant digits, atomic)."""
    lines = [metrics_csv_header()]
    for s in samples:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (s.t, s.fl_x, s.fl_v, s.v_cm_norm, s.x_cm[0], s.x_cm[1])
            )
        )
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_metrics_csv(path: str) -> list[MetricsSample]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != metrics_csv_header():
            raise ValueError(f"unexpected metrics header: {header!r}")
        out = []
        for line in fh:
            t, fl_x, fl_v, v_cm, cx, cy = (float(tok) for tok in line.split(","))
            out.append(MetricsSample(t, fl_x, fl_v, v_cm, (cx, cy)))
    return out
