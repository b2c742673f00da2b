"""Adaptive Gauss-Kronrod quadrature used by the analytical oracles.

A single (7, 15)-point Gauss-Kronrod rule is applied per interval; the
difference between the embedded 7-point Gauss estimate and the 15-point
Kronrod estimate serves as the local error indicator, and the interval with
the largest indicator is bisected until the global tolerance is met.
Integrands must accept numpy arrays of abscissae.
"""

from __future__ import annotations

import heapq
from typing import Callable, Sequence

import numpy as np

__all__ = ["QuadratureError", "adaptive_quad"]

# 15-point Kronrod abscissae (positive half) and weights, with the embedded
# 7-point Gauss weights on the odd-indexed nodes.
_XGK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
])

# Full symmetric node/weight tables on [-1, 1].
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WEIGHTS_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WEIGHTS_G = np.zeros_like(_WEIGHTS_K)
_WEIGHTS_G[1:-1:2] = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureError(RuntimeError):
    """Raised when the subdivision cap is hit before the tolerance is met.

    Carries the best available estimate and its error bound.
    """

    def __init__(self, estimate: float, error_bound: float, message: str = ""):
        self.estimate = estimate
        self.error_bound = error_bound
        super().__init__(
            message
            or f"quadrature did not converge: estimate={estimate!r}, error<={error_bound!r}"
        )


def _gk15(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> tuple[float, float]:
    """Kronrod estimate and |Kronrod - Gauss| error indicator on [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = np.asarray(f(mid + half * _NODES), dtype=float)
    k = half * float(np.dot(_WEIGHTS_K, y))
    g = half * float(np.dot(_WEIGHTS_G, y))
    return k, abs(k - g)


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol_rel: float = 1e-10,
    tol_abs: float = 1e-13,
    max_subdivisions: int = 2000,
    breakpoints: Sequence[float] = (),
) -> tuple[float, float]:
    """Integrate ``f`` over [a, b] adaptively; return (value, error bound).

    Stops when the summed error indicator is below
    ``max(tol_abs, tol_rel * |integral|)``.  ``breakpoints`` seeds the initial
    partition (useful for known boundary layers); values outside (a, b) are
    ignored.  Raises :class:`QuadratureError` if ``max_subdivisions`` intervals
    are not enough.
    """
    if not b > a:
        return 0.0, 0.0
    edges = [a]
    for p in sorted(set(float(p) for p in breakpoints)):
        if a < p < b:
            edges.append(p)
    edges.append(b)

    heap: list[tuple[float, float, float, float]] = []  # (-err, lo, hi, val)
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _gk15(f, lo, hi)
        total += val
        total_err += err
        heapq.heappush(heap, (-err, lo, hi, val))

    count = len(heap)
    while total_err > max(tol_abs, tol_rel * abs(total)):
        if count >= max_subdivisions:
            raise QuadratureError(total, total_err)
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        left = _gk15(f, lo, mid)
        right = _gk15(f, mid, hi)
        total += left[0] + right[0] - val
        total_err += left[1] + right[1] + neg_err  # neg_err = -old error
        heapq.heappush(heap, (-left[1], lo, mid, left[0]))
        heapq.heappush(heap, (-right[1], mid, hi, right[0]))
        count += 1

    return total, total_err
