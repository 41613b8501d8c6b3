"""C1 piecewise-cubic Hermite interpolation and exact Gaussian integration.

Each segment stores its cubic in powers of ``u = z - c`` with ``c`` the
segment midpoint, so the moments it is integrated against stay well
scaled even for |z| > 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .normal_kernel import Phi, shifted_moments

__all__ = ["PiecewisePoly", "fit_hermite_cubic", "three_point_slopes", "fritsch_carlson", "integrate_gaussian", "gaussian_tail_part"]


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Cubic pieces on ``[breakpoints[i], breakpoints[i+1]]`` with constant tails.

    ``coeffs[i, j]`` multiplies ``(z - centers[i])**j``.
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray
    left_tail: float
    right_tail: float

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        c = np.asarray(self.coeffs, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing with at least 2 entries")
        if c.shape != (bp.size - 1, 4):
            raise ValueError(f"coeffs must have shape {(bp.size - 1, 4)}, got {c.shape}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", c)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    def _locate(self, z: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.breakpoints, z, side="right") - 1, 0, self.coeffs.shape[0] - 1)

    def __call__(self, z):
        return self.derivative(z, 0)

    def derivative(self, z, order: int = 1):
        zz = np.asarray(z, dtype=float)
        i = self._locate(zz)
        u = zz - self.centers[i]
        c = self.coeffs[i]
        if order == 0:
            val = c[..., 0] + u * (c[..., 1] + u * (c[..., 2] + u * c[..., 3]))
            val = np.where(zz < self.breakpoints[0], self.left_tail, val)
            val = np.where(zz > self.breakpoints[-1], self.right_tail, val)
        elif order == 1:
            val = c[..., 1] + u * (2.0 * c[..., 2] + 3.0 * u * c[..., 3])
        elif order == 2:
            val = 2.0 * c[..., 2] + 6.0 * u * c[..., 3]
        else:
            raise ValueError("order must be 0, 1 or 2")
        if order > 0:
            val = np.where((zz < self.breakpoints[0]) | (zz > self.breakpoints[-1]), 0.0, val)
        return float(val) if val.ndim == 0 else val


def three_point_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of the parabola through each node and its neighbours."""
    h = np.diff(x)
    d = np.diff(y) / h
    n = x.size
    m = np.empty(n)
    if n == 2:
        m[:] = d[0]
        return m
    m[1:-1] = (h[1:] * d[:-1] + h[:-1] * d[1:]) / (h[:-1] + h[1:])
    m[0] = ((2.0 * h[0] + h[1]) * d[0] - h[0] * d[1]) / (h[0] + h[1])
    m[-1] = ((2.0 * h[-1] + h[-2]) * d[-1] - h[-1] * d[-2]) / (h[-1] + h[-2])
    return m


def fritsch_carlson(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Limit slopes so each cubic piece is monotone on monotone data."""
    d = np.diff(y) / np.diff(x)
    m = m.copy()
    n = x.size
    for i in range(n):
        left = d[i - 1] if i > 0 else d[0]
        right = d[i] if i < n - 1 else d[-1]
        if left * right <= 0.0 or m[i] * right <= 0.0:
            m[i] = 0.0
    for i in range(n - 1):
        if d[i] == 0.0:
            m[i] = m[i + 1] = 0.0
            continue
        # slopes are shrunk onto the circle of radius 3 |d_i| (no division by d_i)
        r = math.hypot(m[i], m[i + 1])
        if r > 3.0 * abs(d[i]):
            tau = 3.0 * abs(d[i]) / r
            m[i] *= tau
            m[i + 1] *= tau
    return m


def fit_hermite_cubic(x, y, slopes="three_point", tails: tuple[float, float] | None = None) -> PiecewisePoly:
    """Piecewise cubic Hermite interpolant through ``(x, y)``.

    Parameters
    ----------
    slopes : {"three_point", "monotone"} or array_like
        ``three_point`` uses parabolic slope estimates; ``monotone`` applies
        Fritsch-Carlson limiting on top; an array gives the slopes directly.
    tails : (float, float), optional
        Constant values beyond the end breakpoints; defaults to the end values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ValueError("x and y must be 1-d of equal length >= 2")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("x must be strictly increasing")
    if isinstance(slopes, str):
        if slopes not in ("three_point", "monotone"):
            raise ValueError(f"unknown slope rule {slopes!r}")
        m = three_point_slopes(x, y)
        if slopes == "monotone":
            m = fritsch_carlson(x, y, m)
    else:
        m = np.asarray(slopes, dtype=float)
        if m.shape != x.shape:
            raise ValueError("explicit slopes must match x")

    r = 0.5 * np.diff(x)
    y0, y1, m0, m1 = y[:-1], y[1:], m[:-1], m[1:]
    c2 = (m1 - m0) / (4.0 * r)
    c0 = 0.5 * (y0 + y1) - c2 * r * r
    c3 = (0.5 * (m0 + m1) - 0.5 * (y1 - y0) / r) / (2.0 * r * r)
    c1 = 0.5 * (m0 + m1) - 3.0 * c3 * r * r
    coeffs = np.column_stack([c0, c1, c2, c3])
    lt, rt = (float(y[0]), float(y[-1])) if tails is None else (float(tails[0]), float(tails[1]))
    return PiecewisePoly(x, coeffs, lt, rt)


def gaussian_tail_part(poly: PiecewisePoly) -> float:
    """Contribution of the constant tails: ``left * Phi(z_0) + right * Phi(-z_m)``."""
    return poly.left_tail * Phi(poly.breakpoints[0]) + poly.right_tail * Phi(-poly.breakpoints[-1])


def integrate_gaussian(poly: PiecewisePoly) -> float:
    """``int poly(z) phi(z) dz`` over the real line, in closed form."""
    bp = poly.breakpoints
    mom = shifted_moments(3, bp[:-1], bp[1:], poly.centers)
    seg = np.einsum("ij,ij->i", poly.coeffs, mom)
    return math.fsum(seg) + gaussian_tail_part(poly)
