"""Normalizing transformations of log-moneyness and the normalized vols.

``f1(k) = k/sigma(k) - sigma(k)/2`` and ``f2(k) = k/sigma(k) + sigma(k)/2``
map log-moneyness to Gaussian-quantile space.  On an arbitrage-free smile
both are increasing, so their inverses ``g1``, ``g2`` exist and define
``sigma1 = sigma o g1`` and ``sigma2 = sigma o g2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EnvelopeError, NoBracket, NotMonotone
from .smile import Smile

__all__ = [
    "WHICH",
    "TransformGrid",
    "NormalizedPoint",
    "FixedPoint",
    "f_transforms",
    "f_of",
    "transform_grid",
    "certify",
    "g_inverse",
    "normalized_vol",
    "normalized_vols",
    "fixed_point",
    "alpha_envelope",
]

WHICH = ("first", "second")
_MAX_BISECT = 200
_TAIL_REACH = 1e8


def _check_which(which: str) -> None:
    if which not in WHICH:
        raise ValueError(f"which must be 'first' or 'second', got {which!r}")


def f_transforms(k, sigma):
    """Return ``(f1, f2)``; both equal ``k/sigma -/+ sigma/2``."""
    k = np.asarray(k, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0.0):
        raise ValueError("sigma must be positive")
    base = k / s
    f1 = base - 0.5 * s
    f2 = base + 0.5 * s
    if f1.ndim == 0:
        return float(f1), float(f2)
    return f1, f2


def f_of(which: str, smile: Smile, k):
    """``f_which(k)`` evaluated through the smile interpolant."""
    _check_which(which)
    f1, f2 = f_transforms(k, smile.sigma_at(k))
    return f1 if which == "first" else f2


@dataclass(frozen=True, eq=False)
class TransformGrid:
    k: np.ndarray
    sigma: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    monotone_f1: bool
    monotone_f2: bool

    @property
    def rows(self) -> list[tuple[float, float, float, float]]:
        return [tuple(map(float, r)) for r in zip(self.k, self.sigma, self.f1, self.f2)]

    def __len__(self) -> int:
        return int(self.k.size)


def transform_grid(smile: Smile, n: int | None = None) -> TransformGrid:
    """Tabulate ``(k, sigma, f1, f2)`` over the quoted range.

    The grid is ``n`` equispaced points merged with every quote node
    (default: the dense certification scan).  Monotonicity is reported, not
    enforced.
    """
    if n is None:
        k = smile.scan_k
    else:
        if n < smile.k.size:
            raise ValueError(f"grid size {n} is below the quote count {smile.k.size}")
        u = np.linspace(smile.k_min, smile.k_max, n)
        # uniform points within rounding of a node would duplicate it
        tol = 1e-9 * max(1.0, smile.k_max - smile.k_min)
        near = np.abs(u[:, None] - smile.k[None, :]).min(axis=1) <= tol
        k = np.union1d(u[~near], smile.k)
    s = smile.sigma_at(k)
    f1, f2 = f_transforms(k, s)
    return TransformGrid(
        k=k,
        sigma=s,
        f1=f1,
        f2=f2,
        monotone_f1=bool(np.all(np.diff(f1) > 0.0)),
        monotone_f2=bool(np.all(np.diff(f2) > 0.0)),
    )


def certify(which: str, smile: Smile) -> tuple[np.ndarray, np.ndarray]:
    """Scan ``f_which`` on the dense grid; raise :class:`NotMonotone` on a decrease.

    Returns the scan ``(k, f)``; cached on the smile.
    """
    _check_which(which)
    cache = smile.__dict__.setdefault("_scan_cache", {})
    if which in cache:
        return cache[which]
    k = smile.scan_k
    f = f_of(which, smile, k)
    bad = np.flatnonzero(np.diff(f) <= 0.0)
    if bad.size:
        i = int(bad[0])
        raise NotMonotone(which, float(k[i]), float(k[i + 1]))
    cache[which] = (k, f)
    return k, f


def _bisect(fun, lo: np.ndarray, hi: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized bisection for ``fun(k) = z`` with ``fun(lo) <= z <= fun(hi)``."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        open_ = (mid > lo) & (mid < hi)
        if not open_.any():
            break
        below = fun(mid) < z
        lo = np.where(open_ & below, mid, lo)
        hi = np.where(open_ & ~below, mid, hi)
    f_lo = fun(lo)
    f_hi = fun(hi)
    return np.where(np.abs(f_hi - z) <= np.abs(f_lo - z), hi, lo)


def _tail_inverse(which: str, smile: Smile, z: np.ndarray, side: str) -> np.ndarray:
    sign = -1.0 if side == "left" else 1.0
    k_end = smile.k_min if side == "left" else smile.k_max
    q = smile.tail.q_left if side == "left" else smile.tail.q_right
    if q is None:
        s_end = float(smile.sigma[0] if side == "left" else smile.sigma[-1])
        half = 0.5 * s_end * s_end
        k = s_end * z + (half if which == "first" else -half)
        return np.minimum(k, k_end) if side == "left" else np.maximum(k, k_end)

    target = z.min() if side == "left" else z.max()
    f_end = f_of(which, smile, k_end)
    reach = 1.0
    prev = f_end
    while True:
        k_far = k_end + sign * reach
        f_far = f_of(which, smile, k_far)
        if sign * (f_far - prev) <= 0.0:
            raise NotMonotone(which, *sorted((k_end + sign * reach / 2, k_far)))
        prev = f_far
        if (side == "left" and f_far <= target) or (side == "right" and f_far >= target):
            break
        reach *= 2.0
        if reach > _TAIL_REACH:
            raise NoBracket(which, float(target))
    lo, hi = (k_far, k_end) if side == "left" else (k_end, k_far)
    fun = lambda kk: f_of(which, smile, kk)  # noqa: E731
    return _bisect(fun, np.full_like(z, lo), np.full_like(z, hi), z)


def g_inverse(which: str, smile: Smile, z):
    """Invert ``f_which``: return ``k`` with ``f_which(k) = z``.

    Inside the quoted range the certified scan brackets each ``z`` and
    bisection refines it to the last ulp; values equal to a scan value
    return the scan node exactly.  Beyond the range flat tails invert in
    closed form, Lee wings by bracketed bisection.
    """
    ks, fs = certify(which, smile)
    zz = np.asarray(z, dtype=float)
    flat = zz.reshape(-1)
    if not np.all(np.isfinite(flat)):
        raise ValueError("z must be finite")
    out = np.empty_like(flat)

    left = flat < fs[0]
    right = flat > fs[-1]
    mid = ~(left | right)
    if mid.any():
        zm = flat[mid]
        idx = np.clip(np.searchsorted(fs, zm, side="left"), 1, fs.size - 1)
        exact = fs[idx] == zm
        exact_lo = fs[idx - 1] == zm
        fun = lambda kk: f_of(which, smile, kk)  # noqa: E731
        km = _bisect(fun, ks[idx - 1], ks[idx], zm)
        km = np.where(exact, ks[idx], np.where(exact_lo, ks[idx - 1], km))
        out[mid] = km
    if left.any():
        out[left] = _tail_inverse(which, smile, flat[left], "left")
    if right.any():
        out[right] = _tail_inverse(which, smile, flat[right], "right")
    out = out.reshape(zz.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NormalizedPoint:
    z: float
    sigma_n: float
    which: str

    @property
    def g(self) -> float:
        """Log-moneyness recovered from the normalized vol alone."""
        half = 0.5 * self.sigma_n * self.sigma_n
        return self.z * self.sigma_n + (half if self.which == "first" else -half)


def normalized_vols(which: str, smile: Smile, z):
    """Vectorized ``sigma_which(z) = sigma(g_which(z))``."""
    return smile.sigma_at(g_inverse(which, smile, z))


def normalized_vol(which: str, smile: Smile, z: float) -> NormalizedPoint:
    return NormalizedPoint(float(z), float(normalized_vols(which, smile, float(z))), which)


@dataclass(frozen=True)
class FixedPoint:
    """``z*_1`` (``sigma1(z) = -z``) or ``z*_2`` (``sigma2(z) = z``); ``z`` is None when absent."""

    which: str
    z: float | None
    k: float | None
    reason: str | None = None


def fixed_point(which: str, smile: Smile) -> FixedPoint:
    """Fixed point of the normalized vol via ``z*_2 = f2(g1(0))``, ``z*_1 = f1(g2(0))``."""
    _check_which(which)
    other = "second" if which == "first" else "first"
    try:
        k = g_inverse(other, smile, 0.0)
    except NoBracket:
        # f2 never reaches 0 on the left: mass at zero at least 1/2
        return FixedPoint(which, None, None, "mass_at_zero_too_large")
    return FixedPoint(which, float(f_of(which, smile, k)), float(k))


def alpha_envelope(which: str, z, z0: float, sigma_n_at_z0: float):
    """Envelope pair ``(alpha^-, alpha^+)`` anchored at ``(z0, sigma_which(z0))``.

    first:  ``-z -/+ sqrt(s0^2 + 2 z0 s0 + z^2)``
    second: `` z -/+ sqrt(s0^2 - 2 z0 s0 + z^2)``

    Which side bounds ``sigma_which`` depends on the region of ``(z, z0)``;
    a negative radicand raises :class:`EnvelopeError`.
    """
    _check_which(which)
    zz = np.asarray(z, dtype=float)
    s0 = float(sigma_n_at_z0)
    if which == "first":
        rad = s0 * s0 + 2.0 * z0 * s0 + zz * zz
        centre = -zz
    else:
        rad = s0 * s0 - 2.0 * z0 * s0 + zz * zz
        centre = zz
    if np.any(rad < 0.0):
        raise EnvelopeError(f"negative radicand in the {which} envelope anchored at z0={z0:.12g}")
    root = np.sqrt(rad)
    lo, hi = centre - root, centre + root
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi
