"""Undiscounted Black-Scholes puts in log-moneyness and implied-vol inversion.

Volatilities are *total* volatilities (annualized vol times sqrt(T)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoVolSolution
from .normal_kernel import Phi, phi

__all__ = [
    "ForwardContext",
    "VolQuote",
    "d_values",
    "bs_put",
    "bs_call",
    "bs_otm",
    "vega",
    "implied_vol",
    "implied_vol_otm",
]

SIGMA_LO = 1e-8
SIGMA_HI = 10.0
TIME_VALUE_ULPS = 4


@dataclass(frozen=True)
class ForwardContext:
    forward: float
    expiry_label: str = ""

    def __post_init__(self):
        if not (self.forward > 0.0 and math.isfinite(self.forward)):
            raise ValueError(f"forward must be positive and finite, got {self.forward!r}")


@dataclass(frozen=True)
class VolQuote:
    k: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


def d_values(k, sigma):
    """Return ``(d1, d2)`` with ``d2 = (-k - sigma^2/2)/sigma`` and ``d1 = d2 + sigma``."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0.0):
        raise ValueError("sigma must be positive")
    d2 = (-np.asarray(k, dtype=float) - 0.5 * s * s) / s
    d1 = d2 + s
    if np.ndim(d2) == 0:
        return float(d1), float(d2)
    return d1, d2


def _forward(ctx: ForwardContext | float) -> float:
    F = ctx.forward if isinstance(ctx, ForwardContext) else float(ctx)
    if not F > 0.0:
        raise ValueError(f"forward must be positive, got {F!r}")
    return F


def _otm_unit(k, sigma):
    """Out-of-the-money price per unit forward: put for k <= 0, call for k > 0."""
    k = np.asarray(k, dtype=float)
    d1, d2 = d_values(k, sigma)
    with np.errstate(over="ignore", invalid="ignore"):
        put = np.exp(k) * Phi(-d2) - Phi(-d1)
        call = Phi(d1) - np.exp(k) * Phi(d2)
    return np.where(k <= 0.0, put, call)


def bs_otm(ctx: ForwardContext | float, k, sigma):
    """Out-of-the-money option value (put left of the forward, call right of it)."""
    out = _forward(ctx) * _otm_unit(k, sigma)
    return float(out) if np.ndim(out) == 0 else out


def bs_put(ctx: ForwardContext | float, k, sigma):
    """Undiscounted put ``F e^k Phi(-d2) - F Phi(-d1)``.

    In-the-money puts are assembled as intrinsic plus the out-of-the-money
    call so the time value is not lost to cancellation.
    """
    F = _forward(ctx)
    k = np.asarray(k, dtype=float)
    intrinsic = np.where(k > 0.0, np.expm1(np.maximum(k, 0.0)), 0.0)
    out = F * (intrinsic + _otm_unit(k, sigma))
    return float(out) if out.ndim == 0 else out


def bs_call(ctx: ForwardContext | float, k, sigma):
    F = _forward(ctx)
    k = np.asarray(k, dtype=float)
    intrinsic = np.where(k < 0.0, -np.expm1(np.minimum(k, 0.0)), 0.0)
    out = F * (intrinsic + _otm_unit(k, sigma))
    return float(out) if out.ndim == 0 else out


def vega(ctx: ForwardContext | float, k, sigma):
    """dP/dsigma = F phi(d1) (identical for puts and calls)."""
    d1, _ = d_values(k, sigma)
    out = _forward(ctx) * phi(d1)
    return float(out) if np.ndim(out) == 0 else out


def _ncdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _log_otm_and_slope(k: float, s: float) -> tuple[float, float]:
    """log of the unit OTM price and its sigma-derivative (vega / price)."""
    d2 = (-k - 0.5 * s * s) / s
    d1 = d2 + s
    if k <= 0.0:
        p = math.exp(k) * _ncdf(-d2) - _ncdf(-d1)
    else:
        p = _ncdf(d1) - math.exp(k) * _ncdf(d2)
    if p <= 0.0:
        return -math.inf, math.inf
    return math.log(p), float(phi(d1)) / p


def implied_vol_otm(ctx: ForwardContext | float, k: float, otm_price: float) -> float:
    """Invert an out-of-the-money price (put if k <= 0, call if k > 0).

    Geometric bisection locates a bracket, then Newton on log-price refines
    it; any Newton step leaving the bracket is replaced by a bisection step.
    """
    F = _forward(ctx)
    k = float(k)
    target = float(otm_price) / F
    upper = math.exp(k) if k <= 0.0 else 1.0  # sigma -> inf limit of the unit OTM price
    if not target > 0.0:
        raise NoVolSolution("below_intrinsic", k, otm_price)
    if target >= upper:
        raise NoVolSolution("above_upper_bound", k, otm_price)
    log_t = math.log(target)

    lo, hi = SIGMA_LO, SIGMA_HI
    while _log_otm_and_slope(k, hi)[0] < log_t:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise NoVolSolution("above_upper_bound", k, otm_price)
    while _log_otm_and_slope(k, lo)[0] > log_t:
        hi, lo = lo, 0.5 * lo
        if lo < 1e-300:
            raise NoVolSolution("below_intrinsic", k, otm_price)

    # coarse geometric bisection so Newton starts in its basin
    for _ in range(8):
        mid = math.sqrt(lo * hi)
        if _log_otm_and_slope(k, mid)[0] < log_t:
            lo = mid
        else:
            hi = mid

    s = math.sqrt(lo * hi)
    for _ in range(100):
        val, slope = _log_otm_and_slope(k, s)
        h = val - log_t
        if h == 0.0:
            return s
        if h < 0.0:
            lo = s
        else:
            hi = s
        step = h / slope if math.isfinite(slope) and slope > 0.0 else math.nan
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 4e-16 * s or hi - lo <= 4e-16 * hi:
            return s_new
        s = s_new
    return s


def implied_vol(ctx: ForwardContext | float, k: float, put_price: float) -> float:
    """Total implied volatility of an undiscounted put.

    Requires ``F (e^k - 1)_+ < put_price < F e^k``; otherwise raises
    :class:`NoVolSolution` with reason ``below_intrinsic`` or
    ``above_upper_bound``.
    """
    F = _forward(ctx)
    k = float(k)
    put_price = float(put_price)
    if put_price >= F * math.exp(k):
        raise NoVolSolution("above_upper_bound", k, put_price)
    intrinsic = F * math.expm1(k) if k > 0.0 else 0.0
    # a time value within rounding of the strike identifies no volatility
    slack = TIME_VALUE_ULPS * math.ulp(F * math.exp(k)) if k > 0.0 else 0.0
    if put_price - intrinsic <= slack:
        raise NoVolSolution("below_intrinsic", k, put_price)
    try:
        return implied_vol_otm(F, k, put_price - intrinsic)
    except NoVolSolution as exc:
        raise NoVolSolution(exc.reason, k, put_price) from None
