"""Model-free no-arbitrage diagnosis of a smile.

Every check yields a :class:`CheckResult` with a signed margin (negative
means violated) at the worst location.  Secant checks on quote pairs are
exact consequences of monotonicity statements; checks that read the
spline derivative are flagged ``heuristic`` because they depend on the
interpolant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NormVolError
from .normal_kernel import Phi
from .smile import Smile, lee_q_range
from .transforms import f_transforms, normalized_vols, transform_grid

__all__ = ["CheckResult", "BoundsReport", "check_smile", "mass_at_zero_bound", "CHECK_ORDER"]

CHECK_ORDER = (
    "f1_monotone",
    "f2_monotone",
    "f1_left_wing",
    "f2_right_wing",
    "left_wing_slope",
    "right_wing_slope",
    "as_refined_skew",
    "rt_v_slope",
    "rt_v_slope_sharp",
    "rt_v_slope_k0_left",
    "rt_v_slope_k0_right",
    "z_plus_sigma1_monotone",
    "z_minus_sigma2_monotone",
    "lee_wing_left",
    "lee_wing_right",
    "lee_tail_left",
    "lee_tail_right",
    "atm_positive",
)

Z_SCAN = np.linspace(-5.0, 5.0, 101)


@dataclass(frozen=True)
class CheckResult:
    name: str
    location: dict
    margin: float
    passed: bool
    heuristic: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        out = asdict(self)
        return {"check": out.pop("name"), **out}


@dataclass(frozen=True)
class BoundsReport:
    checks: tuple[CheckResult, ...]
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def overall(self) -> str:
        return "clean" if all(c.passed for c in self.checks) else "violations"

    @property
    def clean(self) -> bool:
        return self.overall == "clean"

    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def by_name(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"overall": self.overall, "checks": [c.to_dict() for c in self.checks], "notes": list(self.notes)}


def _kloc(lo: float, hi: float) -> dict:
    return {"k_lo": float(lo), "k_hi": float(hi)}


def _worst(name: str, margins: np.ndarray, lo: np.ndarray, hi: np.ndarray, *, heuristic=False, loc=_kloc, note="") -> CheckResult:
    i = int(np.argmin(margins))
    m = float(margins[i])
    return CheckResult(name, loc(lo[i], hi[i]), m, m >= 0.0, heuristic, note)


def _adjacent(name: str, x: np.ndarray, vals: np.ndarray, **kw) -> CheckResult:
    """Strict increase of ``vals`` along ``x``; margin is the smallest step."""
    return _worst(name, np.diff(vals), x[:-1], x[1:], **kw)


def _select_k0(smile: Smile, side: str, override: float | None) -> float | None:
    """Outermost quote on ``side`` with ``sigma(k0) < sqrt(2|k0|)``, or the override."""
    if override is not None:
        return float(override)
    k, s = smile.k, smile.sigma
    side_mask = (k < 0.0) if side == "left" else (k > 0.0)
    idx = np.flatnonzero(side_mask & (s < np.sqrt(2.0 * np.abs(k))))
    if idx.size == 0:
        return None
    return float(k[idx[0] if side == "left" else idx[-1]])


def check_smile(
    smile: Smile,
    q_left: float | None = None,
    q_right: float | None = None,
    k_star_left: float | None = None,
    k_star_right: float | None = None,
    grid_size: int | None = None,
) -> BoundsReport:
    """Run every applicable bound on ``smile``.  Never raises on bad data."""
    grid = transform_grid(smile, grid_size)
    k, s, f1, f2 = grid.k, grid.sigma, grid.f1, grid.f2
    checks: list[CheckResult] = []
    notes: list[str] = []

    checks.append(_adjacent("f1_monotone", k, f1))
    checks.append(_adjacent("f2_monotone", k, f2))

    # -sqrt(2|k|) - f1 and f2 - sqrt(2k) both equal (sqrt(|k|/s) - sqrt(s/2))^2 on
    # their half-lines; the squared form keeps the AM-GM equality point exact
    amgm = (np.sqrt(np.abs(k) / s) - np.sqrt(0.5 * s)) ** 2
    left = k <= 0.0
    right = k >= 0.0
    if left.any():
        checks.append(_worst("f1_left_wing", amgm[left], k[left], k[left]))
    if right.any():
        checks.append(_worst("f2_right_wing", amgm[right], k[right], k[right]))

    # secant forms on quote pairs
    qk, qs = smile.k, smile.sigma
    ql = qk <= 0.0
    if ql.sum() >= 2:
        a = np.sqrt(2.0 * np.abs(qk[ql])) - qs[ql]
        checks.append(_worst("left_wing_slope", a[:-1] - a[1:], qk[ql][:-1], qk[ql][1:]))
    else:
        notes.append("left_wing_slope skipped: fewer than two quotes with k <= 0")
    qr = qk >= 0.0
    if qr.sum() >= 2:
        b = np.sqrt(2.0 * qk[qr]) - qs[qr]
        checks.append(_worst("right_wing_slope", b[1:] - b[:-1], qk[qr][:-1], qk[qr][1:]))
    else:
        notes.append("right_wing_slope skipped: fewer than two quotes with k >= 0")

    # derivative forms (interpolant-dependent)
    ds = smile.dsigma(k)
    r2 = np.sqrt(2.0 * np.abs(k))
    as_bound = 2.0 / (r2 + np.sqrt(2.0 * np.abs(k) + 8.0 / math.pi))
    checks.append(_worst("as_refined_skew", as_bound - np.sign(k) * ds, k, k, heuristic=True))

    dv = 2.0 * s * ds
    rt = np.where(k <= 0.0, dv + 4.0, 4.0 - dv)
    checks.append(_worst("rt_v_slope", rt, k, k, heuristic=True))
    nz = k != 0.0
    with np.errstate(divide="ignore"):
        sharp = np.where(k < 0.0, dv + 2.0 * s / r2, 2.0 * s / r2 - dv)
    checks.append(_worst("rt_v_slope_sharp", sharp[nz], k[nz], k[nz], heuristic=True))

    for side, override in (("left", k_star_left), ("right", k_star_right)):
        k0 = _select_k0(smile, side, override)
        name = f"rt_v_slope_k0_{side}"
        if k0 is None:
            notes.append(f"{name} skipped: no quote with sigma(k0) < sqrt(2|k0|)")
            continue
        s0 = smile.sigma_at(k0)
        a0 = math.sqrt(2.0 * abs(k0)) - s0
        region = (k <= k0) & (k < 0.0) if side == "left" else (k >= k0) & (k > 0.0)
        if not region.any():
            notes.append(f"{name} skipped: no grid point beyond k0={k0:.6g}")
            continue
        kr = k[region]
        bound = 2.0 * (1.0 - a0 / np.sqrt(2.0 * np.abs(kr)))
        mar = dv[region] + bound if side == "left" else bound - dv[region]
        checks.append(_worst(name, mar, kr, kr, heuristic=True, note=f"k0={k0:.12g}"))

    zloc = lambda lo, hi: {"z_lo": float(lo), "z_hi": float(hi)}  # noqa: E731
    for which, name, sign in (("first", "z_plus_sigma1_monotone", 1.0), ("second", "z_minus_sigma2_monotone", -1.0)):
        try:
            sn = normalized_vols(which, smile, Z_SCAN)
        except NormVolError as exc:
            checks.append(CheckResult(name, zloc(Z_SCAN[0], Z_SCAN[-1]), -math.inf, False, note=str(exc)))
            continue
        checks.append(_adjacent(name, Z_SCAN, Z_SCAN + sign * sn, loc=zloc))

    for side, q in (("left", q_left), ("right", q_right)):
        if q is None:
            continue
        checks.extend(_lee_checks(grid, side, q))

    # a Lee tail keeps f1, f2 increasing iff q stays below a closed-form limit
    for side, q, k_end, s_end in (
        ("left", smile.tail.q_left, smile.k_min, smile.sigma[0]),
        ("right", smile.tail.q_right, smile.k_max, smile.sigma[-1]),
    ):
        if q is None:
            continue
        _, q_hi = lee_q_range(float(s_end), k_end)
        margin = q_hi - q
        checks.append(CheckResult(f"lee_tail_{side}", _kloc(k_end, k_end), margin, margin >= 0.0, note=f"q={q:g}, limit {q_hi:.12g}"))

    s_atm = smile.sigma_at(0.0)
    checks.append(CheckResult("atm_positive", _kloc(0.0, 0.0), float(s_atm), s_atm > 0.0))
    return BoundsReport(tuple(checks), tuple(notes))


def _lee_checks(grid, side: str, q: float) -> list[CheckResult]:
    """Wing bounds implied by a finite moment with exponent ``q``."""
    if not 0.0 < q < 2.0:
        raise ValueError(f"q must lie in (0, 2), got {q!r}")
    k, s, f1, f2 = grid.k, grid.sigma, grid.f1, grid.f2
    cut = 1.0 / (2.0 - q)
    big = 1.0 / math.sqrt(q) + math.sqrt(q) / 2.0
    small = math.sqrt(2.0) - math.sqrt(q)
    name = f"lee_wing_{side}"
    region = k < -cut if side == "left" else k > cut
    if not region.any():
        return [CheckResult(name, _kloc(np.nan, np.nan), math.inf, True, note=f"no grid point beyond |k| > {cut:.6g}")]
    kr, sr, f1r, f2r = k[region], s[region], f1[region], f2[region]
    root = np.sqrt(np.abs(kr))
    out = [_worst(name, np.sqrt(q) * root - sr, kr, kr, note=f"q={q:g}")]
    if side == "left":
        out.append(_worst(f"{name}_f1", -big * root - f1r, kr, kr))
        out.append(_worst(f"{name}_f2", -small * root - f2r, kr, kr))
    else:
        out.append(_worst(f"{name}_f1", f1r - small * root, kr, kr))
        out.append(_worst(f"{name}_f2", f2r - big * root, kr, kr))

    # g-bounds read off the grid: g1(f1(k)) = k, g2(f2(k)) = k
    for label, z, coef_left, coef_right in (("g1", f1, 1.0 / big, 1.0 / small), ("g2", f2, 1.0 / small, 1.0 / big)):
        zr = z[z < -cut] if side == "left" else z[z > cut]
        kz = k[z < -cut] if side == "left" else k[z > cut]
        if zr.size == 0:
            continue
        mar = kz + coef_left * zr * zr if side == "left" else coef_right * zr * zr - kz
        out.append(_worst(f"{name}_{label}", mar, kz, kz, note="evaluated at grid images"))
    return out


def mass_at_zero_bound(smile: Smile) -> float:
    """``Phi(f2(k_min))``: an upper bound on the probability that the asset ends at zero."""
    _, f2 = f_transforms(smile.k_min, float(smile.sigma[0]))
    return float(Phi(f2))
