"""Discrete implied-volatility smiles: ingestion, validation, interpolation.

A :class:`Smile` holds total implied vols at strictly increasing
log-moneyness nodes and evaluates ``sigma(k)`` everywhere: a natural cubic
spline between the first and last node, a :class:`TailPolicy` beyond them.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .black_scholes import ForwardContext, VolQuote, bs_put, implied_vol
from .errors import DuplicateStrike, NoVolSolution, SmileError, UnparseableRow

__all__ = [
    "TailPolicy",
    "Smile",
    "CONVENTIONS",
    "ingest",
    "read_smile_csv",
    "sigma_at",
    "lee_q_range",
]

SIGMA_FLOOR = 1e-8
SCAN_DENSITY = 20

CONVENTIONS = ("iv-annual", "iv-total", "put-price")
_COLUMNS = {
    "iv-annual": ("strike", "iv"),
    "iv-total": ("k", "total_vol"),
    "put-price": ("strike", "put_price"),
}


@dataclass(frozen=True)
class TailPolicy:
    """Extrapolation beyond the quoted range.

    ``flat`` holds the endpoint vol.  ``lee_wing`` grows total variance
    linearly at rate ``q`` with distance from the end quote on each side that
    has a ``q`` (the other side stays flat) and caps the vol by
    ``sqrt(q |k|)``.  See :func:`lee_q_range` for the admissible ``q``.
    """

    kind: str = "flat"
    q_left: float | None = None
    q_right: float | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "lee_wing"):
            raise SmileError(f"unknown tail policy {self.kind!r}")
        for name in ("q_left", "q_right"):
            q = getattr(self, name)
            if q is not None and not 0.0 < q < 2.0:
                raise SmileError(f"{name} must lie in (0, 2), got {q!r}")
        if self.kind == "flat" and (self.q_left is not None or self.q_right is not None):
            raise SmileError("flat tails take no wing exponents")
        if self.kind == "lee_wing" and self.q_left is None and self.q_right is None:
            raise SmileError("lee_wing tails need q_left and/or q_right")


def lee_q_range(sigma_end: float, k_end: float) -> tuple[float, float]:
    """Range of wing exponents ``q`` for a Lee continuation from ``(k_end, sigma_end)``.

    Below the lower end the end quote already breaks ``sigma < sqrt(q|k|)``
    and the capped wing would jump.  Above the upper end the linear-variance
    wing makes ``f1`` or ``f2`` decrease somewhere in the tail: along the
    wing ``sigma^3 df/dk`` is affine in ``k`` and increasing outward, so its
    sign at ``k_end`` decides, giving ``q <= s^2 / (s^2/4 + |k_end|/2)``.
    """
    K = abs(k_end)
    s2 = sigma_end * sigma_end
    lo = s2 / K if K > 0.0 else math.inf
    return lo, min(2.0, s2 / (0.25 * s2 + 0.5 * K))


@dataclass(frozen=True, eq=False)
class Smile:
    ctx: ForwardContext
    k: np.ndarray
    sigma: np.ndarray
    tail: TailPolicy = field(default_factory=TailPolicy)

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        s = np.array(self.sigma, dtype=float)
        if k.ndim != 1 or k.shape != s.shape:
            raise SmileError("k and sigma must be 1-d arrays of equal length")
        if k.size < 3:
            raise SmileError(f"a smile needs at least 3 quotes, got {k.size}")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(s))):
            raise SmileError("non-finite quote")
        if np.any(s <= 0.0):
            raise SmileError("all vols must be positive")
        if np.any(np.diff(k) <= 0.0):
            raise SmileError("k must be strictly increasing")
        for side, q, k_end, s_end in (("left", self.tail.q_left, k[0], s[0]), ("right", self.tail.q_right, k[-1], s[-1])):
            if q is None:
                continue
            if (side == "left" and not k_end < 0.0) or (side == "right" and not k_end > 0.0):
                raise SmileError(f"a {side} Lee wing needs the end quote on that side of the forward, got k={k_end:.12g}")
            q_lo, _ = lee_q_range(float(s_end), float(k_end))
            if not q > q_lo:
                raise SmileError(
                    f"q_{side}={q:g} contradicts the end quote: sigma={s_end:.6g} at k={k_end:.6g} "
                    f"already exceeds sqrt(q|k|); need q > {q_lo:.6g}"
                )
        k.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "_spline", CubicSpline(k, s, bc_type="natural"))

    @classmethod
    def from_quotes(cls, ctx: ForwardContext, quotes: Iterable[VolQuote], tail: TailPolicy | None = None) -> Smile:
        qs = sorted(quotes, key=lambda q: q.k)
        return cls(ctx, [q.k for q in qs], [q.sigma for q in qs], tail or TailPolicy())

    @property
    def quotes(self) -> tuple[VolQuote, ...]:
        return tuple(VolQuote(float(a), float(b)) for a, b in zip(self.k, self.sigma))

    @property
    def forward(self) -> float:
        return self.ctx.forward

    @property
    def k_min(self) -> float:
        return float(self.k[0])

    @property
    def k_max(self) -> float:
        return float(self.k[-1])

    def with_tail(self, tail: TailPolicy) -> Smile:
        return Smile(self.ctx, self.k, self.sigma, tail)

    # -- evaluation -------------------------------------------------------

    def _wing(self, kk: np.ndarray, side: str, order: int) -> np.ndarray:
        if side == "left":
            s_end, q, dist = float(self.sigma[0]), self.tail.q_left, self.k_min - kk
        else:
            s_end, q, dist = float(self.sigma[-1]), self.tail.q_right, kk - self.k_max
        if q is None:
            return np.full_like(kk, s_end if order == 0 else 0.0)
        sign = -1.0 if side == "left" else 1.0
        grown = np.sqrt(s_end * s_end + q * dist)
        cap = np.sqrt(q * np.abs(kk))
        use_cap = cap < grown
        if order == 0:
            return np.where(use_cap, cap, grown)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_grown = sign * q / (2.0 * grown)
            d_cap = np.sign(kk) * q / (2.0 * cap)
        return np.where(use_cap, d_cap, d_grown)

    def _eval(self, k, order: int):
        kk = np.asarray(k, dtype=float)
        flat = kk.reshape(-1)
        out = np.empty_like(flat)
        left = flat < self.k_min
        right = flat > self.k_max
        mid = ~(left | right)
        if order == 0:
            out[mid] = np.maximum(self._spline(flat[mid]), SIGMA_FLOOR)
        else:
            out[mid] = self._spline(flat[mid], order)
        if left.any():
            out[left] = self._wing(flat[left], "left", order)
        if right.any():
            out[right] = self._wing(flat[right], "right", order)
        out = out.reshape(kk.shape)
        return float(out) if out.ndim == 0 else out

    def sigma_at(self, k):
        """Total implied vol at log-moneyness ``k`` (scalar or array)."""
        return self._eval(k, 0)

    def dsigma(self, k):
        """Derivative of the interpolated smile; model-dependent, diagnostics only."""
        return self._eval(k, 1)

    def put(self, k):
        return bs_put(self.ctx, k, self.sigma_at(k))

    @cached_property
    def scan_k(self) -> np.ndarray:
        """Dense k-grid: each quote interval split into ``SCAN_DENSITY`` cells."""
        t = np.linspace(0.0, 1.0, SCAN_DENSITY + 1)[:-1]
        cells = self.k[:-1, None] + np.diff(self.k)[:, None] * t[None, :]
        return np.append(cells.reshape(-1), self.k[-1])


def sigma_at(smile: Smile, k):
    return smile.sigma_at(k)


def _to_float(value, line: int, raw: str, column: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise UnparseableRow(line, raw, f"column {column!r} is not a number") from None
    if not math.isfinite(out):
        raise UnparseableRow(line, raw, f"column {column!r} is not finite")
    return out


def infer_convention(columns: Iterable[str]) -> str:
    cols = {c.strip().lower() for c in columns}
    for name, needed in (("put-price", ("strike", "put_price")), ("iv-total", ("k", "total_vol")), ("iv-annual", ("strike", "iv"))):
        if set(needed) <= cols:
            return name
    raise SmileError(f"cannot infer a quote convention from columns {sorted(cols)}")


def ingest(
    rows: Iterable[Mapping[str, object]],
    ctx: ForwardContext,
    convention: str,
    *,
    expiry_years: float | None = None,
    tail: TailPolicy | None = None,
    lines: Iterable[int] | None = None,
) -> Smile:
    """Build a :class:`Smile` from quote rows.

    Parameters
    ----------
    rows : iterable of mappings
        Column name to value.  Required columns depend on ``convention``:
        ``iv-annual`` (strike, iv), ``iv-total`` (k, total_vol),
        ``put-price`` (strike, put_price).
    ctx : ForwardContext
    convention : str
        One of :data:`CONVENTIONS`.
    expiry_years : float, optional
        Year fraction, required for ``iv-annual``.
    lines : iterable of int, optional
        Source line numbers reported in errors (defaults to the row index).
    """
    if convention not in CONVENTIONS:
        raise SmileError(f"unknown convention {convention!r}")
    if convention == "iv-annual":
        if expiry_years is None or not expiry_years > 0.0:
            raise SmileError("iv-annual quotes need a positive expiry in years")
        scale = math.sqrt(expiry_years)
    key_col, val_col = _COLUMNS[convention]
    F = ctx.forward

    rows = list(rows)
    line_nos = list(lines) if lines is not None else list(range(len(rows)))
    parsed: list[tuple[float, float, int]] = []
    for idx, (row, line) in enumerate(zip(rows, line_nos)):
        norm = {str(c).strip().lower(): v for c, v in row.items() if c is not None}
        raw = ",".join(str(v) for v in row.values())
        if key_col not in norm or val_col not in norm:
            raise UnparseableRow(line, raw, f"missing column {key_col!r} or {val_col!r}")
        key = _to_float(norm[key_col], line, raw, key_col)
        val = _to_float(norm[val_col], line, raw, val_col)
        if convention == "iv-total":
            k, s = key, val
        else:
            if not key > 0.0:
                raise UnparseableRow(line, raw, "strike must be positive")
            k = math.log(key / F)
            if convention == "iv-annual":
                s = val * scale
            else:
                try:
                    s = implied_vol(ctx, k, val)
                except NoVolSolution as exc:
                    raise NoVolSolution(exc.reason, k, val, row=line) from None
        if not s > 0.0:
            raise UnparseableRow(line, raw, "volatility must be positive")
        parsed.append((k, s, idx))

    if len(parsed) < 3:
        raise SmileError(f"a smile needs at least 3 quotes, got {len(parsed)}")
    parsed.sort(key=lambda t: t[0])
    for (k0, _, i0), (k1, _, i1) in zip(parsed, parsed[1:]):
        if k1 == k0:
            raise DuplicateStrike(k0, (min(i0, i1), max(i0, i1)))
    return Smile(ctx, [p[0] for p in parsed], [p[1] for p in parsed], tail or TailPolicy())


def read_smile_csv(
    source: str | Path | io.TextIOBase,
    ctx: ForwardContext,
    convention: str | None = None,
    *,
    expiry_years: float | None = None,
    tail: TailPolicy | None = None,
) -> Smile:
    """Read a header-identified CSV of quotes; lines starting with ``#`` are ignored."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    kept: list[str] = []
    line_nos: list[int] = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        kept.append(line)
        line_nos.append(i)
    if not kept:
        raise SmileError("empty quote file")
    reader = csv.DictReader(kept)
    header = reader.fieldnames or []
    if convention is None:
        convention = infer_convention(header)
    rows = []
    for row, line in zip(reader, line_nos[1:]):
        if None in row or any(v is None for v in row.values()):
            raise UnparseableRow(line, kept[line_nos.index(line)], "wrong number of fields")
        rows.append(row)
    return ingest(rows, ctx, convention, expiry_years=expiry_years, tail=tail, lines=line_nos[1:])
