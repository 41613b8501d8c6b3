"""European payoffs written as functions of log-moneyness ``k = log(S_T/F)``."""

from __future__ import annotations

import csv
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingDerivative
from .quadrature import fit_hermite_cubic

__all__ = [
    "PayoffSpec",
    "constant",
    "log_payoff",
    "power",
    "exponential",
    "forward_payoff",
    "k_exp",
    "tabulated",
    "parse_payoff",
]

Fn = Callable[[np.ndarray], np.ndarray]

PROBES = (-1.0, -0.5, 0.0, 0.5, 1.0)
FD_STEP = 1e-5
FD_TOL = 1e-6


def _vec(fn: Fn) -> Fn:
    def wrapped(k):
        kk = np.asarray(k, dtype=float)
        out = np.broadcast_to(np.asarray(fn(kk), dtype=float), kk.shape)
        return float(out) if out.ndim == 0 else np.array(out)

    return wrapped


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff ``psi(k)`` with optional analytic derivatives.

    Supplied derivatives are checked against central differences at a few
    probe points on construction.  ``growth`` records whether the caller
    attests polynomial growth of ``psi'``.
    """

    name: str
    psi: Fn
    dpsi: Fn | None = None
    d2psi: Fn | None = None
    growth: bool = True
    probes: tuple[float, ...] = field(default=PROBES, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "psi", _vec(self.psi))
        if self.dpsi is not None:
            object.__setattr__(self, "dpsi", _vec(self.dpsi))
            self._fd_check(self.psi, self.dpsi, "psi'")
        if self.d2psi is not None:
            if self.dpsi is None:
                raise ValueError("d2psi given without dpsi")
            object.__setattr__(self, "d2psi", _vec(self.d2psi))
            self._fd_check(self.dpsi, self.d2psi, "psi''")

    def _fd_check(self, f: Fn, df: Fn, label: str) -> None:
        p = np.asarray(self.probes, dtype=float)
        fd = (f(p + FD_STEP) - f(p - FD_STEP)) / (2.0 * FD_STEP)
        exact = df(p)
        err = np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))
        if np.any(err > FD_TOL):
            worst = int(np.argmax(err))
            raise ValueError(
                f"payoff {self.name!r}: {label} disagrees with finite differences at k={p[worst]:g} (error {err[worst]:.3g})"
            )

    def require(self, order: int) -> None:
        if order >= 1 and self.dpsi is None:
            raise MissingDerivative(self.name, 1)
        if order >= 2 and self.d2psi is None:
            raise MissingDerivative(self.name, 2)


def constant(c: float = 1.0) -> PayoffSpec:
    return PayoffSpec(f"const:{c:g}", lambda k: np.full_like(k, c), lambda k: np.zeros_like(k), lambda k: np.zeros_like(k))


def log_payoff() -> PayoffSpec:
    """``psi(k) = k``: the log contract behind the variance (cash) and gamma (share) legs."""
    return PayoffSpec("log", lambda k: k, lambda k: np.ones_like(k), lambda k: np.zeros_like(k))


def power(n: int) -> PayoffSpec:
    if n < 0 or int(n) != n:
        raise ValueError(f"power payoffs need a nonnegative integer exponent, got {n!r}")
    n = int(n)
    if n == 0:
        return constant(1.0)
    d1 = (lambda k: n * k ** (n - 1)) if n >= 1 else None
    d2 = (lambda k: n * (n - 1) * k ** (n - 2)) if n >= 2 else (lambda k: np.zeros_like(k))
    return PayoffSpec(f"power:{n}", lambda k: k**n, d1, d2)


def exponential(a: float) -> PayoffSpec:
    a = float(a)
    return PayoffSpec(
        f"exp:{a:g}",
        lambda k: np.exp(a * k),
        lambda k: a * np.exp(a * k),
        lambda k: a * a * np.exp(a * k),
        growth=False,
    )


def forward_payoff() -> PayoffSpec:
    """``psi(k) = e^k - 1``: the forward contract, worth zero."""
    return PayoffSpec("forward", np.expm1, np.exp, np.exp, growth=False)


def k_exp() -> PayoffSpec:
    """``psi(k) = k e^k``; its cash price equals the share price of the log payoff."""
    return PayoffSpec(
        "k_exp",
        lambda k: k * np.exp(k),
        lambda k: (1.0 + k) * np.exp(k),
        lambda k: (2.0 + k) * np.exp(k),
        growth=False,
    )


def tabulated(k, psi, dpsi=None, name: str = "table") -> PayoffSpec:
    """Payoff interpolated by a Hermite cubic through ``(k_i, psi_i)``.

    Slopes are ``dpsi`` when given, else three-point estimates.  Beyond the
    table the payoff is held constant.  No second derivative is provided, so
    such payoffs price through the single-integral route.
    """
    poly = fit_hermite_cubic(k, psi, slopes="three_point" if dpsi is None else dpsi)
    kk = np.asarray(k, dtype=float)
    probes = tuple(float(v) for v in np.linspace(kk[0], kk[-1], 7)[1:-1])
    return PayoffSpec(name, poly, lambda x: poly.derivative(x, 1), None, probes=probes)


def read_payoff_table(path: str | Path) -> PayoffSpec:
    """CSV with columns ``k, psi`` and optionally ``dpsi``; ``#`` lines ignored."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ValueError(f"payoff table {path} is empty")
    cols = {c.strip().lower(): c for c in rows[0]}
    if "k" not in cols or "psi" not in cols:
        raise ValueError(f"payoff table {path} needs columns k and psi")
    k = [float(r[cols["k"]]) for r in rows]
    psi = [float(r[cols["psi"]]) for r in rows]
    dpsi = [float(r[cols["dpsi"]]) for r in rows] if "dpsi" in cols else None
    order = np.argsort(k)
    k = np.asarray(k)[order]
    psi = np.asarray(psi)[order]
    if dpsi is not None:
        dpsi = np.asarray(dpsi)[order]
    return tabulated(k, psi, dpsi, name=f"table:{Path(path).name}")


def parse_payoff(text: str) -> PayoffSpec:
    """Parse ``log``, ``power:n``, ``exp:a``, ``forward``, ``k_exp`` or ``table:path``."""
    head, _, arg = text.partition(":")
    head = head.strip().lower()
    try:
        if head == "log" and not arg:
            return log_payoff()
        if head == "power":
            return power(int(arg))
        if head == "exp":
            return exponential(float(arg))
        if head == "forward" and not arg:
            return forward_payoff()
        if head == "k_exp" and not arg:
            return k_exp()
        if head == "const":
            return constant(float(arg) if arg else 1.0)
        if head == "table" and arg:
            return read_payoff_table(arg)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad payoff {text!r}: {exc}") from None
    raise ValueError(f"unknown payoff {text!r}")
