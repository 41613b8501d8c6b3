"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class NormVolError(Exception):
    """Base class for all library errors."""


class NoVolSolution(NormVolError, ValueError):
    """A price admits no Black-Scholes implied volatility.

    ``reason`` is ``"below_intrinsic"`` or ``"above_upper_bound"``; ``row`` is
    filled in by the ingestion layer when the price came from a data row.
    """

    def __init__(self, reason: str, k: float, price: float, row: int | None = None):
        self.reason = reason
        self.k = k
        self.price = price
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"no implied vol at k={k:.12g}, price={price:.12g}: {reason}{where}")


class SmileError(NormVolError, ValueError):
    """Invalid smile construction input."""


class DuplicateStrike(SmileError):
    def __init__(self, k: float, rows: tuple[int, int]):
        self.k = k
        self.rows = rows
        super().__init__(f"duplicate log-moneyness k={k:.12g} at rows {rows[0]} and {rows[1]}")


class UnparseableRow(SmileError):
    def __init__(self, line: int, text: str, detail: str = ""):
        self.line = line
        self.text = text
        msg = f"unparseable row at line {line}: {text!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NotMonotone(NormVolError):
    """A normalizing transformation decreases somewhere: the smile admits arbitrage."""

    def __init__(self, which: str, k_lo: float, k_hi: float):
        self.which = which
        self.k_lo = k_lo
        self.k_hi = k_hi
        super().__init__(
            f"f{1 if which == 'first' else 2} is not increasing on [{k_lo:.12g}, {k_hi:.12g}]"
        )


class NoBracket(NormVolError):
    """Target z lies outside the attainable range of the transformation."""

    def __init__(self, which: str, z: float):
        self.which = which
        self.z = z
        super().__init__(f"z={z:.12g} is not attained by the {which} transformation")


class MissingDerivative(NormVolError, ValueError):
    def __init__(self, name: str, order: int):
        self.name = name
        self.order = order
        super().__init__(f"payoff {name!r} lacks the derivative of order {order}")


class EnvelopeError(NormVolError, ValueError):
    """Negative radicand in an envelope formula: the anchor data is inconsistent."""
