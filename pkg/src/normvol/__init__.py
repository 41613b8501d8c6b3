"""Implied-volatility smiles through the normalizing transformations of log-moneyness."""

from .black_scholes import ForwardContext, VolQuote, bs_put, d_values, implied_vol
from .errors import (
    DuplicateStrike,
    MissingDerivative,
    NoBracket,
    NormVolError,
    NotMonotone,
    NoVolSolution,
    SmileError,
    UnparseableRow,
)
from .smile import Smile, TailPolicy, ingest, read_smile_csv

__version__ = "0.1.0"
