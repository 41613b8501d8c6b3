"""Ground truth for the pricing pipeline.

Lognormal mixtures give closed-form puts and every moment the pricing
theorems need.  Two independent expectation routes check the z-space
formulas: direct quadrature against each component density, and
strike-space static replication from the interpolated smile.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import integrate

from .black_scholes import ForwardContext, bs_call, bs_otm, bs_put, implied_vol_otm
from .normal_kernel import Phi, phi
from .payoffs import PayoffSpec
from .smile import Smile, TailPolicy

__all__ = [
    "MixtureModel",
    "QuadratureError",
    "mixture_put",
    "mixture_call",
    "mixture_otm",
    "gen_smile",
    "density_expectation",
    "replication_expectation",
    "load_corpus",
    "corpus_model",
    "corpus_smile",
    "DEFAULT_KGRID",
]

DEFAULT_KGRID = np.linspace(-2.5, 2.5, 201)


class QuadratureError(RuntimeError):
    def __init__(self, what: str, abserr: float):
        self.abserr = abserr
        super().__init__(f"{what}: quadrature did not converge (error estimate {abserr:.3g})")


@dataclass(frozen=True)
class MixtureModel:
    """Mixture of lognormals: component ``i`` has weight, forward and total vol."""

    weights: tuple[float, ...]
    forwards: tuple[float, ...]
    vols: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        f = tuple(float(v) for v in self.forwards)
        s = tuple(float(v) for v in self.vols)
        if not (len(w) == len(f) == len(s) >= 1):
            raise ValueError("weights, forwards and vols must have equal nonzero length")
        if any(not 0.0 < x <= 1.0 for x in w):
            raise ValueError("weights must lie in (0, 1]")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {math.fsum(w)!r}")
        if any(x <= 0.0 for x in f) or any(x <= 0.0 for x in s):
            raise ValueError("component forwards and vols must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "forwards", f)
        object.__setattr__(self, "vols", s)

    @property
    def forward(self) -> float:
        return math.fsum(wi * fi for wi, fi in zip(self.weights, self.forwards))

    @property
    def ctx(self) -> ForwardContext:
        return ForwardContext(self.forward, self.name)

    def components(self):
        return zip(self.weights, self.forwards, self.vols)


def _check_strike(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if np.any(K <= 0.0):
        raise ValueError("strikes must be positive")
    return K


def mixture_put(model: MixtureModel, K):
    K = _check_strike(K)
    out = sum(w * bs_put(Fi, np.log(K / Fi), s) for w, Fi, s in model.components())
    return float(out) if np.ndim(out) == 0 else out


def mixture_call(model: MixtureModel, K):
    K = _check_strike(K)
    out = sum(w * bs_call(Fi, np.log(K / Fi), s) for w, Fi, s in model.components())
    return float(out) if np.ndim(out) == 0 else out


def mixture_otm(model: MixtureModel, k):
    """OTM price at log-moneyness ``k`` relative to the mixture forward (put for k <= 0)."""
    k = np.asarray(k, dtype=float)
    K = model.forward * np.exp(k)
    out = np.where(k <= 0.0, mixture_put(model, K), mixture_call(model, K))
    return float(out) if out.ndim == 0 else out


def gen_smile(model: MixtureModel, kgrid=DEFAULT_KGRID, tail: TailPolicy | None = None) -> Smile:
    """Implied-vol smile of the mixture on ``kgrid`` (inverted from OTM prices)."""
    kgrid = np.asarray(kgrid, dtype=float)
    if np.any(np.diff(kgrid) <= 0.0):
        raise ValueError("kgrid must be strictly increasing")
    ctx = model.ctx
    otm = mixture_otm(model, kgrid)
    vols = [implied_vol_otm(ctx, float(k), float(p)) for k, p in zip(kgrid, otm)]
    return Smile(ctx, kgrid, vols, tail or TailPolicy())


def _quad(fun, a, b, what: str, epsrel: float = 1e-11, points=None) -> float:
    kwargs = {"points": points} if points is not None else {}
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fun, a, b, epsabs=1e-14, epsrel=epsrel, limit=2000, **kwargs)
        except integrate.IntegrationWarning:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            _, err = integrate.quad(fun, a, b, epsabs=1e-14, epsrel=epsrel, limit=2000, **kwargs)
            raise QuadratureError(what, err) from None
    if not math.isfinite(val):
        raise QuadratureError(what, math.inf)
    return val


def density_expectation(model: MixtureModel, payoff: PayoffSpec, measure: str = "cash") -> float:
    """``E[psi(log(S/F))]`` (cash) or ``E[psi(log(S/F)) S/F]`` (share) by direct quadrature.

    Each component is integrated in its own standard-normal coordinate
    ``S = F_i exp(s_i x - s_i^2/2)``.
    """
    if measure not in ("cash", "share"):
        raise ValueError(f"measure must be 'cash' or 'share', got {measure!r}")
    F = model.forward
    total = 0.0
    for w, Fi, s in model.components():
        drift = math.log(Fi / F) - 0.5 * s * s

        def integrand(x, drift=drift, s=s):
            k = drift + s * x
            val = payoff.psi(k) * phi(x)
            if measure == "share":
                val *= math.exp(k)
            return val

        # truncation where phi(x) < 1e-300 loses nothing at double precision
        total += w * _quad(integrand, -38.0, 38.0, f"density expectation of {payoff.name}", points=[-8.0, 0.0, 8.0])
    return total


PHI_TAIL = 1e-12


def _replication_range(smile: Smile) -> tuple[float, float]:
    """Truncation points: ``Phi(-d2) < PHI_TAIL`` on the left, ``Phi(d1) < PHI_TAIL`` on the right.

    Those bound the OTM put per unit strike and the OTM call per unit forward.
    """

    def put_mass(k):
        s = smile.sigma_at(k)
        return float(Phi(k / s + 0.5 * s))

    def call_mass(k):
        s = smile.sigma_at(k)
        return float(Phi(-(k / s - 0.5 * s)))

    lo = -0.5
    while put_mass(lo) > PHI_TAIL:
        lo *= 1.25
    hi = 0.5
    while call_mass(hi) > PHI_TAIL:
        hi *= 1.25
    return lo, hi


def replication_expectation(smile: Smile, payoff: PayoffSpec) -> float:
    """Static replication: ``psi(0) + int (psi'' - psi')(k) OTM(k) / K dk`` in k = log(K/F).

    OTM is the put for K < F and the call for K > F, both priced off the
    interpolated smile; this never touches the normalizing transformations.
    """
    payoff.require(2)
    F = smile.forward

    def integrand(k):
        kernel = payoff.d2psi(k) - payoff.dpsi(k)
        return kernel * float(bs_otm(F, k, smile.sigma_at(k))) / (F * math.exp(k))

    lo, hi = _replication_range(smile)
    left_pts = [float(x) for x in smile.k if lo < x < 0.0]
    right_pts = [float(x) for x in smile.k if 0.0 < x < hi]
    # quad's breakpoint list is capped; every few nodes is enough to steer subdivision
    left = _quad(integrand, lo, 0.0, f"replication of {payoff.name}", epsrel=1e-12, points=left_pts[::4] or None)
    right = _quad(integrand, 0.0, hi, f"replication of {payoff.name}", epsrel=1e-12, points=right_pts[::4] or None)
    return float(payoff.psi(0.0)) + left + right


def load_corpus() -> list[MixtureModel]:
    """The pinned oracle corpus shipped with the package."""
    raw = json.loads(resources.files("normvol").joinpath("data/corpus.json").read_text(encoding="utf-8"))
    return [MixtureModel(tuple(m["weights"]), tuple(m["forwards"]), tuple(m["vols"]), m.get("name", f"model{i}")) for i, m in enumerate(raw)]


def corpus_model(name: str) -> MixtureModel:
    for m in load_corpus():
        if m.name == name:
            return m
    raise KeyError(f"no corpus model named {name!r}; known: {[m.name for m in load_corpus()]}")


def corpus_smile(name: str, kgrid=DEFAULT_KGRID, tail: TailPolicy | None = None) -> Smile:
    return gen_smile(corpus_model(name), kgrid, tail)
