from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from normvol.black_scholes import ForwardContext
from normvol.oracle import gen_smile, load_corpus
from normvol.smile import Smile

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

CORPUS = load_corpus()
CORPUS_NAMES = [m.name for m in CORPUS]
_SMILES: dict[str, Smile] = {}


def corpus_smile_cached(name: str) -> Smile:
    if name not in _SMILES:
        model = next(m for m in CORPUS if m.name == name)
        _SMILES[name] = gen_smile(model)
    return _SMILES[name]


def flat_smile(sigma=0.2, lo=-2.0, hi=2.0, n=41, forward=1.0) -> Smile:
    return Smile(ForwardContext(forward), np.linspace(lo, hi, n), np.full(n, sigma))


def spike_smile(factor=3.0, at=0.5) -> Smile:
    """Flat 0.2 on a 0.1 grid with one interior vol multiplied by ``factor``."""
    k = np.round(np.linspace(-2.0, 2.0, 41), 12)
    s = np.full(k.size, 0.2)
    s[np.isclose(k, at)] *= factor
    return Smile(ForwardContext(1.0), k, s)


def left_wing_fixture() -> Smile:
    """Secant slope -1 on [-1.1, -1.0], steeper than -1/sqrt(2|k|) there."""
    k = np.round(np.linspace(-2.0, 2.0, 41), 12)
    s = np.full(k.size, 0.2)
    s[np.isclose(k, -1.1)] = 0.3
    return Smile(ForwardContext(1.0), k, s)


@pytest.fixture(scope="session")
def corpus_smiles() -> dict[str, Smile]:
    return {name: corpus_smile_cached(name) for name in CORPUS_NAMES}


@pytest.fixture
def flat() -> Smile:
    return flat_smile()


# acceptance lines are collected here and echoed at the end of the run
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        terminalreporter.write_line(ACCEPTANCE[key])
