import math

import numpy as np
import pytest

from qplab.core import DecayingSymbol, Frequency, TrigPoly
from qplab.operators import LongRangeSpec

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture
def golden():
    return Frequency.golden()


@pytest.fixture
def cos_v():
    return TrigPoly.cosine()


@pytest.fixture
def cos_w():
    return DecayingSymbol.cosine()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def amo_spec(eps=0.2, N=100, x=0.3141):
    """v = w = 2cos, the long-range operator whose dual is the almost Mathieu operator."""
    return LongRangeSpec(TrigPoly.cosine(), DecayingSymbol.cosine(), eps, Frequency.golden(), x, N)


def random_trig_poly(rng, ell, lead=(0.7, 1.3)):
    cs = 0.5 * (rng.standard_normal(ell) + 1j * rng.standard_normal(ell))
    cs[-1] = rng.uniform(*lead) * np.exp(2j * np.pi * rng.random())
    return TrigPoly(np.concatenate([np.conj(cs[::-1]), [rng.uniform(-1, 1)], cs]))
