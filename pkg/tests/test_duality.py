import numpy as np
import pytest

from qplab.cocycle import dual_sampler
from qplab.core import DecayingSymbol, Frequency, TrigPoly
from qplab.duality import (
    dual_solution,
    dual_state_vector,
    export_spectra,
    hausdorff_1d,
    spectra_compare,
    state_vector_of,
)
from qplab.io import read_csv
from qplab.operators import DualSpec, LongRangeSpec, long_range_eigenpairs

from conftest import amo_spec

GOLD = Frequency.golden()


def _localized_pair(spec):
    pairs = long_range_eigenpairs(spec)
    inner = [p for p in pairs if abs(p.center[0]) < spec.N // 3]
    return min(inner, key=lambda p: p.residual)


def test_hausdorff():
    assert hausdorff_1d([0, 1], [0, 1]) == 0
    assert hausdorff_1d([0, 1, 5], [0.5]) == 4.5
    assert hausdorff_1d([1.0], [3.0, 1.5]) == 2.0


@pytest.mark.parametrize("theta", [0.0, 0.3])
def test_dual_solution_residual(theta):
    spec = amo_spec(eps=0.3, N=80)
    p = _localized_pair(spec)
    sol = dual_solution(spec, p, theta, 200)
    assert not sol.flagged
    assert sol.residual < 1e-8


def test_dual_solution_with_odd_hopping():
    """A non-even w only dualises correctly against the reflected symbol."""
    w = DecayingSymbol([[-1], [1], [-2], [2]], [0.5 - 0.5j, 0.5 + 0.5j, 0.1j, -0.1j])
    spec = LongRangeSpec(TrigPoly.cosine(), w, 0.4, GOLD, 0.21, 80)
    p = _localized_pair(spec)
    assert dual_solution(spec, p, 0.1, 100).residual < 1e-8


def test_dual_solution_needs_energy():
    with pytest.raises(ValueError, match="EigenPair"):
        dual_solution(amo_spec(), np.ones(5), 0.0, 10)


def test_state_vector_transport():
    spec = amo_spec(eps=0.3, N=80)
    p = _localized_pair(spec)
    st = state_vector_of(spec, p)
    assert st.transport_defect < 1e-8


@pytest.mark.parametrize("ell", [2, 3])
def test_state_vector_transport_long_band(rng, ell):
    cs = np.zeros(2 * ell + 1, dtype=complex)
    cs[ell] = 0.3
    cs[ell + 1], cs[ell - 1] = 1.0, 1.0
    cs[-1] = 0.5 * np.exp(0.4j)
    cs[0] = np.conj(cs[-1])
    spec = LongRangeSpec(TrigPoly(cs), DecayingSymbol.cosine(), 0.3, GOLD, 0.4, 80)
    p = _localized_pair(spec)
    assert state_vector_of(spec, p).transport_defect < 1e-8
    # the literal (u(2l-1), ..., u(0)) window is carried by A(theta + l alpha)
    st = dual_state_vector(p.u, p.sites, spec.x, GOLD, ell, dual_sampler(spec, p.E), offset=ell)
    assert st.transport_defect < 1e-8


def test_spectra_compare_small(tmp_path):
    v, w = TrigPoly.cosine(), DecayingSymbol.cosine()
    long_spec = LongRangeSpec(v, w, 3.0, GOLD, 0.0, 120)
    dual_spec = DualSpec(v, w.reflected(), 3.0, GOLD, 0.0, 120)
    cmp = spectra_compare(long_spec, dual_spec, np.arange(8) / 8, np.arange(8) / 8)
    assert cmp.distance < 0.1
    raw = spectra_compare(long_spec, dual_spec, np.arange(8) / 8, np.arange(8) / 8, layer=0)
    assert raw.distance >= cmp.distance
    export_spectra(tmp_path / "s.csv", cmp)
    header, rows = read_csv(tmp_path / "s.csv")
    assert header == ["side", "sample", "E"] and len(rows) == sum(map(len, cmp.long_energies + cmp.dual_energies))


def test_point_mass_transform_is_exact():
    from qplab.core import fourier_transform_sequence
    from qplab.duality import dual_values

    uh = fourier_transform_sequence(np.array([0.0, 1.0, 0.0]))
    n = np.arange(-20, 21)
    got = dual_values(uh, np.array([0.37]), 0.25, GOLD, n)
    assert np.abs(got - np.exp(2j * np.pi * n * 0.25)).max() < 1e-12
