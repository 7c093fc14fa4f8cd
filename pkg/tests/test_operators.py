import math

import numpy as np
import pytest

from qplab.core import DecayingSymbol, Frequency, TrigPoly
from qplab.operators import (
    DualSpec,
    EmpiricalIDS,
    LongRangeSpec,
    assemble_dual,
    assemble_long_range,
    boundary_mass,
    diagonalize,
    empirical_ids,
    grid_phases,
    leakage,
    log_amplitude,
    long_range_eigenpairs,
    orbit_phases,
    spectral_weights,
    sturm_count,
    sturm_eigenvalues,
)

from conftest import amo_spec, random_trig_poly


def test_spec_validation(cos_v, cos_w, golden):
    with pytest.raises(ValueError, match="hopping radius"):
        LongRangeSpec(cos_v, DecayingSymbol.from_function(lambda t: np.exp(np.cos(2 * np.pi * t)), radius=6), 1.0, golden, 0.0, 3)
    with pytest.raises(ValueError, match="dimension"):
        LongRangeSpec(cos_v, cos_w, 1.0, Frequency([(5**0.5 - 1) / 2, 2**0.5 - 1]), 0.0, 3)
    with pytest.raises(ValueError, match="band"):
        DualSpec(TrigPoly([1, 0, 0, 0, 1]), cos_w, 1.0, golden, 0.0, 1)


def test_assembly_entries(golden):
    spec = amo_spec(eps=0.7, N=4, x=0.1)
    H = assemble_long_range(spec)
    n = np.arange(-4, 5)
    assert np.allclose(np.diag(H).real, 2 * np.cos(2 * np.pi * (0.1 + n * golden.alpha[0])))
    assert np.allclose(np.diag(H, 1), 0.7) and np.allclose(np.diag(H, 2), 0)


def test_dual_assembly(golden):
    v = TrigPoly(np.array([0.2j, 1.0, 0.5, 1.0, -0.2j]))
    spec = DualSpec(v, DecayingSymbol.cosine(), 2.0, golden, 0.25, 6)
    H = assemble_dual(spec)
    assert np.allclose(np.diag(H, 2), -0.2j) and np.allclose(np.diag(H, -2), 0.2j)
    n = np.arange(-6, 7)
    assert np.allclose(np.diag(H).real, 0.5 + 4 * np.cos(2 * np.pi * (0.25 + n * golden.alpha[0])))


def test_two_dimensional_assembly_is_hermitian(cos_v):
    alpha = Frequency([(5**0.5 - 1) / 2, 2 ** (1 / 3) % 1])
    w = DecayingSymbol.from_function(lambda a, b: np.cos(2 * np.pi * a) + 0.5 * np.cos(2 * np.pi * (a + b)), d=2, radius=1)
    H = assemble_long_range(LongRangeSpec(cos_v, w, 1.3, alpha, 0.2, 3))
    assert H.shape == (49, 49)
    assert np.abs(H - H.conj().T).max() < 1e-14


def test_zero_coupling_is_diagonal():
    spec = amo_spec(eps=0.0, N=30)
    pairs = long_range_eigenpairs(spec)
    assert all(np.count_nonzero(np.abs(p.u) > 1e-14) == 1 for p in pairs)
    assert max(p.residual for p in pairs) == 0.0


def test_eigh_against_sturm_oracle():
    H = assemble_long_range(amo_spec(eps=0.9, N=40))
    ev = np.array([p.E for p in diagonalize(H)])
    assert np.abs(ev - sturm_eigenvalues(H)).max() < 1e-10
    assert sturm_count(H, 0.0) == np.count_nonzero(ev < 0)


def test_eigh_against_sturm_banded(rng, golden):
    spec = DualSpec(random_trig_poly(rng, 3), DecayingSymbol.cosine(), 1.1, golden, 0.3, 30)
    H = assemble_dual(spec)
    assert np.abs(np.linalg.eigvalsh(H) - sturm_eigenvalues(H)).max() < 1e-9


def test_residual_includes_leakage():
    spec = amo_spec(eps=1.0, N=20)
    pairs = long_range_eigenpairs(spec)
    U = np.stack([p.u for p in pairs], axis=1)
    lk = leakage(spec, U)
    # nearest-neighbour leakage is |u at the two ends|
    assert np.allclose(lk, np.hypot(np.abs(U[0]), np.abs(U[-1])))
    assert all(p.residual >= l - 1e-15 for p, l in zip(pairs, lk))


def test_spectral_weights_sum_to_one():
    pairs = long_range_eigenpairs(amo_spec(eps=0.5, N=15))
    E, wts = spectral_weights(pairs, [0])
    assert wts.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="outside"):
        spectral_weights(pairs, [99])


def test_phase_grids(golden):
    assert np.allclose(grid_phases(4), [0, 0.25, 0.5, 0.75])
    ph = orbit_phases(0.1, golden, 3)
    assert ph[1] == pytest.approx((0.1 + golden.alpha[0]) % 1)


def test_ids_is_monotone_and_normalised():
    grid = np.linspace(-4, 4, 201)
    ids = empirical_ids(amo_spec(eps=0.5), grid, 50, grid_phases(5))
    assert ids.values[0] == 0 and ids.values[-1] == 1
    assert np.all(np.diff(ids.values) >= 0)
    assert ids.weights.sum() == pytest.approx(1.0)


def test_ids_fast_paths_match_dense():
    spec = amo_spec(eps=0.6, N=30)
    grid = np.linspace(-4, 4, 101)
    fast = empirical_ids(spec, grid, 30, [0.1, 0.6])
    w = DecayingSymbol.from_function(lambda t: 2 * np.cos(2 * np.pi * t) + 1e-300, radius=2)
    slow = empirical_ids(LongRangeSpec(spec.v, w, 0.6, spec.alpha, 0.0, 30), grid, 30, [0.1, 0.6])
    assert np.abs(fast.pooled - slow.pooled).max() < 1e-12


def test_free_ids_formula():
    """With v small and eps = 1, the IDS of eps * 2cos approaches arccos(-E/2)/pi."""
    v = TrigPoly(np.array([1e-9, 0, 1e-9]))
    spec = LongRangeSpec(v, DecayingSymbol.cosine(), 1.0, Frequency.golden(), 0.0, 400)
    grid = np.linspace(-1.9, 1.9, 39)
    ids = empirical_ids(spec, grid, 400, [0.0])
    exact = 1 - np.arccos(grid / 2) / np.pi
    assert np.abs(ids.values - exact).max() < 2 / 801


def test_boundary_mass():
    pairs = long_range_eigenpairs(amo_spec(eps=0.0, N=10))
    edge = [boundary_mass(p, 10, 1) for p in pairs]
    assert sorted(edge) == [0.0] * 19 + [1.0, 1.0]


def test_log_amplitude_matches_eigh_above_floor():
    spec = amo_spec(eps=0.3, N=60)
    pairs = long_range_eigenpairs(spec)
    p = pairs[60]
    la = log_amplitude(spec, p)
    ok = np.abs(p.u) > 1e-8
    assert np.abs(la[ok] - np.log(np.abs(p.u[ok]))).max() < 1e-6
    assert la.min() < math.log(1e-20)
