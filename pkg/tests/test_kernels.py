"""The numba and numpy kernels must agree."""

import numpy as np
import pytest

from qplab import _kernels as K

pytestmark = pytest.mark.skipif(K.numba is None, reason="numba not installed")


def _row(rng, ell):
    return rng.standard_normal(2 * ell) + 1j * rng.standard_normal(2 * ell)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_product_parity(rng, ell):
    row, t = _row(rng, ell), rng.standard_normal(57) + 0j
    P1, s1 = K._product_numpy(row, t, 10)
    P2, s2 = K._product_numba(row, t, 10)
    assert np.allclose(P1 * np.exp(s1), P2 * np.exp(s2), rtol=1e-12)


def test_product_against_dense(rng):
    ell = 2
    row, t = _row(rng, ell), rng.standard_normal(12) + 0j
    ref = np.eye(2 * ell, dtype=complex)
    for tj in t:
        A = np.zeros((2 * ell, 2 * ell), complex)
        A[0] = row
        A[0, ell - 1] = tj
        A[1:, :-1] = np.eye(2 * ell - 1)
        ref = A @ ref
    P, s = K.companion_product(row, t, renorm=5)
    assert np.allclose(P * np.exp(s), ref, rtol=1e-12)


def test_apply_parity(rng):
    row, t, y0 = _row(rng, 2), rng.standard_normal(30) + 0j, _row(rng, 2)
    assert np.allclose(K._apply_numpy(row, t, y0), K._apply_numba(row, t, y0), rtol=1e-13)


def test_apply_matches_product(rng):
    ell = 2
    row, t, y0 = _row(rng, ell), rng.standard_normal(20) + 0j, _row(rng, ell)
    P, s = K.companion_product(row, t, renorm=100)
    seq = K.companion_apply(row, t, y0)
    assert np.allclose(seq[-2 * ell :][::-1], (P * np.exp(s)) @ y0, rtol=1e-12)


def test_lyapunov_parity(rng):
    row = _row(rng, 2)
    T = rng.standard_normal((3, 200)) + 0j
    a = K._lyapunov_numpy(row, T, 10, 20)
    b = K._lyapunov_numba(row, T, 10, 20)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_nodes_parity(rng):
    t = rng.uniform(-3, 3, (4, 500))
    assert np.array_equal(K._nodes_numpy(t, 1.0), K._nodes_numba(t, 1.0))


def test_sturm_parity_and_oracle(rng):
    d = rng.standard_normal(40)
    e2 = rng.random(39)
    x = np.linspace(-4, 4, 33)
    assert np.array_equal(K._sturm_count_numpy(d, e2, x), K._sturm_count_numba(d, e2, x))
    T = np.diag(d) + np.diag(np.sqrt(e2), 1) + np.diag(np.sqrt(e2), -1)
    ev = np.linalg.eigvalsh(T)
    assert np.array_equal(K.sturm_count(d, e2, x), np.searchsorted(ev, x, side="left"))
    assert np.abs(K.sturm_eigenvalues(d, e2) - ev).max() < 1e-10


def test_log_amplitude_parity(rng):
    n = 41
    diag = rng.standard_normal(n) + 0j
    hop = np.exp(2j * np.pi * rng.random(n - 1))
    assert np.allclose(K._log_amplitude_numpy(diag, hop, 20), K._log_amplitude_numba(diag, hop, 20), atol=1e-12)
