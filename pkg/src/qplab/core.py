"""Value types shared by every module: trigonometric polynomials, decaying
symbols on T^d, frequencies, matrix/scalar Fourier series, torus arithmetic.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
import math

import numpy as np

TWO_PI = 2.0 * np.pi

#: denominators screened when rejecting rational frequencies
IRRATIONAL_MAX_DENOMINATOR = 10**6
#: ||q alpha|| below this for some q <= max denominator counts as rational
IRRATIONAL_TOL = 1e-12

DEFAULT_SYMBOL_RADIUS = 32
DEFAULT_CONJUGACY_RADIUS = 64


class RationalFrequencyError(ValueError):
    pass


def wrap(t):
    """Representative in [0, 1)."""
    t = np.asarray(t, dtype=float)
    r = t - np.floor(t)
    return np.where(r >= 1.0, 0.0, r)


def torus_dist(t):
    """Distance to the nearest integer, via round-to-nearest subtraction."""
    t = np.asarray(t, dtype=float)
    return np.abs(t - np.round(t))


def _int_box(d, radius):
    """All k in Z^d with |k|_inf <= radius, lexicographic order."""
    rng = range(-radius, radius + 1)
    return np.array(list(product(rng, repeat=d)), dtype=np.int64).reshape(-1, d)


@dataclass(frozen=True)
class TrigPoly:
    """v(theta) = sum_{|k| <= degree} v_k e^{2 pi i k theta} with v_{-k} = conj(v_k)."""

    coeffs: np.ndarray  # index k + degree

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size < 3 or c.size % 2 == 0:
            raise ValueError("TrigPoly needs 2*degree + 1 coefficients with degree >= 1")
        ell = c.size // 2
        if c[-1] == 0:
            raise ValueError("leading coefficient v_l must be nonzero")
        if not np.allclose(c[::-1], np.conj(c), rtol=0, atol=1e-14 * max(1.0, np.abs(c).max())):
            raise ValueError("coefficients must satisfy v_{-k} = conj(v_k) (real-valued v)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "_ell", ell)

    @classmethod
    def from_dict(cls, mapping):
        ell = max(abs(int(k)) for k in mapping)
        c = np.zeros(2 * ell + 1, dtype=np.complex128)
        for k, val in mapping.items():
            c[int(k) + ell] = val
        return cls(c)

    @classmethod
    def cosine(cls, amplitude=1.0, harmonic=1):
        """amplitude * 2 cos(2 pi harmonic theta)."""
        c = np.zeros(2 * harmonic + 1, dtype=np.complex128)
        c[0] = c[-1] = amplitude
        return cls(c)

    @property
    def degree(self):
        return self._ell

    def __getitem__(self, k):
        if abs(k) > self._ell:
            return 0.0j
        return self.coeffs[k + self._ell]

    def items(self):
        return [(k, self.coeffs[k + self._ell]) for k in range(-self._ell, self._ell + 1)]

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        ks = np.arange(-self._ell, self._ell + 1)
        phase = np.exp(1j * TWO_PI * np.multiply.outer(theta, ks))
        return phase @ self.coeffs

    def as_symbol(self):
        return DecayingSymbol(np.arange(-self._ell, self._ell + 1)[:, None], self.coeffs)

    def scaled(self, factor):
        return TrigPoly(self.coeffs * factor)


@dataclass(frozen=True)
class DecayingSymbol:
    """w(theta) = sum_k w_k e^{2 pi i <k, theta>} on T^d, finitely many k.

    ``ks`` has shape (m, d); ``values`` shape (m,). ``C`` and ``c`` are the
    claimed decay constants |w_k| <= C e^{-c|k|}; they are checked on
    request (``decay_violations``), never enforced.
    """

    ks: np.ndarray
    values: np.ndarray
    C: float = 1.0
    c: float = 1.0
    radius: int = field(default=-1)

    def __post_init__(self):
        ks = np.array(self.ks, dtype=np.int64)
        if ks.ndim == 1:
            ks = ks[:, None]
        vals = np.array(self.values, dtype=np.complex128).ravel()
        if ks.shape[0] != vals.shape[0]:
            raise ValueError("ks and values must have the same length")
        lookup = {tuple(k): v for k, v in zip(ks.tolist(), vals)}
        if len(lookup) != len(vals):
            raise ValueError("duplicate Fourier index")
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        for k, v in lookup.items():
            partner = lookup.get(tuple(-x for x in k), 0.0)
            if abs(partner - np.conj(v)) > 1e-14 * scale:
                raise ValueError(f"w_{{-k}} != conj(w_k) at k={k} (w must be real-valued)")
        order = np.lexsort(ks.T[::-1]) if ks.size else np.arange(0)
        ks = ks[order]
        vals = vals[order]
        ks.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "values", vals)
        rad = int(np.abs(ks).max(initial=0))
        if self.radius < 0:
            object.__setattr__(self, "radius", rad)
        elif rad > self.radius:
            raise ValueError("stored index exceeds declared radius")

    @property
    def dimension(self):
        return self.ks.shape[1]

    @classmethod
    def cosine(cls, amplitude=1.0, d=1, axis=0):
        """amplitude * 2 cos(2 pi theta_axis) on T^d."""
        e = np.zeros((2, d), dtype=np.int64)
        e[0, axis] = -1
        e[1, axis] = 1
        return cls(e, [amplitude, amplitude], C=abs(amplitude) * math.e, c=1.0)

    @classmethod
    def constant(cls, value, d=1):
        return cls(np.zeros((1, d), dtype=np.int64), [value], C=abs(value) or 1.0, c=1.0)

    @classmethod
    def from_function(cls, func, d=1, radius=DEFAULT_SYMBOL_RADIUS, grid=None, cutoff=0.0):
        """Sample a real function on T^d and keep Fourier modes with |k|_inf <= radius."""
        L = grid or max(4 * radius, 16)
        axes = [np.arange(L) / L] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(func(*mesh), dtype=float)
        F = np.fft.fftn(vals) / L**d
        ks = _int_box(d, radius)
        coeffs = F[tuple((ks % L).T)]
        coeffs = 0.5 * (coeffs + np.conj(F[tuple((-ks % L).T)]))
        keep = np.abs(coeffs) > cutoff
        return cls(ks[keep], coeffs[keep], radius=radius)

    def __call__(self, theta):
        """Evaluate at points theta of shape (..., d) (or (...) when d == 1)."""
        theta = np.asarray(theta, dtype=float)
        if self.dimension == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
            theta = theta[..., None]
        phase = np.exp(1j * TWO_PI * (theta @ self.ks.T))
        return phase @ self.values

    def __getitem__(self, k):
        k = tuple(np.atleast_1d(k).tolist())
        for kk, v in zip(self.ks.tolist(), self.values):
            if tuple(kk) == k:
                return v
        return 0.0j

    def reflected(self):
        """Symbol of theta -> w(-theta)."""
        return DecayingSymbol(-self.ks, self.values, C=self.C, c=self.c, radius=self.radius)

    def scaled(self, factor):
        return DecayingSymbol(self.ks, self.values * factor, C=self.C * abs(factor), c=self.c, radius=self.radius)

    def decay_violations(self):
        """Indices k where |w_k| > C e^{-c|k|} (Euclidean |k|)."""
        norms = np.linalg.norm(self.ks, axis=1)
        bad = np.abs(self.values) > self.C * np.exp(-self.c * norms) * (1 + 1e-12)
        return self.ks[bad]

    def as_trig_poly(self):
        """Same data as a TrigPoly (d = 1 only)."""
        if self.dimension != 1:
            raise ValueError("only one-dimensional symbols are trigonometric polynomials on T")
        ell = int(np.abs(self.ks).max())
        c = np.zeros(2 * ell + 1, dtype=np.complex128)
        c[self.ks[:, 0] + ell] = self.values
        return TrigPoly(c)


def _cf_rejects(a):
    """True if ||q a|| < IRRATIONAL_TOL for some q <= IRRATIONAL_MAX_DENOMINATOR (exact arithmetic)."""
    x = Fraction(a) % 1
    if x == 0:
        return True
    # best approximations of the second kind are the continued-fraction convergents
    p0, q0, p1, q1 = 0, 1, 1, 0
    r = x
    while True:
        ai = math.floor(r)
        p0, q0, p1, q1 = p1, q1, ai * p1 + p0, ai * q1 + q0
        if q1 > IRRATIONAL_MAX_DENOMINATOR:
            return False
        if abs(q1 * x - p1) < IRRATIONAL_TOL:
            return True
        frac = r - ai
        if frac == 0:
            return True
        r = 1 / frac


@dataclass(frozen=True)
class Frequency:
    """alpha in [0, 1)^d; each component screened for rationality."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.array(self.alpha, dtype=float)).ravel()
        a = wrap(a)
        for i, comp in enumerate(a):
            if _cf_rejects(float(comp)):
                raise RationalFrequencyError(
                    f"alpha[{i}] = {float(comp)!r} is rational within {IRRATIONAL_TOL:g} "
                    f"over denominators <= {IRRATIONAL_MAX_DENOMINATOR}"
                )
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def golden(cls):
        return cls([(np.sqrt(5.0) - 1.0) / 2.0])

    @property
    def d(self):
        return self.alpha.shape[0]

    def dot(self, k):
        """<k, alpha> for k of shape (..., d) or scalar k when d == 1."""
        k = np.asarray(k)
        if self.d == 1 and (k.ndim == 0 or k.shape[-1] != 1):
            return k * self.alpha[0]
        return k @ self.alpha


def diophantine_diagnostic(alpha, k_max):
    """Finite-range Diophantine constants (gamma, tau).

    tau is the negated least-squares slope of log(record minimum of ||<k,alpha>||)
    against log|k| over the record-setting k; gamma is the minimum of
    ||<k,alpha>|| |k|^tau over all 0 < |k|_inf <= k_max (|k| Euclidean).
    """
    if not isinstance(alpha, Frequency):
        alpha = Frequency(alpha)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ks = _int_box(alpha.d, k_max)
    # one representative of each +-k pair, zero removed
    ks = ks[ks.shape[0] // 2 + 1 :]
    dist = torus_dist(alpha.dot(ks))
    norms = np.linalg.norm(ks, axis=1)
    order = np.lexsort((dist, norms))
    n_s = norms[order]
    d_s = dist[order]
    rec_n, rec_d = [], []
    best = np.inf
    for nn, dd in zip(n_s, d_s):
        if dd < best:
            best = dd
            rec_n.append(nn)
            rec_d.append(dd)
    rec_n = np.array(rec_n)
    rec_d = np.array(rec_d)
    if rec_n.size >= 2 and np.ptp(np.log(rec_n)) > 0:
        slope = np.polyfit(np.log(rec_n), np.log(rec_d), 1)[0]
        tau = float(-slope)
    else:
        tau = 1.0
    gamma = float(np.min(dist * norms**tau))
    return gamma, tau


class FourierSeries:
    """Truncated Fourier series on T^d with scalar or matrix coefficients.

    ``coeffs`` has shape (2K+1,)*d + value_shape; index k sits at k + K.
    """

    def __init__(self, coeffs, d=1):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        n = coeffs.shape[0]
        if n % 2 == 0 or any(s != n for s in coeffs.shape[:d]):
            raise ValueError("leading d axes must all have odd length 2K+1")
        self.coeffs = coeffs
        self.d = d
        self.K = n // 2

    @property
    def value_shape(self):
        return self.coeffs.shape[self.d :]

    @classmethod
    def zeros(cls, d, K, value_shape=()):
        return cls(np.zeros((2 * K + 1,) * d + tuple(value_shape), dtype=np.complex128), d)

    @classmethod
    def constant(cls, value, d, K):
        value = np.asarray(value, dtype=np.complex128)
        fs = cls.zeros(d, K, value.shape)
        fs.coeffs[(K,) * d] = value
        return fs

    def mode_indices(self):
        return _int_box(self.d, self.K)

    def coefficient(self, k):
        k = np.atleast_1d(k)
        if np.any(np.abs(k) > self.K):
            return np.zeros(self.value_shape, dtype=np.complex128)
        return self.coeffs[tuple(int(x) + self.K for x in k)]

    def to_grid(self, L):
        """Values on the uniform grid (j/L)^d, shape (L,)*d + value_shape."""
        if L < 2 * self.K + 1:
            raise ValueError("grid too coarse for the truncation radius")
        full = np.zeros((L,) * self.d + self.value_shape, dtype=np.complex128)
        idx = np.arange(-self.K, self.K + 1) % L
        full[np.ix_(*([idx] * self.d))] = self.coeffs
        axes = tuple(range(self.d))
        return np.fft.ifftn(full, axes=axes) * L**self.d

    @classmethod
    def from_grid(cls, values, K, d=1):
        """Coefficients |k|_inf <= K from samples on (j/L)^d (aliasing is the caller's problem)."""
        values = np.asarray(values, dtype=np.complex128)
        L = values.shape[0]
        if L < 2 * K + 1:
            raise ValueError("grid too coarse for requested radius")
        axes = tuple(range(d))
        F = np.fft.fftn(values, axes=axes) / L**d
        idx = np.arange(-K, K + 1) % L
        return cls(F[np.ix_(*([idx] * d))], d)

    def __call__(self, theta):
        """Direct evaluation at points theta of shape (..., d) (or (...) for d == 1)."""
        theta = np.asarray(theta, dtype=float)
        if self.d == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
            theta = theta[..., None]
        ks = self.mode_indices()
        flat = self.coeffs.reshape((-1,) + self.value_shape)
        phase = np.exp(1j * TWO_PI * (theta @ ks.T))
        return np.tensordot(phase, flat, axes=(-1, 0))

    def shifted(self, alpha):
        """Series of theta -> f(theta + alpha)."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        phase = np.ones((2 * self.K + 1,) * self.d, dtype=np.complex128)
        ks = np.arange(-self.K, self.K + 1)
        for ax in range(self.d):
            shape = [1] * self.d
            shape[ax] = -1
            phase = phase * np.exp(1j * TWO_PI * ks * alpha[ax]).reshape(shape)
        phase = phase.reshape(phase.shape + (1,) * len(self.value_shape))
        return FourierSeries(self.coeffs * phase, self.d)

    def retruncate(self, K):
        if K >= self.K:
            out = FourierSeries.zeros(self.d, K, self.value_shape)
            sl = tuple(slice(K - self.K, K + self.K + 1) for _ in range(self.d))
            out.coeffs[sl] = self.coeffs
            return out
        sl = tuple(slice(self.K - K, self.K + K + 1) for _ in range(self.d))
        return FourierSeries(self.coeffs[sl].copy(), self.d)

    def shell_masses(self):
        """l2 mass of the coefficients on each shell |k|_inf = r, r = 0..K."""
        ks = self.mode_indices()
        r = np.abs(ks).max(axis=1)
        sq = np.abs(self.coeffs.reshape((ks.shape[0], -1))) ** 2
        per = sq.sum(axis=1)
        return np.sqrt(np.bincount(r, weights=per, minlength=self.K + 1))

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


def evaluate(f, theta):
    """sum_k coeff_k e^{2 pi i <k, theta>} for a TrigPoly, DecayingSymbol or FourierSeries."""
    return f(theta)


def fourier_transform_sequence(u, sites=None, K=None):
    """u-hat(theta) = sum_n u_n e^{2 pi i <n, theta>} as a FourierSeries.

    ``u`` is either a dense array on a box centred at the origin (shape (2N+1,)*d)
    or a flat vector with integer ``sites`` of shape (m, d).
    """
    u = np.asarray(u, dtype=np.complex128)
    if sites is None:
        d = u.ndim
        N = u.shape[0] // 2
        radius = N if K is None else K
        fs = FourierSeries.zeros(d, radius)
        sl = tuple(slice(radius - N, radius + N + 1) for _ in range(d))
        fs.coeffs[sl] = u
        return fs
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim == 1:
        sites = sites[:, None]
    d = sites.shape[1]
    radius = int(np.abs(sites).max(initial=0)) if K is None else K
    fs = FourierSeries.zeros(d, radius)
    fs.coeffs[tuple((sites + radius).T)] = u
    return fs
