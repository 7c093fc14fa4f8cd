"""Finite truncations of the long-range operator on Z^d boxes and of the banded
dual operator on Z, dense diagonalisation, spectral weights, empirical IDS.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import _kernels
from .core import DecayingSymbol, Frequency, TrigPoly, _int_box
from .io import write_csv, fmt

HERMITIAN_TOL = 1e-12
MAX_DENSE = 4000


@dataclass(frozen=True)
class LongRangeSpec:
    """(H u)_n = eps sum_k w_k u_{n+k} + v(x + <n, alpha>) u_n on {|n|_inf <= N}."""

    v: TrigPoly
    w: DecayingSymbol
    eps: float
    alpha: Frequency
    x: float
    N: int

    def __post_init__(self):
        if self.w.dimension != self.alpha.d:
            raise ValueError("w.dimension must equal alpha.d")
        if self.N < 1:
            raise ValueError("box radius N must be positive")
        if self.N < self.w.radius:
            raise ValueError(f"box radius N={self.N} smaller than hopping radius R={self.w.radius}")

    @property
    def d(self):
        return self.alpha.d

    @property
    def shape(self):
        return (2 * self.N + 1,) * self.d

    def sites(self):
        return _int_box(self.d, self.N)

    def with_phase(self, x):
        return replace(self, x=float(x))


@dataclass(frozen=True)
class DualSpec:
    """(H^ u)_n = sum_{|k| <= l} v_k u_{n+k} + eps w(theta + n alpha) u_n on {|n| <= M}."""

    v: TrigPoly
    w: DecayingSymbol
    eps: float
    alpha: Frequency
    theta: tuple
    M: int

    def __post_init__(self):
        th = tuple(np.atleast_1d(np.asarray(self.theta, dtype=float)).tolist())
        object.__setattr__(self, "theta", th)
        if len(th) != self.alpha.d or self.w.dimension != self.alpha.d:
            raise ValueError("theta, w and alpha must share the dimension d")
        if self.M < self.v.degree:
            raise ValueError(f"interval radius M={self.M} smaller than band half-width l={self.v.degree}")

    def sites(self):
        return np.arange(-self.M, self.M + 1)

    def with_theta(self, theta):
        return replace(self, theta=theta)


@dataclass
class EigenPair:
    E: float
    u: np.ndarray
    residual: float
    sites: np.ndarray = None

    @property
    def center(self):
        i = int(np.argmax(np.abs(self.u)))
        return self.sites[i] if self.sites is not None else i


@dataclass
class EmpiricalIDS:
    grid: np.ndarray
    values: np.ndarray
    N: int
    n_phases: int
    pooled: np.ndarray = None  # sorted eigenvalues of all phases
    weights: np.ndarray = None  # IDS mass of each pooled eigenvalue

    @classmethod
    def from_eigenvalues(cls, eig_lists, grid, N):
        grid = np.asarray(grid, dtype=float)
        total = np.zeros(grid.shape)
        for ev in eig_lists:
            ev = np.sort(np.asarray(ev))
            total += np.searchsorted(ev, grid, side="right") / ev.size
        P = len(eig_lists)
        pooled = np.concatenate([np.asarray(ev, dtype=float) for ev in eig_lists])
        wts = np.concatenate([np.full(len(ev), 1.0 / (len(ev) * P)) for ev in eig_lists])
        order = np.argsort(pooled, kind="stable")
        return cls(grid, total / P, N, P, pooled[order], wts[order])

    def __call__(self, E):
        return np.interp(E, self.grid, self.values)


def check_hermitian(A, tol=HERMITIAN_TOL):
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    dev = float(np.abs(A - A.conj().T).max(initial=0.0))
    if dev > tol * scale:
        raise ValueError(f"matrix is not Hermitian (max |A - A*| = {dev:.3e})")
    return dev


def _shift_slices(k, N):
    """Slices (target, source) pairing site n with n + k inside the box."""
    tgt, src = [], []
    size = 2 * N + 1
    for kk in k:
        kk = int(kk)
        if kk >= 0:
            tgt.append(slice(0, size - kk))
            src.append(slice(kk, size))
        else:
            tgt.append(slice(-kk, size))
            src.append(slice(0, size + kk))
    return tuple(tgt), tuple(src)


def potential(spec):
    """v(x + <n, alpha>) on the box, flattened in site order."""
    sites = spec.sites()
    return spec.v(spec.x + spec.alpha.dot(sites)).real


def assemble_long_range(spec):
    """Dense Hermitian matrix of the Dirichlet truncation on {|n|_inf <= N}."""
    shape = spec.shape
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    H = np.zeros((n, n), dtype=np.complex128)
    H[np.diag_indices(n)] = potential(spec)
    if spec.eps != 0:
        for k, wk in zip(spec.w.ks, spec.w.values):
            if wk == 0:
                continue
            tgt, src = _shift_slices(k, spec.N)
            H[idx[tgt].ravel(), idx[src].ravel()] += spec.eps * wk
    check_hermitian(H)
    return H


def assemble_dual(spec):
    """Dense Hermitian banded matrix on {|n| <= M} (band width 2l + 1)."""
    M = spec.M
    n = 2 * M + 1
    sites = spec.sites()
    H = np.zeros((n, n), dtype=np.complex128)
    for k, vk in spec.v.items():
        if vk == 0:
            continue
        H += vk * np.eye(n, k=k)
    theta = np.asarray(spec.theta)
    orbit = theta[None, :] + sites[:, None] * spec.alpha.alpha[None, :]
    H[np.diag_indices(n)] += spec.eps * spec.w(orbit).real
    check_hermitian(H)
    return H


def diagonalize(A, sites=None, tol=1e-10):
    """All eigenpairs of a Hermitian matrix, sorted by E, residual ||Au - Eu||."""
    A = np.asarray(A)
    check_hermitian(A, tol)
    if A.shape[0] > MAX_DENSE:
        raise ValueError(f"dense diagonalisation limited to {MAX_DENSE} sites")
    E, U = np.linalg.eigh(A)
    R = A @ U - U * E
    res = np.linalg.norm(R, axis=0)
    return [EigenPair(float(E[i]), U[:, i], float(res[i]), sites) for i in range(E.size)]


def leakage(spec, U):
    """Norm of the untruncated action outside the box for each column of U.

    Sites outside the box see eps sum_k w_k u_{n+k}; inside, the truncated and
    untruncated rows agree, so these are the only extra residual terms.
    """
    U = np.asarray(U)
    if U.ndim == 1:
        U = U[:, None]
    if spec.eps == 0:
        return np.zeros(U.shape[1])
    R = spec.w.radius
    N = spec.N
    d = spec.d
    big = (2 * (N + R) + 1,) * d
    P = np.zeros(big + (U.shape[1],), dtype=np.complex128)
    inner = tuple(slice(R, R + 2 * N + 1) for _ in range(d))
    P[inner] = U.reshape(spec.shape + (U.shape[1],))
    out = np.zeros_like(P)
    for k, wk in zip(spec.w.ks, spec.w.values):
        tgt, src = _shift_slices(k, N + R)
        out[tgt] += spec.eps * wk * P[src]
    out[inner] = 0.0
    return np.sqrt(np.sum(np.abs(out.reshape(-1, U.shape[1])) ** 2, axis=0))


def long_range_eigenpairs(spec):
    """Diagonalise the truncation; residuals measured against the untruncated operator."""
    H = assemble_long_range(spec)
    pairs = diagonalize(H, spec.sites())
    U = np.stack([p.u for p in pairs], axis=1)
    leak = leakage(spec, U)
    for p, lk in zip(pairs, leak):
        p.residual = float(np.hypot(p.residual, lk))
    return pairs


def spectral_weights(pairs, p):
    """(energies, weights) with weight_E = |u_E(p)|^2; ``p`` a flat index or a site."""
    sites = pairs[0].sites
    if np.ndim(p) == 0 and sites is None:
        i = int(p)
    else:
        if sites is None:
            raise ValueError("site lookup needs eigenpairs with sites")
        target = np.atleast_1d(p)
        hit = np.nonzero(np.all(sites == target, axis=1))[0]
        if hit.size == 0:
            raise ValueError(f"site {tuple(target)} outside the box")
        i = int(hit[0])
    if not 0 <= i < pairs[0].u.size:
        raise ValueError(f"site index {i} outside the box")
    E = np.array([q.E for q in pairs])
    wts = np.array([abs(q.u[i]) ** 2 for q in pairs])
    return E, wts


def grid_phases(P):
    return np.arange(P) / P


def orbit_phases(x0, alpha, P):
    return (x0 + np.arange(P) * float(alpha.alpha[0])) % 1.0


def _eigvals(spec):
    diag = potential(spec)
    if spec.eps == 0:
        return np.sort(diag)
    if spec.d == 1 and spec.w.radius <= 1:
        # Hermitian tridiagonal: a gauge makes the hopping |eps w_1|
        diag = diag + (spec.eps * spec.w[0]).real
        off = np.full(2 * spec.N, abs(spec.eps * spec.w[1]))
        return scipy.linalg.eigvalsh_tridiagonal(diag, off)
    return np.linalg.eigvalsh(assemble_long_range(spec))


def empirical_ids(template, grid, N, phases, jobs=1):
    """Phase-averaged normalised eigenvalue counting function of the N-truncation."""
    if len(phases) < 1:
        raise ValueError("need at least one phase sample")
    specs = [replace(template, N=N, x=float(x)) for x in phases]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            eigs = list(ex.map(_eigvals, specs))
    else:
        eigs = [_eigvals(s) for s in specs]
    return EmpiricalIDS.from_eigenvalues(eigs, grid, N)


def sturm_eigenvalues(A, tol=1e-12):
    """Independent eigenvalue oracle: Householder tridiagonalisation + Sturm bisection."""
    A = np.asarray(A)
    check_hermitian(A, 1e-10)
    T = scipy.linalg.hessenberg(A)
    d = np.real(np.diag(T))
    e2 = np.abs(np.diag(T, -1)) ** 2
    return _kernels.sturm_eigenvalues(d, e2, tol)


def sturm_count(A, x):
    """Number of eigenvalues of A strictly below x (Sturm sign count)."""
    T = scipy.linalg.hessenberg(np.asarray(A))
    return _kernels.sturm_count(np.real(np.diag(T)), np.abs(np.diag(T, -1)) ** 2, x)


def boundary_mass(pair, N, layer):
    """Fraction of |u|^2 within ``layer`` sites of the box boundary."""
    sites = pair.sites
    edge = np.abs(sites).max(axis=1) > N - layer
    return float(np.sum(np.abs(pair.u[edge]) ** 2))


def log_amplitude(spec, pair):
    """log|u_n| for a nearest-neighbour d = 1 spec, resolved below the float floor.

    Agrees with log|pair.u| wherever the latter is above roundoff; further out
    it continues the exact Dirichlet eigenvector through ratio recursion.
    """
    if spec.d != 1 or spec.w.radius > 1:
        raise ValueError("log-amplitude continuation needs a d = 1 nearest-neighbour operator")
    diag = potential(spec) + spec.eps * spec.w[0].real - pair.E
    hop = np.full(2 * spec.N, spec.eps * spec.w[1])
    c = int(np.argmax(np.abs(pair.u)))
    rel = _kernels.log_amplitude_tridiagonal(diag, hop, c)
    return rel + np.log(np.abs(pair.u[c]))


# ---------------------------------------------------------------- exports


def export_matrix(path, A, tol=0.0):
    rows = []
    r, c = np.nonzero(np.abs(A) > tol)
    for i, j in zip(r, c):
        rows.append((int(i), int(j), float(A[i, j].real), float(A[i, j].imag)))
    write_csv(path, ["row", "col", "re", "im"], rows)


def export_eigenpairs(path, pairs, with_vectors=False):
    header = ["E", "residual"]
    rows = []
    for p in pairs:
        row = [p.E, p.residual]
        if with_vectors:
            row += [fmt(x) for z in p.u for x in (z.real, z.imag)]
        rows.append(row)
    if with_vectors and pairs:
        header += [f"{part}{i}" for i in range(pairs[0].u.size) for part in ("re", "im")]
    write_csv(path, header, rows)


def export_ids(path, ids):
    write_csv(path, ["E", "value"], [(float(e), float(v)) for e, v in zip(ids.grid, ids.values)])
