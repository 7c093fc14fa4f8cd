"""The 2l x 2l companion cocycle of the banded dual equation, its products,
Lyapunov spectrum, fibred rotation number (l = 1) and the Hermitian-symplectic
structure check.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DecayingSymbol, Frequency, TrigPoly
from .io import write_csv

RENORM_EVERY = 10
DEFAULT_PHASES = 32


@dataclass(frozen=True)
class CocycleSampler:
    """theta -> A_E(theta) for sum_{|k|<=l} v_k u_{n+k} + eps w(theta + n alpha) u_n = E u_n.

    The state at site n is (u_{n+l-1}, ..., u_{n-l}); A_E(theta + n alpha) maps
    it to the state at n + 1.
    """

    v: TrigPoly
    w: DecayingSymbol
    eps: float
    E: complex
    alpha: Frequency

    def __post_init__(self):
        if self.w.dimension != self.alpha.d:
            raise ValueError("w.dimension must equal alpha.d")

    @property
    def ell(self):
        return self.v.degree

    @property
    def size(self):
        return 2 * self.v.degree

    @property
    def d(self):
        return self.alpha.d

    def first_row(self):
        """Constant part of the first row; slot l - 1 is overwritten per step."""
        ell = self.ell
        vl = self.v[ell]
        row = np.empty(2 * ell, dtype=np.complex128)
        for c in range(ell - 1):
            row[c] = -self.v[ell - 1 - c] / vl
        row[ell - 1] = np.nan
        for c in range(ell, 2 * ell):
            row[c] = -self.v[-(c - ell + 1)] / vl
        return row

    def t(self, theta):
        """The varying entry (E - v_0 - eps w(theta)) / v_l."""
        return (self.E - self.v[0] - self.eps * self.w(theta)) / self.v[self.ell]

    def sample(self, theta):
        """Matrices at points theta of shape (..., d) (or (...) for d == 1)."""
        theta = np.asarray(theta, dtype=float)
        if self.d == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
            theta = theta[..., None]
        lead = theta.shape[:-1]
        m = self.size
        A = np.zeros(lead + (m, m), dtype=np.complex128)
        A[..., 0, :] = self.first_row()
        A[..., 0, self.ell - 1] = self.t(theta)
        for r in range(1, m):
            A[..., r, r - 1] = 1.0
        return A

    def orbit(self, theta0, n):
        theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
        return theta0[None, :] + np.arange(n)[:, None] * self.alpha.alpha[None, :]

    def orbit_t(self, theta0, n):
        return self.t(self.orbit(theta0, n))


def sample_matrix(c, theta):
    return c.sample(theta)


@dataclass
class CocycleProduct:
    matrix: np.ndarray  # scaled product
    log_scale: float

    @property
    def value(self):
        return self.matrix * np.exp(self.log_scale)


def iterate(c, theta0, n, renorm=RENORM_EVERY):
    """A(theta0 + (n-1) alpha) ... A(theta0) with the scale tracked in log form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    P, s = _kernels.companion_product(c.first_row(), c.orbit_t(theta0, n), renorm)
    return CocycleProduct(P, float(s))


def recursion(c, theta0, y0, n):
    """Direct scalar recursion of the dual equation from the state y0 at site 0.

    Returns u_{-l}, ..., u_{n+l-1} in increasing site order.
    """
    y0 = np.asarray(y0, dtype=np.complex128)
    if y0.shape != (c.size,):
        raise ValueError("initial state must have length 2l")
    return _kernels.companion_apply(c.first_row(), c.orbit_t(theta0, n), y0)


@dataclass
class LyapunovReport:
    exponents: np.ndarray  # descending
    n: int
    n_phases: int
    stderr: np.ndarray

    @property
    def top(self):
        return float(self.exponents[0])


def phase_samples(d, count):
    base = np.arange(count) / count
    # irrational offsets per axis keep d > 1 samples off a diagonal line
    offs = np.array([0.0] + [np.sqrt(p) % 1 for p in (2, 3, 5, 7, 11)][: d - 1])
    return (base[:, None] + offs[None, :d] * np.arange(count)[:, None]) % 1.0


def lyapunov_spectrum(c, n, phases=DEFAULT_PHASES, renorm=RENORM_EVERY, warmup=None):
    """All 2l exponents from QR re-orthonormalised products, averaged over phases."""
    if n < 1000:
        raise ValueError("n must be >= 1000")
    if np.ndim(phases) == 0:
        thetas = phase_samples(c.d, int(phases))
    else:
        thetas = np.asarray(phases, dtype=float).reshape(len(phases), -1)
    if warmup is None:
        warmup = min(n // 10, 1000)
    warmup = (warmup // renorm) * renorm
    T = np.stack([c.orbit_t(th, n) for th in thetas])
    sums = _kernels.lyapunov_sums(c.first_row(), T, renorm, warmup)
    per_phase = np.sort(sums / (n - warmup), axis=1)[:, ::-1]
    mean = per_phase.mean(axis=0)
    P = per_phase.shape[0]
    se = per_phase.std(axis=0, ddof=1) / np.sqrt(P) if P > 1 else np.zeros_like(mean)
    return LyapunovReport(mean, n, P, se)


def rotation_number(c, n, thetas=DEFAULT_PHASES):
    """Fibred rotation number in [0, 1/2] for a real l = 1 cocycle.

    Counted through sign changes of the projective orbit, normalised so that
    the integrated density of states of the dual operator is 1 - 2 rho.
    """
    if c.ell != 1:
        raise ValueError(
            "rotation number is defined for l = 1 only; for l > 1 there is no single fibred rotation number"
        )
    if np.iscomplexobj(c.E) and np.imag(c.E) != 0:
        raise ValueError("rotation number needs real E")
    v1 = c.v[1]
    if abs(np.imag(v1)) > 1e-14 * abs(v1):
        raise ValueError("v_1 must be real (apply the gauge u_n -> e^{i n arg v_1} u_n first)")
    if np.ndim(thetas) == 0:
        thetas = phase_samples(c.d, int(thetas))
    thetas = np.asarray(thetas, dtype=float).reshape(len(thetas), -1)
    T = np.stack([c.orbit_t(th, n).real for th in thetas])
    frac = _kernels.node_counts(T, 1.0) / n
    if np.real(v1) < 0:
        frac = 1.0 - frac
    return float(np.clip(frac.mean() / 2.0, 0.0, 0.5))


# ------------------------------------------------------------ symplectic

def standard_J(ell):
    I = np.eye(ell)
    Z = np.zeros((ell, ell))
    return np.block([[Z, -I], [I, Z]]).astype(np.complex128)


def invariant_form(v, samples=None):
    """Skew-Hermitian Q with A^* Q A = Q for every real-E companion matrix of v.

    Found as the common null space of the Stein maps over several values of
    the varying entry; returns None if no nondegenerate form exists.
    """
    ell = v.degree
    m = 2 * ell
    if samples is None:
        samples = np.linspace(-3.0, 3.0, 7)
    sampler = CocycleSampler(v, DecayingSymbol.constant(0.0), 0.0, 0.0, Frequency.golden())
    row = sampler.first_row()
    blocks = []
    for tv in samples:
        A = np.zeros((m, m), dtype=np.complex128)
        A[0] = row
        A[0, ell - 1] = tv / v[ell]
        for r in range(1, m):
            A[r, r - 1] = 1.0
        # column-major vec: vec(A^* Q A) = (A^T kron A^*) vec(Q)
        blocks.append(np.kron(A.T, A.conj().T) - np.eye(m * m))
    M = np.vstack(blocks)
    _, s, Vh = np.linalg.svd(M)
    null = Vh[np.sum(s > 1e-9 * max(1.0, s[0])) :].conj()
    for vec in null:
        Q = vec.reshape(m, m, order="F")
        Q = 0.5 * (Q - Q.conj().T)
        if np.linalg.norm(Q) < 1e-8:
            continue
        Q = Q / np.linalg.norm(Q)
        ev = np.linalg.eigvalsh(1j * Q)
        if np.min(np.abs(ev)) > 1e-8 and np.sum(ev > 0) == ell:
            return Q
    return None


def symplectic_basis(v):
    """Constant S with S^* J S = Q, so S A S^{-1} lies in HSp(2l); None if no form."""
    Q = invariant_form(v)
    if Q is None:
        return None
    ell = v.degree
    J = standard_J(ell)

    def factor(X):
        d, U = np.linalg.eigh(1j * X)
        order = np.argsort(-np.sign(d), kind="stable")  # positive first
        d = d[order]
        U = U[:, order]
        G = np.sqrt(np.abs(d))[:, None] * U.conj().T
        return G

    GQ = factor(Q)
    GJ = factor(J)
    return np.linalg.solve(GJ, GQ)


@dataclass
class SymplecticReport:
    defect: float  # of S A S^{-1}
    raw_defect: float  # of A itself
    S: np.ndarray
    found_basis: bool


def symplectic_defect(c, thetas=1000, seed=0):
    """max_theta ||A~^* J A~ - J|| with A~ = S A_E S^{-1}, plus the raw defect of A_E."""
    if np.ndim(thetas) == 0:
        rng = np.random.default_rng(seed)
        thetas = rng.random((int(thetas), c.d))
    A = c.sample(np.asarray(thetas, dtype=float).reshape(-1, c.d))
    J = standard_J(c.ell)
    raw = np.linalg.norm(np.swapaxes(A.conj(), -1, -2) @ J @ A - J, axis=(-2, -1)).max()
    S = symplectic_basis(c.v)
    if S is None:
        return SymplecticReport(np.inf, float(raw), np.eye(c.size, dtype=np.complex128), False)
    At = S @ A @ np.linalg.inv(S)
    defect = np.linalg.norm(np.swapaxes(At.conj(), -1, -2) @ J @ At - J, axis=(-2, -1)).max()
    return SymplecticReport(float(defect), float(raw), S, True)


# ------------------------------------------------------------ helpers

def transfer_sampler(spec, E):
    """Cocycle of the long-range operator itself (d = 1, finite hopping range).

    The eigen-equation eps sum_k w_k u_{n+k} + v(x + n alpha) u_n = E u_n has the
    same banded form with hopping eps w and potential v, so it reuses the
    companion machinery with the roles exchanged.
    """
    if spec.d != 1:
        raise ValueError("transfer cocycle needs d = 1")
    if spec.eps == 0:
        raise ValueError("eps = 0 has no transfer cocycle")
    hop = spec.w.scaled(spec.eps).as_trig_poly()
    return CocycleSampler(hop, spec.v.as_symbol(), 1.0, E, spec.alpha)


def dual_sampler(spec, E):
    """Cocycle of the dual equation paired with the long-range spec by duality.

    The hopping convention (n, n+k) -> eps w_k transforms into the potential
    eps w(-theta), hence the reflected symbol (no-op for even w).
    """
    return CocycleSampler(spec.v, spec.w.reflected(), spec.eps, E, spec.alpha)


def export_lyapunov_sweep(path, energies, reports):
    m = len(reports[0].exponents)
    header = ["E"] + [f"L{i}" for i in range(m)] + [f"stderr{i}" for i in range(m)]
    rows = [[float(E)] + [float(x) for x in r.exponents] + [float(x) for x in r.stderr] for E, r in zip(energies, reports)]
    write_csv(path, header, rows)


def export_rotation(path, energies, rhos):
    write_csv(path, ["E", "rho"], [(float(E), float(r)) for E, r in zip(energies, rhos)])
