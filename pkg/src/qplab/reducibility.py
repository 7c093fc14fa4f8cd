"""Numerical diagonal reducibility of quasi-periodic cocycles and the rigidity
checks built on it.

``newton_reduce`` solves B(theta + alpha)^{-1} A(theta) B(theta) = Lambda by a
Newton scheme in Fourier space. ``resonance_detect`` and ``rigidity_check``
test the phase alignment rho_j - x = <k, alpha> mod Z and the single-mode
structure of c = B^{-1} W for a dual state vector W.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_CONJUGACY_RADIUS,
    TWO_PI,
    FourierSeries,
    Frequency,
    _int_box,
    torus_dist,
)
from .decay import fit_decay

DEFAULT_TOL = 1e-8
DEFAULT_DELTA = 1e-6
COINCIDENCE_TOL = 1e-6
SINGULAR_CONDITION = 1e10
NON_DIAGONALIZABLE = "non-diagonalizable within tolerance"
DIVERGED = "diverged"
MAX_ITERS = "max_iters reached"


def default_k_max(d):
    return 50 if d == 1 else 12


def theta_grid(d, L):
    """Uniform grid (j/L)^d as an array of shape (L,)*d + (d,)."""
    axes = [np.arange(L) / L] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def normalize_rho(lam):
    """rho with e^{2 pi i rho} = lam, Re rho in [0, 1)."""
    lam = np.asarray(lam, dtype=np.complex128)
    re = (np.angle(lam) / TWO_PI) % 1.0
    re = np.where(re >= 1.0, 0.0, re)
    im = -np.log(np.abs(lam)) / TWO_PI
    return re + 1j * im


# ------------------------------------------------------------ cohomological


def cohomological_solve(beta, alpha, rhs, delta=DEFAULT_DELTA):
    """Solve c(theta + alpha) - e^{2 pi i beta} c(theta) = rhs(theta) mode by mode.

    Modes whose divisor |e^{2 pi i <k, alpha>} - e^{2 pi i beta}| is at most
    ``delta`` are set to zero and listed as resonant.
    """
    ks = rhs.mode_indices()
    div = np.exp(1j * TWO_PI * alpha.dot(ks)) - np.exp(1j * TWO_PI * beta)
    div = div.reshape(rhs.coeffs.shape[: rhs.d])
    small = np.abs(div) <= delta
    out = np.where(small, 0.0, rhs.coeffs / np.where(small, 1.0, div))
    resonant = [tuple(int(x) for x in k) for k in ks[small.ravel()]]
    return FourierSeries(out, rhs.d), resonant


# ------------------------------------------------------------ manufactured


@dataclass(frozen=True)
class ManufacturedCocycle:
    """A(theta) = B(theta + alpha) diag(e^{2 pi i rho}) B(theta)^{-1} for given B, rho."""

    B: FourierSeries
    rho: np.ndarray
    alpha: Frequency

    @property
    def size(self):
        return self.B.value_shape[0]

    @property
    def d(self):
        return self.alpha.d

    def sample(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.d == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
            theta = theta[..., None]
        lam = np.exp(1j * TWO_PI * np.asarray(self.rho))
        Bt = self.B(theta)
        Bs = self.B(theta + self.alpha.alpha)
        # (Bs Lam) Bt^{-1} via a transposed solve
        X = Bs * lam[None, :]
        return np.swapaxes(np.linalg.solve(np.swapaxes(Bt, -1, -2), np.swapaxes(X, -1, -2)), -1, -2)


def random_analytic(rng, d, K, m, decay=0.5, scale=0.1, base=None):
    """Matrix Fourier series B0 + scale * sum_{k != 0} e^{-decay |k|} R_k e^{2 pi i <k, theta>}."""
    shape = (2 * K + 1,) * d + (m, m)
    R = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ks = _int_box(d, K)
    weight = np.exp(-decay * np.linalg.norm(ks, axis=1)).reshape((2 * K + 1,) * d)
    coeffs = scale * R * weight[..., None, None] / np.sqrt(2.0)
    centre = (K,) * d
    coeffs[centre] = np.eye(m) if base is None else base
    return FourierSeries(coeffs, d)


def manufactured_reducible(alpha, m=2, K=24, seed=0, decay=0.5, scale=0.1, rho=None):
    """Forward-built reducible cocycle with known (B*, rho*)."""
    rng = np.random.default_rng(seed)
    if rho is None:
        rho = (np.arange(m) + 0.5 * rng.random(m)) / m
    base = np.eye(m) + 0.3 * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2 * m)
    B = random_analytic(rng, alpha.d, K, m, decay, scale, base)
    return ManufacturedCocycle(B, np.asarray(rho, dtype=np.complex128), alpha)


@dataclass
class RigidCase:
    """Cocycle, eigen-data and phase for which the rigidity mechanism holds exactly."""

    cocycle: ManufacturedCocycle
    u: np.ndarray
    sites: np.ndarray
    x: float
    k0: int
    ell: int


def manufactured_rigid(alpha, ell=1, K=24, k0=3, seed=0, decay=0.5, amp=0.1, offset=0.0):
    """Rigid case built backwards from the conclusion.

    Column j of B is the Bloch state vector with entries g_j(theta + n alpha)
    e^{2 pi i n rho_j}, n = l-1, ..., -l, so A := B(. + alpha) Lambda B^{-1} is a
    generalised companion cocycle. With u_n = (g_1)_{n - k0} and
    x = rho_1 - k0 alpha, the state vector of u equals e^{2 pi i k0 theta}
    times column 1, i.e. c = B^{-1} W is the single mode k0 in component 1.
    ``offset`` moves x away from the resonant phase without changing u.
    """
    if alpha.d != 1:
        raise ValueError("manufactured rigid case is one-dimensional")
    rng = np.random.default_rng(seed)
    m = 2 * ell
    # well separated exponents keep B far from singular
    rho = (np.arange(m) + 0.25 + 0.5 * rng.random(m)) / m
    ks = np.arange(-K, K + 1)
    g = np.exp(-decay * np.abs(ks))[:, None] * np.exp(1j * TWO_PI * rng.random((2 * K + 1, m)))
    g *= amp
    g[K] = 1.0
    ns = np.arange(ell - 1, -ell - 1, -1)
    a = float(alpha.alpha[0])
    # B_k[i, j] = g_j,k e^{2 pi i n_i (k alpha + rho_j)}
    coeffs = g[:, None, :] * np.exp(1j * TWO_PI * ns[None, :, None] * (ks[:, None, None] * a + rho[None, None, :]))
    B = FourierSeries(coeffs, 1)
    coc = ManufacturedCocycle(B, rho.astype(np.complex128), alpha)
    N = K + abs(k0) + 8
    sites = np.arange(-N, N + 1)
    u = np.zeros(sites.size, dtype=np.complex128)
    u[ks + k0 + N] = g[:, 0]
    u /= np.linalg.norm(u)
    x = float((rho[0] - k0 * a + offset) % 1.0)
    return RigidCase(coc, u, sites, x, k0, ell)


# ------------------------------------------------------------ Newton


@dataclass
class ConjugacyData:
    B: FourierSeries
    rho: np.ndarray  # complex, Re in [0, 1), sorted by (Re, Im)
    residual: float
    condition: float
    converged: bool
    status: str
    history: list = field(default_factory=list)
    floored_modes: int = 0
    alpha: Frequency = None

    @property
    def K(self):
        return self.B.K

    @property
    def size(self):
        return self.B.value_shape[0]

    @property
    def Lambda(self):
        return np.diag(np.exp(1j * TWO_PI * self.rho))


def conjugacy_residual(cocycle, B, lam, L=None):
    """sup over the grid of the Frobenius norm of B(theta + alpha)^{-1} A B(theta) - Lambda."""
    d = B.d
    L = L or 4 * B.K
    th = theta_grid(d, L)
    A = cocycle.sample(th)
    G = np.linalg.solve(B.shifted(cocycle.alpha.alpha).to_grid(L), A @ B.to_grid(L)) - np.diag(lam)
    return float(np.linalg.norm(G, axis=(-2, -1)).max())


def _initial_guess(A_grid, d):
    axes = tuple(range(d))
    A0 = A_grid.mean(axis=axes)
    lam, V = np.linalg.eig(A0)
    if not np.all(np.isfinite(V)) or np.linalg.cond(V) > 1e8:
        lam, V = np.linalg.eig(A_grid[(0,) * d])
    return lam, V


def _min_gap(lam):
    m = lam.size
    if m < 2:
        return np.inf
    diff = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(m, np.inf))
    return float(diff.min())


def newton_reduce(
    cocycle,
    rho0=None,
    K=DEFAULT_CONJUGACY_RADIUS,
    tol=DEFAULT_TOL,
    max_iters=40,
    delta=DEFAULT_DELTA,
    L=None,
):
    """Newton-KAM reduction to constant diagonal form.

    One step: with G = B(.+alpha)^{-1} A B - Lambda, set Lambda += diag(G_0) and
    Y_k[i, j] = G_k[i, j] / (e^{2 pi i <k, alpha>} lambda_j - lambda_i), zero
    where that divisor is at most ``delta`` and on the diagonal of Y_0; then
    B <- B (I + Y) truncated to |k| <= K.
    """
    d = cocycle.d
    m = cocycle.size
    alpha = cocycle.alpha
    L = L or 4 * K
    th = theta_grid(d, L)
    A = cocycle.sample(th)
    lam, V = _initial_guess(A, d)
    if rho0 is not None:
        rho0 = np.asarray(rho0, dtype=np.complex128)
        if rho0.shape != (m,):
            raise ValueError(f"rho0 must have {m} entries")
        target = np.exp(1j * TWO_PI * rho0)
        order = []
        for t in target:
            cand = [i for i in np.argsort(np.abs(lam - t)) if i not in order]
            order.append(cand[0])
        V = V[:, order]
        lam = target
    B = FourierSeries.constant(V, d, K)
    ks = _int_box(d, K)
    phase = np.exp(1j * TWO_PI * alpha.dot(ks)).reshape((2 * K + 1,) * d)
    eye = np.eye(m)
    centre = (K,) * d
    history = []
    floored = 0
    status = MAX_ITERS
    converged = False

    def finish(B, lam, status, converged):
        rho = normalize_rho(lam)
        order = np.lexsort((rho.imag, rho.real))
        Bp = FourierSeries(B.coeffs[..., order], d)
        Bg = Bp.to_grid(L)
        cond = float(np.linalg.cond(Bg).max()) if np.all(np.isfinite(Bg)) else np.inf
        res = history[-1] if history else np.inf
        return ConjugacyData(Bp, rho[order], res, cond, converged, status, history, floored, alpha)

    if _min_gap(lam) < COINCIDENCE_TOL:
        return finish(B, lam, NON_DIAGONALIZABLE, False)

    growth = 0
    for _ in range(max_iters + 1):
        Bg = B.to_grid(L)
        Bs = B.shifted(alpha.alpha).to_grid(L)
        try:
            G = np.linalg.solve(Bs, A @ Bg) - np.diag(lam)
        except np.linalg.LinAlgError:
            status = DIVERGED
            break
        r = float(np.linalg.norm(G, axis=(-2, -1)).max())
        if not np.isfinite(r):
            status = DIVERGED
            break
        if history and r > history[-1]:
            growth += 1
        else:
            growth = 0
        history.append(r)
        if r < tol:
            status, converged = "converged", True
            break
        if growth >= 3:
            status = DIVERGED
            break
        if len(history) > max_iters:
            break
        Gc = FourierSeries.from_grid(G, K, d).coeffs
        lam = lam + np.diag(Gc[centre])
        if _min_gap(lam) < COINCIDENCE_TOL:
            status = NON_DIAGONALIZABLE
            break
        div = phase[..., None, None] * lam[None, :] - lam[:, None]
        small = np.abs(div) <= delta
        Y = np.where(small, 0.0, Gc / np.where(small, 1.0, div))
        Y[centre][np.diag_indices(m)] = 0.0
        floored = int(small.sum()) - m  # the Y_0 diagonal is always zero
        Yg = FourierSeries(Y, d).to_grid(L)
        B = FourierSeries.from_grid(Bg @ (eye + Yg), K, d)
    return finish(B, lam, status, converged)


# ------------------------------------------------------------ resonances


@dataclass(frozen=True)
class ResonanceMatch:
    j: int  # 0-based component index
    k: tuple
    defect: float
    imag_part: float


def resonance_detect(rho, x, alpha, k_max=None, tol=1e-6):
    """All (j, k), |k|_inf <= k_max, with ||Re rho_j - x - <k, alpha>|| <= tol and |Im rho_j| <= tol.

    Sorted by defect, then |k|_1, then lexicographic k, then j.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k_max = default_k_max(alpha.d) if k_max is None else k_max
    ks = _int_box(alpha.d, k_max)
    phases = alpha.dot(ks)
    out = []
    for j, r in enumerate(np.atleast_1d(rho)):
        im = abs(float(np.imag(r)))
        if im > tol:
            continue
        defect = torus_dist(float(np.real(r)) - x - phases)
        for i in np.nonzero(defect <= tol)[0]:
            out.append(ResonanceMatch(j, tuple(int(v) for v in ks[i]), float(defect[i]), im))
    out.sort(key=lambda mt: (mt.defect, sum(abs(v) for v in mt.k), mt.k, mt.j))
    return out


# ------------------------------------------------------------ rigidity


@dataclass(frozen=True)
class ModeProfile:
    j: int
    k_star: tuple
    mass_ratio: float
    mass: float  # l2 mass of component j


def mode_profiles(c):
    """Dominant Fourier mode of each component of a vector-valued series."""
    flat = c.coeffs.reshape((-1,) + c.value_shape)
    ks = c.mode_indices()
    out = []
    for j in range(flat.shape[1]):
        sq = np.abs(flat[:, j]) ** 2
        tot = float(sq.sum())
        i = int(np.argmax(sq))
        ratio = float(sq[i] / tot) if tot > 0 else 0.0
        out.append(ModeProfile(j, tuple(int(v) for v in ks[i]), ratio, float(np.sqrt(tot))))
    return out


def effective_radius(B, rel_floor=1e-13):
    """h-hat: minus the slope of log shell mass per shell, divided by 2 pi.

    Shells r = 1 .. 3K/4 whose l2 mass exceeds ``rel_floor`` times the largest
    enter the fit; fewer than two such shells gives infinity.
    """
    mass = B.shell_masses()
    r = np.arange(mass.size)
    keep = (r >= 1) & (r <= (3 * B.K) // 4) & (mass > rel_floor * mass.max())
    if keep.sum() < 2:
        return np.inf
    slope = np.polyfit(r[keep], np.log(mass[keep]), 1)[0]
    return float(max(0.0, -slope) / TWO_PI)


@dataclass
class RigidityResult:
    matches: list  # ResonanceMatch, consistent with the mode profiles
    raw_matches: list  # every detector hit before the consistency filter
    profiles: list
    decay: object  # DecayFit
    h_hat: float
    transport_defect: float

    @property
    def best(self):
        return self.matches[0] if self.matches else None

    @property
    def decay_margin(self):
        return self.decay.rate - TWO_PI * self.h_hat

    def decay_ok(self, slack=0.05):
        return bool(self.decay.ok and self.decay_margin >= -slack)


def rigidity_check(conj, state, u, sites, x, k_max=None, tol=1e-6, margin=0, decay_floor=1e-12):
    """Rigidity diagnostics for an eigenvector and a reduced cocycle.

    ``state`` is the dual state vector of ``u`` (duality.DualStateVector).
    c = B^{-1} W is sampled on a grid fine enough for both factors; a detector
    hit (j, k) is kept only when k is also the dominant mode of c_j, since the
    relation c_j(theta + alpha) = e^{2 pi i (rho_j - x)} c_j(theta) forces
    exactly that mode.
    """
    if conj.condition > SINGULAR_CONDITION:
        raise ValueError(f"B is numerically singular on the grid (condition {conj.condition:.3e})")
    d = conj.B.d
    W = state.series
    Kc = W.K + conj.K
    L = 1 << int(np.ceil(np.log2(2 * (W.K + 2 * conj.K) + 2)))
    if d > 1:
        L = max(L, 4 * conj.K)
    Bg = conj.B.to_grid(L)
    Wg = W.to_grid(L)
    cg = np.linalg.solve(Bg, Wg[..., None])[..., 0]
    c = FourierSeries.from_grid(cg, min(Kc, (L - 1) // 2), d)
    profiles = mode_profiles(c)
    k_max = default_k_max(d) if k_max is None else k_max
    raw = resonance_detect(conj.rho, x, conj.alpha, k_max, tol)
    matches = [mt for mt in raw if profiles[mt.j].k_star == mt.k]
    fit = fit_decay(u, sites, margin=margin, floor=decay_floor)
    return RigidityResult(matches, raw, profiles, fit, effective_radius(conj.B), state.transport_defect)


# ------------------------------------------------------------ storage


def save_conjugacy(path, conj):
    """npz container: header (2l, K, d), B as (k, entry, re, im) rows, rho, residual, condition."""
    B = conj.B
    m = conj.size
    ks = B.mode_indices()
    flat = B.coeffs.reshape(ks.shape[0], m * m)
    kk = np.repeat(ks, m * m, axis=0)
    entry = np.tile(np.arange(m * m), ks.shape[0])
    vals = flat.ravel()
    np.savez(
        path,
        header=np.array([m, B.K, B.d]),
        k=kk,
        entry=entry,
        re=vals.real,
        im=vals.imag,
        rho_re=conj.rho.real,
        rho_im=conj.rho.imag,
        residual=conj.residual,
        condition=conj.condition,
        alpha=conj.alpha.alpha if conj.alpha is not None else np.zeros(0),
        history=np.asarray(conj.history, dtype=float),
        converged=conj.converged,
        status=conj.status,
    )


def load_conjugacy(path):
    with np.load(path, allow_pickle=False) as z:
        m, K, d = (int(v) for v in z["header"])
        coeffs = np.zeros((2 * K + 1,) * d + (m, m), dtype=np.complex128)
        idx = tuple((z["k"] + K).T) + (z["entry"] // m, z["entry"] % m)
        coeffs[idx] = z["re"] + 1j * z["im"]
        alpha = Frequency(z["alpha"]) if z["alpha"].size else None
        return ConjugacyData(
            FourierSeries(coeffs, d),
            z["rho_re"] + 1j * z["rho_im"],
            float(z["residual"]),
            float(z["condition"]),
            bool(z["converged"]),
            str(z["status"]),
            z["history"].tolist(),
            0,
            alpha,
        )


def summary_text(conj, matches=()):
    lines = [
        f"status: {conj.status}",
        f"residual: {conj.residual:.3e}",
        f"condition: {conj.condition:.3e}",
        f"iterations: {max(len(conj.history) - 1, 0)}",
        "rho:",
    ]
    lines += [f"  {j}: {r.real:.15f} {r.imag:+.3e}i" for j, r in enumerate(conj.rho)]
    lines.append("matches:" if matches else "matches: none")
    lines += [f"  j={mt.j} k={mt.k} defect={mt.defect:.3e} |Im|={mt.imag_part:.3e}" for mt in matches]
    return "\n".join(lines) + "\n"
