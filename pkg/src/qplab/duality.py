"""Aubry duality: eigenvectors of the long-range operator become quasi-Bloch
solutions of the banded dual equation.

Convention: u-hat(theta) = sum_n u_n e^{2 pi i <n, theta>} and
u~_theta(n) = u-hat(theta + n alpha) e^{2 pi i n x}. Under this transform the
hopping eps sum_k w_k u_{n+k} becomes the potential eps w(-theta), so the dual
equation pairs with the reflected symbol (identical for even w).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cocycle import dual_sampler, phase_samples
from .core import TWO_PI, FourierSeries, fourier_transform_sequence
from .io import write_csv
from .operators import assemble_dual, assemble_long_range

VISIBILITY_FLOOR = 1e-8
TRANSPORT_GRID = 256


@dataclass
class DualSolution:
    theta: tuple
    x: float
    n: np.ndarray
    values: np.ndarray
    residual: float
    flagged: bool


def _theta(theta, d):
    return np.atleast_1d(np.asarray(theta, dtype=float)).reshape(d)


def dual_values(uhat, theta, x, alpha, n):
    """u~_theta(n) = u-hat(theta + n alpha) e^{2 pi i n x}."""
    pts = theta[None, :] + np.asarray(n)[:, None] * alpha.alpha[None, :]
    return uhat(pts) * np.exp(1j * TWO_PI * np.asarray(n) * x)


def dual_solution(spec, u, theta, M, sites=None):
    """Dual-side solution on |n| <= M with its eigen-residual on |n| <= M - l.

    ``u`` is the eigenvector (EigenPair or array) of ``spec`` at energy E; the
    residual is ||(H^ - E) u~|| / ||u~|| over the interior window, with H^ the
    dual operator of spec. Solutions with window norm below 1e-8 are flagged.
    """
    E = getattr(u, "E", None)
    if E is None:
        raise ValueError("pass an EigenPair so that E is known")
    vec, sites = u.u, (u.sites if sites is None else sites)
    d = spec.d
    theta = _theta(theta, d)
    uhat = fourier_transform_sequence(vec, sites)
    ell = spec.v.degree
    n = np.arange(-M, M + 1)
    vals = dual_values(uhat, theta, spec.x, spec.alpha, n)
    wr = spec.w.reflected()
    inner = np.arange(-M + ell, M - ell + 1)
    pot = spec.eps * wr(theta[None, :] + inner[:, None] * spec.alpha.alpha[None, :])
    r = (pot - E) * vals[inner + M]
    for k, vk in spec.v.items():
        r = r + vk * vals[inner + k + M]
    norm = np.linalg.norm(vals[inner + M])
    flagged = bool(norm / np.sqrt(inner.size) < VISIBILITY_FLOOR)
    res = float(np.linalg.norm(r) / norm) if norm > 0 else np.inf
    return DualSolution(tuple(theta.tolist()), float(spec.x), n, vals, res, flagged)


@dataclass
class DualStateVector:
    """W(theta) = (u~_theta(l-1+s), ..., u~_theta(-l+s)) as a vector-valued series.

    s is ``offset``; s = 0 is the window on which A_E(theta) W(theta) =
    e^{2 pi i x} W(theta + alpha). The window (u~(2l-1), ..., u~(0)) is s = l
    and is transported by A_E(theta + l alpha) instead.
    """

    series: FourierSeries
    x: float
    offset: int
    transport_defect: float

    def __call__(self, theta):
        return self.series(theta)


def state_series(u, sites, x, alpha, ell, offset=0):
    """Fourier coefficients of W: entry i (n = l-1-i+offset) has u_k e^{2 pi i n (<k, alpha> + x)}."""
    uhat = fourier_transform_sequence(u, sites)
    ks = uhat.mode_indices()
    base = uhat.coeffs.reshape(-1)
    ns = np.arange(ell - 1, -ell - 1, -1) + offset
    ph = np.exp(1j * TWO_PI * ns[None, :] * (alpha.dot(ks)[:, None] + x))
    coeffs = (base[:, None] * ph).reshape(uhat.coeffs.shape + (2 * ell,))
    return FourierSeries(coeffs, uhat.d)


def transport_defect(cocycle, W, x, thetas, offset=0):
    """sup_theta ||A(theta + s alpha) W(theta) - e^{2 pi i x} W(theta + alpha)||."""
    a = cocycle.alpha.alpha
    A = cocycle.sample(thetas + offset * a)
    lhs = np.einsum("...ij,...j->...i", A, W(thetas))
    rhs = np.exp(1j * TWO_PI * x) * W(thetas + a)
    return float(np.linalg.norm(lhs - rhs, axis=-1).max())


def transport_points(d, count=TRANSPORT_GRID):
    if d == 1:
        return (np.arange(count) / count)[:, None]
    return phase_samples(d, count)


def dual_state_vector(u, sites, x, alpha, ell, cocycle=None, offset=0, grid=TRANSPORT_GRID):
    """State vector of an eigenvector and, given its cocycle, the transport defect."""
    W = state_series(np.asarray(u), sites, x, alpha, ell, offset)
    defect = np.nan
    if cocycle is not None:
        defect = transport_defect(cocycle, W, x, transport_points(alpha.d, grid), offset)
    return DualStateVector(W, float(x), offset, defect)


def state_vector_of(spec, pair, offset=0, grid=TRANSPORT_GRID):
    """Convenience: state vector of a long-range eigenpair, checked against its dual cocycle."""
    return dual_state_vector(
        pair.u, pair.sites, spec.x, spec.alpha, spec.v.degree, dual_sampler(spec, pair.E), offset, grid
    )


# ------------------------------------------------------------ spectra


def hausdorff_1d(a, b):
    """Two-sided Hausdorff distance between finite subsets of R."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))

    def one_sided(p, q):
        i = np.clip(np.searchsorted(q, p), 1, q.size - 1) if q.size > 1 else np.zeros(p.size, int)
        lo = np.abs(p - q[np.maximum(i - 1, 0)])
        hi = np.abs(p - q[i])
        return float(np.minimum(lo, hi).max(initial=0.0))

    return max(one_sided(a, b), one_sided(b, a))


@dataclass
class SpectraComparison:
    distance: float
    long_energies: list  # per sample
    dual_energies: list


def _filtered(H, edge_mask, threshold):
    E, U = np.linalg.eigh(H)
    if edge_mask is None:
        return E
    bm = np.sum(np.abs(U[edge_mask]) ** 2, axis=0)
    return E[bm <= threshold]


def spectra_compare(long_spec, dual_spec, phases, thetas, energy_scale=1.0, layer=0.1, threshold=0.5, jobs=1):
    """Hausdorff distance between unions of truncated spectra on the two sides.

    Long side: the long-range truncation at each phase x. Dual side: the banded
    truncation at each theta, energies multiplied by ``energy_scale``.
    Eigenvectors with more than ``threshold`` of their mass in the outer
    ``layer`` fraction of the box are Dirichlet edge states with no
    counterpart in the infinite-volume spectrum and are dropped on both sides
    (layer = 0 keeps everything).
    """
    N, M = long_spec.N, dual_spec.M
    long_mask = dual_mask = None
    if layer > 0:
        long_mask = np.abs(long_spec.sites()).max(axis=1) > N - int(np.ceil(layer * N))
        dual_mask = np.abs(dual_spec.sites()) > M - int(np.ceil(layer * M))

    def long_job(x):
        return _filtered(assemble_long_range(long_spec.with_phase(x)), long_mask, threshold)

    def dual_job(th):
        return energy_scale * _filtered(assemble_dual(dual_spec.with_theta(th)), dual_mask, threshold)

    with ThreadPoolExecutor(max(1, jobs)) as ex:
        left = list(ex.map(long_job, phases))
        right = list(ex.map(dual_job, thetas))
    dist = hausdorff_1d(np.concatenate(left), np.concatenate(right))
    return SpectraComparison(dist, left, right)


def export_dual_solution(path, sol):
    write_csv(path, ["n", "re", "im"], [(int(n), float(z.real), float(z.imag)) for n, z in zip(sol.n, sol.values)])


def export_spectra(path, cmp):
    rows = []
    for side, lists in (("long", cmp.long_energies), ("dual", cmp.dual_energies)):
        for i, ev in enumerate(lists):
            rows += [(side, i, float(e)) for e in ev]
    write_csv(path, ["side", "sample", "E"], rows)
