"""Hot loops: cocycle products, QR sweeps, node counting, Sturm counts.

Every kernel has a numba version and a numpy version with identical
signatures. ``QPLAB_NUMBA=0`` in the environment (or a missing numba)
selects the numpy path at import time; ``use_numba()`` reports the choice.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_ENV_FLAG = "QPLAB_NUMBA"
USE_NUMBA = numba is not None and os.environ.get(_ENV_FLAG, "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def use_numba():
    return USE_NUMBA


# ---------------------------------------------------------------------------
# companion products
#
# A companion step acts on a 2l-vector y = (u_{n+l-1}, ..., u_{n-l}) as
#   y'[0] = sum_c row[c] * y[c]   with row[l-1] replaced by t_n
#   y'[1:] = y[:-1]
# so only the first row and one scalar per step are needed.


def _product_numpy(row, t, renorm):
    m = row.shape[0]
    ell = m // 2
    P = np.eye(m, dtype=np.complex128)
    log_scale = 0.0
    r = row.astype(np.complex128).copy()
    for j in range(t.shape[0]):
        r[ell - 1] = t[j]
        top = r @ P
        P[1:] = P[:-1].copy()
        P[0] = top
        if (j + 1) % renorm == 0:
            s = np.abs(P).max()
            if s > 0.0:
                P /= s
                log_scale += np.log(s)
    return P, log_scale


def _apply_numpy(row, t, y0):
    m = row.shape[0]
    ell = m // 2
    out = np.empty((t.shape[0] + m,), dtype=np.complex128)
    # out holds u_{-l}, ..., u_{n+l-1} in increasing site order
    out[:m] = y0[::-1]
    r = row.astype(np.complex128)
    for j in range(t.shape[0]):
        window = out[j : j + m][::-1]
        acc = 0.0 + 0.0j
        for c in range(m):
            coef = t[j] if c == ell - 1 else r[c]
            acc += coef * window[c]
        out[j + m] = acc
    return out


def _lyapunov_numpy(row, T, renorm, warmup):
    P, n = T.shape
    m = row.shape[0]
    ell = m // 2
    Q = np.broadcast_to(np.eye(m, dtype=np.complex128), (P, m, m)).copy()
    sums = np.zeros((P, m))
    R0 = np.broadcast_to(row.astype(np.complex128), (P, m)).copy()
    for j in range(n):
        R0[:, ell - 1] = T[:, j]
        top = np.einsum("pc,pcd->pd", R0, Q)
        Q[:, 1:] = Q[:, :-1].copy()
        Q[:, 0] = top
        if (j + 1) % renorm == 0 or j == n - 1:
            q, r = np.linalg.qr(Q)
            Q = q
            if j >= warmup:
                sums += np.log(np.abs(np.diagonal(r, axis1=1, axis2=2)))
    return sums


def _nodes_numpy(t, s):
    # u_{n+1} = t_n u_n - s u_{n-1}, real arithmetic, batched over rows of t
    P, n = t.shape
    a = np.ones(P)
    b = np.full(P, 0.5 ** 0.5)
    count = np.zeros(P, dtype=np.int64)
    for j in range(n):
        c = t[:, j] * a - s * b
        count += (c * a < 0.0) | ((c == 0.0) & (a != 0.0))
        b = a
        a = c
        scale = np.maximum(np.abs(a), np.abs(b))
        a = a / scale
        b = b / scale
    return count


def _sturm_count_numpy(d, e2, x):
    # number of eigenvalues strictly below each x (vectorised over x)
    x = np.atleast_1d(x).astype(np.float64)
    count = np.zeros(x.shape, dtype=np.int64)
    q = d[0] - x
    tiny = np.finfo(np.float64).tiny ** 0.5
    q = np.where(q == 0.0, -tiny, q)
    count += q < 0.0
    for i in range(1, d.shape[0]):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(q == 0.0, -tiny, q)
        count += q < 0.0
    return count


def _sturm_eigenvalues_numpy(d, e2, lo, hi, tol):
    n = d.shape[0]
    idx = np.arange(n)
    a = np.full(n, lo)
    b = np.full(n, hi)
    while np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        below = _sturm_count_numpy(d, e2, mid)
        go_left = below > idx
        b = np.where(go_left, mid, b)
        a = np.where(go_left, a, mid)
    return 0.5 * (a + b)


def _log_amplitude_numpy(diag, hop, center):
    n = diag.shape[0]
    out = np.zeros(n)
    r = 0.0 + 0.0j
    for j in range(n - 1, center, -1):
        hb = hop[j] if j < n - 1 else 0.0
        r = -np.conj(hop[j - 1]) / (diag[j] + hb * r)
        out[j] = np.log(np.abs(r))
    s = 0.0 + 0.0j
    for j in range(0, center):
        hl = np.conj(hop[j - 1]) if j > 0 else 0.0
        s = -hop[j] / (diag[j] + hl * s)
        out[j] = np.log(np.abs(s))
    out[center + 1 :] = np.cumsum(out[center + 1 :])
    out[:center] = np.cumsum(out[:center][::-1])[::-1]
    return out


if numba is not None:

    @numba.njit(cache=True)
    def _product_numba(row, t, renorm):
        m = row.shape[0]
        ell = m // 2
        P = np.eye(m, dtype=np.complex128)
        tmp = np.empty(m, dtype=np.complex128)
        log_scale = 0.0
        for j in range(t.shape[0]):
            for col in range(m):
                acc = 0.0 + 0.0j
                for c in range(m):
                    coef = t[j] if c == ell - 1 else row[c]
                    acc += coef * P[c, col]
                tmp[col] = acc
            for rr in range(m - 1, 0, -1):
                for col in range(m):
                    P[rr, col] = P[rr - 1, col]
            for col in range(m):
                P[0, col] = tmp[col]
            if (j + 1) % renorm == 0:
                s = 0.0
                for rr in range(m):
                    for col in range(m):
                        a = abs(P[rr, col])
                        if a > s:
                            s = a
                if s > 0.0:
                    for rr in range(m):
                        for col in range(m):
                            P[rr, col] /= s
                    log_scale += np.log(s)
        return P, log_scale

    @numba.njit(cache=True)
    def _apply_numba(row, t, y0):
        m = row.shape[0]
        ell = m // 2
        out = np.empty(t.shape[0] + m, dtype=np.complex128)
        for c in range(m):
            out[c] = y0[m - 1 - c]
        for j in range(t.shape[0]):
            acc = 0.0 + 0.0j
            for c in range(m):
                coef = t[j] if c == ell - 1 else row[c]
                acc += coef * out[j + m - 1 - c]
            out[j + m] = acc
        return out

    @numba.njit(cache=True)
    def _lyapunov_numba(row, T, renorm, warmup):
        P, n = T.shape
        m = row.shape[0]
        ell = m // 2
        sums = np.zeros((P, m))
        tmp = np.empty(m, dtype=np.complex128)
        for p in range(P):
            Q = np.eye(m, dtype=np.complex128)
            for j in range(n):
                for col in range(m):
                    acc = 0.0 + 0.0j
                    for c in range(m):
                        coef = T[p, j] if c == ell - 1 else row[c]
                        acc += coef * Q[c, col]
                    tmp[col] = acc
                for rr in range(m - 1, 0, -1):
                    for col in range(m):
                        Q[rr, col] = Q[rr - 1, col]
                for col in range(m):
                    Q[0, col] = tmp[col]
                if (j + 1) % renorm == 0 or j == n - 1:
                    q, r = np.linalg.qr(Q)
                    Q = np.ascontiguousarray(q)
                    if j >= warmup:
                        for i in range(m):
                            sums[p, i] += np.log(abs(r[i, i]))
        return sums

    @numba.njit(cache=True)
    def _nodes_numba(t, s):
        P, n = t.shape
        count = np.zeros(P, dtype=np.int64)
        for p in range(P):
            a = 1.0
            b = 0.5 ** 0.5
            for j in range(n):
                c = t[p, j] * a - s * b
                if c * a < 0.0 or (c == 0.0 and a != 0.0):
                    count[p] += 1
                b = a
                a = c
                scale = max(abs(a), abs(b))
                a /= scale
                b /= scale
        return count

    @numba.njit(cache=True)
    def _sturm_count_scalar(d, e2, x):
        tiny = np.finfo(np.float64).tiny ** 0.5
        count = 0
        q = d[0] - x
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
        for i in range(1, d.shape[0]):
            q = d[i] - x - e2[i - 1] / q
            if q == 0.0:
                q = -tiny
            if q < 0.0:
                count += 1
        return count

    @numba.njit(cache=True)
    def _sturm_count_numba(d, e2, x):
        x = np.atleast_1d(x)
        out = np.empty(x.shape[0], dtype=np.int64)
        for i in range(x.shape[0]):
            out[i] = _sturm_count_scalar(d, e2, x[i])
        return out

    @numba.njit(cache=True)
    def _sturm_eigenvalues_numba(d, e2, lo, hi, tol):
        n = d.shape[0]
        out = np.empty(n)
        for k in range(n):
            a = lo
            b = hi
            while b - a > tol:
                mid = 0.5 * (a + b)
                if _sturm_count_scalar(d, e2, mid) > k:
                    b = mid
                else:
                    a = mid
            out[k] = 0.5 * (a + b)
        return out

    @numba.njit(cache=True)
    def _log_amplitude_numba(diag, hop, center):
        n = diag.shape[0]
        out = np.zeros(n)
        r = 0.0 + 0.0j
        for j in range(n - 1, center, -1):
            hb = hop[j] if j < n - 1 else 0.0
            r = -np.conj(hop[j - 1]) / (diag[j] + hb * r)
            out[j] = np.log(abs(r))
        s = 0.0 + 0.0j
        for j in range(0, center):
            hl = np.conj(hop[j - 1]) if j > 0 else 0.0
            s = -hop[j] / (diag[j] + hl * s)
            out[j] = np.log(abs(s))
        for j in range(center + 2, n):
            out[j] += out[j - 1]
        for j in range(center - 2, -1, -1):
            out[j] += out[j + 1]
        return out


def _pick(name):
    if USE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def companion_product(row, t, renorm=10):
    """Product A_{n-1} ... A_0 of companion steps; returns (scaled matrix, log scale)."""
    row = np.ascontiguousarray(row, dtype=np.complex128)
    t = np.ascontiguousarray(t, dtype=np.complex128)
    return _pick("_product")(row, t, renorm)


def companion_apply(row, t, y0):
    """Run the scalar recursion; returns u_{-l}, ..., u_{n+l-1} in site order."""
    row = np.ascontiguousarray(row, dtype=np.complex128)
    t = np.ascontiguousarray(t, dtype=np.complex128)
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    return _pick("_apply")(row, t, y0)


def lyapunov_sums(row, T, renorm=10, warmup=0):
    """Per-phase sums of log|R_ii| from QR sweeps; T has shape (phases, steps)."""
    row = np.ascontiguousarray(row, dtype=np.complex128)
    T = np.ascontiguousarray(T, dtype=np.complex128)
    return _pick("_lyapunov")(row, T, renorm, warmup)


def node_counts(t, s):
    """Sign changes of the real recursion u_{n+1} = t_n u_n - s u_{n-1}, per row."""
    t = np.ascontiguousarray(np.atleast_2d(t), dtype=np.float64)
    return _pick("_nodes")(t, float(s))


def sturm_count(d, e2, x):
    """Eigenvalues of the symmetric tridiagonal (d, sqrt(e2)) strictly below x."""
    d = np.ascontiguousarray(d, dtype=np.float64)
    e2 = np.ascontiguousarray(e2, dtype=np.float64)
    x = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    return _pick("_sturm_count")(d, e2, x)


def sturm_eigenvalues(d, e2, tol=1e-12):
    d = np.ascontiguousarray(d, dtype=np.float64)
    e2 = np.ascontiguousarray(e2, dtype=np.float64)
    e = np.sqrt(e2)
    pad = np.zeros(d.shape[0])
    pad[:-1] += e
    pad[1:] += e
    lo = float(np.min(d - pad)) - 1.0
    hi = float(np.max(d + pad)) + 1.0
    return _pick("_sturm_eigenvalues")(d, e2, lo, hi, tol)


def log_amplitude_tridiagonal(diag, hop, center):
    """log|u_j / u_center| for the Dirichlet eigenvector of a Hermitian tridiagonal.

    ``diag`` is a_j - E, ``hop[j]`` the (j, j+1) entry. Ratios are obtained by
    continued-fraction recursion inward from both ends, so the tail is
    represented far below the floating-point floor of ``eigh`` output.
    """
    diag = np.ascontiguousarray(diag, dtype=np.complex128)
    hop = np.ascontiguousarray(hop, dtype=np.complex128)
    return _pick("_log_amplitude")(diag, hop, int(center))
