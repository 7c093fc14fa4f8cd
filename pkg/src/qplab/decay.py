"""Exponential decay fits of eigenvectors around their localisation centre."""

from dataclasses import dataclass

import numpy as np

R2_GATE = 0.9
MIN_SITES = 10
NOT_LOCALIZED = "not exponentially localized at this scale"
INSUFFICIENT = "insufficient range"


@dataclass
class DecayFit:
    rate: float  # nan unless verdict == "ok"
    intercept: float
    window: tuple  # (min, max) distance from the centre used in the fit
    r2: float
    center: tuple
    n_points: int
    verdict: str

    @property
    def ok(self):
        return self.verdict == "ok"


def _as_sites(u, sites):
    if sites is None:
        N = u.size // 2
        return np.arange(-N, N + 1)[:, None]
    sites = np.asarray(sites, dtype=np.int64)
    return sites[:, None] if sites.ndim == 1 else sites


def fit_decay(u, sites=None, margin=0, floor=1e-12, log_abs=None, max_distance=None):
    """Least-squares fit of log|u_n| against |n - m*|_inf around m* = argmax |u_n|.

    Sites enter the fit when |u_n| > floor * max|u| and their distance to the
    box boundary exceeds ``margin``. ``log_abs`` may supply log|u_n| directly
    (e.g. a profile resolved below double-precision underflow); ``u`` is then
    only used for its shape when given as None.
    """
    if log_abs is None:
        u = np.asarray(u)
        la = np.log(np.maximum(np.abs(u), np.finfo(float).tiny))
    else:
        la = np.asarray(log_abs, dtype=float)
    sites = _as_sites(la, sites)
    N = int(np.abs(sites).max(initial=0))
    c = int(np.argmax(la))
    center = tuple(int(s) for s in sites[c])
    dist = np.abs(sites - sites[c]).max(axis=1)
    to_edge = N - np.abs(sites).max(axis=1)
    keep = (la > la[c] + np.log(floor)) & (to_edge > margin)
    if max_distance is not None:
        keep &= dist <= max_distance
    x = dist[keep].astype(float)
    y = la[keep]
    if x.size < MIN_SITES or np.ptp(x) == 0:
        return DecayFit(np.nan, np.nan, (0, 0), 0.0, center, int(x.size), INSUFFICIENT)
    slope, icpt = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    window = (int(x.min()), int(x.max()))
    if r2 < R2_GATE:
        return DecayFit(np.nan, float(icpt), window, r2, center, int(x.size), NOT_LOCALIZED)
    return DecayFit(float(-slope), float(icpt), window, r2, center, int(x.size), "ok")
