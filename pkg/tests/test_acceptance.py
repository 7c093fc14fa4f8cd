"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``[PASS]``/``[FAIL]`` line with the measured value,
visible even without ``-s``.
"""

import filecmp
import math
import os
import time

import numpy as np
import pytest

from qplab.cli import dispatch, parse_config
from qplab.cocycle import CocycleSampler, iterate, lyapunov_spectrum
from qplab.core import DecayingSymbol, Frequency, TrigPoly
from qplab.duality import spectra_compare
from qplab.lab import (
    RigidityConfig,
    decay_lyapunov_consistency,
    free_ids,
    ids_continuity_report,
    run_manufactured_rigidity,
    run_rigidity_experiment,
)
from qplab.operators import DualSpec, LongRangeSpec, empirical_ids, grid_phases
from qplab.reducibility import manufactured_reducible, newton_reduce, resonance_detect

from conftest import amo_spec, random_trig_poly

pytestmark = pytest.mark.slow
GOLD = Frequency.golden()


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        return ok

    return emit


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# ------------------------------------------------------------------ 1


def _direct_recursion(v, w, eps, E, alpha, theta0, y0, n):
    """Step the dual eigen-equation sum_k v_k u_{j+k} + eps w(theta0 + j alpha) u_j = E u_j forward."""
    ell = v.degree
    u = np.zeros(n + 2 * ell, dtype=complex)  # u_{-l} .. u_{n+l-1}
    u[: 2 * ell] = y0[::-1]
    vk = np.array([v[k] for k in range(-ell, ell)])
    pot = eps * np.atleast_1d(w(theta0 + np.arange(n) * alpha))
    for j in range(n):
        i = j + ell
        rest = vk @ u[i - ell : i + ell] + (pot[j] - E) * u[i]
        u[i + ell] = -rest / v[ell]
    return u[n : n + 2 * ell][::-1]


def test_criterion_01_cocycle_recursion(report):
    rng = np.random.default_rng(1)
    w = DecayingSymbol.from_function(lambda t: 2 * np.cos(2 * np.pi * t) + 0.6 * np.sin(4 * np.pi * t), radius=2)
    worst = 0.0
    with Clock() as clk:
        for _ in range(1000):
            ell = int(rng.integers(1, 4))
            v = random_trig_poly(rng, ell)
            eps = float(rng.uniform(0, 2))
            E = float(rng.uniform(-3, 3))
            theta0 = float(rng.random())
            n = int(rng.integers(1, 501))
            y0 = rng.standard_normal(2 * ell) + 1j * rng.standard_normal(2 * ell)
            c = CocycleSampler(v, w, eps, E, GOLD)
            got = iterate(c, theta0, n).value @ y0
            ref = _direct_recursion(v, w, eps, E, GOLD.alpha[0], theta0, y0, n)
            s = np.abs(ref).max()  # orbits reach 1e200; scale before squaring
            err = np.linalg.norm((got - ref) / s) / np.linalg.norm(ref / s)
            worst = max(worst, err if np.isfinite(err) else np.inf)
    ok = worst < 1e-10 and clk.elapsed < 30
    assert report(1, "cocycle/recursion equivalence", ok, f"max rel err {worst:.2e}, {clk.elapsed:.1f} s")


# ------------------------------------------------------------------ 2


def test_criterion_02_constant_lyapunov(report):
    def top(E):
        c = CocycleSampler(TrigPoly.cosine(), DecayingSymbol.cosine(), 0.0, E, GOLD)
        return lyapunov_spectrum(c, 100_000, phases=4).top

    with Clock() as clk:
        hyp = abs(top(3.0) - math.log((3 + math.sqrt(5)) / 2))
        band = max(abs(top(E)) for E in (-1.9, -1.0, 0.0, 0.5, 1.5, 1.9))
    ok = hyp <= 1e-6 and band <= 1e-4 and clk.elapsed < 5
    assert report(2, "constant-cocycle Lyapunov", ok, f"|E=3 err| {hyp:.1e}, max |L| in band {band:.1e}, {clk.elapsed:.1f} s")


# ------------------------------------------------------------------ 3


def _shift_dist(a, b):
    """Distance between two exponent sets modulo permutation and integer shifts."""
    a, b = np.asarray(a), np.asarray(b)
    best = np.inf
    from itertools import permutations

    for perm in permutations(range(b.size)):
        d = b[list(perm)] - a
        best = min(best, float(np.max(np.abs(d.real - np.round(d.real)) + np.abs(d.imag))))
    return best


def test_criterion_03_manufactured_reducibility(report):
    worst_res, worst_rho, worst_it = 0.0, 0.0, 0
    with Clock() as clk:
        for seed in range(5):
            coc = manufactured_reducible(GOLD, m=2, K=24, seed=seed)
            out = newton_reduce(coc, K=24, tol=1e-8, max_iters=12)
            worst_res = max(worst_res, out.residual if out.converged else np.inf)
            worst_rho = max(worst_rho, _shift_dist(coc.rho, out.rho))
            worst_it = max(worst_it, len(out.history) - 1)
    ok = worst_res < 1e-8 and worst_rho < 1e-8 and worst_it <= 12 and clk.elapsed < 60
    detail = f"residual {worst_res:.1e}, rho err {worst_rho:.1e}, {worst_it} iterations, {clk.elapsed:.1f} s"
    assert report(3, "manufactured reducibility", ok, detail)


# ------------------------------------------------------------------ 4


def _oracle_resonances(rho, x, a, k_max, tol):
    hits = []
    for j, r in enumerate(rho):
        if abs(r.imag) > tol:
            continue
        for k in range(-k_max, k_max + 1):
            t = r.real - x - k * a
            dist = abs(t - round(t))
            if dist <= tol:
                hits.append((dist, abs(k), k, j))
    hits.sort()
    return [(j, k, dist) for dist, _, k, j in hits]


def test_criterion_04_resonance_bruteforce(report):
    rng = np.random.default_rng(4)
    a = float(GOLD.alpha[0])
    mismatches, total = 0, 0
    with Clock() as clk:
        for _ in range(1000):
            x = float(rng.random())
            m = int(rng.integers(1, 7))
            rho = rng.random(m) + 1j * rng.choice([0.0, 1e-8, 1e-3], m)
            # plant near-resonances and exact duplicates to exercise tie-breaks
            for j in range(m):
                if rng.random() < 0.6:
                    k = int(rng.integers(-50, 51))
                    rho[j] = (x + k * a + rng.choice([0.0, 1e-9, 5e-7, 2e-6])) % 1 + 1j * rho[j].imag
            if m > 1 and rng.random() < 0.3:
                rho[1] = rho[0]
            got = [(h.j, h.k[0], h.defect) for h in resonance_detect(rho, x, GOLD, k_max=50, tol=1e-6)]
            want = _oracle_resonances(rho, x, a, 50, 1e-6)
            total += len(want)
            same = [(j, k) for j, k, _ in got] == [(j, k) for j, k, _ in want] and all(
                abs(g[2] - w[2]) <= 1e-15 for g, w in zip(got, want)
            )
            mismatches += not same
    ok = mismatches == 0 and clk.elapsed < 10
    assert report(4, "resonance detector vs brute force", ok, f"{mismatches} mismatching cases, {total} matches, {clk.elapsed:.1f} s")


# ------------------------------------------------------------------ 5


def test_criterion_05_mode_purity(report):
    worst = 1.0
    failed = []
    with Clock() as clk:
        for ell in (1, 2):
            rep = run_manufactured_rigidity(GOLD, seeds=(0, 1, 2, 3), k0s=(3, -5, 0, 7), ell=ell)
            worst = min(worst, rep.summary["worst_purity"])
            failed += [c.name for c in rep.criteria if not c.passed]
    ok = worst >= 0.99 and not failed and clk.elapsed < 30
    assert report(5, "single-mode purity", ok, f"min mass ratio {worst:.6f}, failed checks {failed}, {clk.elapsed:.1f} s")


# ------------------------------------------------------------------ 6


def test_criterion_06_end_to_end_rigidity(report):
    cfg = RigidityConfig(amo_spec(eps=0.2, N=1000, x=0.3141), K=64, eig_tol=1e-6, conj_tol=1e-6, match_tol=1e-4,
                         decay_slack=0.05, pass_fraction=0.8, jobs=4)
    with Clock() as clk:
        rep = run_rigidity_experiment(cfg)
    s = rep.summary
    ok = rep.passed and clk.elapsed < 600
    detail = (f"{s.get('passed', 0)}/{s.get('selected', 0)} pairs pass "
              f"({s.get('pass_fraction', 0):.1%}), {clk.elapsed:.0f} s")
    assert report(6, "end-to-end rigidity", ok, detail)


# ------------------------------------------------------------------ 7


def test_criterion_07_decay_lyapunov(report):
    with Clock() as clk:
        rep = decay_lyapunov_consistency(amo_spec(eps=0.2, N=1000, x=0.3141), count=10, n=100_000, phases=8, tol=0.1, jobs=4)
    worst = rep.summary["max_difference"]
    ok = rep.passed and clk.elapsed < 300
    assert report(7, "decay vs Lyapunov", ok, f"max |rate - L| {worst:.4f} over {rep.summary['pairs']} pairs, {clk.elapsed:.0f} s")


# ------------------------------------------------------------------ 8


def test_criterion_08_ids(report):
    step = 1e-3
    grid = np.arange(-3.0, 3.0 + step / 2, step)
    N = 1000
    with Clock() as clk:
        free = empirical_ids(amo_spec(eps=0.0), grid, N, grid_phases(20), jobs=4)
        err = float(np.abs(free.values - free_ids(grid)).max())
        mono = bool(np.all(np.diff(free.values) >= 0))
        coupled = empirical_ids(amo_spec(eps=0.2), grid, N, grid_phases(20), jobs=4)
        mono &= bool(np.all(np.diff(coupled.values) >= 0))
        jumps = len(ids_continuity_report(coupled, widths=(1e-2,))[1e-2]["jumps"])
    bound = 2 / N + step
    ok = err <= bound and mono and jumps == 0 and clk.elapsed < 120
    assert report(8, "IDS baseline", ok, f"sup err {err:.1e} (bound {bound:.1e}), monotone {mono}, jumps {jumps}, {clk.elapsed:.1f} s")


# ------------------------------------------------------------------ 9


def test_criterion_09_duality_scaling(report):
    # eps = 3 long-range AMO equals 3 x AMO(1/3); its dual is AMO(3), so spectra coincide unscaled
    v, w = TrigPoly.cosine(), DecayingSymbol.cosine()
    long_spec = LongRangeSpec(v, w, 3.0, GOLD, 0.0, 500)
    dual_spec = DualSpec(v, w.reflected(), 3.0, GOLD, 0.0, 500)
    samples = grid_phases(50)
    with Clock() as clk:
        cmp = spectra_compare(long_spec, dual_spec, samples, samples, jobs=4)
    ok = cmp.distance < 0.05 and clk.elapsed < 180
    assert report(9, "duality scaling", ok, f"Hausdorff distance {cmp.distance:.4f}, {clk.elapsed:.0f} s")


# ------------------------------------------------------------------ 10


def _tree_diff(a, b):
    cmp = filecmp.dircmp(a, b)
    diffs = cmp.left_only + cmp.right_only + cmp.funny_files
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    diffs += mismatch + errors
    for sub in cmp.common_dirs:
        diffs += [os.path.join(sub, d) for d in _tree_diff(os.path.join(a, sub), os.path.join(b, sub))]
    return diffs


def test_criterion_10_determinism(report, tmp_path):
    outs = []
    codes = []
    for name in ("a", "b"):
        code, out = dispatch(parse_config({"kind": "selftest", "seed": 7, "out": str(tmp_path / name)}))
        codes.append(code)
        outs.append(out)
    diffs = _tree_diff(*outs)
    n_files = sum(len(f) for _, _, f in os.walk(outs[0]))
    ok = not diffs and codes == [0, 0]
    assert report(10, "determinism", ok, f"{n_files} files, {len(diffs)} differ, exit codes {codes}")
