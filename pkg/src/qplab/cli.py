"""Command-line front end: ``qplab <experiment> [--config FILE] [flags]``."""

import argparse
import dataclasses
import hashlib
import json
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .cocycle import (
    CocycleSampler,
    export_lyapunov_sweep,
    export_rotation,
    lyapunov_spectrum,
    rotation_number,
    symplectic_defect,
)
from .core import DecayingSymbol, Frequency, RationalFrequencyError, TrigPoly
from .duality import export_spectra, spectra_compare
from .io import write_csv
from .lab import (
    ExperimentReport,
    RigidityConfig,
    decay_lyapunov_consistency,
    free_ids,
    ids_continuity_report,
    judge,
    run_manufactured_rigidity,
    run_rigidity_experiment,
)
from .operators import (
    DualSpec,
    LongRangeSpec,
    empirical_ids,
    export_eigenpairs,
    export_ids,
    grid_phases,
    long_range_eigenpairs,
    orbit_phases,
    spectral_weights,
)
from .reducibility import newton_reduce, resonance_detect, save_conjugacy, summary_text

OUT_ENV = "QPLAB_OUT"
DEFAULT_OUT = "qplab-out"
KINDS = ("spectrum", "le-sweep", "rotation", "reduce", "rigidity", "ids", "decay", "duality-compare")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Every field has a default; the defaults describe the eps = 0 smoke case."""

    kind: str = "spectrum"
    v: list = field(default_factory=lambda: [[-1, 1.0, 0.0], [0, 0.0, 0.0], [1, 1.0, 0.0]])
    w: list = field(default_factory=lambda: [[-1, 1.0, 0.0], [1, 1.0, 0.0]])
    eps: float = 0.0
    alpha: list = field(default_factory=lambda: [GOLDEN])
    x: float = 0.0
    theta: list = field(default_factory=lambda: [0.0])
    N: int = 50
    M: int = 50
    K: int = 64
    n: int = 2000
    phases: int = 8
    phase_mode: str = "grid"
    E: float = 0.5
    E_min: float = -3.0
    E_max: float = 3.0
    E_count: int = 13
    rho0: list = None
    tol: float = 1e-8
    conj_tol: float = 1e-6
    match_tol: float = 1e-4
    delta: float = 1e-6
    k_max: int = None
    max_iters: int = 40
    stride: int = 1
    pass_fraction: float = 0.8
    decay_slack: float = 0.05
    mode: str = "operator"
    ids_step: float = 1e-3
    hausdorff_tol: float = 0.05
    lyapunov_tol: float = 0.1
    seed: int = 0
    jobs: int = 1
    out: str = None

    # ---- model objects (invariants checked in parse_config)
    def trig_poly(self):
        return TrigPoly.from_dict({int(k): complex(re, im) for k, re, im in self.v})

    def symbol(self):
        d = len(self.alpha)
        ks = [[int(t) for t in np.atleast_1d(k)] for k, _, _ in self.w]
        vals = [complex(re, im) for _, re, im in self.w]
        return DecayingSymbol(np.array(ks, dtype=np.int64).reshape(-1, d), vals)

    def frequency(self):
        return Frequency(self.alpha)

    def long_spec(self, eps=None):
        return LongRangeSpec(self.trig_poly(), self.symbol(), self.eps if eps is None else eps, self.frequency(), self.x, self.N)

    def dual_spec(self):
        # duality pairs the long-range hopping with the reflected symbol
        return DualSpec(self.trig_poly(), self.symbol().reflected(), self.eps, self.frequency(), self.theta, self.M)

    def energies(self):
        return np.linspace(self.E_min, self.E_max, self.E_count)

    def snapshot(self):
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_OPTIONAL = {"rho0", "k_max", "out"}


def _check_type(key, value, typ):
    if value is None:
        if key.split(".")[-1] in _OPTIONAL:
            return None
        raise ConfigError(f"{key}: null not allowed")
    if typ in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {type(value).__name__}")
        return float(value)
    if typ in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {type(value).__name__}")
        return value
    if typ in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {type(value).__name__}")
        return value
    if typ in ("list", list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        return value
    return value


def _check_triples(key, rows):
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 3:
            raise ConfigError(f"{key}[{i}]: expected [k, re, im]")
        for j, part in enumerate(row[1:], start=1):
            if isinstance(part, bool) or not isinstance(part, (int, float)):
                raise ConfigError(f"{key}[{i}][{j}]: expected a number")


def parse_config(doc=None, overrides=None):
    """Defaults <- document <- flag overrides, then validation.

    Unknown keys, type mismatches and invariant violations raise ConfigError
    naming the offending key path. A run manifest is accepted as a document
    (its ``config`` entry is used).
    """
    doc = dict(doc or {})
    if "manifest_version" in doc:
        doc = dict(doc.get("config", {}))
    merged = {}
    for source, prefix in ((doc, "config"), (overrides or {}, "flag")):
        for key, value in source.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{prefix}.{key}: unknown key")
            merged[key] = _check_type(f"{prefix}.{key}", value, _FIELD_TYPES[key])
    cfg = RunConfig(**merged)
    if cfg.kind not in KINDS + ("selftest",):
        raise ConfigError(f"config.kind: unknown experiment {cfg.kind!r}")
    _check_triples("config.v", cfg.v)
    _check_triples("config.w", cfg.w)
    try:
        cfg.trig_poly()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config.v: {exc}") from None
    try:
        alpha = cfg.frequency()
    except RationalFrequencyError as exc:
        raise ConfigError(f"config.alpha: {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config.alpha: {exc}") from None
    try:
        cfg.symbol()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config.w: {exc}") from None
    if len(cfg.theta) != alpha.d:
        raise ConfigError("config.theta: length must equal len(alpha)")
    for key in ("N", "M", "K", "n", "phases", "E_count", "max_iters", "stride", "jobs"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"config.{key}: must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("config.seed: must be >= 0")
    if cfg.phase_mode not in ("grid", "orbit"):
        raise ConfigError("config.phase_mode: expected 'grid' or 'orbit'")
    if cfg.mode not in ("operator", "manufactured"):
        raise ConfigError("config.mode: expected 'operator' or 'manufactured'")
    if cfg.rho0 is not None and not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in cfg.rho0):
        raise ConfigError("config.rho0: expected a list of real numbers")
    try:
        cfg.long_spec()
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from None
    return cfg


# ------------------------------------------------------------ experiments


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_report(path, report):
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(_clean(report.to_dict()), indent=2) + "\n")


def _phases(cfg):
    if cfg.phase_mode == "orbit":
        return orbit_phases(cfg.x, cfg.frequency(), cfg.phases)
    return grid_phases(cfg.phases)


def run_spectrum(cfg, out):
    spec = cfg.long_spec()
    pairs = long_range_eigenpairs(spec)
    export_eigenpairs(os.path.join(out, "eigenpairs.csv"), pairs)
    origin = np.zeros(spec.d, dtype=int)
    E, wts = spectral_weights(pairs, origin)
    write_csv(os.path.join(out, "weights.csv"), ["E", "weight"], list(zip(E.tolist(), wts.tolist())))
    rep = ExperimentReport("spectrum", cfg.snapshot(), cfg.seed)
    rep.summary = {"eigenvalues": len(pairs), "E_min": float(E.min()), "E_max": float(E.max())}
    rep.criteria.append(judge("|sum of spectral weights at origin - 1|", abs(wts.sum() - 1.0), "<=", 1e-10))
    return rep


def _dual_cocycle(cfg, E):
    return CocycleSampler(cfg.trig_poly(), cfg.symbol().reflected(), cfg.eps, E, cfg.frequency())


def run_le_sweep(cfg, out):
    Es = cfg.energies()
    reports = [lyapunov_spectrum(_dual_cocycle(cfg, E), cfg.n, cfg.phases) for E in Es]
    export_lyapunov_sweep(os.path.join(out, "lyapunov.csv"), Es, reports)
    worst = max(abs(r.exponents.sum()) - 3 * r.stderr.sum() for r in reports)
    sym = symplectic_defect(_dual_cocycle(cfg, float(Es[0])), 256, cfg.seed)
    rep = ExperimentReport("le-sweep", cfg.snapshot(), cfg.seed)
    rep.summary = {
        "energies": len(Es),
        "top_max": max(r.top for r in reports),
        "symplectic_defect": sym.defect,
        "raw_symplectic_defect": sym.raw_defect,
    }
    rep.criteria.append(judge("max |sum of exponents| beyond 3 stderr", worst, "<=", 1e-8))
    return rep


def run_rotation(cfg, out):
    Es = cfg.energies()
    rhos = [rotation_number(_dual_cocycle(cfg, E), cfg.n, cfg.phases) for E in Es]
    export_rotation(os.path.join(out, "rotation.csv"), Es, rhos)
    rise = max((b - a for a, b in zip(rhos, rhos[1:])), default=0.0)
    rep = ExperimentReport("rotation", cfg.snapshot(), cfg.seed, {"energies": len(Es)})
    rep.criteria.append(judge("max increase of rho along E", rise, "<=", 2.0 / cfg.n))
    return rep


def run_reduce(cfg, out):
    c = _dual_cocycle(cfg, cfg.E)
    rho0 = None if cfg.rho0 is None else np.asarray(cfg.rho0, dtype=float)
    conj = newton_reduce(c, rho0=rho0, K=cfg.K, tol=cfg.tol, max_iters=cfg.max_iters, delta=cfg.delta)
    save_conjugacy(os.path.join(out, "conjugacy.npz"), conj)
    k_max = cfg.k_max if cfg.k_max is not None else 50
    matches = resonance_detect(conj.rho, cfg.x, cfg.frequency(), k_max, 1e-6) if conj.converged else []
    with open(os.path.join(out, "summary.txt"), "w", newline="") as fh:
        fh.write(summary_text(conj, matches))
    rep = ExperimentReport("reduce", cfg.snapshot(), cfg.seed)
    rep.summary = {
        "status": conj.status,
        "residual": conj.residual,
        "condition": conj.condition,
        "rho": [[r.real, r.imag] for r in conj.rho],
        "history": conj.history,
    }
    rep.criteria.append(judge("conjugacy residual", conj.residual, "<", cfg.tol))
    return rep


def run_rigidity(cfg, out):
    if cfg.mode == "manufactured":
        seeds = [cfg.seed, cfg.seed + 1, cfg.seed + 2]
        rep = run_manufactured_rigidity(cfg.frequency(), seeds=seeds, k0s=(3, -5, 0))
    else:
        rc = RigidityConfig(
            cfg.long_spec(), K=cfg.K, newton_tol=cfg.tol, conj_tol=cfg.conj_tol, match_tol=cfg.match_tol,
            delta=cfg.delta, k_max=cfg.k_max, decay_slack=cfg.decay_slack, pass_fraction=cfg.pass_fraction,
            stride=cfg.stride, max_iters=cfg.max_iters, jobs=cfg.jobs, seed=cfg.seed,
        )
        rep = run_rigidity_experiment(rc)
        rep.config = cfg.snapshot()
        header = ["E", "center", "conj_residual", "match_j", "match_k", "defect", "decay_rate", "two_pi_h_hat", "passed"]
        rows = []
        for r in rep.records:
            m = r.get("match") or {}
            rows.append([
                r["E"], r["center"][0], r["conj_residual"], m.get("j", ""), (m.get("k") or [""])[0],
                m.get("defect", ""), r.get("decay_rate", ""), r.get("two_pi_h_hat", ""), int(r["passed"]),
            ])
        write_csv(os.path.join(out, "pairs.csv"), header, rows)
    return rep


def run_ids(cfg, out):
    grid = np.round(np.arange(cfg.E_min, cfg.E_max + 0.5 * cfg.ids_step, cfg.ids_step), 12)
    ids = empirical_ids(cfg.long_spec(), grid, cfg.N, _phases(cfg), cfg.jobs)
    export_ids(os.path.join(out, "ids.csv"), ids)
    cont = ids_continuity_report(ids)
    rep = ExperimentReport("ids", cfg.snapshot(), cfg.seed)
    rep.summary = {"continuity": {str(w): v for w, v in cont.items()}}
    rep.criteria.append(judge("min IDS increment", float(np.diff(ids.values).min(initial=0.0)), ">=", 0.0))
    coarse = sum(len(v["jumps"]) for w, v in cont.items() if w >= 1e-2)
    rep.criteria.append(judge("jumps at widths >= 1e-2", coarse, "==", 0))
    v = cfg.trig_poly()
    if cfg.eps == 0 and v.degree == 1 and v[0] == 0 and v[1] == 1:
        err = float(np.abs(ids.values - free_ids(grid)).max())
        rep.criteria.append(judge("sup |IDS - (1 - arccos(E/2)/pi)|", err, "<=", 2.0 / cfg.N + cfg.ids_step))
    return rep


def run_decay(cfg, out):
    rep = decay_lyapunov_consistency(cfg.long_spec(), n=max(cfg.n, 1000), phases=cfg.phases, tol=cfg.lyapunov_tol, jobs=cfg.jobs, seed=cfg.seed)
    rep.config = cfg.snapshot()
    cols = ["E", "center", "fit_rate", "fit_r2", "lyapunov", "lyapunov_stderr", "difference"]
    write_csv(os.path.join(out, "decay.csv"), cols, [[r[c] for c in cols] for r in rep.records])
    return rep


def run_duality_compare(cfg, out):
    long_spec = cfg.long_spec()
    dual = cfg.dual_spec()
    ph = _phases(cfg)
    thetas = [[t] + [0.0] * (long_spec.d - 1) for t in grid_phases(cfg.phases)]
    cmp = spectra_compare(long_spec, dual, ph, thetas, jobs=cfg.jobs)
    export_spectra(os.path.join(out, "spectra.csv"), cmp)
    rep = ExperimentReport("duality-compare", cfg.snapshot(), cfg.seed, {"distance": cmp.distance})
    rep.criteria.append(judge("Hausdorff distance", cmp.distance, "<", cfg.hausdorff_tol))
    return rep


RUNNERS = {
    "spectrum": run_spectrum,
    "le-sweep": run_le_sweep,
    "rotation": run_rotation,
    "reduce": run_reduce,
    "rigidity": run_rigidity,
    "ids": run_ids,
    "decay": run_decay,
    "duality-compare": run_duality_compare,
}


def selftest_configs(base):
    """The eps = 0 smoke suite (decay needs eps != 0 and runs small at eps = 0.2)."""
    common = {k: v for k, v in base.snapshot().items() if k in ("seed", "jobs")}
    plans = [
        ("spectrum", {}),
        ("le-sweep", {"n": 1000, "phases": 2}),
        ("rotation", {"n": 2000, "phases": 2, "E_min": -2.5, "E_max": 2.5, "E_count": 11}),
        ("reduce", {"E": 1.0, "K": 16}),
        ("rigidity", {"mode": "manufactured"}),
        ("rigidity", {"N": 20, "K": 8, "x": 0.1}),
        ("ids", {"N": 200, "phases": 4, "E_min": -2.5, "E_max": 2.5, "ids_step": 0.01}),
        ("decay", {"eps": 0.2, "N": 400, "n": 1000, "phases": 2}),
        ("duality-compare", {"N": 60, "M": 60, "phases": 4}),
    ]
    out = []
    for i, (kind, extra) in enumerate(plans):
        doc = {**common, "kind": kind, **extra}
        out.append((f"{i:02d}-{kind}" + ("-" + extra["mode"] if "mode" in extra else ""), parse_config(doc)))
    return out


# ------------------------------------------------------------ dispatch


def _versions():
    import numba
    import scipy

    return {
        "qplab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _digest(directory):
    out = {}
    for root, _, files in os.walk(directory):
        for name in sorted(files):
            p = os.path.join(root, name)
            rel = os.path.relpath(p, directory).replace(os.sep, "/")
            with open(p, "rb") as fh:
                out[rel] = hashlib.sha256(fh.read()).hexdigest()
    return dict(sorted(out.items()))


def _write_manifest(directory, cfg, passed, elapsed=None):
    files = _digest(directory)
    manifest = {
        "manifest_version": 1,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "passed": passed,
        "versions": _versions(),
        "config": cfg.snapshot(),
        "files": files,
    }
    if elapsed is not None:
        manifest["wall_clock_seconds"] = elapsed
    with open(os.path.join(directory, "manifest.json"), "w", newline="") as fh:
        fh.write(json.dumps(_clean(manifest), indent=2) + "\n")
    with open(os.path.join(directory, "config.json"), "w", newline="") as fh:
        fh.write(json.dumps(_clean(cfg.snapshot()), indent=2) + "\n")


def output_root(cfg):
    return cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def _publish(tmp, final):
    """Atomic rename of a finished directory over any previous result."""
    if os.path.exists(final):
        trash = tempfile.mkdtemp(prefix=".old-", dir=os.path.dirname(final))
        os.replace(final, os.path.join(trash, "d"))
        os.replace(tmp, final)
        shutil.rmtree(trash)
    else:
        os.replace(tmp, final)


def _run_into(cfg, directory, record_time):
    t0 = time.perf_counter()
    try:
        rep = RUNNERS[cfg.kind](cfg, directory)
    except Exception as exc:  # experiment-level failure: still leave a report
        rep = ExperimentReport(cfg.kind, cfg.snapshot(), cfg.seed, {"error": f"{type(exc).__name__}: {exc}"})
        rep.criteria.append(judge("completed without error", 0, "==", 1))
    write_report(os.path.join(directory, "report.json"), rep)
    elapsed = time.perf_counter() - t0
    _write_manifest(directory, cfg, rep.passed, elapsed if record_time else None)
    print(f"{cfg.kind}: {'pass' if rep.passed else 'FAIL'} ({elapsed:.2f} s)", file=sys.stderr)
    return rep


def dispatch(cfg, record_time=True):
    """Run one experiment (or the selftest suite); returns (exit status, output directory)."""
    root = os.path.abspath(output_root(cfg))
    os.makedirs(root, exist_ok=True)
    name = cfg.kind
    final = os.path.join(root, name)
    tmp = tempfile.mkdtemp(prefix=f".{name}.tmp-", dir=root)
    try:
        if cfg.kind == "selftest":
            ok = True
            summary = {}
            for sub, sub_cfg in selftest_configs(cfg):
                d = os.path.join(tmp, sub)
                os.makedirs(d)
                rep = _run_into(sub_cfg, d, record_time=False)
                summary[sub] = rep.passed
                ok &= rep.passed
            with open(os.path.join(tmp, "selftest.json"), "w", newline="") as fh:
                fh.write(json.dumps({"passed": ok, "runs": summary}, indent=2) + "\n")
            _write_manifest(tmp, cfg, ok)
        else:
            ok = _run_into(cfg, tmp, record_time).passed
        _publish(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return (0 if ok else 1), final


# ------------------------------------------------------------ argument parsing


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


FLAG_SPECS = [
    ("--eps", float, "coupling eps"),
    ("--x", float, "phase x of the long-range operator"),
    ("--alpha", _floats, "frequency components, comma separated"),
    ("--theta", _floats, "dual phase theta, comma separated"),
    ("--N", int, "box radius of the long-range truncation"),
    ("--M", int, "interval radius of the dual truncation"),
    ("--K", int, "Fourier radius of the conjugacy"),
    ("--n", int, "cocycle iterates"),
    ("--phases", int, "phase samples"),
    ("--phase-mode", str, "grid or orbit phase sampling"),
    ("--E", float, "energy for reduce"),
    ("--E-min", float, "energy sweep start"),
    ("--E-max", float, "energy sweep end"),
    ("--E-count", int, "energy sweep points"),
    ("--rho0", _floats, "initial exponents for reduce, comma separated"),
    ("--tol", float, "Newton tolerance"),
    ("--conj-tol", float, "conjugacy pass threshold"),
    ("--match-tol", float, "resonance pass threshold"),
    ("--delta", float, "small-divisor floor"),
    ("--k-max", int, "resonance scan radius"),
    ("--max-iters", int, "Newton iteration cap"),
    ("--stride", int, "use every stride-th selected eigenpair"),
    ("--mode", str, "rigidity mode: operator or manufactured"),
    ("--ids-step", float, "IDS energy grid step"),
]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config document (a run manifest also works)")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help=f"output root (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker threads")
    for flag, typ, helptext in FLAG_SPECS:
        common.add_argument(flag, type=typ, default=argparse.SUPPRESS, help=helptext)
    parser = argparse.ArgumentParser(prog="qplab", description="Quasi-periodic operator laboratory")
    parser.add_argument("--version", action="version", version=f"qplab {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS + ("selftest",):
        sub.add_parser(kind, parents=[common])
    return parser


def main(argv=None):
    args = vars(build_parser().parse_args(argv))
    kind = args.pop("kind")
    path = args.pop("config", None)
    doc = {}
    try:
        if path:
            with open(path) as fh:
                doc = json.load(fh)
        overrides = {k.replace("-", "_"): v for k, v in args.items()}
        overrides["kind"] = kind
        if "manifest_version" in doc:
            doc = doc.get("config", {})
        cfg = parse_config(doc, overrides)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"qplab: error: {exc}", file=sys.stderr)
        return 2
    status, out = dispatch(cfg)
    print(out)
    return status


if __name__ == "__main__":
    sys.exit(main())
