import numpy as np
import pytest

from qplab.core import Frequency
from qplab.lab import (
    RigidityConfig,
    decay_lyapunov_consistency,
    free_ids,
    ids_continuity_report,
    judge,
    run_manufactured_rigidity,
    run_rigidity_experiment,
)
from qplab.operators import EmpiricalIDS, empirical_ids, grid_phases

from conftest import amo_spec


def test_judge():
    assert judge("a", 1.0, "<", 2.0).passed
    assert not judge("a", 2.0, "<", 2.0).passed
    assert judge("a", 2.0, "<=", 2.0).passed


def test_free_ids():
    assert free_ids(-3.0) == 0.0 and free_ids(3.0) == 1.0
    assert free_ids(0.0) == pytest.approx(0.5)


def test_small_rigidity_experiment():
    rep = run_rigidity_experiment(RigidityConfig(amo_spec(eps=0.2, N=60), K=32, stride=3))
    assert rep.summary["selected"] > 5
    assert rep.passed, rep.summary
    d = rep.to_dict()
    assert d["kind"] == "rigidity" and d["config"]["spec"]["N"] == 60


def test_zero_coupling_is_compact_support():
    rep = run_rigidity_experiment(RigidityConfig(amo_spec(eps=0.0, N=30), K=16, stride=4))
    assert rep.passed
    assert {r["decay_verdict"] for r in rep.records} == {"compact support"}


def test_manufactured_rigidity_report():
    rep = run_manufactured_rigidity(Frequency.golden())
    assert rep.passed, [c for c in rep.criteria if not c.passed]


def test_manufactured_rigidity_control_fails():
    rep = run_manufactured_rigidity(Frequency.golden(), offset=0.137)
    assert not rep.passed


def test_decay_lyapunov_small():
    rep = decay_lyapunov_consistency(amo_spec(eps=0.2, N=300), count=3, n=20000, phases=4)
    assert rep.passed, rep.records


def test_ids_atom_is_a_jump():
    grid = np.linspace(-1, 1, 2001)
    eigs = [np.concatenate([np.linspace(-1, 1, 200), np.zeros(50)])]
    rep = ids_continuity_report(EmpiricalIDS.from_eigenvalues(eigs, grid, 1), widths=(0.01,))
    assert len(rep[0.01]["jumps"]) >= 1
    assert all(j["E_lo"] <= 0 <= j["E_hi"] for j in rep[0.01]["jumps"])


def test_ids_smooth_has_no_jumps():
    grid = np.arange(-3, 3.0005, 1e-3)
    ids = empirical_ids(amo_spec(eps=0.0), grid, 300, grid_phases(5))
    rep = ids_continuity_report(ids)
    assert all(not r["jumps"] for r in rep.values())


def test_ids_regression_baseline():
    grid = np.arange(-3, 3.0005, 1e-3)
    ids = empirical_ids(amo_spec(eps=0.2), grid, 500, grid_phases(20))
    rep = ids_continuity_report(ids)
    assert rep[0.01]["max_increment"] <= 0.05
    assert not rep[0.01]["jumps"] and not rep[0.1]["jumps"]


def test_zero_coupling_pipeline_matches():
    rep = run_rigidity_experiment(RigidityConfig(amo_spec(eps=0.0, N=30, x=0.1), K=8, stride=3))
    assert all(r["match"] is not None and r["stage_match"] for r in rep.records)
