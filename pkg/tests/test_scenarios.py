import json

import numpy as np
import pytest

from algopt.core import so3_structure
from algopt.errors import ConfigError
from algopt.scenarios import (WongFixture, build_chart_from_config, default_config,
                              run_scenario, scenario_classical,
                              scenario_so3_bang_bang, scenario_wong,
                              validate_chart, validate_config)


# ---------------------------------------------------------------------------
# so(3) bang-bang
# ---------------------------------------------------------------------------

def test_so3_default_pipeline():
    r = scenario_so3_bang_bang([1, 0, 0], [0, 1, 0], [0.0, 1.0, 0.2],
                               horizon=10.0, step=1e-3)
    assert r.audit.passed
    assert r.switching_violations == 0
    assert not r.singular
    assert r.audit.h_drift < 1e-6
    assert r.casimir_drift < 1e-8
    assert r.costate_residual < 1e-6
    assert len(r.flow.switch_times) >= 2


def test_so3_monotone_switching_function_never_switches():
    # b parallel to a: <z, b> is conserved, so the control never changes sign
    r = scenario_so3_bang_bang([0, 0, 1], [0, 0, 1], [0.3, 0.2, 0.5],
                               horizon=5.0, step=1e-3)
    assert len(r.flow.switch_times) == 0
    assert np.all(r.flow.u_nodes[:, 0] == 1.0)
    assert r.audit.passed


def test_so3_zero_axis_is_permanently_singular():
    r = scenario_so3_bang_bang([1, 0, 0], [0, 0, 0], [0.0, 0.0, 1.0],
                               horizon=1.0, step=1e-2)
    assert r.singular
    assert len(r.flow.tie_times) > 0


def test_so3_abnormal_multiplier_mode():
    r = scenario_so3_bang_bang([1, 0, 0], [0, 1, 0], [0.0, 1.0, 0.0], z0=0.0,
                               horizon=2.0, step=1e-3, tol=1e-5)
    assert r.flow.costate.z0 == 0.0
    assert r.switching_violations == 0


# ---------------------------------------------------------------------------
# Wong pipeline
# ---------------------------------------------------------------------------

def test_wong_default_residuals(wong_fixture):
    r = scenario_wong(wong_fixture, [0.2, -0.1], [0.8, 0.5], [0.3, -0.2, 0.4],
                      horizon=1.0, step=1e-3)
    assert r.momentum_residual < 1e-5
    assert r.internal_residual < 1e-5
    assert r.speed_drift < 1e-6
    assert r.curvature_antisymmetry < 1e-10
    assert r.audit.passed


def test_wong_nonconstant_metric_residuals():
    fixture = WongFixture(
        so3_structure(),
        connection_const=np.array([[0.0, 0.1], [0.1, 0.0], [0.0, 0.0]]),
        connection_linear=np.array([[[0.3, 0.0], [0.0, -0.2]],
                                    [[0.0, 0.4], [0.1, 0.0]],
                                    [[-0.2, 0.1], [0.3, 0.0]]]),
        metric_const=np.eye(2),
        metric_linear=0.1 * np.array([[[1.0, 0.0], [0.0, 0.5]],
                                      [[0.0, 0.5], [1.0, 0.0]]]),
    )
    r = scenario_wong(fixture, [0.2, -0.1], [0.8, 0.5], [0.3, -0.2, 0.4],
                      horizon=1.0, step=1e-3)
    assert r.momentum_residual < 1e-5
    assert r.internal_residual < 1e-5


def test_wong_flat_connection_gives_straight_lines():
    flat = WongFixture(so3_structure(), connection_const=np.zeros((3, 2)))
    x0 = np.array([0.1, 0.2])
    p0 = np.array([0.6, -0.4])
    r = scenario_wong(flat, x0, p0, [0.3, -0.2, 0.4], horizon=1.0, step=1e-3)
    ts = r.flow.path.grid.nodes
    straight = x0[None, :] + ts[:, None] * p0[None, :]
    assert np.abs(r.flow.path.base - straight).max() < 1e-8
    assert np.abs(r.flow.costate.z[:, 2:] - np.array([0.3, -0.2, 0.4])).max() < 1e-10
    assert r.momentum_residual < 1e-8


def test_wong_singular_metric_rejected():
    fixture = WongFixture(so3_structure(), connection_const=np.zeros((3, 2)),
                          metric_const=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        scenario_wong(fixture, [0.0, 0.0], [1.0, 0.0], [0.0, 0.0, 1.0])


def test_wong_curvature_antisymmetry_random(rng):
    fixture = WongFixture(so3_structure(),
                          connection_const=rng.normal(size=(3, 2)),
                          connection_linear=rng.normal(size=(3, 2, 2)))
    pts = rng.uniform(-1, 1, size=(50, 2))
    assert fixture.curvature_antisymmetry(pts) < 1e-12


# ---------------------------------------------------------------------------
# classical reduction
# ---------------------------------------------------------------------------

def test_classical_lq_matches_oracle():
    r = scenario_classical(z_init=0.5, horizon=1.0, step=1e-3)
    assert r.closed_form_error < 1e-6
    assert r.reduction_residual < 1e-12
    assert r.audit.h_drift < 1e-8
    assert r.audit.passed


def test_classical_reduction_identity_nontrivial_system(rng):
    from algopt.control import ControlSystem, FiniteSet
    from algopt.core import tangent_bundle
    from algopt.scenarios import classical_reduction_residual

    tb = tangent_bundle(2)

    def f(x, u):
        return np.array([np.sin(x[1]) + u[0], x[0] ** 2 - u[0]])

    sys = ControlSystem(tb, f, lambda x, u: float(np.cos(x[0]) * x[1]),
                        FiniteSet(([0.0], [1.0])))
    samples = [(rng.normal(size=2), np.array([float(rng.integers(0, 2))]),
                rng.normal(size=2), -float(rng.random()))
               for _ in range(25)]
    assert classical_reduction_residual(sys, samples) < 1e-12


# ---------------------------------------------------------------------------
# config handling and the runner
# ---------------------------------------------------------------------------

def test_validate_config_rejects_unknown_scenario():
    with pytest.raises(ConfigError) as err:
        validate_config({"scenario": "nope"})
    assert "scenario" in err.value.path


def test_validate_config_names_bad_field():
    cfg = default_config("so3-bang-bang")
    cfg["z_init"] = [1.0, 2.0]     # wrong length
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert err.value.path == "z_init"


def test_validate_config_checks_solver_step():
    cfg = default_config("so3-bang-bang")
    cfg["solver"] = {"step": -1.0}
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert err.value.path == "solver.step"


def test_validate_config_inconsistent_wong_table():
    cfg = default_config("wong-so3-r2")
    cfg["params"] = dict(cfg["params"], connection_const=[[0.0, 0.1]])
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert err.value.path == "params.connection_const"


def test_build_chart_from_config_variants():
    chart = build_chart_from_config({"kind": "tangent", "dim": 2})
    assert chart.base_dim == 2
    chart = build_chart_from_config({"kind": "lie-algebra",
                                     "table": so3_structure().tolist()})
    assert chart.base_dim == 0 and chart.fiber_dim == 3
    with pytest.raises(ConfigError):
        build_chart_from_config({"kind": "mystery"})


def test_build_chart_affine_anchor_config():
    # anchor rho(x) = [1, x] with the repairing constant bracket: passes the
    # axioms; the same anchor with a zero table fails the morphism check
    spec = {
        "kind": "affine-anchor",
        "anchor_const": [[1.0, 0.0]],
        "anchor_linear": [[[0.0], [1.0]]],
        "table": [[[0.0, 1.0], [-1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
    }
    report = validate_chart({"scenario": "custom", "chart": spec})
    assert report["passed"]
    spec_zero = dict(spec, table=np.zeros((2, 2, 2)).tolist())
    report = validate_chart({"scenario": "custom", "chart": spec_zero})
    assert not report["passed"]


def test_run_scenario_cone_samples(tmp_path):
    cfg = default_config("so3-bang-bang")
    cfg["horizon"] = 3.0
    cfg["solver"] = dict(cfg["solver"], symbol_samples=100)
    report = run_scenario(cfg, tmp_path)
    names = [c["name"] for c in report["checks"]]
    assert "cone_support" in names
    assert report["passed"]
    assert (tmp_path / "switches.csv").exists()


def test_validate_chart_custom_scenario():
    report = validate_chart({"scenario": "custom",
                             "chart": {"kind": "lie-algebra",
                                       "table": so3_structure().tolist()}})
    assert report["passed"]


def test_run_scenario_writes_artifacts(tmp_path):
    cfg = default_config("classical-tm-lq")
    report = run_scenario(cfg, tmp_path)
    assert report["passed"]
    for name in ("trajectory.csv", "costate.csv", "audit.json", "invariants.json"):
        assert (tmp_path / name).exists(), name
    on_disk = json.loads((tmp_path / "invariants.json").read_text())
    assert on_disk["schema_version"] == 1
    assert all(c["passed"] for c in on_disk["checks"])


def test_run_scenario_is_bit_reproducible(tmp_path):
    cfg = default_config("so3-bang-bang")
    cfg["horizon"] = 2.0
    run_scenario(cfg, tmp_path / "one")
    run_scenario(cfg, tmp_path / "two")
    for name in ("trajectory.csv", "costate.csv", "invariants.json"):
        assert ((tmp_path / "one" / name).read_bytes()
                == (tmp_path / "two" / name).read_bytes()), name
