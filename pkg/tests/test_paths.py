import numpy as np
import pytest

from algopt.core import tangent_bundle
from algopt.errors import AdmissibilityWarning, CompositionError
from algopt.numerics import TimeGrid
from algopt.paths import (EPath, HomotopyField, admissibility_residual,
                          bracket_bound, compose_paths,
                          generate_infinitesimal_homotopy, homotopy_residual,
                          null_path, reparameterize_unit, shrink_homotopy)
from conftest import scaled_anchor_pair, skew_hat


def line_path(t0=0.0, t1=1.0, step=1e-2, speed=1.0, x_start=0.0):
    grid = TimeGrid(t0, t1, step)
    ts = grid.nodes
    base = (x_start + (ts - t0))[:, None]
    fiber = np.full((len(ts), 1), speed)
    return EPath(grid, base, fiber)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

def test_admissibility_zero_anchor(so3, rng):
    grid = TimeGrid(0.0, 1.0, 0.05)
    fiber = rng.normal(size=(grid.n_nodes, 3))
    p = EPath(grid, np.zeros((grid.n_nodes, 0)), fiber)
    assert admissibility_residual(so3, p) == 0.0


def test_admissibility_unit_speed():
    tb = tangent_bundle(1)
    assert admissibility_residual(tb, line_path(step=1e-3)) < 1e-8


def test_admissibility_wrong_fiber():
    tb = tangent_bundle(1)
    p = line_path(step=1e-2)
    wrong = EPath(p.grid, p.base, 2.0 * p.fiber)
    assert abs(admissibility_residual(tb, wrong) - 1.0) < 1e-9


def test_admissibility_needs_three_nodes():
    tb = tangent_bundle(1)
    grid = TimeGrid.from_nodes([0.0, 1.0])
    p = EPath(grid, np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        admissibility_residual(tb, p)


# ---------------------------------------------------------------------------
# composition and reparameterization
# ---------------------------------------------------------------------------

def test_compose_with_null_path():
    tb = tangent_bundle(1)
    p = line_path(0.0, 1.0, 0.1)
    q = null_path(tb, p.base[-1], 0.0, 0.5, 0.1)
    out = compose_paths(p, q)
    assert out.grid.t1 == 1.5
    assert 1.0 in out.grid.breakpoints
    n_p = p.grid.n_nodes
    assert np.array_equal(out.fiber[:n_p - 1], p.fiber[:-1])
    assert np.all(out.fiber[n_p - 1:] == 0.0)
    assert np.all(out.base[n_p - 1:] == p.base[-1])


def test_compose_unit_segments():
    tb = tangent_bundle(1)
    p = line_path(0.0, 1.0, 0.1, 1.0, 0.0)
    q = line_path(0.0, 1.0, 0.1, 1.0, 1.0)
    out = compose_paths(p, q)
    assert out.grid.t0 == 0.0 and out.grid.t1 == 2.0
    assert abs(out.base[-1, 0] - 2.0) < 1e-12
    assert admissibility_residual(tb, out) < 1e-8


def test_compose_endpoint_mismatch():
    p = line_path(0.0, 1.0, 0.1, 1.0, 0.0)
    q = line_path(0.0, 1.0, 0.1, 1.0, 1.5)
    with pytest.raises(CompositionError) as err:
        compose_paths(p, q)
    assert abs(err.value.gap - 0.5) < 1e-12


def test_reparameterize_unit_interval_is_identity():
    p = line_path(0.0, 1.0, 0.1)
    out = reparameterize_unit(p)
    assert np.array_equal(out.base, p.base)
    assert np.array_equal(out.fiber, p.fiber)
    assert np.array_equal(out.grid.nodes, p.grid.nodes)


def test_reparameterize_scales_fiber():
    grid = TimeGrid(0.0, 2.0, 0.1)
    v = np.array([0.5, -1.0, 2.0])
    p = EPath(grid, np.zeros((grid.n_nodes, 0)), np.tile(v, (grid.n_nodes, 1)))
    out = reparameterize_unit(p)
    assert out.grid.t0 == 0.0 and out.grid.t1 == 1.0
    assert np.allclose(out.fiber, 2.0 * v)


def test_reparameterize_preserves_admissibility():
    tb = tangent_bundle(1)
    grid = TimeGrid(0.0, 2.0, 1e-3)
    ts = grid.nodes
    p = EPath(grid, (ts ** 2)[:, None], (2 * ts)[:, None])
    before = admissibility_residual(tb, p)
    q = compose_paths(null_path(tb, np.zeros(1), 0.0, 0.5, 1e-3), p)
    after = admissibility_residual(tb, reparameterize_unit(q))
    assert after <= before + 5 * grid.step


# ---------------------------------------------------------------------------
# homotopy residual and generation
# ---------------------------------------------------------------------------

def constant_field(alg, a_vec, T=41, E=17, base_point=None):
    grid = TimeGrid(0.0, 1.0, 1.0 / (T - 1))
    eps = np.linspace(0.0, 1.0, E)
    n = alg.base_dim
    base = np.tile(np.zeros(n) if base_point is None else base_point, (T, E, 1))
    a = np.tile(np.asarray(a_vec, dtype=float), (T, E, 1))
    return HomotopyField(grid, eps, base, a)


def test_residual_zero_for_eps_independent_pair(so3):
    field = constant_field(so3, [0.4, -0.2, 0.1])
    filled = HomotopyField(field.t_grid, field.eps_nodes, field.base, field.a,
                           np.zeros_like(field.a))
    rep = homotopy_residual(so3, filled)
    assert rep.equation_residual == 0.0
    assert rep.max_residual == 0.0


def test_residual_detects_perturbation(so3):
    v = np.array([0.4, -0.2, 0.1])
    field = constant_field(so3, v)
    gen, _ = generate_infinitesimal_homotopy(so3, field, np.zeros((17, 3)))
    base_res = homotopy_residual(so3, gen).equation_residual
    bumped = HomotopyField(gen.t_grid, gen.eps_nodes, gen.base, gen.a,
                           gen.b + np.array([1.0, 0.0, 0.0]))
    col = so3.bracket(np.zeros(0), np.array([1.0, 0.0, 0.0]), v)
    lower_bound = np.abs(col).max() - base_res - 1e-9
    assert homotopy_residual(so3, bumped).equation_residual >= lower_bound


def test_generate_zero_source(so3):
    field = constant_field(so3, [0.0, 0.0, 0.0])
    out, chi = generate_infinitesimal_homotopy(so3, field, np.zeros((17, 3)))
    assert np.all(out.b == 0.0)
    assert chi == 0.0


def test_generate_so3_rotation_against_expm(so3):
    from scipy.linalg import expm

    v = np.array([0.3, -0.5, 0.8])
    w = np.array([1.0, 0.2, -0.4])
    field = constant_field(so3, v, T=201, E=9)
    out, chi = generate_infinitesimal_homotopy(so3, field, np.tile(w, (9, 1)))
    expected = expm(-skew_hat(v)) @ w
    assert np.abs(out.b[-1, 0] - expected).max() < 1e-10
    norms = np.linalg.norm(out.b[:, 0, :], axis=1)
    assert np.abs(norms - norms[0]).max() < 1e-10
    assert chi == 0.0


def test_generate_classical_case_matches_eps_derivative():
    tb = tangent_bundle(1)
    T, E = 101, 21
    grid = TimeGrid(0.0, 1.0, 1.0 / (T - 1))
    eps = np.linspace(0.0, 1.0, E)
    ts = grid.nodes
    # x(t, eps) = sin(t) (1 + eps^2): quadratic in eps, so eps-differences are exact
    base = (np.sin(ts)[:, None] * (1.0 + eps[None, :] ** 2))[:, :, None]
    a = (np.cos(ts)[:, None] * (1.0 + eps[None, :] ** 2))[:, :, None]
    field = HomotopyField(grid, eps, base, a)
    b0 = (np.sin(0.0) * 2.0 * eps)[:, None]
    out, chi = generate_infinitesimal_homotopy(tb, field, b0)
    b_exact = (np.sin(ts)[:, None] * 2.0 * eps[None, :])[:, :, None]
    step = grid.step
    assert np.abs(out.b - b_exact).max() < 10 * step ** 2
    assert chi < 10 * step ** 2


def test_generate_is_deterministic(so3):
    field = constant_field(so3, [0.2, 0.7, -0.1])
    b0 = np.tile([0.5, 0.0, 0.3], (17, 1))
    out1, chi1 = generate_infinitesimal_homotopy(so3, field, b0)
    out2, chi2 = generate_infinitesimal_homotopy(so3, field, b0)
    assert np.array_equal(out1.b, out2.b)
    assert chi1 == chi2


def test_generate_gronwall_bound(so3):
    v = np.array([0.3, -0.5, 0.8])
    field = constant_field(so3, v, T=101, E=9)
    b0 = np.tile([0.5, 0.1, -0.2], (9, 1))
    delta = 1e-3
    out1, _ = generate_infinitesimal_homotopy(so3, field, b0)
    out2, _ = generate_infinitesimal_homotopy(so3, field, b0 + delta)
    diff = np.abs(out2.b - out1.b).max()
    c_norm = bracket_bound(so3, np.zeros((1, 0)))
    a_max = float(np.linalg.norm(v))
    bound = delta * np.sqrt(3) * np.exp(c_norm * a_max * 1.0)
    assert diff <= bound


def test_chi_monitor_flags_non_al_chart():
    broken, fixed = scaled_anchor_pair()
    T, E = 201, 17
    grid = TimeGrid(0.0, 1.0, 1.0 / (T - 1))
    eps = np.linspace(0.0, 1.0, E)
    ts = grid.nodes
    base = ((1.0 + eps)[None, :] * np.exp(ts)[:, None])[:, :, None]
    a = np.zeros((T, E, 2))
    a[:, :, 1] = 1.0
    b0 = np.zeros((E, 2))
    b0[:, 0] = 1.0
    field = HomotopyField(grid, eps, base, a)
    _, chi_good = generate_infinitesimal_homotopy(fixed, field, b0)
    with pytest.warns(AdmissibilityWarning):
        _, chi_bad = generate_infinitesimal_homotopy(broken, field, b0)
    assert chi_good < 1e-6
    assert chi_bad > 1e-2


# ---------------------------------------------------------------------------
# shrinking
# ---------------------------------------------------------------------------

def smooth_path(step=1e-3):
    tb = tangent_bundle(2)
    grid = TimeGrid(0.0, 1.0, step)
    ts = grid.nodes
    base = np.column_stack([np.sin(ts), ts ** 2])
    fiber = np.column_stack([np.cos(ts), 2 * ts])
    return tb, EPath(grid, base, fiber)


def test_shrink_slices():
    tb, p = smooth_path()
    field = shrink_homotopy(tb, p, n_t=33, n_eps=33)
    assert np.abs(field.a[:, 0, :]).max() == 0.0          # eps = 0 slice vanishes
    assert np.allclose(field.a[:, -1, :],                 # eps = 1 recovers a
                       p.fiber_at(field.t_grid.nodes), atol=1e-12)
    assert np.abs(field.b[0, :, :]).max() == 0.0          # initial deformation null
    assert np.allclose(field.b[-1, :, :],
                       p.fiber_at(field.eps_nodes), atol=1e-12)


def test_shrink_requires_unit_interval():
    tb = tangent_bundle(1)
    p = EPath(TimeGrid(0.0, 2.0, 0.1), np.zeros((21, 1)), np.zeros((21, 1)))
    with pytest.raises(ValueError):
        shrink_homotopy(tb, p)


def test_shrink_residual_halves_under_refinement():
    tb, p = smooth_path()
    coarse = homotopy_residual(tb, shrink_homotopy(tb, p, 33, 33)).equation_residual
    fine = homotopy_residual(tb, shrink_homotopy(tb, p, 65, 65)).equation_residual
    assert coarse / fine >= 2.0
