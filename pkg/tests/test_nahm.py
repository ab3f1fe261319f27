import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from nilgeo import nahm
from nilgeo.algebra import QI, Quaternion, cyclic_rotation, is_nilpotent, load_fixture
from nilgeo.errors import (
    GridUnderflow,
    NoConvergence,
    NotInCkappa,
    TailDivergence,
    TargetNotNilpotent,
    TargetNotReal,
)

GRID = nahm.make_grid(400, 8.0)


def model_derivative(d, t):
    """d/dt of d / (1 + e^{2t}), written out by hand."""
    e = np.exp(2 * t)
    return (-2 * e / (1 + e) ** 2)[:, None, None] * d[None]


@pytest.fixture(scope="module")
def ua():
    return nahm.u_algebra(load_fixture("sl2R"))


# -- finite differences -------------------------------------------------------


def test_fd_weights_reproduce_classic_stencils():
    assert np.allclose(nahm.fd_weights([-1, 0, 1]), [-0.5, 0, 0.5])
    assert np.allclose(nahm.fd_weights([-2, -1, 0, 1, 2]), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    assert np.allclose(nahm.fd_weights([-1, 0, 1], deriv=2), [1, -2, 1])


@pytest.mark.parametrize("order", [4, 8])
def test_diff_matrix_accuracy(order):
    t = np.linspace(0, 2, 201)
    err = np.abs(nahm.diff_matrix(t, order) @ np.sin(3 * t) - 3 * np.cos(3 * t)).max()
    assert err < (1e-5 if order == 4 else 1e-9)


def test_diff_matrix_rejects_bad_grids():
    with pytest.raises(ValueError):
        nahm.diff_matrix(np.array([0.0, 0.1, 0.3, 0.4, 0.5]), 2)
    with pytest.raises(ValueError):
        nahm.diff_matrix(np.linspace(0, 1, 5), 8)


# -- model instanton ------------------------------------------------------------


def test_model_values_at_zero(sl2r, ua):
    path = nahm.model_instanton(sl2r, np.array([0.0]))
    assert np.allclose(path.values[0], 0.5 * ua.e)


@pytest.mark.parametrize("name", ["sl2R", "su21", "sl3R"])
def test_model_solves_nahm_exactly(name):
    # analytic derivative oracle: the defect vanishes to rounding
    ctx = load_fixture(name)
    u = nahm.u_algebra(ctx)
    d = nahm.kappa_transport(ctx, np.random.default_rng(0).normal(size=u.m))
    vals = nahm.model_values(d, GRID)
    defect = model_derivative(d, GRID) - nahm.nahm_rhs(ctx, vals)
    assert np.abs(defect).max() < 1e-12


@pytest.mark.parametrize("name", ["sl2R", "su21", "sl3R"])
def test_model_residual_fd(name):
    ctx = load_fixture(name)
    res = nahm.nahm_residual(nahm.model_instanton(ctx, GRID))
    assert res.shape == (len(GRID),)
    assert res.max() < 1e-8


def test_residual_of_zero_and_perturbed_paths(sl2r, rng):
    zero = nahm.InstantonPath(GRID, np.zeros((len(GRID), 3, 3)), sl2r)
    assert nahm.nahm_residual(zero).max() == 0.0
    model = nahm.model_instanton(sl2r, GRID)
    noisy = nahm.InstantonPath(GRID, model.values + 1e-3 * np.sin(GRID)[:, None, None], sl2r)
    r = nahm.nahm_residual(noisy).max()
    # linearization: |delta' + 2 delta + O(|D| |delta|)| is a small multiple of 1e-3
    assert 1e-4 < r < 3e-2


def test_ckappa_membership(sl2r, ua):
    with pytest.raises(NotInCkappa):
        nahm.model_instanton(sl2r, GRID, d=2 * ua.e)
    with pytest.raises(NotInCkappa):
        nahm.model_instanton(sl2r, GRID, d=ua.e[[1, 0, 2]])


@pytest.mark.parametrize("name", ["sl2R", "su21", "sl3R"])
def test_model_moments(name):
    ctx = load_fixture(name)
    mt = nahm.moment_extract(nahm.model_instanton(ctx, nahm.make_grid(500, 10.0)), m=5)
    assert np.abs(mt.zeta - 0.5 * nahm.u_algebra(ctx).e).max() < 1e-8
    assert mt.uncertainty < 1e-8


def test_assemble_phi(sl2r, ua):
    mt = nahm.moment_extract(nahm.model_instanton(sl2r, GRID))
    e = [sl2r.matrix(ua.to_g(x)) for x in ua.e]
    assert np.allclose(nahm.assemble_phi(mt, 1).matrix, 0.5 * (e[1] + 1j * e[2]), atol=1e-9)
    assert np.allclose(nahm.assemble_phi(mt, 2).matrix, 0.5 * (e[2] + 1j * e[0]), atol=1e-9)
    for a in (1, 2, 3):
        assert is_nilpotent(nahm.assemble_phi(mt, a), 1e-9)


def test_tail_divergence(sl2r):
    grow = nahm.InstantonPath(GRID, np.exp(GRID)[:, None, None] * np.ones((1, 3, 3)), sl2r)
    with pytest.raises(TailDivergence):
        nahm.moment_extract(grow)


def test_cyclic_rotation_permutes_moments(sl2r):
    path = nahm.model_instanton(sl2r, GRID)
    c = cyclic_rotation()
    rot = nahm.group_act(path, nahm.RotationAction(tau=c))
    z0 = nahm.moment_extract(path).zeta
    assert np.allclose(nahm.moment_extract(rot).zeta, z0[[2, 0, 1]], atol=1e-9)


# -- group actions --------------------------------------------------------------


def test_scale_identity_and_underflow(sl2r):
    path = nahm.model_instanton(sl2r, GRID)
    assert np.array_equal(nahm.group_act(path, 1.0).values, path.values)
    with pytest.raises(GridUnderflow):
        nahm.scale_path(path, np.exp(9.0))
    with pytest.raises(ValueError):
        nahm.scale_path(path, -1.0)


def test_scaled_model_is_model_with_lambda(sl2r):
    path = nahm.model_instanton(sl2r, GRID)
    got = nahm.group_act(path, 1.7).values
    assert np.abs(got - nahm.model_values(nahm.u_algebra(sl2r).e, GRID, 1.7)).max() < 1e-12


lam = st.floats(0.5, 2.0)
quat = st.tuples(*[st.floats(-1, 1)] * 4).filter(lambda v: 0.6 < np.linalg.norm(v) < 1.4)


@settings(max_examples=15, deadline=None)
@given(lam, quat, st.integers(0, 10_000))
def test_equivariance_properties(lam_, h, seed):
    ctx = load_fixture("su21")
    u = nahm.u_algebra(ctx)
    rng = np.random.default_rng(seed)
    path = nahm.model_instanton(ctx, GRID, u_param=rng.normal(size=u.m))
    z0 = nahm.moment_extract(path).zeta
    assert np.abs(nahm.moment_extract(nahm.group_act(path, lam_)).zeta - lam_ * z0).max() < 1e-7
    q = Quaternion(*h)
    got = nahm.moment_extract(nahm.group_act(path, q)).zeta
    assert np.abs(got - nahm.zeta_action(ctx, z0, q)).max() < 1e-7


def test_quaternion_action_is_a_left_action(sl2r):
    path = nahm.model_instanton(sl2r, GRID, u_param=[0.3, -0.2, 0.5])
    p, q = Quaternion(0.9, 0.1, -0.3, 0.2), Quaternion(0.2, 0.8, 0.1, -0.4)
    twice = nahm.group_act(nahm.group_act(path, q), p)
    once = nahm.group_act(path, p * q)
    assert np.abs(twice.values - once.values).max() < 1e-6


def test_unit_quaternion_i_fixes_first_moment(sl2r):
    # conjugation by i fixes i and negates j, k
    path = nahm.model_instanton(sl2r, GRID)
    z = nahm.moment_extract(nahm.group_act(path, QI)).zeta
    z0 = nahm.moment_extract(path).zeta
    assert np.allclose(z, z0 * np.array([1, -1, -1])[:, None], atol=1e-9)


def test_u_action_conjugates_moments(su21, rng):
    u = nahm.u_algebra(su21)
    path = nahm.model_instanton(su21, GRID)
    g = scipy.linalg.expm(su21.matrix(u.to_g(rng.normal(size=u.m))))
    moved = nahm.group_act(path, nahm.RotationAction(u_matrix=g))
    want = np.array([u.from_g(su21.coords(g @ su21.matrix(u.to_g(z)) @ np.linalg.inv(g)))
                     for z in nahm.moment_extract(path).zeta])
    assert np.abs(nahm.moment_extract(moved).zeta - want).max() < 1e-9


def test_model_check_and_equivariance_reports(su21):
    assert nahm.model_check(su21).passed
    rep = nahm.equivariance_check(su21, samples=5)
    assert rep.passed, rep.failures()


# -- serialization ----------------------------------------------------------------


def test_path_json_round_trip(sl2r):
    path = nahm.model_instanton(sl2r, GRID, u_param=[0.1, 0.2, 0.3])
    data = json.loads(json.dumps(path.to_dict()))
    assert set(data) == {"grid", "A", "context", "residuals", "u_param"}
    back = nahm.InstantonPath.from_dict(data)
    assert np.array_equal(back.values, path.values) and back.ctx.name == "sl2R"


def test_solver_config_validation():
    cfg = nahm.SolverConfig.from_dict({"N": 200, "weights": {"target": 2.0}})
    assert cfg.N == 200 and cfg.weights["target"] == 2.0 and cfg.weights["ode"] == 1.0
    assert nahm.SolverConfig.from_dict(cfg.to_dict()) == cfg
    for bad in ({"bogus": 1}, {"N": 4}, {"tol": -1.0}, {"weights": {"x": 1}}, {"init": "guess"}):
        with pytest.raises(ValueError):
            nahm.SolverConfig.from_dict(bad)


# -- solver --------------------------------------------------------------------------


def test_solver_recovers_model(sl2r, ua):
    w = sl2r.from_coords(0.5 * (ua.to_g(ua.e[1]) + 1j * ua.to_g(ua.e[2])))
    path = nahm.solve_bvp(w)
    mt = nahm.moment_extract(path)
    assert np.abs(mt.zeta[0] - 0.5 * ua.e[0]).max() < 1e-6
    assert np.abs(path.values - nahm.model_instanton(sl2r, GRID).values).max() < 1e-6


@pytest.mark.parametrize("lam_", [0.5, 3.0])
def test_solver_scaled_target_gives_scaled_model(sl2r, ua, lam_):
    half = 0.5 * (ua.to_g(ua.e[1]) + 1j * ua.to_g(ua.e[2]))
    path = nahm.solve_bvp(sl2r.from_coords(lam_ * half))
    want = nahm.model_values(ua.e, GRID, lam_)
    assert np.abs(path.values - want).max() < 1e-6


def test_solver_from_noisy_start(sl2r):
    w = sl2r.from_coords(sl2r.base_point)
    path = nahm.solve_bvp(w, nahm.SolverConfig(init_noise=0.2))
    r = path.residuals
    assert max(r["ode"], r["target"], r["boundary"], r["decay"]) < 1e-8
    phi = nahm.assemble_phi(nahm.moment_extract(path), 1)
    assert np.abs(phi.matrix - w.matrix).max() < 1e-8
    assert nahm.nahm_residual(path).max() < 1e-8


def test_solver_is_deterministic(su21):
    w = su21.from_coords(su21.base_point)
    cfg = nahm.SolverConfig(init_noise=0.1, seed=3)
    a, b = nahm.solve_bvp(w, cfg), nahm.solve_bvp(w, cfg)
    assert np.array_equal(a.values, b.values)


def test_solver_nonlinear_target(sl3r):
    x = np.random.default_rng(1).normal(size=(3, 3)) * 0.4
    x -= np.trace(x) / 3 * np.eye(3)
    g = scipy.linalg.expm(x)
    w = sl3r.element(g @ sl3r.matrix(sl3r.base_point) @ np.linalg.inv(g))
    path = nahm.solve_bvp(w)
    mt = nahm.moment_extract(path)
    assert np.abs(nahm.assemble_phi(mt, 1).matrix - w.matrix).max() < 1e-8
    for a in (1, 2, 3):
        assert is_nilpotent(nahm.assemble_phi(mt, a), 1e-8)


def test_solver_rejects_bad_targets(sl2r):
    with pytest.raises(TargetNotNilpotent):
        nahm.solve_bvp(sl2r.element(np.diag([1.0, -1.0])))
    with pytest.raises(TargetNotReal):
        nahm.solve_bvp(sl2r.element(np.array([[1.0, 1j], [1j, -1.0]])))


def test_solver_iteration_cap(sl2r):
    w = sl2r.from_coords(sl2r.base_point)
    with pytest.raises(NoConvergence):
        nahm.solve_bvp(w, nahm.SolverConfig(init_noise=0.5, max_iter=1))


def test_moment_sensitivity_matches_difference_of_solves(sl2r):
    w0 = sl2r.from_coords(sl2r.base_point)
    path = nahm.solve_bvp(w0)
    x = sl2r.split.gR_basis[0]
    dw = sl2r.br(x, w0.coordinates)
    h = 1e-4
    zs = []
    for s in (h, -h):
        w = sl2r.from_coords(scipy.linalg.expm(s * sl2r.ad(x)) @ w0.coordinates)
        zs.append(nahm.moment_extract(nahm.solve_bvp(w)).zeta)
    fd = (zs[0] - zs[1]) / (2 * h)
    assert np.abs(nahm.moment_sensitivity(path, w0, [dw])[0] - fd).max() < 1e-6
