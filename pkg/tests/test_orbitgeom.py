import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import commutator
from nilgeo import orbitgeom as og
from nilgeo.algebra import LieElement, Quaternion, is_nilpotent, load_fixture
from nilgeo.errors import JUnavailable, OriginExcluded, SigmaSingular, StepUnderflow, ZeroQuaternion

W0 = np.array([[1.0, -1.0], [1.0, -1.0]])
H = np.diag([1.0, -1.0])


@pytest.fixture(scope="module")
def base(sl2r):
    return og.OrbitPoint.make(sl2r.element(W0))


def test_orbit_point_flags(sl2r):
    assert og.OrbitPoint.make(sl2r.element(W0)).is_real
    assert not og.OrbitPoint.make(sl2r.element(np.array([[1, 1j], [1j, -1]]))).is_real
    with pytest.raises(ValueError):
        og.OrbitPoint.make(sl2r.element(H))


def test_tangent_dimensions(sl2r, su21, sl3r):
    # centralizer of a regular nilpotent in sl(2) is one-dimensional
    e = og.as_point(sl2r.element(np.array([[0.0, 1.0], [0.0, 0.0]])))
    assert len(og.tangent_basis(e, "g")) == 2
    for ctx in (sl2r, su21, sl3r):
        w = og.as_point(ctx.from_coords(ctx.base_point))
        assert len(og.tangent_basis(w, "g_R")) == len(og.tangent_basis(w, "g"))
    # the sl3R fixture sits on the principal orbit: dim 8 - rank 2
    assert len(og.tangent_basis(og.as_point(sl3r.from_coords(sl3r.base_point)), "g")) == 6


def test_tangent_values_match_generators(su21):
    w = og.as_point(su21.from_coords(su21.base_point))
    for t in og.tangent_basis(w, "g_R"):
        assert np.allclose(t.value.matrix, commutator(t.generator.matrix, w.w.matrix))
        assert su21.is_real(t.generator.coordinates)


def test_generator_for_inverts_tangents(su21, rng):
    w = og.as_point(su21.from_coords(su21.base_point))
    x = rng.normal(size=8) @ su21.split.gR_basis
    t = su21.br(x, w.coords)
    y = og.generator_for(w, t)
    assert np.allclose(su21.br(y.coordinates, w.coords), t)


def test_lagrangian_split_at_point_of_p(sl2r):
    # e = (h + i s) / 2 is nilpotent and lies in p
    e = og.as_point(sl2r.element(0.5 * np.array([[1.0, 1j], [1j, -1.0]])))
    assert og.check_tangent_split(e) < 1e-12
    for sub in ("k", "p"):
        ts = og.tangent_basis(e, sub)
        for a in ts:
            for b in ts:
                assert abs(og.kks_form(e, a, b, holomorphic=True)) < 1e-10
    for t in og.tangent_basis(e, "k"):
        v = t.value.coordinates
        assert np.allclose(sl2r.split.proj_p(v), v)


def test_hamiltonian_value(sl2r, base):
    # 4 trace(h w) with w = [[1, -1], [1, -1]]
    assert og.hamiltonian_fn(sl2r.element(H))(base) == pytest.approx(8.0)
    f = og.hamiltonian_fn(sl2r.element(H), "holomorphic")
    assert f(base) == pytest.approx(8.0 + 0j)
    assert og.hamiltonian_fn(sl2r.element(H)).homogeneity_defect(base) < 1e-12
    with pytest.raises(ValueError):
        og.hamiltonian_fn(sl2r.element(H), "weird")


def test_fd_derivative_of_linear_field(sl2r, base, rng):
    z = LieElement(sl2r, rng.normal(size=3))
    f = og.hamiltonian_fn(z)
    for t in og.tangent_basis(base):
        exact = sl2r.kf(z.coordinates, t.value.coordinates).real
        assert og.fd_derivative(f, base, t, 1e-4, order=4) == pytest.approx(exact, abs=1e-9)
        d, err = og.fd_derivative_with_error(f, base, t, 1e-3, order=2)
        assert abs(d - exact) <= 2 * err + 1e-12


def test_fd_derivative_order_two(sl2r, base):
    z = LieElement(sl2r, np.array([0.3, -1.1, 0.7]))
    f = og.hamiltonian_fn(z)
    # a semisimple generator, so the adjoint curve is not polynomial in t
    t = og.OrbitTangent.at(base, sl2r.element(H + np.array([[0.0, 0.4], [0.0, 0.0]])))
    exact = sl2r.kf(z.coordinates, t.value.coordinates).real
    hs = np.array([4e-2, 2e-2, 1e-2])
    errs = [abs(og.fd_derivative(f, base, t, h) - exact) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.2


def test_fd_derivative_trivial_cases(sl2r, base):
    const = og.ScalarField(lambda c: 3.0, 0.0)
    t = og.tangent_basis(base)[0]
    assert og.fd_derivative(const, base, t) == 0.0
    # Euler identity for a degree-one field along w itself
    f = og.hamiltonian_fn(sl2r.element(H))
    euler = og.generator_for(base, base.coords)
    assert og.fd_derivative(f, base, euler, 1e-4, 4) == pytest.approx(f(base), rel=1e-9)
    with pytest.raises(StepUnderflow):
        og.fd_derivative(f, base, t, h=1e-12)


def test_sigma_on_fundamental_fields(sl2r, base, rng):
    x, y = (LieElement(sl2r, rng.normal(size=3)) for _ in range(2))
    u, v = og.OrbitTangent.at(base, x), og.OrbitTangent.at(base, y)
    want = 4 * np.trace(base.w.matrix @ commutator(x.matrix, y.matrix)).real
    assert og.fd_two_form("sigma", base, u, v) == pytest.approx(want)
    assert og.fd_two_form("sigma", base, u, u) == pytest.approx(0.0, abs=1e-12)
    assert og.fd_two_form("Sigma", base, u, v) == pytest.approx(want)
    with pytest.raises(JUnavailable):
        og.fd_two_form("ddc", base, u, v, field=og.hamiltonian_fn(x))
    with pytest.raises(ValueError):
        og.fd_two_form("tau", base, u, v)


def test_moment_identity(su21, rng):
    # xi = -[x, w] is the Hamiltonian field of phi^x
    w = og.as_point(su21.from_coords(su21.base_point))
    x = LieElement(su21, rng.normal(size=8) @ su21.split.gR_basis)
    f = og.hamiltonian_fn(x)
    xi = og.OrbitTangent.at(w, -1.0 * x)
    for v in og.tangent_basis(w):
        assert abs(og.fd_derivative(f, w, v, 1e-4, 4) + og.kks_form(w, xi, v)) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_poisson_homomorphism(c):
    ctx = load_fixture("sl2R")
    w = og.as_point(ctx.element(W0))
    x, y = LieElement(ctx, np.asarray(c[:3], dtype=complex)), LieElement(ctx, np.asarray(c[3:], dtype=complex))
    got = og.fd_poisson(og.hamiltonian_fn(x), og.hamiltonian_fn(y), w, 1e-4, order=4)
    want = og.hamiltonian_fn(LieElement(ctx, ctx.br(x.coordinates, y.coordinates)))(w)
    assert abs(got - want) < 1e-6 * max(1.0, abs(want))


def test_poisson_self_and_singular(sl2r, base):
    f = og.hamiltonian_fn(sl2r.element(H))
    assert abs(og.fd_poisson(f, f, base)) < 1e-9
    t = og.tangent_basis(base)[0]
    with pytest.raises(SigmaSingular):
        og.fd_poisson(f, f, base, basis=[t, t])


def test_kks_suite(sl3r):
    rep = og.kks_check(sl3r, samples=20)
    assert rep.passed, rep.failures()


# -- fixtures ---------------------------------------------------------------------


def test_sl2_cover_example():
    assert np.allclose(og.sl2_cover(Quaternion(1, 0, 1, 0)).matrix, W0)
    with pytest.raises(ZeroQuaternion):
        og.sl2_cover(Quaternion())


coef = st.floats(-3, 3, allow_nan=False)


@given(st.tuples(coef, coef, coef, coef).filter(lambda q: np.linalg.norm(q) > 1e-2), st.floats(0.1, 3))
def test_sl2_cover_properties(q, lam):
    q = Quaternion(*q)
    m = og.sl2_cover(q).matrix
    assert np.allclose(og.sl2_cover(-q).matrix, m)
    assert np.abs(m @ m).max() < 1e-9 * max(1.0, np.abs(m).max() ** 2)
    assert np.allclose(og.sl2_cover(q * lam).matrix, lam**2 * m)


@given(coef, coef, coef, coef)
def test_sl2_cover_real_locus(a, b, c, d):
    if np.hypot(a, c) < 1e-3:
        return
    assert not np.abs(og.sl2_cover(Quaternion(a, 0, c, 0)).matrix.imag).any()
    if abs(b) > 1e-3 or abs(d) > 1e-3:
        m = og.sl2_cover(Quaternion(a, b, c, d)).matrix
        assert np.abs(m.imag).max() > 0


def test_cone_fixture():
    assert np.allclose(og.cone_fixture(3, 4), [3, 4, 5])
    assert np.allclose(og.cone_fixture(1, 0), [1, 0, 1])
    assert og.cone_projection(og.cone_fixture(-2.5, 0.3)) == complex(-2.5, 0.3)
    with pytest.raises(OriginExcluded):
        og.cone_fixture(0, 0)


def test_fixture_suite():
    rep = og.fixture_check(samples=200)
    assert rep.passed, rep.failures()


def test_base_component_and_sampling(sl2r):
    pts = og.sample_orbit(sl2r, 20, seed=1)
    for p in pts:
        assert p.is_real and is_nilpotent(p.w, 1e-10)
        assert og.in_base_component(p.w)
    assert not og.in_base_component(-1.0 * sl2r.element(W0))
    assert not og.in_base_component(sl2r.element(H))
