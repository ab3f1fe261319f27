import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import quat_matrix
from nilgeo import flathk
from nilgeo.algebra import SphereLabel, fibonacci_sphere

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(SphereLabel.from_vector)


def test_basis_action():
    # J_2 sends the j-direction to -1 and 1 to j; J_a is left multiplication
    e = np.eye(4)
    assert np.allclose(flathk.apply_J(2, e[0]), e[2])
    assert np.allclose(flathk.apply_J(2, e[2]), -e[0])
    assert np.allclose(flathk.apply_J(1, e[2]), e[3])


def test_left_multiplication_matches_matrix_model(rng):
    # J_a v corresponds to u_a v in the 2x2 matrix model
    units = np.eye(4)[1:]
    for a in (1, 2, 3):
        v = rng.normal(size=4)
        got = quat_matrix(flathk.apply_J(a, v))
        assert np.allclose(got, quat_matrix(units[a - 1]) @ quat_matrix(v))


@pytest.mark.parametrize("n", [1, 2])
def test_quaternion_relations_exact(n):
    j = [flathk.j_matrix(a, n) for a in (1, 2, 3)]
    eye = np.eye(4 * n)
    for a in range(3):
        assert np.abs(j[a] @ j[a] + eye).max() < 1e-12
    assert np.abs(j[0] @ j[1] - j[2]).max() < 1e-12
    assert np.abs(j[1] @ j[2] - j[0]).max() < 1e-12
    assert np.abs(j[2] @ j[0] - j[1]).max() < 1e-12


@settings(max_examples=50)
@given(unit)
def test_sphere_structures(q):
    j = flathk.j_matrix(q, 2)
    w = flathk.omega_matrix(q, 2)
    assert np.abs(j @ j + np.eye(8)).max() < 1e-12
    assert np.abs(w + w.T).max() < 1e-12
    # metric recovered as omega_q(u, J_q v)
    assert np.abs(w @ j - np.eye(8)).max() < 1e-12


def test_holomorphic_form_type(rng):
    u, v = rng.normal(size=(2, 8))
    for a in (1, 2, 3):
        lhs = flathk.holomorphic_form(a, flathk.apply_J(a, u), v)
        assert abs(lhs - 1j * flathk.holomorphic_form(a, u, v)) < 1e-12


def test_potential_and_fields(rng):
    p = rng.normal(size=8)
    assert np.isclose(flathk.potential_rho(p), 0.5 * p @ p)
    eta, *thetas = flathk.cone_fields(p)
    assert np.allclose(eta, p)
    for a, th in enumerate(thetas, start=1):
        assert np.allclose(th, flathk.apply_J(a, p))
        assert abs(th @ p) < 1e-12


def test_fd_ddc_of_flat_potential(rng):
    q = fibonacci_sphere(1, seed=4)[0]
    m = flathk.fd_ddc(flathk.potential_rho, flathk.j_matrix(q, 1), rng.normal(size=4), 1e-4)
    assert np.abs(m - flathk.omega_matrix(q, 1)).max() < 1e-6


def test_flat_vectors_need_length_4n():
    with pytest.raises(ValueError):
        flathk.apply_J(1, np.ones(3))


@pytest.mark.parametrize("n", [1, 2])
def test_verify_cone_axioms(n):
    t = time.time()
    rep = flathk.verify_cone_axioms(samples=100, n=n)
    assert time.time() - t < 10
    assert rep.passed, rep.failures()
    assert abs(rep.notes["flat.weight"] - 2.0) < 1e-8


def test_potential_shift_is_invisible():
    base = flathk.verify_cone_axioms(samples=5)
    shifted = flathk.verify_cone_axioms(samples=5, rho_shift=3.7)
    assert shifted.passed
    assert abs(base["flat.potential"].residual - shifted["flat.potential"].residual) < 1e-6


def test_report_is_deterministic():
    a = flathk.verify_cone_axioms(samples=5, seed=2).to_json()
    b = flathk.verify_cone_axioms(samples=5, seed=2).to_json()
    assert a == b
