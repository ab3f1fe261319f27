"""Flat hyperkaehler model on H^n.

Coordinates are ``x^r_s`` with ``r`` in 0..3 and ``s`` in 1..n, stored in a
flat vector at index ``4 (s - 1) + r``.  The complex structures ``J_a`` act
as left multiplication by the imaginary units, the metric is Euclidean and
all tensors have constant coefficients.  Finite differences only enter the
verification routines, which reuse the same machinery as the curved case and
so calibrate it against exact answers.
"""

from __future__ import annotations

import numpy as np

from .algebra import (
    Quaternion,
    SphereLabel,
    cyclic_triple,
    epsilon,
    fibonacci_sphere,
    quat_mul,
)
from .report import VerificationReport


def _left_mult(q: Quaternion) -> np.ndarray:
    cols = [quat_mul(q, Quaternion(*e)).as_array() for e in np.eye(4)]
    return np.column_stack(cols)


def _right_mult(q: Quaternion) -> np.ndarray:
    cols = [quat_mul(Quaternion(*e), q).as_array() for e in np.eye(4)]
    return np.column_stack(cols)


_UNITS = [Quaternion(0, 1, 0, 0), Quaternion(0, 0, 1, 0), Quaternion(0, 0, 0, 1)]


def _label_vec(a) -> np.ndarray:
    if isinstance(a, SphereLabel):
        return a.as_array()
    if a in (1, 2, 3):
        return np.eye(3)[a - 1]
    return np.asarray(a, dtype=float)


def j_matrix(a, n: int = 1) -> np.ndarray:
    """Matrix of ``J_a`` (index 1..3) or ``J_q`` (SphereLabel) on H^n."""
    q = _label_vec(a)
    block = sum(c * _left_mult(u) for c, u in zip(q, _UNITS))
    return np.kron(np.eye(n), block)


def _omega_block(a: int) -> np.ndarray:
    _, b, c = cyclic_triple(a)
    m = np.zeros((4, 4))
    m[0, a], m[a, 0] = 1.0, -1.0
    m[b, c], m[c, b] = 1.0, -1.0
    return m


def omega_matrix(a, n: int = 1) -> np.ndarray:
    """Matrix W with ``omega(u, v) = u^T W v``."""
    q = _label_vec(a)
    block = sum(c * _omega_block(i + 1) for i, c in enumerate(q))
    return np.kron(np.eye(n), block)


def metric_matrix(n: int = 1) -> np.ndarray:
    return np.eye(4 * n)


def _n_of(v) -> int:
    size = np.shape(v)[-1]
    if size % 4:
        raise ValueError("flat vectors have length 4n")
    return size // 4


def apply_J(a, v) -> np.ndarray:
    """Apply ``J_a`` (or ``J_q`` for a sphere label) to a tangent vector."""
    v = np.asarray(v, dtype=float)
    return v @ j_matrix(a, _n_of(v)).T


def omega(a, u, v) -> float:
    """Kaehler form ``omega_a(u, v)``; ``a`` may be an index or a SphereLabel."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    return float(u @ omega_matrix(a, _n_of(u)) @ v)


def holomorphic_form(a: int, u, v) -> complex:
    """``Omega_a = omega_b + i omega_c`` for (abc) cyclic."""
    _, b, c = cyclic_triple(a)
    return complex(omega(b, u, v), omega(c, u, v))


def potential_rho(p) -> float:
    """Hyperkaehler potential ``|p|^2 / 2``."""
    p = np.asarray(p, dtype=float)
    return 0.5 * np.sum(p * p, axis=-1)


def cone_fields(p):
    """Euler field and the three rotation fields ``theta_a = J_a eta`` at p."""
    p = np.asarray(p, dtype=float)
    return (p.copy(),) + tuple(apply_J(a, p) for a in (1, 2, 3))


# ---------------------------------------------------------------------------
# Finite-difference tensor calculus on R^N
# ---------------------------------------------------------------------------


def fd_jacobian(f, p, h: float) -> np.ndarray:
    """Central-difference Jacobian ``D[i, k] = d f_i / d x_k`` (f vectorized)."""
    p = np.asarray(p, dtype=float)
    e = np.eye(p.size) * h
    vals = f(np.vstack([p + e, p - e]))
    vals = np.asarray(vals).reshape(2 * p.size, -1)
    d = (vals[: p.size] - vals[p.size:]) / (2 * h)
    return d.T


def fd_gradient(f, p, h: float) -> np.ndarray:
    return fd_jacobian(lambda x: np.asarray(f(x))[:, None], p, h)[0]


def fd_directional(f, p, x, h: float):
    """Central difference of a tensor field f along the vector x."""
    return (f(p + h * x) - f(p - h * x)) / (2 * h)


def lie_derivative_2tensor(field, tensor, p, h: float) -> np.ndarray:
    """``L_X T`` for a covariant 2-tensor field given as a matrix-valued map."""
    x = field(p)
    dx = fd_jacobian(lambda q: np.array([field(r) for r in q]), p, h)
    t = tensor(p)
    return fd_directional(tensor, p, x, h) + dx.T @ t + t @ dx


def lie_derivative_endo(field, endo, p, h: float) -> np.ndarray:
    """``L_X A`` for a (1,1)-tensor field A."""
    x = field(p)
    dx = fd_jacobian(lambda q: np.array([field(r) for r in q]), p, h)
    a = endo(p)
    return fd_directional(endo, p, x, h) - dx @ a + a @ dx


def fd_ddc(rho, jmat, p, h: float) -> np.ndarray:
    """``d d^c rho`` with ``d^c rho(v) = -dρ(J v) / 2``, by nested differences.

    Returns the matrix M with ``dd^c rho(u, v) = u^T M v``.
    """
    def alpha(q):
        q = np.atleast_2d(q)
        g = np.array([fd_gradient(rho, r, h) for r in q])
        return -0.5 * g @ jmat

    da = fd_jacobian(alpha, p, h)  # da[j, i] = d_i alpha_j
    return da.T - da


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _exact_checks(rep: VerificationReport, n: int, labels, rng) -> None:
    eye = np.eye(4 * n)
    jm = [j_matrix(a, n) for a in (1, 2, 3)]
    om = [omega_matrix(a, n) for a in (1, 2, 3)]
    res = 0.0
    for a in range(3):
        res = max(res, np.abs(jm[a] @ jm[a] + eye).max())
        for b in range(3):
            if a != b:
                c = 3 - a - b
                res = max(res, np.abs(jm[a] @ jm[b] - epsilon(a + 1, b + 1, c + 1) * jm[c]).max())
    rep.add("flat.quaternion", res, 1e-12)
    rep.add("flat.metric", max(np.abs(om[a] @ jm[a] - eye).max() for a in range(3)), 1e-12)
    for q in labels:
        jq, oq = j_matrix(q, n), omega_matrix(q, n)
        rep.add("flat.quaternion/label", np.abs(jq @ jq + eye).max(), 1e-12)
        rep.add("flat.metric/label", np.abs(oq @ jq - eye).max(), 1e-12)
    u, v = rng.normal(size=(2, 4 * n))
    res = 0.0
    for a in (1, 2, 3):
        for b in (1, 2, 3):
            for c in (1, 2, 3):
                if epsilon(a, b, c):
                    lhs = omega(c, u, v)
                    rhs = omega(a, apply_J(b, u), v) * epsilon(a, b, c)
                    res = max(res, abs(lhs - rhs))
        res_h = abs(holomorphic_form(a, apply_J(a, u), v) - 1j * holomorphic_form(a, u, v))
        rep.add("flat.holomorphic", res_h, 1e-12)
    rep.add("flat.recover", res, 1e-12)
    if n == 1:
        q = Quaternion(*rng.normal(size=4))
        r = _right_mult(q * (1.0 / q.norm()))
        res = max(np.abs(r @ j - j @ r).max() for j in jm)
        res = max(res, np.abs(r.T @ r - eye).max())
        rep.add("flat.rightmult", res, 1e-12)
    t = 1.7
    rep.add(
        "flat.homogeneity",
        max(abs(omega(q, t * u, t * v) - t**2 * omega(q, u, v)) for q in labels[:5]),
        1e-12,
    )


def verify_cone_axioms(
    samples: int = 100,
    h: float = 1e-4,
    n: int = 1,
    labels: int = 20,
    seed: int = 0,
    tol: float = 1e-6,
    rho_shift: float = 0.0,
) -> VerificationReport:
    """Check the hyperkaehler cone axioms of H^n by finite differences.

    Args:
        samples: Number of random base points.
        h: Finite-difference step.
        n: Quaternionic dimension.
        labels: Number of Fibonacci sphere labels used for ``J_q``.
        seed: Seed for sample points.
        tol: Tolerance for the differenced identities.
        rho_shift: Constant added to the potential (must not matter).

    Returns:
        Report whose ``flat.weight`` note holds the fitted cone weight.
    """
    rng = np.random.default_rng(seed)
    rep = VerificationReport(f"flat-H{n}")
    qs = fibonacci_sphere(labels, seed=seed)
    _exact_checks(rep, n, qs, rng)

    jm = [j_matrix(a, n) for a in (1, 2, 3)]
    om = [omega_matrix(a, n) for a in (1, 2, 3)]
    g = metric_matrix(n)
    eta = lambda p: np.asarray(p, float)
    thetas = [lambda p, m=m: m @ p for m in jm]

    def const(m):
        return lambda p: m

    def rho(x):
        return potential_rho(x) + rho_shift

    num = den = 0.0
    qmats = [(j_matrix(q, n), omega_matrix(q, n)) for q in qs]
    for p in rng.normal(size=(samples, 4 * n)):
        for a in range(3):
            l_eta = lie_derivative_2tensor(eta, const(om[a]), p, h)
            rep.add("flat.euler_omega", l_eta - 2 * om[a], tol)
            num += np.sum(l_eta * om[a])
            den += np.sum(om[a] * om[a])
            for b in range(3):
                c = 3 - a - b if a != b else a
                eps = epsilon(a + 1, b + 1, c + 1) if a != b else 0
                want = -2 * eps * om[c] if eps else np.zeros_like(om[b])
                got = lie_derivative_2tensor(thetas[a], const(om[b]), p, h)
                rep.add("flat.rotation_omega", got - want, tol)
                wantj = -2 * eps * jm[c] if eps else np.zeros_like(jm[b])
                gotj = lie_derivative_endo(thetas[a], const(jm[b]), p, h)
                rep.add("flat.rotation_J", gotj - wantj, tol)
            rep.add("flat.rotation_J", lie_derivative_endo(eta, const(jm[a]), p, h), tol)
            rep.add("flat.rotation_metric", lie_derivative_2tensor(thetas[a], const(g), p, h), tol)
        rep.add("flat.euler_metric", lie_derivative_2tensor(eta, const(g), p, h) - 2 * g, tol)
        grad = fd_gradient(rho, p, h)
        rep.add("flat.euler_gradient", g @ eta(p) - grad, tol)
        for jq, oq in qmats:
            rep.add("flat.potential", fd_ddc(rho, jq, p, h) - oq, tol)
            # theta_q contracted into omega_q is -d rho
            rep.add("flat.moment", (jq @ p) @ oq + grad, tol)
    k = num / den
    rep.add("flat.weight", k - 2.0, 1e-8)
    rep.note("flat.weight", k)
    rep.set_environment(seed, {"samples": samples, "h": h, "n": n, "labels": labels, "tol": tol})
    return rep
