"""Quaternions, the sphere of complex-structure labels, and matrix Lie algebras.

A Lie algebra is handled through a :class:`LieAlgebraContext`: a complex basis
of traceless matrices together with a Cartan involution ``theta`` (complex
linear) and a conjugation ``nu`` (antilinear) fixing the real form.  Elements
are stored as complex coordinate vectors over that basis, so every subspace
projection is plain linear algebra.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    BasisClosureFailure,
    ContextMismatch,
    DegenerateSplit,
    FixtureInvalid,
    IndexOutOfRange,
    InvolutionInvalid,
    NotHermitian,
    NotReal,
    UnknownFixture,
    ZeroQuaternion,
)

# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quaternion:
    """Quaternion ``w + x i + y j + z k``."""

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float)
        if a.shape == (3,):
            return cls(0.0, *map(float, a))
        return cls(*map(float, a))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def imag(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        return Quaternion(*(self.as_array() * float(other)))

    def __rmul__(self, other):
        return Quaternion(*(self.as_array() * float(other)))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(*(self.as_array() + other.as_array()))

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(*(self.as_array() - other.as_array()))

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm2(self) -> float:
        return float(self.as_array() @ self.as_array())

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroQuaternion("cannot invert the zero quaternion")
        return Quaternion(*(self.conj().as_array() / n2))

    def is_imaginary(self, tol: float = 1e-12) -> bool:
        return abs(self.w) <= tol * max(1.0, self.norm())

    def allclose(self, other: "Quaternion", tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), atol=tol, rtol=0))


QI = Quaternion(0.0, 1.0, 0.0, 0.0)
QJ = Quaternion(0.0, 0.0, 1.0, 0.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)
QONE = Quaternion(1.0, 0.0, 0.0, 0.0)


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product ``p q``."""
    a1, b1, c1, d1 = p.w, p.x, p.y, p.z
    a2, b2, c2, d2 = q.w, q.x, q.y, q.z
    return Quaternion(
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def spin_rotate(h: Quaternion, w: Quaternion, bullet: bool = False) -> Quaternion:
    """Conjugate an imaginary quaternion: ``h w h^-1``.

    Args:
        h: Nonzero quaternion.
        w: Imaginary quaternion.
        bullet: If true return the weight-two action ``|h|^2 h w h^-1``.

    Raises:
        ZeroQuaternion: If ``h`` vanishes.
    """
    if h.norm2() == 0.0:
        raise ZeroQuaternion("spin_rotate needs a nonzero quaternion")
    if not w.is_imaginary(1e-12):
        raise ValueError("spin_rotate acts on imaginary quaternions")
    out = quat_mul(quat_mul(h, w), h.inverse())
    out = Quaternion(0.0, out.x, out.y, out.z)
    if bullet:
        out = out * h.norm2()
    return out


def rotation_matrix(h: Quaternion) -> np.ndarray:
    """3x3 matrix of ``w -> h w h^-1`` in the (i, j, k) coordinates."""
    cols = [spin_rotate(h, e).imag for e in (QI, QJ, QK)]
    return np.column_stack(cols)


def epsilon(a: int, b: int, c: int) -> int:
    """Permutation sign of (a, b, c) for indices in {1, 2, 3}; 0 on repeats."""
    for i in (a, b, c):
        if i not in (1, 2, 3):
            raise IndexOutOfRange(f"index {i} not in 1..3")
    if len({a, b, c}) < 3:
        return 0
    return 1 if (a, b, c) in ((1, 2, 3), (2, 3, 1), (3, 1, 2)) else -1


def cyclic_triple(a: int) -> tuple[int, int, int]:
    """Return (a, b, c) with (abc) a cyclic permutation of (123)."""
    if a not in (1, 2, 3):
        raise IndexOutOfRange(f"index {a} not in 1..3")
    return a, a % 3 + 1, (a + 1) % 3 + 1


def cyclic_rotation() -> np.ndarray:
    """Rotation sending ``a i + b j + c k`` to ``c i + a j + b k``."""
    return np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class SphereLabel:
    """Unit vector (a, b, c) labelling the structure ``a J1 + b J2 + c J3``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        n = self.a**2 + self.b**2 + self.c**2
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"sphere label must have unit norm, got {np.sqrt(n)}")

    @classmethod
    def from_vector(cls, v) -> "SphereLabel":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(*map(float, v))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


def fibonacci_sphere(count: int, seed: int | None = None) -> list[SphereLabel]:
    """Deterministic near-uniform points on S^2 (Fibonacci lattice).

    A seed applies a random rotation to the whole lattice, which keeps the
    spacing but moves the points off the coordinate axes.
    """
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    if seed is not None:
        q = np.random.default_rng(seed).normal(size=4)
        pts = pts @ rotation_matrix(Quaternion(*q)).T
    return [SphereLabel.from_vector(p) for p in pts]


# ---------------------------------------------------------------------------
# Lie algebra contexts
# ---------------------------------------------------------------------------


def _realify_linear(m: np.ndarray) -> np.ndarray:
    """Real 2d x 2d matrix of a complex-linear map on C^d."""
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def _realify_antilinear(m: np.ndarray) -> np.ndarray:
    """Real matrix of ``c -> m conj(c)``."""
    d = m.shape[0]
    flip = np.diag(np.r_[np.ones(d), -np.ones(d)])
    return _realify_linear(m) @ flip


def _to_real(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, c.imag], axis=-1)


def _from_real(r: np.ndarray) -> np.ndarray:
    d = r.shape[-1] // 2
    return r[..., :d] + 1j * r[..., d:]


def null_space(a: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of ``a``, relative threshold."""
    if a.size == 0:
        return np.eye(a.shape[1])
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * max(smax, 1.0)))
    return vh[rank:].conj().T


def _rule_from_json(spec: dict, antilinear: bool) -> Callable[[np.ndarray], np.ndarray]:
    kind = spec.get("kind")
    m = spec.get("matrix")
    m = None if m is None else matrix_from_json(m)
    minv = None if m is None else np.linalg.inv(m)

    def conj_by(x):
        return x if m is None else m @ x @ minv

    if kind == "identity":
        return lambda x: np.array(x, dtype=complex)
    if kind == "conjugation":
        if m is None:
            raise FixtureInvalid("conjugation rule needs a matrix")
        return lambda x: m @ x @ minv
    if kind == "negtranspose":
        return lambda x: -conj_by(np.asarray(x).T)
    if kind == "conjugate":
        return lambda x: conj_by(np.conj(x))
    if kind == "negadjoint":
        return lambda x: -conj_by(np.conj(np.asarray(x)).T)
    raise FixtureInvalid(f"unknown rule kind {kind!r}")


def matrix_from_json(rows) -> np.ndarray:
    """Nested ``[re, im]`` pairs (row-major) to a complex array."""
    a = np.asarray(rows, dtype=float)
    if a.shape[-1] != 2:
        raise FixtureInvalid("matrix entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


class LieAlgebraContext:
    """A complex matrix Lie algebra with real structure.

    Args:
        name: Identifier used in reports and serialized paths.
        basis: Array (d, n, n) of traceless matrices spanning the algebra.
        theta: Cartan involution, complex linear map on matrices.
        nu: Conjugation, antilinear map on matrices fixing the real form.
        kappa: Optional triple (e1, e2, e3) in the compact form with
            ``[e_a, e_b] = -2 eps_abc e_c``.
        base_point: Optional real nilpotent element pinning the orbit
            component studied by the fixture.
    """

    def __init__(self, name, basis, theta, nu, kappa=None, base_point=None, closure_tol=1e-10):
        self.name = str(name)
        basis = np.asarray(basis, dtype=complex)
        self.basis = basis
        self.dim = basis.shape[0]
        self.n = basis.shape[1]
        self._flat = basis.reshape(self.dim, -1).T
        q, r = np.linalg.qr(self._flat)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise BasisClosureFailure("basis matrices are linearly dependent")
        self._q, self._r = q, r
        self.closure_tol = closure_tol
        self.theta_fn = theta
        self.nu_fn = nu

        d = self.dim
        c = np.zeros((d, d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                bi, bj = basis[i], basis[j]
                c[i, j] = self.coords(bi @ bj - bj @ bi)
        self.structure_constants = c
        # ad(b_i) as a matrix acting on coordinate columns
        self._ad = np.transpose(c, (0, 2, 1))
        self.killing_matrix = np.einsum("iab,jba->ij", self._ad, self._ad)
        self.theta_matrix = np.column_stack([self.coords(theta(b)) for b in basis])
        self.nu_matrix = np.column_stack([self.coords(nu(b)) for b in basis])

        self.kappa = None
        if kappa is not None:
            self.kappa = np.array([self.coords(e) for e in kappa])
        self.base_point = None if base_point is None else self.coords(base_point)
        self._split = None

    # coordinates ------------------------------------------------------
    def coords(self, x) -> np.ndarray:
        """Basis coordinates of a matrix; raises if it leaves the span."""
        x = np.asarray(x, dtype=complex).reshape(-1)
        c = np.linalg.solve(self._r, self._q.conj().T @ x)
        res = np.linalg.norm(self._flat @ c - x)
        if res > self.closure_tol * max(1.0, np.linalg.norm(x)):
            raise BasisClosureFailure(f"matrix not in span of basis (residual {res:.2e})")
        return c

    def matrix(self, c) -> np.ndarray:
        return np.tensordot(np.asarray(c, dtype=complex), self.basis, axes=(0, 0))

    def element(self, x) -> "LieElement":
        return LieElement(self, self.coords(x))

    def from_coords(self, c) -> "LieElement":
        return LieElement(self, np.asarray(c, dtype=complex))

    # linear algebra on coordinates -----------------------------------
    def ad(self, c) -> np.ndarray:
        return np.tensordot(np.asarray(c, dtype=complex), self._ad, axes=(0, 0))

    def br(self, x, y) -> np.ndarray:
        """Bracket on coordinate vectors."""
        return np.einsum("i,j,ijk->k", x, y, self.structure_constants)

    def kf(self, x, y) -> complex:
        """Killing form on coordinate vectors (bilinear, no conjugation)."""
        return np.asarray(x) @ self.killing_matrix @ np.asarray(y)

    def theta(self, c) -> np.ndarray:
        return self.theta_matrix @ c

    def nu(self, c) -> np.ndarray:
        return self.nu_matrix @ np.conj(c)

    def beta(self, c) -> np.ndarray:
        """Compact-form conjugation ``nu theta``."""
        return self.nu(self.theta(c))

    def is_real(self, c, tol: float = 1e-10) -> bool:
        c = np.asarray(c)
        return np.linalg.norm(self.nu(c) - c) <= tol * max(1.0, np.linalg.norm(c))

    def fixed_subspace(self, linear=(), antilinear=()) -> np.ndarray:
        """Real basis (rows, complex coordinates) of a joint eigenspace.

        ``linear`` and ``antilinear`` are sequences of (matrix, eigenvalue);
        antilinear maps act as ``c -> m conj(c)``.
        """
        blocks = []
        eye = np.eye(2 * self.dim)
        for m, s in linear:
            blocks.append(_realify_linear(m) - s * eye)
        for m, s in antilinear:
            blocks.append(_realify_antilinear(m) - s * eye)
        ns = null_space(np.vstack(blocks))
        return _from_real(ns.T)

    def validate(self, tol: float = 1e-10) -> None:
        """Check the involution axioms; raises InvolutionInvalid."""
        th, nm = self.theta_matrix, self.nu_matrix
        eye = np.eye(self.dim)
        if np.linalg.norm(th @ th - eye) > tol:
            raise InvolutionInvalid("theta does not square to the identity")
        if np.linalg.norm(nm @ np.conj(nm) - eye) > tol:
            raise InvolutionInvalid("nu does not square to the identity")
        if np.linalg.norm(th @ nm - nm @ np.conj(th)) > tol:
            raise InvolutionInvalid("theta and nu do not commute")
        c = self.structure_constants
        for i in range(self.dim):
            for j in range(self.dim):
                lhs = th @ c[i, j]
                rhs = self.br(th[:, i], th[:, j])
                if np.linalg.norm(lhs - rhs) > tol:
                    raise InvolutionInvalid("theta is not a Lie algebra homomorphism")
                lhs = nm @ np.conj(c[i, j])
                rhs = self.br(nm[:, i], nm[:, j])
                if np.linalg.norm(lhs - rhs) > tol:
                    raise InvolutionInvalid("nu is not a Lie algebra homomorphism")

    def validate_kappa(self, tol: float = 1e-10) -> None:
        """Check bracket relations, compactness and theta-compatibility of kappa."""
        if self.kappa is None:
            raise FixtureInvalid("context has no kappa triple")
        e = self.kappa
        for a in (1, 2, 3):
            _, b, cc = cyclic_triple(a)
            if np.linalg.norm(self.br(e[b - 1], e[cc - 1]) + 2 * e[a - 1]) > tol:
                raise FixtureInvalid("kappa triple fails [e_b, e_c] = -2 e_a")
            if np.linalg.norm(self.beta(e[a - 1]) - e[a - 1]) > tol:
                raise FixtureInvalid("kappa triple does not lie in the compact form")
        signs = (-1.0, 1.0, -1.0)
        for s, ea in zip(signs, e):
            if np.linalg.norm(self.theta(ea) - s * ea) > tol:
                raise FixtureInvalid("kappa triple is not compatible with theta")

    @property
    def split(self) -> "CartanSplit":
        if self._split is None:
            self._split = cartan_split(self)
        return self._split

    def __repr__(self):
        return f"LieAlgebraContext({self.name!r}, n={self.n}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class LieElement:
    """Element of a context, stored as complex basis coordinates."""

    ctx: LieAlgebraContext
    coordinates: np.ndarray = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.ctx.matrix(self.coordinates)

    def _check(self, other):
        if not isinstance(other, LieElement) or other.ctx is not self.ctx:
            raise ContextMismatch("elements belong to different contexts")

    def __add__(self, other):
        self._check(other)
        return LieElement(self.ctx, self.coordinates + other.coordinates)

    def __sub__(self, other):
        self._check(other)
        return LieElement(self.ctx, self.coordinates - other.coordinates)

    def __neg__(self):
        return LieElement(self.ctx, -self.coordinates)

    def __mul__(self, s):
        return LieElement(self.ctx, self.coordinates * complex(s))

    __rmul__ = __mul__

    def conj(self) -> "LieElement":
        """Image under the real-form conjugation nu."""
        return LieElement(self.ctx, self.ctx.nu(self.coordinates))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coordinates))

    def allclose(self, other, tol: float = 1e-10) -> bool:
        self._check(other)
        return bool(np.linalg.norm(self.coordinates - other.coordinates) <= tol)


def bracket(x: LieElement, y: LieElement) -> LieElement:
    """Matrix commutator ``xy - yx`` re-expressed in basis coordinates."""
    x._check(y)
    ctx = x.ctx
    return ctx.element(x.matrix @ y.matrix - y.matrix @ x.matrix)


def killing_form(x: LieElement, y: LieElement) -> complex:
    """``trace(ad x ad y)``."""
    x._check(y)
    return complex(x.ctx.kf(x.coordinates, y.coordinates))


def kks_pairing(w: LieElement, x: LieElement, y: LieElement) -> complex:
    """``(w, [x, y])``: the KKS form on the tangents ``[x, w]``, ``[y, w]``."""
    w._check(x)
    w._check(y)
    ctx = w.ctx
    return complex(ctx.kf(w.coordinates, ctx.br(x.coordinates, y.coordinates)))


def is_nilpotent(w, tol: float = 1e-10) -> bool:
    """True when ``w^n`` vanishes (n the matrix size) up to a relative threshold."""
    m = w.matrix if isinstance(w, LieElement) else np.asarray(w, dtype=complex)
    scale = max(1.0, np.linalg.norm(m, 2)) ** m.shape[0]
    return bool(np.linalg.norm(np.linalg.matrix_power(m, m.shape[0]), 2) <= tol * scale)


# ---------------------------------------------------------------------------
# Cartan decomposition
# ---------------------------------------------------------------------------


def _orthonormalize(vecs: np.ndarray, gram: Callable) -> np.ndarray:
    if len(vecs) == 0:
        return vecs
    g = np.array([[gram(a, b) for b in vecs] for a in vecs]).real
    g = 0.5 * (g + g.T)
    lo = np.linalg.cholesky(g)
    return np.linalg.solve(lo, vecs)


@dataclass(frozen=True, eq=False)
class CartanSplit:
    """Real and complex bases attached to the Cartan decomposition.

    All bases are arrays of shape (m, d): rows are complex coordinate vectors.
    ``k_basis``/``p_basis`` are real bases of the compact and noncompact parts
    of the real form; ``a_basis = k_basis`` and ``b_basis = i p_basis`` span
    the compact form ``u_basis``.  ``k_complex``/``p_complex`` are complex
    bases of the theta eigenspaces.
    """

    ctx: LieAlgebraContext
    k_basis: np.ndarray
    p_basis: np.ndarray
    a_basis: np.ndarray
    b_basis: np.ndarray
    k_complex: np.ndarray
    p_complex: np.ndarray
    u_basis: np.ndarray
    gR_basis: np.ndarray

    def proj_k(self, c) -> np.ndarray:
        return 0.5 * (c + self.ctx.theta(c))

    def proj_p(self, c) -> np.ndarray:
        return 0.5 * (c - self.ctx.theta(c))

    def u_coords(self, c) -> np.ndarray:
        """Real coordinates over ``u_basis`` of an element of the compact form."""
        r, *_ = np.linalg.lstsq(_to_real(self.u_basis).T, _to_real(np.asarray(c)), rcond=None)
        return r

    def gR_coords(self, c) -> np.ndarray:
        r, *_ = np.linalg.lstsq(_to_real(self.gR_basis).T, _to_real(np.asarray(c)), rcond=None)
        return r


def cartan_split(ctx: LieAlgebraContext) -> CartanSplit:
    """Eigenspace bases of theta and nu.

    Raises:
        InvolutionInvalid: If theta or nu fail the involution axioms.
        DegenerateSplit: If the noncompact part is zero.
    """
    ctx.validate()
    th, nm = ctx.theta_matrix, ctx.nu_matrix
    gR = ctx.fixed_subspace(antilinear=[(nm, 1.0)])
    k = ctx.fixed_subspace(linear=[(th, 1.0)], antilinear=[(nm, 1.0)])
    p = ctx.fixed_subspace(linear=[(th, -1.0)], antilinear=[(nm, 1.0)])
    if len(p) == 0:
        raise DegenerateSplit("noncompact part of the real form is zero")
    if len(k) + len(p) != len(gR) or len(gR) != ctx.dim:
        raise InvolutionInvalid("theta does not split the real form")

    def pos(a, b):
        return -ctx.kf(a, th @ b)

    gR = _orthonormalize(gR, pos)
    k = _orthonormalize(k, pos)
    p = _orthonormalize(p, pos)
    u = np.vstack([k, 1j * p])
    uk = np.array([[ctx.kf(a, b) for b in u] for a in u]).real
    if np.max(np.linalg.eigvalsh(0.5 * (uk + uk.T))) >= 0:
        raise InvolutionInvalid("Killing form is not negative definite on the compact form")
    return CartanSplit(
        ctx=ctx, k_basis=k, p_basis=p, a_basis=k, b_basis=1j * p,
        k_complex=k.copy(), p_complex=p.copy(), u_basis=u, gR_basis=gR,
    )


def mu_project(w: LieElement, split: CartanSplit | None = None) -> LieElement:
    """Compact-part projection of a real element.

    Raises:
        NotReal: If ``w`` is not fixed by nu.
    """
    ctx = w.ctx
    split = split or ctx.split
    if not ctx.is_real(w.coordinates):
        raise NotReal("mu_project expects an element of the real form")
    return LieElement(ctx, split.proj_k(w.coordinates))


@dataclass(frozen=True, eq=False)
class HermitianCenter:
    """Central element ``x0`` and the +-i eigenspaces of ``ad x0`` on p."""

    x0: LieElement
    p_plus: np.ndarray
    p_minus: np.ndarray

    def iota(self, c) -> np.ndarray:
        """``(u - i[x0, u]) / 2``: projection of p onto p_plus."""
        ctx = self.x0.ctx
        return 0.5 * (c - 1j * ctx.br(self.x0.coordinates, c))


def hermitian_center(split: CartanSplit, tol: float = 1e-10) -> HermitianCenter:
    """Center element of the compact part acting on p with eigenvalues +-i.

    The sign is fixed so that ``(-x0, w)`` is positive at the fixture base
    point, which puts the base point's image in the +i eigenspace.

    Raises:
        NotHermitian: If the centre of the compact part has no such element.
    """
    ctx = split.ctx
    k = split.k_basis
    if len(k) == 0:
        raise NotHermitian("compact part is zero")
    cols = np.column_stack([_to_real(np.concatenate([ctx.br(ki, kj) for kj in k])) for ki in k])
    ns = null_space(cols)
    if ns.shape[1] != 1:
        raise NotHermitian(f"centre of compact part has dimension {ns.shape[1]}, need 1")
    z = ns[:, 0] @ k
    p = split.p_complex
    pc, *_ = np.linalg.lstsq(p.T, np.column_stack([ctx.br(z, pi) for pi in p]), rcond=None)
    ev = np.linalg.eigvals(pc)
    alpha = np.max(np.abs(ev))
    if alpha == 0:
        raise NotHermitian("centre acts trivially on p")
    x0 = z / alpha
    if np.max(np.abs(np.abs(ev / alpha) - 1.0)) > tol or np.max(np.abs(ev.real / alpha)) > tol:
        raise NotHermitian("ad x0 on p does not have eigenvalues +-i")
    if ctx.base_point is not None and ctx.kf(x0, ctx.base_point).real > 0:
        x0 = -x0
    x0el = LieElement(ctx, x0)

    def span(vecs):
        u, s, vh = np.linalg.svd(np.array(vecs).T, full_matrices=False)
        r = int(np.sum(s > 1e-9 * s[0]))
        return u[:, :r].T

    plus = span([0.5 * (pi - 1j * ctx.br(x0, pi)) for pi in p])
    minus = span([0.5 * (pi + 1j * ctx.br(x0, pi)) for pi in p])
    return HermitianCenter(x0el, plus, minus)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

_SHIPPED = {"sl2r": "sl2R.json", "su21": "su21.json", "sl3r": "sl3R.json"}


def context_from_dict(data: dict) -> LieAlgebraContext:
    """Build a context from the fixture JSON layout."""
    try:
        basis = np.array([matrix_from_json(b) for b in data["basis"]])
        theta = _rule_from_json(data["theta"], antilinear=False)
        nu = _rule_from_json(data["nu"], antilinear=True)
    except KeyError as exc:
        raise FixtureInvalid(f"fixture missing field {exc}") from exc
    if "n" in data and basis.shape[1] != int(data["n"]):
        raise FixtureInvalid("fixture size n does not match basis")
    kappa = data.get("kappa")
    kappa = None if kappa is None else [matrix_from_json(e) for e in kappa]
    bp = data.get("base_point")
    bp = None if bp is None else matrix_from_json(bp)
    ctx = LieAlgebraContext(data.get("name", "fixture"), basis, theta, nu, kappa, bp)
    ctx.validate()
    if ctx.kappa is not None:
        ctx.validate_kappa()
    return ctx


def load_fixture(name_or_path) -> LieAlgebraContext:
    """Load a shipped fixture by name (case-insensitive) or a JSON file path."""
    key = str(name_or_path).lower()
    if key in _SHIPPED:
        text = resources.files("nilgeo.fixtures").joinpath(_SHIPPED[key]).read_text()
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise UnknownFixture(f"no fixture named {name_or_path!r}")
        text = path.read_text()
    return context_from_dict(json.loads(text))


def shipped_fixtures() -> list[str]:
    return [v.removesuffix(".json") for v in _SHIPPED.values()]
