"""Finite-difference geometry on nilpotent orbits.

Tangent vectors at ``w`` are carried by generators ``x`` with value
``[x, w]``, so every difference quotient is taken along the adjoint curve
``t -> Ad_{exp(t x)} w`` and never leaves the orbit.  The KKS form is
``sigma_w([x, w], [y, w]) = (w, [x, y])`` with the Killing form as pairing,
for which ``{phi^x, phi^y} = phi^[x, y]`` and ``d phi^x = sigma([x, w], .)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .algebra import LieAlgebraContext, LieElement, Quaternion, is_nilpotent, load_fixture
from .report import VerificationReport
from .errors import (
    JUnavailable,
    NotReal,
    OriginExcluded,
    RankDeficiency,
    SigmaSingular,
    StepUnderflow,
    ZeroQuaternion,
)

RANK_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class OrbitPoint:
    """Point of a nilpotent orbit, with reality flag."""

    w: LieElement
    is_real: bool = False

    @classmethod
    def make(cls, w: LieElement, require_nilpotent: bool = True) -> "OrbitPoint":
        if require_nilpotent and not is_nilpotent(w, 1e-8):
            raise ValueError("point is not nilpotent")
        return cls(w, w.ctx.is_real(w.coordinates, 1e-10))

    @property
    def ctx(self) -> LieAlgebraContext:
        return self.w.ctx

    @property
    def coords(self) -> np.ndarray:
        return self.w.coordinates


def as_point(w) -> OrbitPoint:
    if isinstance(w, OrbitPoint):
        return w
    return OrbitPoint(w, w.ctx.is_real(w.coordinates, 1e-10))


@dataclass(frozen=True, eq=False)
class OrbitTangent:
    """Tangent vector ``[x, w]`` recorded through its generator x."""

    generator: LieElement
    value: LieElement

    @classmethod
    def at(cls, w, x: LieElement) -> "OrbitTangent":
        p = as_point(w)
        return cls(x, LieElement(p.ctx, p.ctx.br(x.coordinates, p.coords)))


@dataclass(frozen=True)
class ScalarField:
    """Scalar function on an orbit, evaluated on basis coordinates.

    Args:
        evaluator: Map from complex coordinates to a real or complex number.
        degree: Declared homogeneity degree, or None.
        name: Label used in reports.
        is_complex: Whether values are complex.
    """

    evaluator: Callable[[np.ndarray], complex]
    degree: float | None = None
    name: str = ""
    is_complex: bool = False

    def __call__(self, w):
        c = w.coords if isinstance(w, OrbitPoint) else w.coordinates if isinstance(w, LieElement) else w
        v = self.evaluator(np.asarray(c, dtype=complex))
        return complex(v) if self.is_complex else float(np.real(v))

    def homogeneity_defect(self, w, scales=(0.5, 2.0, 3.7)) -> float:
        """Largest ``|f(s w) - s^k f(w)|`` over a few rays; 0 when no degree declared."""
        if self.degree is None:
            return 0.0
        c = as_point(w).coords
        f0 = self(c)
        return max(abs(self(s * c) - s**self.degree * f0) for s in scales)


# ---------------------------------------------------------------------------
# Tangent spaces
# ---------------------------------------------------------------------------


def _span_basis(ctx: LieAlgebraContext, sub: str) -> tuple[np.ndarray, bool]:
    sp = ctx.split
    table = {
        "g": (np.eye(ctx.dim, dtype=complex), False),
        "g_R": (sp.gR_basis, True),
        "k": (sp.k_complex, False),
        "p": (sp.p_complex, False),
        "k_R": (sp.k_basis, True),
        "p_R": (sp.p_basis, True),
        "u": (sp.u_basis, True),
    }
    if sub not in table:
        raise ValueError(f"unknown subspace {sub!r}")
    return table[sub]


def _rank(s: np.ndarray, rtol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def tangent_basis(w, sub: str = "g_R", rtol: float = RANK_RTOL, rank: int | None = None) -> list[OrbitTangent]:
    """Independent tangents spanning ``[sub, w]``.

    Real spans ('g_R', 'k_R', 'p_R', 'u') return tangents orthonormal in the
    real coordinates of g; complex spans ('g', 'k', 'p') a complex
    orthonormal set.

    A known ``rank`` skips the rank decision, which is useful at points
    that sit slightly off the orbit (e.g. inside an ODE integrator).

    Raises:
        RankDeficiency: If the rank changes across a decade of thresholds.
    """
    p = as_point(w)
    ctx = p.ctx
    gens, real = _span_basis(ctx, sub)
    vals = np.array([ctx.br(g, p.coords) for g in gens])  # (k, d)
    if real:
        mat = np.concatenate([vals.real, vals.imag], axis=1).T
    else:
        mat = vals.T
    _, s, vh = np.linalg.svd(mat, full_matrices=False)
    r = _rank(s, rtol) if rank is None else rank
    if rank is None and (r != _rank(s, rtol * 10) or r != _rank(s, rtol / 10)):
        raise RankDeficiency(f"tangent rank unstable near threshold {rtol:g}")
    out = []
    for j in range(r):
        coef = vh[j].conj() / s[j] if not real else vh[j] / s[j]
        x = coef @ gens
        out.append(OrbitTangent.at(p, LieElement(ctx, x)))
    return out


def check_tangent_split(e, tol: float = 1e-10) -> float:
    """Largest violation of ``[k, e] in p`` and ``[p, e] in k`` for e in p."""
    p = as_point(e)
    sp = p.ctx.split
    res = 0.0
    for x in sp.k_complex:
        v = p.ctx.br(x, p.coords)
        res = max(res, np.linalg.norm(v - sp.proj_p(v)))
    for x in sp.p_complex:
        v = p.ctx.br(x, p.coords)
        res = max(res, np.linalg.norm(v - sp.proj_k(v)))
    return float(res)


def generator_for(w, tangent, sub: str = "g_R") -> LieElement:
    """A generator x in the given span with ``[x, w]`` equal to the tangent coords."""
    p = as_point(w)
    ctx = p.ctx
    gens, real = _span_basis(ctx, sub)
    vals = np.array([ctx.br(g, p.coords) for g in gens])
    t = np.asarray(tangent, dtype=complex)
    if real:
        a = np.concatenate([vals.real, vals.imag], axis=1).T
        c, *_ = np.linalg.lstsq(a, np.concatenate([t.real, t.imag]), rcond=1e-12)
    else:
        c, *_ = np.linalg.lstsq(vals.T, t, rcond=1e-12)
    return LieElement(ctx, c @ gens)


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------


def hamiltonian_fn(z: LieElement, kind: str = "real") -> ScalarField:
    """``phi^z(w) = (z, w)`` (Killing pairing); complex valued for kind 'holomorphic'."""
    ctx = z.ctx
    zc = z.coordinates.copy()
    if kind == "real":
        return ScalarField(lambda c: ctx.kf(zc, c).real, 1.0, "phi")
    if kind == "holomorphic":
        return ScalarField(lambda c: ctx.kf(zc, c), 1.0, "Phi", True)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Finite differences along adjoint curves
# ---------------------------------------------------------------------------

_STENCILS = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    4: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
}


def adjoint_curve(w, x, t: float) -> np.ndarray:
    """Coordinates of ``Ad_{exp(t x)} w``."""
    p = as_point(w)
    xc = x.coordinates if isinstance(x, LieElement) else np.asarray(x, dtype=complex)
    return scipy.linalg.expm(t * p.ctx.ad(xc)) @ p.coords


def _generator(v):
    return v.generator if isinstance(v, OrbitTangent) else v


def fd_derivative(f: ScalarField, w, v, h: float = 1e-5, order: int = 2):
    """Derivative of f at w along the tangent v, by differences on the adjoint curve.

    Raises:
        StepUnderflow: If h is too small to resolve a difference.
    """
    if not h > 1e-10:
        raise StepUnderflow(f"step {h!r} below resolvable range")
    p = as_point(w)
    x = _generator(v)
    offs, wts = _STENCILS[order]
    ad = p.ctx.ad(x.coordinates)
    vals = [f(scipy.linalg.expm(o * h * ad) @ p.coords) for o in offs]
    return sum(c * val for c, val in zip(wts, vals)) / h


def fd_derivative_with_error(f: ScalarField, w, v, h: float = 1e-5, order: int = 2):
    """Derivative and a two-scale error estimate ``|D(h) - D(2h)|``."""
    d1 = fd_derivative(f, w, v, h, order)
    d2 = fd_derivative(f, w, v, 2 * h, order)
    return d1, abs(d1 - d2)


def kks_form(w, u, v, holomorphic: bool = False):
    """KKS form ``(w, [x, y])`` on tangents with generators x and y.

    The real form sigma is returned for real points; ``holomorphic`` gives the
    complex form Sigma on the complex orbit.
    """
    p = as_point(w)
    val = p.ctx.kf(p.coords, p.ctx.br(_generator(u).coordinates, _generator(v).coordinates))
    return complex(val) if holomorphic else float(np.real(val))


def fd_ddc(f: ScalarField, provider, w, u, v, h: float = 1e-3, h_in: float = 1e-5) -> float:
    """``dd^c f(u, v)`` with ``d^c f(t) = -df(J t) / 2``, by nested differences.

    Uses ``dd^c f(X_x, X_y) = X_x a(X_y) - X_y a(X_x) + a(X_[x,y])`` for the
    fundamental fields ``X_x(w) = [x, w]`` and ``a = d^c f``.

    Raises:
        JUnavailable: Without a complex-structure provider.
    """
    if provider is None or not hasattr(provider, "apply_J"):
        raise JUnavailable("dd^c needs a complex structure provider")
    p = as_point(w)
    ctx = p.ctx
    x, y = _generator(u), _generator(v)

    def alpha(c, z):
        pt = OrbitPoint(LieElement(ctx, c), True)
        tv = ctx.br(z.coordinates, c)
        jt = provider.apply_J(pt, tv)
        gen = generator_for(pt, jt)
        return -0.5 * fd_derivative(f, pt, gen, h_in)

    def along(gen, inner):
        ad = ctx.ad(gen.coordinates)
        plus = alpha(scipy.linalg.expm(h * ad) @ p.coords, inner)
        minus = alpha(scipy.linalg.expm(-h * ad) @ p.coords, inner)
        return (plus - minus) / (2 * h)

    xy = LieElement(ctx, ctx.br(x.coordinates, y.coordinates))
    return float(np.real(along(x, y) - along(y, x) + alpha(p.coords, xy)))


def fd_two_form(form: str, w, u, v, field: ScalarField | None = None, provider=None, h: float = 1e-3):
    """Evaluate 'sigma', 'Sigma' or 'ddc' (of a field) on two tangents at w."""
    if form == "sigma":
        return kks_form(w, u, v)
    if form == "Sigma":
        return kks_form(w, u, v, holomorphic=True)
    if form == "ddc":
        if field is None:
            raise ValueError("dd^c needs a scalar field")
        if getattr(field, "is_complex", False):
            re = ScalarField(lambda c: np.real(field.evaluator(c)), field.degree)
            im = ScalarField(lambda c: np.imag(field.evaluator(c)), field.degree)
            return complex(fd_ddc(re, provider, w, u, v, h), fd_ddc(im, provider, w, u, v, h))
        return fd_ddc(field, provider, w, u, v, h)
    raise ValueError(f"unknown form {form!r}")


def sigma_gram(w, basis) -> np.ndarray:
    return np.array([[kks_form(w, a, b) for b in basis] for a in basis])


def fd_poisson(f: ScalarField, g: ScalarField, w, h: float = 1e-5, basis=None, order: int = 2):
    """Poisson bracket ``{f, g} = sigma(xi_f, xi_g)`` with ``xi_f`` solving ``xi_f . sigma = -df``.

    Raises:
        SigmaSingular: If the sigma Gram matrix has condition number above 1e10.
    """
    p = as_point(w)
    basis = basis if basis is not None else tangent_basis(p, "g_R")
    s = sigma_gram(p, basis)
    if np.linalg.cond(s) > 1e10:
        raise SigmaSingular("sigma is degenerate on the tangent basis")
    a_f = np.array([fd_derivative(f, p, t, h, order) for t in basis])
    a_g = np.array([fd_derivative(g, p, t, h, order) for t in basis])
    val = -a_f @ np.linalg.solve(s, a_g)
    return val if (f.is_complex or g.is_complex) else float(np.real(val))


def sample_orbit(ctx: LieAlgebraContext, count: int, seed: int = 0, scale: float = 0.6, base=None) -> list[OrbitPoint]:
    """Points ``Ad_{exp(x)} w0`` with x Gaussian in the real form."""
    rng = np.random.default_rng(seed)
    w0 = ctx.base_point if base is None else np.asarray(base)
    gr = ctx.split.gR_basis
    out = []
    for _ in range(count):
        x = rng.normal(scale=scale, size=len(gr)) @ gr
        c = scipy.linalg.expm(ctx.ad(x)) @ w0
        c = 0.5 * (c + ctx.nu(c))  # clean rounding off the real form
        out.append(OrbitPoint(LieElement(ctx, c), True))
    return out


def kks_check(ctx: LieAlgebraContext, samples: int = 100, seed: int = 0, h: float = 1e-5, order: int = 4, tol: float = 1e-6):
    """``{phi^x, phi^y} = phi^[x, y]`` and ``d phi^x = sigma([x, w], .)`` at random triples."""
    rng = np.random.default_rng(seed + 11)
    rep = VerificationReport(f"kks-{ctx.name}")
    gr = ctx.split.gR_basis
    for p in sample_orbit(ctx, samples, seed):
        x, y = (LieElement(ctx, rng.normal(size=len(gr)) @ gr) for _ in range(2))
        fx, fy = hamiltonian_fn(x), hamiltonian_fn(y)
        fxy = hamiltonian_fn(LieElement(ctx, ctx.br(x.coordinates, y.coordinates)))
        basis = tangent_basis(p, "g_R")
        rep.add("kks.homomorphism", fd_poisson(fx, fy, p, h, basis, order) - fxy(p), tol)
        v = basis[rng.integers(len(basis))]
        # the Hamiltonian field of phi^x is -[x, w]
        xi = OrbitTangent.at(p, -1.0 * x)
        rep.add("kks.moment", fd_derivative(fx, p, v, h, order) + kks_form(p, xi, v), tol)
    rep.set_environment(seed, {"samples": samples, "h": h, "order": order, "tol": tol})
    return rep


def fixture_check(samples: int = 1000, seed: int = 0):
    """The sl(2) covering map and the cone chart, checked exactly."""
    rng = np.random.default_rng(seed)
    ctx = load_fixture("sl2R")
    rep = VerificationReport("fixtures")
    w = sl2_cover(Quaternion(1, 0, 1, 0), ctx)
    rep.add("fixture.sl2_cover/example", w.matrix - np.array([[1, -1], [1, -1]]), 1e-14)
    mismatch = 0
    for k in range(samples):
        a, b, c, d = rng.normal(size=4)
        if k % 2 == 0:
            b = d = 0.0
        q = Quaternion(a, b, c, d)
        m = sl2_cover(q, ctx)
        real = bool(np.abs(m.matrix.imag).max() <= 1e-12 * max(1.0, m.norm()))
        mismatch += real != (b == 0 and d == 0)
        rep.add("fixture.sl2_cover/nilpotent", m.matrix @ m.matrix, 1e-12)
        rep.add("fixture.sl2_cover/even", sl2_cover(q * -1.0, ctx).matrix - m.matrix, 1e-12)
        lam = rng.uniform(0.2, 3.0)
        rep.add("fixture.sl2_cover/scaling", sl2_cover(q * lam, ctx).matrix - lam**2 * m.matrix, 1e-11)
    rep.add("fixture.sl2_cover/real_locus", float(mismatch), 0.0)
    rep.add("fixture.cone/example", cone_fixture(3.0, 4.0) - np.array([3.0, 4.0, 5.0]), 0.0)
    for x, y in rng.normal(size=(samples, 2)):
        p = cone_fixture(x, y)
        rep.add("fixture.cone/round_trip", cone_projection(p) - complex(x, y), 0.0)
        rep.add("fixture.cone/equation", p[0] ** 2 + p[1] ** 2 - p[2] ** 2, 1e-12)
    rep.set_environment(seed, {"samples": samples})
    return rep


# ---------------------------------------------------------------------------
# Explicit fixtures
# ---------------------------------------------------------------------------


def sl2_cover(q: Quaternion, ctx: LieAlgebraContext | None = None) -> LieElement:
    """Two-to-one map ``a + bi + cj + dk -> [[uv, -u^2], [v^2, -uv]]``, u = a + bi, v = c + di.

    Raises:
        ZeroQuaternion: For q = 0.
    """
    if q.norm2() == 0:
        raise ZeroQuaternion("cover is undefined at 0")
    ctx = ctx or load_fixture("sl2R")
    u, v = complex(q.w, q.x), complex(q.y, q.z)
    m = np.array([[u * v, -u * u], [v * v, -u * v]])
    return ctx.element(m)


def in_base_component(w: LieElement, tol: float = 1e-10) -> bool:
    """Real-orbit membership in the component selected by the fixture base point.

    A real nilpotent point belongs to that component when it pairs with the
    normalized central element with the same sign as the base point.
    """
    from .algebra import hermitian_center

    ctx = w.ctx
    if not ctx.is_real(w.coordinates, tol * max(1.0, w.norm())):
        return False
    if not is_nilpotent(w, 1e-8) or w.norm() <= tol:
        return False
    x0 = hermitian_center(ctx.split).x0
    return bool(-ctx.kf(x0.coordinates, w.coordinates).real > tol * max(1.0, w.norm()))


def cone_fixture(x: float, y: float) -> np.ndarray:
    """Point ``(x, y, sqrt(x^2 + y^2))`` on the positive sheet of ``x^2 + y^2 = z^2``.

    Raises:
        OriginExcluded: For (0, 0).
    """
    if x == 0 and y == 0:
        raise OriginExcluded("the cone point is excluded")
    return np.array([x, y, math.hypot(x, y)])


def cone_projection(p) -> complex:
    """``(x, y, z) -> x + iy``."""
    return complex(p[0], p[1])


def require_real(w: OrbitPoint) -> None:
    if not w.is_real:
        raise NotReal("point must lie in the real form")
