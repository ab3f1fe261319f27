"""Nahm's equations on a truncated line and the inverse moment-map problem.

Paths ``A(t) = (A_1, A_2, A_3)`` take values in the compact form ``u`` and
are stored as real coordinates over ``split.u_basis`` (orthonormal for minus
the Killing form).  The system solved is

    dA_a/dt = -2 A_a - [A_b, A_c],     (abc) cyclic,

with ``A(t) -> Ad_u (e_1, e_2, e_3)`` as ``t -> -inf`` and exponential decay
as ``t -> +inf``.  The tail moments are ``zeta_a = lim e^{2t} A_a(t) / 2``.

Internally the solver works with ``B(t) = (1 + e^{2t}) A(t)``, which is O(1)
at both ends and constant for the model solutions, so the tail is resolved
to relative rather than absolute accuracy.
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .algebra import (
    LieAlgebraContext,
    LieElement,
    Quaternion,
    cyclic_triple,
    is_nilpotent,
    load_fixture,
    null_space,
    spin_rotate,
    QI,
    QJ,
    QK,
)
from .errors import (
    GridUnderflow,
    NoConvergence,
    NotInCkappa,
    TailDivergence,
    TargetNotNilpotent,
    TargetNotReal,
)
from .report import VerificationReport

CYC = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]


# ---------------------------------------------------------------------------
# Compact-form coordinates
# ---------------------------------------------------------------------------


class UAlgebra:
    """Real coordinates on the compact form of a context."""

    def __init__(self, ctx: LieAlgebraContext):
        self.ctx = ctx
        self.split = ctx.split
        self.basis = self.split.u_basis  # (m, d) complex coordinates
        self.m = len(self.basis)
        self._real = np.concatenate([self.basis.real, self.basis.imag], axis=1).T
        self._cbasis = self.basis.T  # d x m, a complex basis of g
        m = self.m
        c = np.zeros((m, m, m))
        for i in range(m):
            for j in range(m):
                c[i, j] = self.from_g(ctx.br(self.basis[i], self.basis[j]))
        self.C = c
        self.e = None if ctx.kappa is None else np.array([self.from_g(x) for x in ctx.kappa])

    def from_g(self, c) -> np.ndarray:
        """Real u-coordinates of an element of the compact form."""
        c = np.asarray(c, dtype=complex)
        r, *_ = np.linalg.lstsq(self._real, np.concatenate([c.real, c.imag]), rcond=None)
        return r

    def complex_coords(self, c) -> np.ndarray:
        """Complex coefficients of any element of g over the u-basis."""
        z, *_ = np.linalg.lstsq(self._cbasis, np.asarray(c, dtype=complex), rcond=None)
        return z

    def to_g(self, r) -> np.ndarray:
        return np.asarray(r) @ self.basis

    def ad(self, x) -> np.ndarray:
        """Matrix of ``y -> [x, y]`` in u-coordinates."""
        return np.einsum("i,ijk->kj", x, self.C)

    def br(self, x, y) -> np.ndarray:
        return np.einsum("...i,...j,ijk->...k", x, y, self.C)

    def Ad(self, u_param) -> np.ndarray:
        """Matrix of ``Ad_{exp(u)}`` on u-coordinates (orthogonal)."""
        return scipy.linalg.expm(self.ad(np.asarray(u_param, dtype=float)))

    def Ad_group(self, g) -> np.ndarray:
        """Matrix of conjugation by an invertible matrix g."""
        g = np.asarray(g, dtype=complex)
        gi = np.linalg.inv(g)
        cols = [self.from_g(self.ctx.coords(g @ self.ctx.matrix(b) @ gi)) for b in self.basis]
        return np.column_stack(cols)

    @functools.cached_property
    def stabilizer(self) -> np.ndarray:
        """Basis (columns) of the centralizer of the kappa triple in u."""
        a = np.vstack([self.ad(ea) for ea in self.e]) if self.e is not None else np.zeros((0, self.m))
        return null_space(-a if a.size else np.zeros((1, self.m)))

    def linearization(self, d) -> np.ndarray:
        """Operator ``delta -> 2 delta_a + [d_b, delta_c] + [delta_b, d_c]`` on u^3."""
        m = self.m
        out = np.zeros((3 * m, 3 * m))
        for a, b, c in CYC:
            out[a * m:(a + 1) * m, a * m:(a + 1) * m] += 2 * np.eye(m)
            out[a * m:(a + 1) * m, c * m:(c + 1) * m] += self.ad(d[b])
            out[a * m:(a + 1) * m, b * m:(b + 1) * m] -= self.ad(d[c])
        return out


@functools.lru_cache(maxsize=None)
def u_algebra(ctx: LieAlgebraContext) -> UAlgebra:
    return UAlgebra(ctx)


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the boundary-value solver.

    ``fd_order`` is the order of the collocation stencils; ``tail_points`` the
    number of grid points used for the moment extrapolation.  ``init`` is
    'transported' (model moved by a fitted U-element and scale) or 'scaled'.
    ``init_noise`` adds seeded noise to the initial path.
    """

    N: int = 400
    T: float = 8.0
    tol: float = 1e-8
    max_iter: int = 60
    damping: float = 1e-3
    weights: dict = field(default_factory=lambda: {"ode": 1.0, "boundary": 1.0, "decay": 1.0, "target": 1.0})
    seed: int = 0
    fd_order: int = 8
    tail_points: int = 5
    bc_tol: float = 1e-6
    init: str = "transported"
    init_noise: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        """Build a config, rejecting unknown keys and out-of-range values."""
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown solver keys: {sorted(extra)}")
        kw = dict(data)
        if "weights" in kw:
            w = cls().weights
            unknown = set(kw["weights"]) - set(w)
            if unknown:
                raise ValueError(f"unknown residual weights: {sorted(unknown)}")
            w.update(kw["weights"])
            kw["weights"] = w
        cfg = cls(**kw)
        if cfg.N < 2 * cfg.fd_order or cfg.T <= 0 or cfg.tol <= 0 or cfg.max_iter < 1:
            raise ValueError("solver config needs N >= 2 fd_order, T > 0, tol > 0, max_iter >= 1")
        if cfg.init not in ("transported", "scaled"):
            raise ValueError(f"unknown init {cfg.init!r}")
        return cfg


def make_grid(N: int = 400, T: float = 8.0) -> np.ndarray:
    return np.linspace(-T, T, N + 1)


@dataclass(eq=False)
class InstantonPath:
    """Discretized path in u^3: ``values[i, a]`` holds ``A_{a+1}(grid[i])``."""

    grid: np.ndarray
    values: np.ndarray
    ctx: LieAlgebraContext
    u_param: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.grid) - 1

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def component(self, i: int, a: int) -> LieElement:
        ua = u_algebra(self.ctx)
        return LieElement(self.ctx, ua.to_g(self.values[i, a - 1]))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "A": self.values.tolist(),
            "context": self.ctx.name,
            "u_param": None if self.u_param is None else np.asarray(self.u_param).tolist(),
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
        }

    @classmethod
    def from_dict(cls, data: dict, ctx: LieAlgebraContext | None = None) -> "InstantonPath":
        ctx = ctx or load_fixture(data["context"])
        up = data.get("u_param")
        return cls(
            np.asarray(data["grid"], dtype=float),
            np.asarray(data["A"], dtype=float),
            ctx,
            None if up is None else np.asarray(up, dtype=float),
            dict(data.get("residuals", {})),
        )


@dataclass(eq=False)
class MomentTriple:
    """Tail moments in u-coordinates with an extrapolation error estimate."""

    ctx: LieAlgebraContext
    zeta: np.ndarray  # (3, m) real
    uncertainty: float = 0.0

    def element(self, a: int) -> LieElement:
        return LieElement(self.ctx, u_algebra(self.ctx).to_g(self.zeta[a - 1]))

    @property
    def zeta1(self) -> LieElement:
        return self.element(1)

    @property
    def zeta2(self) -> LieElement:
        return self.element(2)

    @property
    def zeta3(self) -> LieElement:
        return self.element(3)

    def to_dict(self) -> dict:
        return {
            "zeta": [np.real(self.element(a).matrix).tolist() for a in (1, 2, 3)],
            "zeta_imag": [np.imag(self.element(a).matrix).tolist() for a in (1, 2, 3)],
            "uncertainty": float(self.uncertainty),
        }


@dataclass(frozen=True)
class RotationAction:
    """Element (tau, u) of SO(3) x U.

    ``u`` is given either as exponential coordinates ``u_param`` or as an
    invertible matrix ``u_matrix`` acting by conjugation.
    """

    tau: np.ndarray | None = None
    u_param: np.ndarray | None = None
    u_matrix: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Model solutions and residuals
# ---------------------------------------------------------------------------


def kappa_transport(ctx: LieAlgebraContext, u_param=None) -> np.ndarray:
    """``Ad_{exp(u)} (e_1, e_2, e_3)`` in u-coordinates, shape (3, m)."""
    ua = u_algebra(ctx)
    if u_param is None:
        return ua.e.copy()
    return ua.e @ ua.Ad(u_param).T


def check_ckappa(ctx: LieAlgebraContext, d, tol: float = 1e-8) -> None:
    """Raise NotInCkappa unless d has the bracket relations and norms of kappa."""
    ua = u_algebra(ctx)
    d = np.asarray(d, dtype=float)
    for a, b, c in CYC:
        if np.linalg.norm(ua.br(d[b], d[c]) + 2 * d[a]) > tol * max(1.0, np.linalg.norm(d)):
            raise NotInCkappa("triple fails [d_b, d_c] = -2 d_a")
    if np.abs(np.linalg.norm(d, axis=1) - np.linalg.norm(ua.e, axis=1)).max() > tol:
        raise NotInCkappa("triple is not conjugate to the kappa triple")


def model_values(d, grid, lam: float = 1.0) -> np.ndarray:
    """``lam . D(t)`` with ``D(t) = d / (1 + e^{2t})``, shape (N+1, 3, m)."""
    grid = np.asarray(grid, dtype=float)
    prof = lam / (lam + np.exp(2 * grid))
    return prof[:, None, None] * np.asarray(d)[None]


def model_instanton(ctx: LieAlgebraContext, grid, d=None, u_param=None, lam: float = 1.0) -> InstantonPath:
    """Model instanton ``(1 + e^{2t})^{-1} d`` (optionally scaled by lam).

    Args:
        ctx: Context with a kappa triple.
        grid: Time grid.
        d: Triple in u-coordinates; defaults to ``Ad_{exp(u_param)} e``.
        u_param: Exponential coordinates of the conjugating element.
        lam: Positive scaling (the R+ action).

    Raises:
        NotInCkappa: If d fails the kappa bracket relations.
    """
    if d is None:
        d = kappa_transport(ctx, u_param)
    d = np.asarray(d, dtype=float)
    check_ckappa(ctx, d)
    grid = np.asarray(grid, dtype=float)
    return InstantonPath(grid, model_values(d, grid, lam), ctx, None if u_param is None else np.asarray(u_param, float))


def fd_weights(offsets, deriv: int = 1) -> np.ndarray:
    """Finite-difference weights on integer offsets (unit spacing)."""
    o = np.asarray(offsets, dtype=float)
    k = len(o)
    v = np.vander(o, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(v, rhs)


@functools.lru_cache(maxsize=32)
def _diff_matrix(n_pts: int, order: int) -> sp.csr_matrix:
    p = order // 2
    rows, cols, vals = [], [], []
    for i in range(n_pts):
        start = min(max(i - p, 0), n_pts - 1 - order)
        offs = np.arange(start, start + order + 1) - i
        w = fd_weights(offs)
        rows += [i] * len(offs)
        cols += list(i + offs)
        vals += list(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_pts, n_pts))


def diff_matrix(grid, order: int = 8) -> sp.csr_matrix:
    """Sparse first-derivative matrix on a uniform grid."""
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-10, atol=0):
        raise ValueError("grid must be uniform")
    if order % 2 or order < 2 or len(grid) <= order:
        raise ValueError("order must be even and smaller than the number of grid points")
    return _diff_matrix(len(grid), order) / h


def nahm_rhs(ctx: LieAlgebraContext, values) -> np.ndarray:
    """``-2 A_a - [A_b, A_c]`` pointwise."""
    ua = u_algebra(ctx)
    v = np.asarray(values)
    out = -2 * v
    for a, b, c in CYC:
        out[..., a, :] -= ua.br(v[..., b, :], v[..., c, :])
    return out


def nahm_defect(path: InstantonPath, order: int = 8) -> np.ndarray:
    """``dA/dt + 2A + [A_b, A_c]`` on the grid, shape (N+1, 3, m)."""
    d = diff_matrix(path.grid, order)
    n = len(path.grid)
    dv = (d @ path.values.reshape(n, -1)).reshape(path.values.shape)
    return dv - nahm_rhs(path.ctx, path.values)


def nahm_residual(path: InstantonPath, order: int = 8) -> np.ndarray:
    """Per-point norm of the Nahm defect using finite differences of given order."""
    r = nahm_defect(path, order)
    return np.linalg.norm(r.reshape(len(path.grid), -1), axis=1)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


def _extrap_weights(x) -> np.ndarray:
    """Lagrange weights evaluating the interpolant through nodes x at 0."""
    x = np.asarray(x, dtype=float) / np.max(np.abs(x))
    w = np.ones(len(x))
    for i in range(len(x)):
        for j in range(len(x)):
            if i != j:
                w[i] *= x[j] / (x[j] - x[i])
    return w


def tail_weights(grid, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights (for m and m-1 tail points) of the zeta functional on A."""
    grid = np.asarray(grid, dtype=float)
    t = grid[-m:]
    wm = _extrap_weights(np.exp(-2 * (t - t[-1])))
    wm1 = _extrap_weights(np.exp(-2 * (t[1:] - t[-1])))
    wm1 = np.r_[0.0, wm1]
    scale = 0.5 * np.exp(2 * t)
    return wm * scale, wm1 * scale


def moment_extract(path: InstantonPath, m: int = 5, tail_tol: float = 1e-3) -> MomentTriple:
    """Tail moments ``zeta_a = lim e^{2t} A_a(t) / 2`` by Richardson extrapolation.

    Raises:
        TailDivergence: If the extrapolants with m and m-1 points disagree by
            more than ``tail_tol`` relative to the moment size, or the tail
            grows.
    """
    w, w1 = tail_weights(path.grid, m)
    tail = path.values[-m:]
    z = np.tensordot(w, tail, axes=(0, 0))
    z1 = np.tensordot(w1, tail, axes=(0, 0))
    unc = float(np.linalg.norm(z - z1))
    scale = max(1.0, float(np.linalg.norm(z)))
    g = 0.5 * np.exp(2 * path.grid[-m:])[:, None, None] * tail
    growth = np.linalg.norm(g[-1]) / max(np.linalg.norm(g[0]), 1e-300)
    if not np.all(np.isfinite(z)) or unc > tail_tol * scale or growth > 1.5:
        raise TailDivergence(f"tail does not stabilize (spread {unc:.2e})")
    return MomentTriple(path.ctx, z, unc)


def assemble_phi(mt: MomentTriple, a: int) -> LieElement:
    """``Phi_a = zeta_b + i zeta_c`` for (abc) cyclic."""
    _, b, c = cyclic_triple(a)
    return mt.element(b) + 1j * mt.element(c)


def zeta_action(ctx, zeta, element) -> np.ndarray:
    """Tensor action on ``i zeta_1 + j zeta_2 + k zeta_3``.

    Quaternions act through ``h . w = |h|^2 h w h^-1`` on the first factor,
    RotationAction through ``tau`` and ``Ad_u``, positive reals by scaling.
    """
    zeta = np.asarray(zeta, dtype=float)
    ua = u_algebra(ctx)
    if isinstance(element, Quaternion):
        out = np.zeros_like(zeta)
        for b, jb in enumerate((QI, QJ, QK)):
            img = spin_rotate(element, jb, bullet=True).imag
            out += img[:, None] * zeta[b][None, :]
        return out
    if isinstance(element, RotationAction):
        out = zeta
        if element.tau is not None:
            out = np.asarray(element.tau) @ out
        r = _u_matrix(ua, element)
        return out @ r.T if r is not None else out
    return float(element) * zeta


# ---------------------------------------------------------------------------
# Group actions on paths
# ---------------------------------------------------------------------------


def _u_matrix(ua: UAlgebra, el: RotationAction):
    if el.u_matrix is not None:
        return ua.Ad_group(el.u_matrix)
    if el.u_param is not None:
        return ua.Ad(el.u_param)
    return None


def scale_path(path: InstantonPath, lam: float, max_shift: float | None = None) -> InstantonPath:
    """R+ action ``A(t) -> A(t - log(lam) / 2)`` resampled on the same grid.

    The rescaled profile ``(1 + e^{2t}) A(t)`` is interpolated with cubic
    splines and extended by constants outside the grid, which is the model
    tail at both ends.

    Raises:
        GridUnderflow: If the shift exceeds ``max_shift`` (default T / 2).
    """
    if lam <= 0:
        raise ValueError("scaling must be positive")
    s = 0.5 * np.log(lam)
    t = path.grid
    lim = 0.5 * path.T if max_shift is None else max_shift
    if abs(s) > lim:
        raise GridUnderflow(f"shift {s:.3f} exceeds tail-model range {lim:.3f}")
    if s == 0.0:
        return InstantonPath(t.copy(), path.values.copy(), path.ctx, path.u_param, {})
    b = (1 + np.exp(2 * t))[:, None, None] * path.values
    spline = CubicSpline(t, b.reshape(len(t), -1), axis=0)
    ts = np.clip(t - s, t[0], t[-1])
    bs = spline(ts).reshape(path.values.shape)
    vals = bs / (1 + np.exp(2 * (t - s)))[:, None, None]
    return InstantonPath(t.copy(), vals, path.ctx, path.u_param, {})


def group_act(path: InstantonPath, element) -> InstantonPath:
    """Act on a path by R+ (float), H* (Quaternion) or SO(3) x U (RotationAction).

    For ``h`` in H*, ``(h . A)_w = |h|^2 <> A_{h^-1 w h}`` with
    ``A_a = A_{-j_a}``; for (tau, u), ``A_w -> Ad_u A_{tau^-1 w}``.
    """
    ua = u_algebra(path.ctx)
    if isinstance(element, Quaternion):
        hinv = element.inverse()
        vals = np.zeros_like(path.values)
        for a, ja in enumerate((QI, QJ, QK)):
            w = spin_rotate(hinv, -ja)
            coef = w.imag  # A_w = -sum_b coef_b A_b
            vals[:, a] = -np.tensordot(coef, path.values, axes=(0, 1))
        rotated = InstantonPath(path.grid, vals, path.ctx, path.u_param, {})
        return scale_path(rotated, element.norm2())
    if isinstance(element, RotationAction):
        vals = path.values
        if element.tau is not None:
            vals = np.einsum("ab,ibk->iak", np.asarray(element.tau, float), vals)
        r = _u_matrix(ua, element)
        if r is not None:
            vals = vals @ r.T
        return InstantonPath(path.grid, np.array(vals), path.ctx, None, {})
    return scale_path(path, float(element))


# ---------------------------------------------------------------------------
# Boundary-value solver
# ---------------------------------------------------------------------------


class _Problem:
    """Residual and sparse Jacobian of the stacked least-squares system."""

    def __init__(self, ctx, target_coords, cfg: SolverConfig):
        self.ctx = ctx
        self.ua = ua = u_algebra(ctx)
        self.cfg = cfg
        self.m = m = ua.m
        self.grid = make_grid(cfg.N, cfg.T)
        self.n = n = len(self.grid)
        self.f = 1.0 / (1.0 + np.exp(2 * self.grid))
        self.D = diff_matrix(self.grid, cfg.fd_order)
        self.nB = n * 3 * m
        self.nz = self.nB + m
        wts = cfg.weights
        self.w_ode = wts.get("ode", 1.0)
        self.w_bc = wts.get("boundary", 1.0)
        self.w_dec = wts.get("decay", 1.0)
        self.w_tgt = wts.get("target", 1.0)

        lin = ua.linearization(ua.e)
        ev, vec = np.linalg.eigh(0.5 * (lin + lin.T))
        self.W = vec[:, ev >= -1e-9]  # modes that must vanish at -inf
        self.Z = ua.stabilizer
        cz = ua.complex_coords(target_coords)
        self.target = np.concatenate([cz.real, cz.imag])

        k = cfg.tail_points
        wA, wA1 = tail_weights(self.grid, k)
        fa = self.f[-k:]
        self.tail_w = wA * fa  # weights on B
        self.tail_w1 = wA1 * fa
        self.DI = sp.kron(self.D, sp.eye(3 * m), format="csr")

    def split(self, z):
        return z[: self.nB].reshape(self.n, 3, self.m), z[self.nB:]

    def zeta(self, B, w=None):
        w = self.tail_w if w is None else w
        return np.tensordot(w, B[-len(w):], axes=(0, 0))

    # The conjugator is ``U_ref exp(du)`` with U_ref fixed by the initial
    # guess, so du stays small even when the solution has large coordinates.
    def set_reference(self, u_param) -> None:
        u_param = np.zeros(self.m) if u_param is None else np.asarray(u_param, float)
        self.U_ref = scipy.linalg.expm(self.ctx.matrix(self.ua.to_g(u_param)))
        self.R_ref = self.ua.Ad(u_param)

    def u_param(self, du) -> np.ndarray:
        u = self.U_ref @ scipy.linalg.expm(self.ctx.matrix(self.ua.to_g(du)))
        lg = scipy.linalg.logm(u)
        lg = lg - np.trace(lg) / len(lg) * np.eye(len(lg))  # drop a central factor
        return self.ua.from_g(self.ctx.coords(lg))

    def transport(self, du) -> np.ndarray:
        return self.ua.e @ (self.R_ref @ self.ua.Ad(du)).T

    def _bc(self, B0, du):
        r = self.R_ref @ self.ua.Ad(du)
        return self.W.T @ (B0 @ r - self.ua.e).ravel()

    def collocation(self, B) -> np.ndarray:
        """Discrete Nahm residual in the solver variables."""
        ode = (self.D @ B.reshape(self.n, -1)).reshape(B.shape)
        src = 2 * B
        for a, b, c in CYC:
            src[:, a] += self.ua.br(B[:, b], B[:, c])
        return ode + self.f[:, None, None] * src

    def residual(self, z):
        B, u = self.split(z)
        m = self.m
        ode = self.collocation(B)
        zt = self.zeta(B)
        parts = [
            self.w_ode * ode.ravel(),
            self.w_bc * self._bc(B[0], u),
            self.w_bc * (self.Z.T @ u),
            self.w_dec * (zt - self.zeta(B, self.tail_w1)).ravel(),
            self.w_tgt * (np.concatenate([zt[1], zt[2]]) - self.target),
        ]
        del m
        return np.concatenate(parts)

    def jacobian(self, z):
        B, u = self.split(z)
        ua, m, n = self.ua, self.m, self.n
        blocks = np.zeros((n, 3 * m, 3 * m))
        for a, b, c in CYC:
            sa, sb, sc = slice(a * m, (a + 1) * m), slice(b * m, (b + 1) * m), slice(c * m, (c + 1) * m)
            blocks[:, sa, sa] += 2 * np.eye(m)
            # d[B_b, B_c]/dB_b = -ad(B_c), d/dB_c = ad(B_b)
            blocks[:, sa, sb] += np.einsum("tj,ijk->tki", B[:, c], ua.C)
            blocks[:, sa, sc] += np.einsum("ti,ijk->tkj", B[:, b], ua.C)
        blocks *= self.f[:, None, None]
        bd = sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(self.nB, self.nB))
        j_ode = self.w_ode * (self.DI + bd)
        j_ode = sp.hstack([j_ode, sp.csr_matrix((self.nB, m))])

        # boundary rows: dense in B0 and u
        r = self.R_ref @ ua.Ad(u)
        jb0 = self.W.T @ np.kron(np.eye(3), r.T)
        eps = 1e-7
        ju = np.column_stack([
            (self._bc(B[0], u + eps * e) - self._bc(B[0], u - eps * e)) / (2 * eps) for e in np.eye(m)
        ])
        nb = self.W.shape[1]
        j_bc = sp.lil_matrix((nb, self.nz))
        j_bc[:, : 3 * m] = jb0
        j_bc[:, self.nB:] = ju
        j_g = sp.hstack([sp.csr_matrix((self.Z.shape[1], self.nB)), sp.csr_matrix(self.Z.T)])

        k = len(self.tail_w)
        off = (n - k) * 3 * m

        def tail_rows(w, comps):
            rows = []
            for a in comps:
                blk = sp.lil_matrix((m, self.nz))
                for i in range(k):
                    col = off + (i * 3 + a) * m
                    blk[:, col: col + m] = w[i] * np.eye(m)
                rows.append(blk)
            return sp.vstack(rows)

        j_dec = tail_rows(self.tail_w - self.tail_w1, (0, 1, 2))
        j_tgt = tail_rows(self.tail_w, (1, 2))
        return sp.vstack([
            j_ode,
            self.w_bc * j_bc.tocsr(),
            self.w_bc * j_g,
            self.w_dec * j_dec,
            self.w_tgt * j_tgt,
        ]).tocsc()

    def pack(self, path: InstantonPath) -> np.ndarray:
        if len(path.grid) != self.n or not np.allclose(path.grid, self.grid):
            raise ValueError("warm start must live on the solver grid")
        B = path.values / self.f[:, None, None]
        self.set_reference(path.u_param)
        return np.concatenate([B.ravel(), np.zeros(self.m)])

    def to_path(self, z) -> InstantonPath:
        B, du = self.split(z)
        vals = self.f[:, None, None] * B
        return InstantonPath(self.grid.copy(), vals, self.ctx, self.u_param(du))


def levenberg_marquardt(fun, jac, z0, tol_fn, max_iter: int = 60, damping: float = 1e-3,
                        watchdog: int = 4):
    """Gauss-Newton with a watchdog, falling back to Levenberg-Marquardt.

    Full Gauss-Newton steps are taken even when the cost rises, for at most
    ``watchdog`` consecutive steps without a new best cost; the least-squares
    cost is a poor merit function for stiff boundary value problems and the
    undamped iteration usually lands in the quadratic regime in a few steps.
    When the budget runs out the iterate returns to the best point seen and
    the damped, monotone iteration takes over.

    Args:
        fun: Residual map.
        jac: Sparse Jacobian map.
        z0: Initial point.
        tol_fn: Callback returning True when z is acceptable.
        max_iter: Iteration cap.
        damping: Initial damping factor for the monotone phase.
        watchdog: Non-monotone step budget (0 disables the Newton phase).

    Returns:
        (z, iterations, converged)
    """
    z = np.array(z0, dtype=float)
    r = fun(z)
    cost = r @ r
    best_z, best_cost = z.copy(), cost
    newton, stale = watchdog > 0, 0
    mu = damping
    for it in range(max_iter + 1):
        if tol_fn(z):
            return z, it, True
        if it == max_iter:
            break
        j = jac(z)
        jtj = (j.T @ j).tocsc()
        g = j.T @ r
        diag = jtj.diagonal()
        diag = np.where(diag > 0, diag, 1.0)
        if newton:
            step = spla.spsolve(jtj + sp.diags(1e-14 * diag), -g, permc_spec="MMD_AT_PLUS_A")
            zn = z + step
            rn = fun(zn)
            cn = rn @ rn
            if np.isfinite(cn):
                z, r, cost = zn, rn, cn
                if cost < best_cost:
                    best_z, best_cost, stale = z.copy(), cost, 0
                else:
                    stale += 1
                if stale < watchdog:
                    continue
            newton = False
            z, cost = best_z.copy(), best_cost
            r = fun(z)
            continue
        accepted = False
        for _ in range(12):
            lhs = jtj + sp.diags(mu * diag)
            step = spla.spsolve(lhs, -g, permc_spec="MMD_AT_PLUS_A")
            zn = z + step
            rn = fun(zn)
            cn = rn @ rn
            if np.isfinite(cn) and cn < cost:
                z, r, cost = zn, rn, cn
                mu = max(mu / 10.0, 1e-12)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
    return z, it, bool(tol_fn(z))


def _fit_transport(ctx, target_coords, seed: int = 0):
    """Find (lam, u) with ``lam Ad_{exp u} (e_2 + i e_3) / 2`` closest to the target."""
    ua = u_algebra(ctx)
    phi0 = 0.5 * (ua.to_g(ua.e[1]) + 1j * ua.to_g(ua.e[2]))
    tgt = np.asarray(target_coords, dtype=complex)
    scale = np.linalg.norm(tgt) / np.linalg.norm(phi0)

    def res(x):
        r = ua.Ad(x[1:])
        e2, e3 = ua.e[1] @ r.T, ua.e[2] @ r.T
        v = 0.5 * np.exp(x[0]) * (ua.to_g(e2) + 1j * ua.to_g(e3)) - tgt
        return np.concatenate([v.real, v.imag]) / max(np.linalg.norm(tgt), 1e-300)

    rng = np.random.default_rng(seed)
    best = None
    for k in range(24):
        u0 = np.zeros(ua.m) if k == 0 else rng.normal(scale=1.5, size=ua.m)
        sol = scipy.optimize.least_squares(res, np.r_[np.log(scale), u0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
        if best.cost < 1e-26:
            break
    return float(np.exp(best.x[0])), best.x[1:], float(np.sqrt(2 * best.cost))


def _initial_guess(prob: "_Problem", target: LieElement, cfg: SolverConfig, mode: str):
    ctx, ua = prob.ctx, prob.ua
    lam, u0, fit = _fit_transport(ctx, target.coordinates, cfg.seed)
    if mode == "scaled":
        u0 = np.zeros(ua.m)
        phi0 = 0.5 * (ua.to_g(ua.e[1]) + 1j * ua.to_g(ua.e[2]))
        lam = np.linalg.norm(target.coordinates) / np.linalg.norm(phi0)
    prob.set_reference(u0)
    u0 = np.zeros(ua.m)
    d = prob.transport(u0)
    ex = np.exp(2 * prob.grid)
    B0 = (lam * (1 + ex) / (lam + ex))[:, None, None] * d[None]
    if cfg.init_noise:
        rng = np.random.default_rng(cfg.seed)
        B0 = B0 + cfg.init_noise * rng.normal(size=B0.shape)
        u0 = u0 + cfg.init_noise * rng.normal(size=u0.shape)
    return np.concatenate([B0.ravel(), u0]), fit


def solve_bvp(target: LieElement, config: SolverConfig | None = None, initial: InstantonPath | None = None) -> InstantonPath:
    """Find the instanton whose ``Phi_1`` moment equals a real nilpotent target.

    The path is discretized on ``[-T, T]`` and fitted by Levenberg-Marquardt
    to the stacked residual: collocation of the Nahm system, closeness at
    ``-T`` to ``Ad_u e`` (only modes that cannot decay there are penalized, u
    is an unknown orthogonal to the stabilizer of e), agreement of the
    extrapolated tail moments, and ``Phi_1 = target``.

    Args:
        target: Real nilpotent element ``w``.
        config: Solver settings.
        initial: Optional converged path on the same grid used as warm start.

    Raises:
        TargetNotReal: If the target is not fixed by nu.
        TargetNotNilpotent: If the target is not nilpotent.
        NoConvergence: If the iteration cap is reached, also after one
            restart from the scaled model with a doubled iteration budget.
    """
    cfg = config or SolverConfig()
    ctx = target.ctx
    if not ctx.is_real(target.coordinates):
        raise TargetNotReal("target must lie in the real form")
    if not is_nilpotent(target):
        raise TargetNotNilpotent("target must be nilpotent")
    prob = _Problem(ctx, target.coordinates, cfg)
    ua = prob.ua

    if initial is not None:
        z0 = prob.pack(initial)
        fit = float("nan")
    else:
        z0, fit = _initial_guess(prob, target, cfg, cfg.init)
    def report(z):
        path = prob.to_path(z)
        B, u = prob.split(z)
        zt = prob.zeta(B)
        ode = float(np.max(nahm_residual(path, cfg.fd_order)))
        tgt = float(np.max(np.abs(np.concatenate([zt[1], zt[2]]) - prob.target)))
        bc = float(np.max(np.abs(prob._bc(B[0], u)))) if prob.W.shape[1] else 0.0
        gap = float(np.linalg.norm(path.values[0] - prob.transport(u)))
        dec = float(np.max(np.abs(zt - prob.zeta(B, prob.tail_w1))))
        # collocation residual rescaled from B to A units
        col = float(np.max(np.abs(prob.f[:, None, None] * prob.collocation(B))))
        return {"ode": ode, "collocation": col, "target": tgt, "boundary": bc, "boundary_gap": gap, "decay": dec}

    def ok(z):
        r = report(z)
        return r["collocation"] <= cfg.tol and r["target"] <= cfg.tol and r["boundary"] <= cfg.bc_tol

    def cost(z):
        r = prob.residual(z)
        return float(r @ r)

    z, iters, conv = levenberg_marquardt(prob.residual, prob.jacobian, z0, ok, cfg.max_iter, cfg.damping)
    if not conv and initial is None and cfg.init != "scaled":
        z1, _ = _initial_guess(prob, target, cfg, "scaled")
        z2, more, conv = levenberg_marquardt(prob.residual, prob.jacobian, z1, ok, 2 * cfg.max_iter, cfg.damping)
        iters += more
        if conv or cost(z2) < cost(z):
            z = z2
    res = report(z)
    res["iterations"] = iters
    res["init_fit"] = fit
    path = prob.to_path(z)
    path.residuals = res
    if not conv:
        raise NoConvergence(f"solver did not converge in {iters} iterations: {res}")
    return path


def sensitivity_operator(path: InstantonPath, target, config: SolverConfig | None = None):
    """Factorized linear response of the moments at a converged solve.

    Returns a callable mapping an iterable of g-coordinate target
    directions to the array (k, 3, m) of moment derivatives.  The normal
    matrix is factorized once, so repeated calls are cheap.
    """
    cfg = config or SolverConfig()
    prob = _Problem(path.ctx, target.coordinates, cfg)
    z = prob.pack(path)
    j = prob.jacobian(z).tocsr()
    lu = spla.splu((j.T @ j).tocsc(), permc_spec="MMD_AT_PLUS_A")
    nr = j.shape[0]

    def apply(directions) -> np.ndarray:
        out = []
        for dw in directions:
            cz = prob.ua.complex_coords(np.asarray(dw, dtype=complex))
            dr = np.zeros(nr)
            dr[-2 * prob.m:] = -prob.w_tgt * np.concatenate([cz.real, cz.imag])
            dz = -lu.solve(j.T @ dr)
            dB, _ = prob.split(dz)
            out.append(prob.zeta(dB))
        return np.array(out)

    return apply


def moment_sensitivity(path: InstantonPath, target, directions, config: SolverConfig | None = None) -> np.ndarray:
    """Derivative of the tail moments of the solution with respect to the target.

    Linearizes the stacked residual at a converged path and solves the
    Gauss-Newton normal equations once per target direction, reusing one
    factorization.

    Args:
        path: Converged output of ``solve_bvp`` for ``target``.
        target: The target used for that solve.
        directions: Iterable of g-coordinate vectors (tangent to the real orbit).
        config: The config used for the solve.

    Returns:
        Array (k, 3, m) of moment derivatives in u-coordinates.
    """
    return sensitivity_operator(path, target, config)(directions)


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


def model_check(ctx: LieAlgebraContext, N: int = 400, T: float = 8.0, order: int = 8, tol: float = 1e-8):
    """Residual, tail moments and nilpotency of the model instanton."""
    rep = VerificationReport(f"nahm-model-{ctx.name}")
    path = model_instanton(ctx, make_grid(N, T))
    rep.add("nahm.model_residual", nahm_residual(path, order), tol)
    mt = moment_extract(path)
    rep.add("nahm.model_moment", mt.zeta - 0.5 * u_algebra(ctx).e, tol)
    for a in (1, 2, 3):
        phi = assemble_phi(mt, a).matrix
        n = len(phi)
        rep.add("nahm.model_nilpotent", np.linalg.matrix_power(phi, n), 1e-10)
    rep.note("nahm.model_moment", mt.uncertainty)
    rep.set_environment(None, {"N": N, "T": T, "order": order, "tol": tol})
    return rep


def _random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


def equivariance_check(ctx: LieAlgebraContext, samples: int = 20, seed: int = 0, N: int = 400, T: float = 8.0, tol: float = 1e-7):
    """``zeta(g . A) = g . zeta(A)`` for R+, H* and SO(3) x U on rotated models."""
    rng = np.random.default_rng(seed)
    rep = VerificationReport(f"nahm-equivariance-{ctx.name}")
    ua = u_algebra(ctx)
    grid = make_grid(N, T)
    for _ in range(samples):
        path = model_instanton(ctx, grid, u_param=rng.normal(size=ua.m))
        z0 = moment_extract(path).zeta
        lam = float(np.exp(rng.uniform(-0.7, 0.7)))
        rep.add("nahm.scale_equivariance", moment_extract(group_act(path, lam)).zeta - lam * z0, tol)
        h = Quaternion(*rng.normal(size=4))
        h = h * (np.exp(rng.uniform(-0.35, 0.35)) / h.norm())
        got = moment_extract(group_act(path, h)).zeta
        rep.add("nahm.quaternion_equivariance", got - zeta_action(ctx, z0, h), tol)
        el = RotationAction(tau=_random_rotation(rng), u_param=rng.normal(size=ua.m))
        got = moment_extract(group_act(path, el)).zeta
        rep.add("nahm.rotation_equivariance", got - zeta_action(ctx, z0, el), tol)
    rep.set_environment(seed, {"samples": samples, "N": N, "T": T, "tol": tol})
    return rep
