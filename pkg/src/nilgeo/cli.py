"""Command-line verification harness.

``nilgeo verify <fixture>`` runs a suite and prints a JSON report,
``nilgeo solve-nahm <fixture> --target F`` inverts the Nahm moment map and
``nilgeo diff A B`` compares two reports.  A JSON config file may supply any
flag; flags given on the command line win.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or usage
error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import flathk, nahm, orbitgeom, vergne
from .algebra import LieAlgebraContext, hermitian_center, load_fixture
from .errors import (
    ConfigInvalid,
    FixtureInvalid,
    NilgeoError,
    NoConvergence,
    NotHermitian,
    SuiteMismatch,
    TailDivergence,
    UnknownFixture,
    UnknownSuite,
)
from .report import VerificationReport

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

ALGEBRA_SUITES = ("nahm", "vergne", "kahler", "kv", "theorem94", "cotangent", "kks", "fixtures")
SUITES = ("flat", "all") + ALGEBRA_SUITES

# Default sample counts for each suite and provider method.
DEFAULT_SAMPLES = {
    "hermitian": {"nahm": 20, "vergne": 200, "kahler": 200, "kv": 10, "theorem94": 50,
                  "cotangent": 20, "kks": 100, "fixtures": 1000, "flat": 100},
    "nahm": {"nahm": 20, "vergne": 5, "kahler": 20, "kv": 3, "theorem94": 3,
             "cotangent": 2, "kks": 100, "fixtures": 1000, "flat": 100},
}


@dataclass
class SuiteConfig:
    """Everything that determines a verification run."""

    fixture: str
    suite: str | None = None
    samples: int | None = None
    seed: int = 0
    h: float | None = None
    n: int = 1
    labels: int = 20
    method: str | None = None
    solver: dict = field(default_factory=dict)
    out: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys: {sorted(extra)}")
        if "fixture" not in data:
            raise ConfigInvalid("config needs a fixture")
        try:
            cfg = cls(**data)
            if cfg.samples is not None and int(cfg.samples) < 1:
                raise ValueError("samples must be positive")
            if cfg.method not in (None, "hermitian", "nahm"):
                raise ValueError(f"unknown method {cfg.method!r}")
            nahm.SolverConfig.from_dict(cfg.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        return cfg


def _is_hermitian(ctx: LieAlgebraContext) -> bool:
    try:
        hermitian_center(ctx.split)
    except NotHermitian:
        return False
    return True


def _resolve(cfg: SuiteConfig):
    fixture = cfg.fixture.lower()
    if fixture == "flat":
        suite = cfg.suite or "flat"
        if suite not in ("flat", "all"):
            raise UnknownSuite(f"suite {suite!r} does not apply to the flat model")
        return None, "flat", None
    suite = cfg.suite or "all"
    if suite not in SUITES:
        raise UnknownSuite(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if suite == "flat":
        raise UnknownSuite("the flat suite runs on the 'flat' fixture")
    try:
        ctx = load_fixture(cfg.fixture)
    except FixtureInvalid as exc:
        raise ConfigInvalid(str(exc)) from exc
    method = cfg.method or ("hermitian" if _is_hermitian(ctx) else "nahm")
    return ctx, suite, method


def _samples(cfg: SuiteConfig, suite: str, method: str) -> int:
    return int(cfg.samples) if cfg.samples is not None else DEFAULT_SAMPLES[method][suite]


def _run_one(ctx, suite: str, method: str, cfg: SuiteConfig, provider=None) -> VerificationReport:
    n = _samples(cfg, suite, method)
    seed = cfg.seed
    if suite == "nahm":
        solver = nahm.SolverConfig.from_dict(cfg.solver)
        rep = nahm.model_check(ctx, solver.N, solver.T, solver.fd_order)
        return rep.merge(nahm.equivariance_check(ctx, n, seed, solver.N, solver.T))
    if suite == "kks":
        return orbitgeom.kks_check(ctx, n, seed, **({"h": cfg.h} if cfg.h else {}))
    if suite == "fixtures":
        return orbitgeom.fixture_check(n, seed)
    prov = provider or vergne.kahler_structure(ctx, method, nahm.SolverConfig.from_dict(cfg.solver))
    hkw = {"h": cfg.h} if cfg.h else {}
    if suite == "vergne":
        return vergne.vergne_check(prov, n, seed, 1e-10 if method == "hermitian" else 1e-4)
    if suite == "kahler":
        return vergne.kahler_check(prov, n, min(n, 50), seed, **hkw)
    if suite == "kv":
        return vergne.kv_orbit_check(prov, n, seed)
    if suite == "theorem94":
        return vergne.theorem94_check(prov, samples=n, seed=seed, **hkw)
    if suite == "cotangent":
        return vergne.cotangent_embedding_check(prov, n, seed, **hkw)
    raise UnknownSuite(suite)


def run_suite(cfg: SuiteConfig) -> VerificationReport:
    """Run the configured suite and return its report.

    Raises:
        UnknownFixture, UnknownSuite, ConfigInvalid.
    """
    ctx, suite, method = _resolve(cfg)
    if suite == "flat":
        n = _samples(cfg, "flat", "hermitian")
        return flathk.verify_cone_axioms(n, cfg.h or 1e-4, cfg.n, cfg.labels, cfg.seed)
    if suite != "all":
        rep = _run_one(ctx, suite, method, cfg)
        rep.suite = f"{suite}-{ctx.name}-{method}"
        return rep
    rep = VerificationReport(f"all-{ctx.name}-{method}")
    prov = vergne.kahler_structure(ctx, method, nahm.SolverConfig.from_dict(cfg.solver))
    for s in ALGEBRA_SUITES:
        rep.merge(_run_one(ctx, s, method, cfg, prov))
    rep.set_environment(cfg.seed, _env_config(cfg))
    return rep


def _env_config(cfg: SuiteConfig) -> dict:
    d = asdict(cfg)
    d.pop("out")
    return d


def report_diff(a: VerificationReport, b: VerificationReport) -> dict:
    """Per-check residual deltas between two reports of the same suite.

    A check is flagged when its verdict or tolerance changed, or when it is
    present in only one report.  Identical reports give an empty diff.

    Raises:
        SuiteMismatch: If the suite ids differ.
    """
    if a.suite != b.suite:
        raise SuiteMismatch(f"cannot compare suite {a.suite!r} with {b.suite!r}")
    changes, flagged = [], []
    for name in sorted(set(a.records) | set(b.records)):
        ra, rb = a.records.get(name), b.records.get(name)
        if ra is None or rb is None:
            flagged.append(name)
            changes.append({"name": name, "only_in": "a" if rb is None else "b"})
            continue
        if ra.to_dict() == rb.to_dict():
            continue
        changes.append({
            "name": name,
            "residual_a": ra.residual,
            "residual_b": rb.residual,
            "delta": rb.residual - ra.residual,
            "tolerance_a": ra.tolerance,
            "tolerance_b": rb.tolerance,
            "pass_a": ra.passed,
            "pass_b": rb.passed,
        })
        if ra.passed != rb.passed or ra.tolerance != rb.tolerance:
            flagged.append(name)
    return {"suite": a.suite, "changes": changes, "flagged": flagged}


# ---------------------------------------------------------------------------
# solve-nahm
# ---------------------------------------------------------------------------


def parse_target(data, ctx: LieAlgebraContext):
    """Target element from JSON: a matrix or coordinates, entries real or [re, im] pairs.

    Accepted shapes are a bare matrix, ``{"matrix": ...}`` or
    ``{"coordinates": [...]}`` over the fixture basis.

    Raises:
        ConfigInvalid: If the data cannot be read as an element of the algebra.
    """
    try:
        if isinstance(data, dict) and "coordinates" in data:
            c = np.asarray(data["coordinates"], dtype=float)
            if c.shape == (ctx.dim, 2):
                c = c[:, 0] + 1j * c[:, 1]
            elif c.shape != (ctx.dim,):
                raise ValueError(f"expected {ctx.dim} coordinates")
            return ctx.from_coords(c)
        m = data["matrix"] if isinstance(data, dict) else data
        a = np.asarray(m, dtype=float)
        if a.shape == (ctx.n, ctx.n, 2):
            a = a[..., 0] + 1j * a[..., 1]
        elif a.shape != (ctx.n, ctx.n):
            raise ValueError(f"expected a {ctx.n}x{ctx.n} matrix")
        return ctx.element(a)
    except (KeyError, TypeError, ValueError, NilgeoError) as exc:
        raise ConfigInvalid(f"malformed target: {exc}") from exc


def solve_nahm(ctx: LieAlgebraContext, target, config: nahm.SolverConfig) -> tuple[dict, dict]:
    """Solve for the instanton through ``target``; return (path JSON, summary)."""
    path = nahm.solve_bvp(target, config)
    mt = nahm.moment_extract(path, config.tail_points)
    V = -mt.zeta1 + 1j * mt.zeta3
    phi = nahm.assemble_phi(mt, 1)
    summary = {
        "fixture": ctx.name,
        "target": _cjson(target.matrix),
        "zeta": [_cjson(mt.element(a).matrix) for a in (1, 2, 3)],
        "vergne_image": _cjson(V.matrix),
        "residuals": {k: float(v) for k, v in path.residuals.items()},
        "moment_uncertainty": mt.uncertainty,
        "phi1_error": float(np.abs(phi.matrix - target.matrix).max()),
        "config": config.to_dict(),
    }
    return path.to_dict(), summary


def _cjson(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a JSON object")
    return data


def _merge(base: dict, args: argparse.Namespace, keys) -> dict:
    out = dict(base)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nilgeo", description="Verification harness for nilpotent orbit geometry.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("fixture", help="'flat', a shipped fixture name or a fixture JSON path")
    v.add_argument("--suite", choices=SUITES)
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--h", type=float, help="finite-difference step")
    v.add_argument("--n", type=int, help="quaternionic dimension of the flat model")
    v.add_argument("--labels", type=int, help="sphere labels for the flat model")
    v.add_argument("--method", choices=("hermitian", "nahm"))
    v.add_argument("--config", help="JSON config file; flags win")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.add_argument("--summary", action="store_true", help="print one line per check to stderr")

    s = sub.add_parser("solve-nahm", help="solve the Nahm boundary value problem for a target")
    s.add_argument("fixture")
    s.add_argument("--target", help="JSON file with the target element")
    s.add_argument("--N", type=int)
    s.add_argument("--T", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", dest="max_iter", type=int)
    s.add_argument("--damping", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config", help="JSON config file; flags win")
    s.add_argument("--out", help="write the path JSON here")
    s.add_argument("--summary-out", dest="summary_out", help="write the summary here instead of stdout")

    d = sub.add_parser("diff", help="compare two reports of the same suite")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--out")
    return p


def _cmd_verify(args) -> int:
    data = _merge(_load_config(args.config), args, ("suite", "samples", "seed", "h", "n", "labels", "method", "out"))
    data["fixture"] = args.fixture
    cfg = SuiteConfig.from_dict(data)
    rep = run_suite(cfg)
    if not rep.environment:
        rep.set_environment(cfg.seed, _env_config(cfg))
    _write(rep.to_json(), cfg.out)
    if args.summary:
        sys.stderr.write("\n".join(rep.summary_lines()) + "\n")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _cmd_solve(args) -> int:
    data = _load_config(args.config)
    solver = dict(data.pop("solver", {}))
    solver = _merge(solver, args, ("N", "T", "tol", "max_iter", "damping", "seed"))
    target_file = args.target or data.pop("target", None)
    out = args.out or data.pop("out", None)
    summary_out = args.summary_out or data.pop("summary_out", None)
    if data:
        raise ConfigInvalid(f"unknown config keys: {sorted(data)}")
    if not target_file:
        raise ConfigInvalid("solve-nahm needs --target")
    try:
        config = nahm.SolverConfig.from_dict(solver)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    ctx = load_fixture(args.fixture)
    try:
        raw = json.loads(Path(target_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read target {target_file}: {exc}") from exc
    target = parse_target(raw, ctx)
    path, summary = solve_nahm(ctx, target, config)
    if out:
        _write(_dump(path), out)
    _write(_dump(summary), summary_out)
    return EXIT_PASS


def _cmd_diff(args) -> int:
    reps = []
    for f in (args.a, args.b):
        try:
            reps.append(VerificationReport.from_dict(json.loads(Path(f).read_text(encoding="utf-8"))))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigInvalid(f"cannot read report {f}: {exc}") from exc
    diff = report_diff(*reps)
    _write(_dump(diff), args.out)
    return EXIT_FAIL if diff["flagged"] else EXIT_PASS


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    handlers = {"verify": _cmd_verify, "solve-nahm": _cmd_solve, "diff": _cmd_diff}
    try:
        return handlers[args.command](args)
    except (ConfigInvalid, UnknownFixture, UnknownSuite, SuiteMismatch) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (NoConvergence, TailDivergence) as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    except NilgeoError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
