"""Verification reports: named residuals with tolerances and verdicts."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__

# Short descriptions attached to each check family.  Keys are the prefix of a
# check name up to the first '/'.
ANCHORS = {
    "flat.quaternion": "J_a J_b = eps_abc J_c on H^n",
    "flat.metric": "g(u, v) = omega_a(u, J_a v)",
    "flat.recover": "omega_c(u, v) = eps_abc omega_a(J_b u, v)",
    "flat.holomorphic": "Omega_a(J_a u, v) = i Omega_a(u, v)",
    "flat.rightmult": "right quaternion multiplication preserves (g, J_a)",
    "flat.homogeneity": "omega_q scales with weight two under dilation",
    "flat.euler_omega": "L_eta omega_q = 2 omega_q",
    "flat.euler_metric": "L_eta g = 2 g",
    "flat.rotation_omega": "L_theta_a omega_b = -2 eps_abc omega_c",
    "flat.rotation_metric": "L_theta_a g = 0",
    "flat.rotation_J": "L_theta_a J_b = -2 eps_abc J_c, L_eta J_b = 0",
    "flat.potential": "dd^c_q rho = omega_q",
    "flat.euler_gradient": "eta contracted with g equals d rho",
    "flat.moment": "theta_q contracted with omega_q equals -d rho",
    "flat.weight": "fitted cone weight k in L_eta omega = k omega",
    "nahm.model_residual": "model path solves the Nahm system",
    "nahm.model_moment": "tail moments of the model path are d/2",
    "nahm.model_nilpotent": "Phi_1 of the model path is nilpotent",
    "nahm.scale_equivariance": "zeta(lambda . A) = lambda zeta(A)",
    "nahm.quaternion_equivariance": "zeta(h . A) = h . zeta(A)",
    "nahm.rotation_equivariance": "zeta((tau, u) . A) = (tau, u) . zeta(A)",
    "nahm.solver": "inverse problem Phi_1(A) = w",
    "vergne.triple_sum": "w = mu(w) + V/2 + conj(V)/2",
    "vergne.nilpotent": "Vergne image is nilpotent and lies in p",
    "vergne.equivariance": "V(Ad_k w) = Ad_k V(w)",
    "vergne.k_vanishing": "(x, V(w)) = 0 for x in k",
    "kahler.J_square": "J^2 = -1 on tangent spaces",
    "kahler.J_invariance": "sigma(Ju, Jv) = sigma(u, v)",
    "kahler.positivity": "sigma(u, Ju) > 0",
    "kahler.potential": "i d dbar of the Kaehler potential 2 rho_0 equals sigma",
    "kahler.homogeneity": "rho_0(lambda w) = lambda rho_0(w)",
    "kv.moment": "theta_KV contracted with sigma equals -d rho_0",
    "kv.holomorphic_weight": "{rho_0, f^v} = i f^v",
    "kv.flow": "Hamiltonian flow of rho_0 is Ad exp(t x0)",
    "kv.rotation": "f^v(Ad exp(t x0) w) = e^{it} f^v(w)",
    "kv.splitting": "{rho_0, phi^v} independent of the phi-span",
    "hamiltonian.real_part": "phi^v = Re f^v",
    "hamiltonian.decomposition": "f^v = phi^v - i {rho_0, phi^v}",
    "hamiltonian.pluriharmonic": "d d^c phi^v = 0",
    "cotangent.pairing": "<beta, eta^x> = mu^x",
    "cotangent.J_pairing": "<beta, J eta^x> = 0",
    "cotangent.symplectic": "d beta = sigma",
    "cotangent.moment": "s = (V, mu) compatibility",
    "kks.homomorphism": "{phi^x, phi^y} = phi^[x,y]",
    "kks.moment": "xi contracted with sigma plus d phi^x vanishes, xi = -[x, w]",
    "fixture.sl2_cover": "pi(1 + j) and real-locus characterisation",
    "fixture.cone": "cone double cover round trip",
}


def anchor_for(name: str) -> str:
    return ANCHORS.get(name.split("/")[0], "")


@dataclass
class CheckRecord:
    name: str
    residual: float
    tolerance: float
    anchor: str = ""
    mode: str = "le"  # 'le': residual <= tol; 'gt': residual > tol

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.residual):
            return False
        if self.mode == "gt":
            return self.residual > self.tolerance
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_anchor": self.anchor,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "mode": self.mode,
            "pass": self.passed,
        }


@dataclass
class VerificationReport:
    """Ordered collection of check records.

    Adding a record under an existing name keeps the worst residual, so a
    check evaluated at many sample points reports its maximum.
    """

    suite: str
    records: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def add(self, name: str, residual, tolerance: float, mode: str = "le") -> CheckRecord:
        vals = np.asarray(residual).ravel()
        if mode == "gt":
            residual = float(np.min(vals.real)) if vals.size else float("nan")
        else:
            residual = float(np.max(np.abs(vals))) if vals.size else 0.0
        old = self.records.get(name)
        if old is not None:
            if mode == "gt":
                residual = min(residual, old.residual)
            else:
                residual = max(residual, old.residual)
        rec = CheckRecord(name, residual, float(tolerance), anchor_for(name), mode)
        self.records[name] = rec
        return rec

    def add_min(self, name: str, values, threshold: float) -> CheckRecord:
        """Record a positivity check: passes when every value exceeds threshold."""
        return self.add(name, values, threshold, mode="gt")

    def note(self, key: str, value) -> None:
        self.notes[key] = value

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        for rec in other.records.values():
            self.records[rec.name] = rec
        self.notes.update(other.notes)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records.values())

    def failures(self) -> list[str]:
        return sorted(n for n, r in self.records.items() if not r.passed)

    def __getitem__(self, name: str) -> CheckRecord:
        return self.records[name]

    def set_environment(self, seed=None, config=None) -> None:
        cfg = json.dumps(config or {}, sort_keys=True, default=str)
        self.environment = {
            "seed": seed,
            "config_hash": hashlib.sha256(cfg.encode()).hexdigest()[:16],
            "versions": {
                "nilgeo": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
        }

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "pass": self.passed,
            "checks": [self.records[k].to_dict() for k in sorted(self.records)],
            "notes": {k: _plain(v) for k, v in sorted(self.notes.items())},
            "environment": self.environment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        rep = cls(data["suite"])
        for c in data.get("checks", []):
            rep.records[c["name"]] = CheckRecord(
                c["name"], c["residual"], c["tolerance"], c.get("paper_anchor", ""), c.get("mode", "le")
            )
        rep.notes = dict(data.get("notes", {}))
        rep.environment = dict(data.get("environment", {}))
        return rep

    def summary_lines(self) -> list[str]:
        out = []
        for k in sorted(self.records):
            r = self.records[k]
            op = ">" if r.mode == "gt" else "<="
            tag = "PASS" if r.passed else "FAIL"
            out.append(f"{tag}  {k}: {r.residual:.3e} {op} {r.tolerance:.1e}")
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v
