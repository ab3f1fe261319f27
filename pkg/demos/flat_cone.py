"""The flat hyperkaehler cone H^n as a calibration target.

Every tensor on H^n has constant coefficients, so the finite-difference
machinery used on curved orbits can be checked against exact answers here.
The script verifies the cone axioms and prints the fitted cone weight.
"""

import numpy as np

from nilgeo import flathk
from nilgeo.algebra import fibonacci_sphere

# J_q for a sphere label q squares to -1 and pairs with omega_q to give the metric
q = fibonacci_sphere(5)[2]
jq, oq = flathk.j_matrix(q, 1), flathk.omega_matrix(q, 1)
print("label", np.round(q.as_array(), 4))
print("|J_q^2 + 1| =", np.abs(jq @ jq + np.eye(4)).max())
print("|omega_q J_q - g| =", np.abs(oq @ jq - np.eye(4)).max())

# dd^c rho reproduces omega_q for every label, with rho = |p|^2 / 2
p = np.random.default_rng(1).normal(size=4)
ddc = flathk.fd_ddc(flathk.potential_rho, jq, p, 1e-4)
print("|dd^c rho - omega_q| =", np.abs(ddc - oq).max())

for n in (1, 2):
    rep = flathk.verify_cone_axioms(samples=50, labels=20, n=n)
    print(f"H^{n}: {len(rep.records)} checks, passed={rep.passed}, weight={rep.notes['flat.weight']:.12f}")
