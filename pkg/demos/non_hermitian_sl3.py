"""A non-Hermitian example: the principal real orbit of sl(3, R).

Without a Hermitian centre there is no closed-form Vergne map, so the complex
structure comes from the linear response of the Nahm boundary value problem.
The Hamiltonian of the circle action then no longer keeps the span of the
linear Hamiltonians stable, which shows up as a jump in rank.  Runs in about
half a minute.
"""

import time

import numpy as np

from nilgeo import orbitgeom as og
from nilgeo import vergne
from nilgeo.algebra import load_fixture

ctx = load_fixture("sl3R")
prov = vergne.kahler_structure(ctx, method="nahm")
pts = og.sample_orbit(ctx, 10, seed=0, scale=0.15)

t0 = time.perf_counter()
jm, basis = prov.J_matrix(pts[0])
print(f"real tangent dimension {len(jm)}, |J^2 + 1| = {np.abs(jm @ jm + np.eye(len(jm))).max():.1e}")
res = vergne.vergne_general(pts[0]).residuals
print(f"triple sum through the solver: {res['triple_sum']:.1e}")

rank = vergne.kv_splitting_rank(prov, pts)
print(f"rank of linear Hamiltonians {rank['phi_rank']}, with brackets {rank['joint_rank']}")
print(f"{time.perf_counter() - t0:.1f} s")
