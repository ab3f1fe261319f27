"""Nahm instantons on sl(2, R): the closed-form model and the inverse problem.

The model solution is written down in closed form.  Its tail moments are read
off by extrapolation, and the boundary value solver recovers an instanton
from a prescribed real nilpotent target.  The resulting moments reproduce the
closed-form Vergne image of the target.
"""

import time

import numpy as np

from nilgeo import nahm, vergne
from nilgeo.algebra import load_fixture

ctx = load_fixture("sl2R")
grid = nahm.make_grid(400, 8.0)

model = nahm.model_instanton(ctx, grid)
print("model: max Nahm residual", nahm.nahm_residual(model).max())
mt = nahm.moment_extract(model)
ua = nahm.u_algebra(ctx)
print("model: |zeta - d/2|", np.abs(mt.zeta - 0.5 * ua.e).max())
print("model: Phi_1 =", np.round(nahm.assemble_phi(mt, 1).matrix, 10).tolist())

w = ctx.element(np.array([[1.0, -1.0], [1.0, -1.0]]))
t0 = time.perf_counter()
path = nahm.solve_bvp(w)
print(f"solve: {time.perf_counter() - t0:.2f} s, residuals {path.residuals}")
mt = nahm.moment_extract(path)
z1 = mt.element(1).matrix
print("solve: zeta_1 =", np.round(z1, 8).tolist())

V_nahm = vergne.vergne_general(w).V.matrix
V_closed = vergne.vergne_hermitian(w).V.matrix
print("Vergne image (closed form):", np.round(V_closed, 10).tolist())
print("|V_nahm - V_closed| =", np.abs(V_nahm - V_closed).max())
