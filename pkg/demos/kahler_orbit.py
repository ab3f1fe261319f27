"""Kaehler geometry of the real nilpotent orbit of sl(2, R) through its double cover.

Real quaternions a + c j map onto the orbit component, and z = a + i c is a
holomorphic chart for the complex structure J.  In this chart the KKS form is
a constant multiple of da ^ dc and the Kaehler potential is a multiple of |z|^2.
The script checks both statements and runs the Kaehler and circle-action suites.
"""

import numpy as np

from nilgeo import orbitgeom as og
from nilgeo import vergne
from nilgeo.algebra import Quaternion, load_fixture

ctx = load_fixture("sl2R")
prov = vergne.kahler_structure(ctx)

for a, c in [(1.0, 0.0), (0.6, 0.8), (1.5, -0.4)]:
    w = og.as_point(og.sl2_cover(Quaternion(a, 0, c, 0), ctx))
    da = ctx.coords(np.array([[c, -2 * a], [0, -c]]))
    dc = ctx.coords(np.array([[a, 0], [2 * c, -a]]))
    sig = og.kks_form(w, og.generator_for(w, da), og.generator_for(w, dc))
    jda = prov.apply_J(w, da)
    print(
        f"z = {a:+.1f}{c:+.1f}i: sigma(da, dc) = {sig.real:+.6f}, "
        f"|J da - dc| = {np.abs(jda - np.sign(sig.real) * dc).max():.1e}, "
        f"potential / |z|^2 = {prov.kahler_potential(w) / (a * a + c * c):.10f}"
    )

for check in (vergne.kahler_check, vergne.kv_orbit_check, vergne.vergne_check):
    rep = check(prov)
    print(f"{rep.suite}: passed={rep.passed}")
    for line in rep.summary_lines():
        print("   ", line)
