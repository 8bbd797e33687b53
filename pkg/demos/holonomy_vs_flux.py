"""Holonomy of the prequantum connection around circles in a 2-parameter family.

For every disk the log holonomy of its boundary matches the flux of sigma
through it mod 1; the ratio flux / area tends to the curvature at the center.
"""
import math

import numpy as np

from prequant_lab import connfam, fields, gauge, liealg, prequant, smooth
from prequant_lab.circle import circular_distance
from prequant_lab.connfam import CycleData

base = fields.torus(3, 16, fd_order=8)
u = fields.slab_chain(base, 0, 4, 12)
rng = np.random.default_rng(5)
fam, _ = connfam.catalog_family("su2_rotation", base, rng, curved=True)
A0 = gauge.Connection(smooth.LieOneForm(base, "su2", rng).form(), "su2")
bundle = prequant.PrequantBundle(liealg.builtin_polynomial("c2_su2"), CycleData(u.boundary()), fam, A0)

center = [0.1, 0.0]
print(f"sigma at the center {bundle.sigma(center)[0, 1]:+.6e}")
print(" radius   log hol          flux             distance   flux/area")
for R in (0.05, 0.1, 0.2, 0.3, 0.4):
    _, hol = prequant.log_holonomy(bundle, prequant.Loop.circle(center, R))
    flux = prequant.disk_flux(bundle, center, R)
    print(f"  {R:4.2f}  {hol:+.9e}  {flux:+.9e}  {circular_distance(hol, flux):.1e}    "
          f"{flux / (math.pi * R * R):+.6e}")
