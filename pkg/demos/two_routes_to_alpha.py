"""The lift of a gauge symmetry to the prequantum bundle, computed two ways.

The path route integrates rho(X_A) + mu(X) along t -> exp(t xi); the boundary
route differences the Chern-Simons action of a slab u whose boundary is the
cycle.  They agree as real numbers, and the boundary route also handles the
winding maps that no path reaches.
"""
import numpy as np

from prequant_lab import connfam, fields, gauge, liealg, prequant, smooth
from prequant_lab.connfam import CycleData

N = 24
base = fields.torus(3, N, fd_order=8)
u = fields.slab_chain(base, 0, N // 4, 3 * N // 4)
rng = np.random.default_rng(3)
fam, _ = connfam.catalog_family("su2_rotation", base, rng)
A0 = gauge.Connection(smooth.LieOneForm(base, "su2", rng).form(), "su2")
bundle = prequant.PrequantBundle(liealg.builtin_polynomial("c2_su2"), CycleData(u.boundary()), fam, A0)
path = prequant.SymmetryPath.exponential(smooth.LieField(base, "su2", rng, amplitude=0.5))

s = [0.3, -0.2]
ap = prequant.alpha_path(bundle, path, s)
ab = prequant.alpha_boundary(bundle, path.phi(), u, s)
print(f"alpha along the path     {ap.real:+.10f}  ({ap.evaluations} t-evaluations)")
print(f"alpha from the boundary  {ab.real:+.10f}")
print(f"difference               {abs(ap.real - ab.real):.2e}")

degree1 = prequant.BoundaryLift(gauge.su2_degree_map(base, 1), u)
r = prequant.cocycle_check(bundle, prequant.PathLift(path), degree1, s, u)
print(f"cocycle law for (path, degree-1 map): residual {r['residual']:.2e}")
