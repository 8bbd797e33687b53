"""Gauge transformations of nonzero degree shift the Chern-Simons action of T3 by an integer.

Scaling the polynomial by sqrt(2) turns the integer into a non-integer, which
is why the prequantum line bundle needs an integral polynomial.
"""
import math

import numpy as np

from prequant_lab import fields, gauge, liealg, smooth
from prequant_lab.circle import circular_distance

N = 32
base = fields.torus(3, N, fd_order=8)
M = base.fundamental_chain()
zero = gauge.Connection.zero(base, "su2")
A = gauge.Connection(smooth.LieOneForm(base, "su2", np.random.default_rng(1), amplitude=0.3).form(), "su2")
c2 = liealg.builtin_polynomial("c2_su2")

print(f"T3 at N = {N}, FD8 stencils, random su(2) connection")
for n in (1, 2, -1):
    g = gauge.su2_degree_map(base, n)
    W = fields.integrate_wedge([g.mc] * 3, lambda a, b, c: np.trace(a @ b @ c, axis1=-2, axis2=-1), M)
    W = W.real / (24 * math.pi ** 2)
    for name, p in (("c2", c2), ("sqrt2*c2", c2.scaled(2 ** 0.5))):
        before = gauge.cs_action(p, M, A, zero)[0]
        after = gauge.cs_action(p, M, gauge.gauge_apply(g, A), zero)[0]
        jump = after - before
        print(f"  degree {n:+d}  winding {W:+.6f}  {name:8s} jump {jump:+.6f}  "
              f"distance to Z {circular_distance(jump, 0.0):.2e}")
