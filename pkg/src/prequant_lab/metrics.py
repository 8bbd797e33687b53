"""Riemannian metrics on grid manifolds and the Levi-Civita map.

Frame-bundle connections live in the coordinate trivialization, so they are
gl(n)-valued; the connection matrix in slot k is ``(omega_k)^i_j = Gamma^i_{jk}``.
Metric families are handed to the connfam/prequant machinery through
:class:`MetricFamily`, which exposes the same ``at``/``tangent`` interface as
a connection family.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .connfam import AMPLITUDES, CycleData
from .fields import (FormField, GridManifold, GridMap, Identity, LinearTorusMap, Shear, Shift, _values_at,
                     integrate, pullback)
from .gauge import Connection, transgression
from .prequant import PrequantBundle

SPD_TOL = 1e-8


class MetricField:
    """Symmetric positive definite 2-tensor sampled at the nodes.

    ``source(pts)`` and ``gradient(pts)`` optionally evaluate g and its
    coordinate derivatives (shape ``(dim, ..., n, n)``) anywhere on the chart.
    """

    def __init__(self, base: GridManifold, values, source: Callable | None = None,
                 gradient: Callable | None = None, check: bool = True):
        values = np.asarray(values, dtype=float)
        n = base.dim
        if values.shape != base.shape + (n, n):
            raise ValueError(f"metric values must have shape {base.shape + (n, n)}")
        if np.max(np.abs(values - np.swapaxes(values, -1, -2)), initial=0.0) > 1e-12:
            raise ValueError("metric is not symmetric")
        self.base, self.values, self.source, self.gradient = base, values, source, gradient
        self.min_eigenvalue = float(np.min(np.linalg.eigvalsh(values)))
        if check and self.min_eigenvalue <= SPD_TOL:
            raise ValueError(f"metric is not positive definite (min eigenvalue {self.min_eigenvalue:.3e})")

    @classmethod
    def from_function(cls, base, fn, gradient=None) -> MetricField:
        return cls(base, fn(base.coords), fn, gradient)

    def derivatives(self) -> np.ndarray:
        """Stencil derivatives d_k g_ij, shape (dim, *grid, n, n)."""
        return np.stack([self.base.derivative(self.values, k) for k in range(self.base.dim)])


def flat_metric(base: GridManifold) -> MetricField:
    """Euclidean metric in the chart (polar for the solid torus)."""
    n = base.dim

    def g(pts):
        out = np.zeros(np.shape(pts[0]) + (n, n))
        for i in range(n):
            out[..., i, i] = 1.0
        if base.model_id == "SolidTorus":
            out[..., 1, 1] = pts[0] ** 2
        return out

    def dg(pts):
        out = np.zeros((n,) + np.shape(pts[0]) + (n, n))
        if base.model_id == "SolidTorus":
            out[0, ..., 1, 1] = 2 * pts[0]
        return out

    return MetricField.from_function(base, g, dg)


def conformal_metric(base: GridManifold, potential, background: MetricField | None = None) -> MetricField:
    """e^{2 f} g_b for a scalar with an analytic gradient (smooth.FourierScalar)."""
    background = background or flat_metric(base)
    gb, dgb = background.source, background.gradient

    def g(pts):
        return np.exp(2 * potential(pts))[..., None, None] * gb(pts)

    def dg(pts):
        e = np.exp(2 * potential(pts))[..., None, None]
        grad = potential.gradient(pts)
        base_vals, base_grad = gb(pts), dgb(pts)
        return np.stack([e * (2 * grad[k][..., None, None] * base_vals + base_grad[k]) for k in range(base.dim)])

    return MetricField.from_function(base, g, dg)


def _cartesian_chart(base: GridManifold):
    """(to_cartesian, J, dJ) for the chart; J[a, j] = dx^a/dq^j and dJ[k, a, j] = d_k J[a, j]."""
    n = base.dim
    if base.model_id != "SolidTorus":
        def J(pts):
            return np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * np.ndim(pts[0])), (n, n) + np.shape(pts[0]))
        return (lambda pts: tuple(pts)), J, (lambda pts: np.zeros((n, n, n) + np.shape(pts[0])))

    def to_cart(pts):
        r, th, z = pts
        return r * np.cos(th), r * np.sin(th), z

    def J(pts):
        r, th, _ = pts
        c, s, o, e = np.cos(th), np.sin(th), np.zeros_like(r), np.ones_like(r)
        return np.array([[c, -r * s, o], [s, r * c, o], [o, o, e]])

    def dJ(pts):
        r, th, _ = pts
        c, s = np.cos(th), np.sin(th)
        out = np.zeros((3, 3, 3) + np.shape(r))
        out[0, 0, 1], out[0, 1, 1] = -s, c          # d_r
        out[1, 0, 0], out[1, 1, 0] = -s, c          # d_theta of the r column
        out[1, 0, 1], out[1, 1, 1] = -r * c, -r * s  # d_theta of the theta column
        return out

    return to_cart, J, dJ


def perturbed_metric(base: GridManifold, tensor, eps: float = 1.0) -> MetricField:
    """Euclidean metric plus eps * h, h a Cartesian symmetric tensor (smooth.CartesianTensor).

    The tensor is written in the chart as J^T (I + eps h) J, so it is smooth
    across the axis of the solid torus and generally not conformally flat.
    """
    to_cart, Jf, dJf = _cartesian_chart(base)
    n = base.dim

    def G(x):
        return np.eye(n) + eps * tensor(x)

    def g(pts):
        J = Jf(pts)
        return np.einsum("ai...,...ab,bj...->...ij", J, G(to_cart(pts)), J)

    def dg(pts):
        J, dJ, x = Jf(pts), dJf(pts), to_cart(pts)
        Gx, dGx = G(x), eps * tensor.gradient(x)
        out = []
        for k in range(n):
            dG_k = sum(J[c, k][..., None, None] * dGx[c] for c in range(n))
            t1 = np.einsum("ai...,...ab,bj...->...ij", J, dG_k, J)
            t2 = np.einsum("ai...,...ab,bj...->...ij", dJ[k], Gx, J)
            out.append(t1 + t2 + np.swapaxes(t2, -1, -2))
        return np.stack(out)

    return MetricField.from_function(base, g, dg)


def christoffel(g, dg) -> np.ndarray:
    """Gamma^i_{jk} = 1/2 g^{il} (d_j g_lk + d_k g_lj - d_l g_jk), shape (..., i, j, k)."""
    ginv = np.linalg.inv(g)
    n = g.shape[-1]
    # lowered[..., l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    d = np.moveaxis(dg, 0, -1)  # (..., a, b, k) = d_k g_ab
    lowered = np.empty(g.shape[:-2] + (n, n, n))
    for j in range(n):
        for k in range(n):
            lowered[..., :, j, k] = d[..., :, k, j] + d[..., :, j, k] - d[..., j, k, :]
    return 0.5 * np.einsum("...il,...ljk->...ijk", ginv, lowered)


def _gamma_to_comps(gamma) -> np.ndarray:
    return np.moveaxis(gamma, -1, 0)


def levi_civita(g: MetricField) -> Connection:
    """omega^g with slot-k matrix Gamma^i_{jk}; the analytic source is attached when available."""
    if g.min_eigenvalue <= SPD_TOL:
        raise ValueError("metric is not positive definite")
    gamma = christoffel(g.values, g.derivatives())
    source = None
    if g.source is not None and g.gradient is not None:
        source = lambda pts: _gamma_to_comps(christoffel(g.source(pts), g.gradient(pts)))  # noqa: E731
    form = FormField(g.base, 1, _gamma_to_comps(gamma).astype(complex), "gl_n", source)
    return Connection(form, "gl_n", check=False)


def lc_identity_residuals(g: MetricField) -> dict:
    """Torsion (Gamma^i_{jk} - Gamma^i_{kj}) and metric compatibility (nabla g) of levi_civita(g)."""
    dg = g.derivatives()
    gamma = christoffel(g.values, dg)
    torsion = float(np.max(np.abs(gamma - np.swapaxes(gamma, -1, -2))))
    d = np.moveaxis(dg, 0, -1)  # (..., i, j, k) = d_k g_ij
    # nabla_k g_ij = d_k g_ij - Gamma^l_{ki} g_lj - Gamma^l_{kj} g_il
    a = np.einsum("...lik,...lj->...ijk", gamma, g.values)
    b = np.einsum("...ljk,...il->...ijk", gamma, g.values)
    compat = float(np.max(np.abs(d - a - b)))
    return {"torsion": torsion, "metric_compatibility": compat}


def conformal_christoffel(potential, pts, n: int) -> np.ndarray:
    """Closed form for e^{2f} delta: delta^i_j f_k + delta^i_k f_j - delta_jk f_i."""
    grad = potential.gradient(pts)
    out = np.zeros(np.shape(pts[0]) + (n, n, n))
    for i, j, k in itertools.product(range(n), repeat=3):
        val = 0.0
        if i == j:
            val = val + grad[k]
        if i == k:
            val = val + grad[j]
        if j == k:
            val = val - grad[i]
        out[..., i, j, k] = val
    return out


# --- naturality -------------------------------------------------------------------------

def _jacobian_derivative(phi: GridMap, pts):
    """d_k J^a_j = d_k d_j phi^a, shape (k, a, j, ...); zero for affine catalog maps."""
    n = phi.source.dim
    if isinstance(phi, (Identity, Shift, LinearTorusMap)):
        return np.zeros((n, phi.target.dim, n) + np.shape(pts[0]))
    if isinstance(phi, Shear):
        x, y = pts
        w = 2 * np.pi * phi.k / phi.L
        out = np.zeros((2, 2, 2) + np.shape(x))
        out[1, 0, 1] = -phi.eps * w * np.sin(w * y)
        return out
    raise ValueError(f"no analytic second derivative for {phi.name}")


def pullback_metric(phi: GridMap, g: MetricField) -> MetricField:
    """(phi^* g)_ij = J^a_i J^b_j g_ab(phi(x)), evaluated analytically when needed."""
    if phi.target != g.base:
        raise ValueError("metric does not live on the map's target")
    flat = g.values.reshape(g.base.shape + (-1,))
    gform = FormField(g.base, 0, flat[None], None,
                      None if g.source is None else (lambda q: g.source(q).reshape(np.shape(q[0]) + (-1,))[None]))
    n = g.base.dim

    def fn(pts):
        J = phi.jacobian(pts)
        gv = _values_at(gform, phi.apply(pts))[0].reshape(np.shape(pts[0]) + (n, n))
        return np.einsum("ai...,...ab,bj...->...ij", J, gv, J)

    grad = None
    if g.source is not None and g.gradient is not None:
        def grad(pts):
            J = phi.jacobian(pts)
            dJ = _jacobian_derivative(phi, pts)
            y = phi.apply(pts)
            gv, dgv = g.source(y), g.gradient(y)
            out = []
            for k in range(phi.source.dim):
                # chain rule through g(phi(x)) and both Jacobian factors
                dg_k = sum(J[c, k][..., None, None] * dgv[c] for c in range(phi.target.dim))
                t1 = np.einsum("ai...,...ab,bj...->...ij", J, dg_k, J)
                t2 = np.einsum("ai...,...ab,bj...->...ij", dJ[k], gv, J)
                out.append(t1 + t2 + np.swapaxes(t2, -1, -2))
            return np.stack(out)

    return MetricField(phi.source, fn(phi.source.coords), fn if g.source is not None else None, grad)


def lc_naturality_check(phi: GridMap, g: MetricField) -> dict:
    """levi_civita(phi^* g) against J^{-1} (phi^* omega^g) J + J^{-1} dJ."""
    lhs = levi_civita(pullback_metric(phi, g)).form.comps.real
    omega = levi_civita(g).form
    pulled = pullback(phi, omega).comps.real  # slot k: sum_c J^c_k omega_c(phi x)
    pts = phi.source.coords
    J = np.moveaxis(phi.jacobian(pts), (0, 1), (-2, -1))
    Jinv = np.linalg.inv(J)
    dJ = np.moveaxis(_jacobian_derivative(phi, pts), (1, 2), (-2, -1))
    rhs = np.stack([Jinv @ pulled[k] @ J + Jinv @ dJ[k] for k in range(phi.source.dim)])
    return {"residual": float(np.max(np.abs(lhs - rhs))), "scale": float(np.max(np.abs(rhs)))}


# --- metric families -------------------------------------------------------------------------

class MetricFamily:
    """s -> g(s) with analytic s-dependence; at(s) is the Levi-Civita connection.

    ``kind='linear'``: g(s) = g_b + sum_k f_k(s) h_k.
    ``kind='conformal'``: g(s) = exp(2 sum_k f_k(s) phi_k) g_b.
    """

    def __init__(self, background: MetricField, directions, amplitudes, domain, kind: str = "linear",
                 name: str = "metrics"):
        if kind not in ("linear", "conformal"):
            raise ValueError("kind is 'linear' or 'conformal'")
        for nm in amplitudes:
            if nm not in AMPLITUDES:
                raise ValueError(f"unknown amplitude {nm!r}")
        self.background, self.kind, self.name = background, kind, name
        self.directions = [np.asarray(h, dtype=float) for h in directions]
        self.amplitudes = list(amplitudes)
        self.domain = tuple((float(a), float(b)) for a, b in domain)

    base = property(lambda self: self.background.base)
    algebra_id = "gl_n"
    dim = property(lambda self: len(self.domain))

    def metric(self, s) -> MetricField:
        s = np.asarray(s, dtype=float)
        gb = self.background.values
        if self.kind == "linear":
            vals = gb + sum(AMPLITUDES[nm][0](s) * h for nm, h in zip(self.amplitudes, self.directions))
        else:
            pot = sum(AMPLITUDES[nm][0](s) * ph for nm, ph in zip(self.amplitudes, self.directions))
            vals = np.exp(2 * pot)[..., None, None] * gb
        return MetricField(self.base, vals)

    def metric_tangent(self, s, i: int) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return sum(AMPLITUDES[nm][1](s)[i] * h for nm, h in zip(self.amplitudes, self.directions))
        g = self.metric(s).values
        dpot = sum(AMPLITUDES[nm][1](s)[i] * ph for nm, ph in zip(self.amplitudes, self.directions))
        return 2 * dpot[..., None, None] * g

    def at(self, s) -> Connection:
        return levi_civita(self.metric(s))

    def tangent(self, s, i: int) -> FormField:
        """Linearized Christoffels for h = dg/ds_i, with h differentiated by the same stencil."""
        g = self.metric(s)
        h = self.metric_tangent(s, i)
        dg, dh = g.derivatives(), np.stack([self.base.derivative(h, k) for k in range(self.base.dim)])
        gamma = christoffel(g.values, dg)
        ginv = np.linalg.inv(g.values)
        part = christoffel(g.values, dh)
        dgamma = part - np.einsum("...il,...lm,...mjk->...ijk", ginv, h, gamma)
        return FormField(self.base, 1, _gamma_to_comps(dgamma).astype(complex), "gl_n")

    def tangents(self, s):
        return [self.tangent(s, i) for i in range(self.dim)]

    def grid(self, n: int = 3):
        axes = [lo + (hi - lo) * (np.arange(n) + 0.5) / n for lo, hi in self.domain]
        return [np.array(p) for p in itertools.product(*axes)]


def metric_prequant(p, fam: MetricFamily, A0: Connection | None = None) -> PrequantBundle:
    """Pull the prequantization data back along the Levi-Civita map.

    T2 uses c = M; the solid torus uses c = dM and carries the metric
    Chern-Simons section (see :func:`metric_cs_section`).
    """
    base = fam.base
    if base.model_id == "T2":
        cycle = CycleData(base.fundamental_chain(), "closed_M")
    elif base.model_id == "SolidTorus":
        cycle = CycleData(base.boundary(), "boundary_of_M")
    else:
        raise ValueError(f"metric prequantization is catalogued on T2 and SolidTorus, not {base.model_id}")
    if A0 is None:
        A0 = levi_civita(flat_metric(base))
    return PrequantBundle(p, cycle, fam, A0)


def metric_cs_value(p, g: MetricField, A0: Connection) -> float:
    """-int_M Tp(omega^g, A0) on the solid torus, so that S(g) = exp(2 pi i value)."""
    if g.base.model_id != "SolidTorus":
        raise ValueError("the metric Chern-Simons section is catalogued on SolidTorus")
    return -float(np.real(integrate(transgression(p, levi_civita(g), A0), g.base.fundamental_chain())))


def metric_cs_section(p, g: MetricField, A0: Connection) -> complex:
    return complex(np.exp(2j * math.pi * metric_cs_value(p, g, A0)))


def solid_torus_rotation(base: GridManifold, t: float, dtheta: float = 1.0, dz: float = 0.0) -> Shift:
    """The diffeomorphism path (r, theta, z) -> (r, theta + t dtheta, z + t dz)."""
    return Shift(base, (0.0, t * dtheta, t * dz))


def cs_invariance_check(p, g: MetricField, A0: Connection, times=(0.1, 0.25, 0.5, 0.8, 1.0),
                        dtheta: float = 1.0, dz: float = 0.3) -> dict:
    """|S(phi_t^* g) - S(g)| along a rotation-translation path of the solid torus."""
    S0 = metric_cs_section(p, g, A0)
    worst = 0.0
    for t in times:
        phi = solid_torus_rotation(g.base, t, dtheta, dz)
        St = metric_cs_section(p, pullback_metric(phi, g), A0)
        worst = max(worst, abs(St - S0))
    return {"residual": worst, "value": metric_cs_value(p, g, A0)}


DIFFEO_CATALOG = ("identity", "shift", "shear", "sl2z")


def catalog_diffeo(name: str, base: GridManifold, **kw) -> GridMap:
    if name == "identity":
        return Identity(base)
    if name == "shift":
        return Shift(base, kw.get("offset", (0.25, 0.5)))
    if name == "shear":
        return Shear(base, kw.get("eps", 0.3), kw.get("k", 1))
    if name == "sl2z":
        return LinearTorusMap(base, kw.get("matrix", ((1, 1), (0, 1))))
    raise ValueError(f"unknown diffeomorphism {name!r}; choose from {DIFFEO_CATALOG}")
