"""Connections on trivial bundles, gauge maps, characteristic and transgression forms.

Conventions
-----------
* A gauge map g acts on connections from the right,
  ``A^g = g^{-1} A g + g^{-1} dg``; the left action is ``g . A = A^{g^{-1}}``.
* The fundamental vector field of a generator xi is the velocity of
  ``t -> A^{exp(t xi)}``, namely ``d^A xi = d xi + [A, xi]``.
* ``Tp(A1, A0) = r int_0^1 p(A1 - A0, F_t, ..., F_t) dt`` with
  ``A_t = t A1 + (1 - t) A0``, so that ``d Tp = p(F1) - p(F0)``.
* The second transgression is normalized so that
  ``Tp(A, A0') = Tp(A, A0) + Tp(A0, A0') + d Tp(A, A0, A0')``.
"""
from __future__ import annotations

import math

import numpy as np

from . import liealg
from .circle import CircleValue
from .fields import Chain, FormField, GridManifold, contract, d, from_function, fsum_array, integrate, \
    integrate_wedge, wedge, wedge_many, zero_form


class Connection:
    """A Lie-algebra valued 1-form on a trivialized bundle over ``base``."""

    def __init__(self, form: FormField, algebra_id: str, check: bool = True):
        if form.degree != 1 or len(form.value_shape) != 2:
            raise ValueError("a connection is a matrix-valued 1-form")
        if check and liealg.algebra_violation(form.comps, algebra_id) > 1e-10:
            raise ValueError(f"connection values are not in {algebra_id}")
        self.form = FormField(form.base, 1, form.comps.astype(complex), algebra_id, form.source)
        self.algebra_id = algebra_id

    @property
    def base(self) -> GridManifold:
        return self.form.base

    @property
    def rep_dim(self) -> int:
        return self.form.value_shape[0]

    @classmethod
    def zero(cls, base: GridManifold, algebra_id: str, n: int | None = None) -> Connection:
        m = liealg.rep_dim(algebra_id, n)
        return cls(zero_form(base, 1, (m, m), complex, algebra_id), algebra_id)

    @classmethod
    def from_function(cls, base, algebra_id, fn) -> Connection:
        return cls(from_function(base, 1, fn, algebra_id), algebra_id)

    def shifted(self, a: FormField, check: bool = True) -> Connection:
        """A + a for a Lie-valued 1-form a (connections form an affine space)."""
        return Connection(self.form + a, self.algebra_id, check)

    def __sub__(self, other: Connection) -> FormField:
        _compatible(self, other)
        return self.form - other.form


def _compatible(A: Connection, B: Connection):
    if A.base != B.base:
        raise ValueError("connections live on different bases")
    if A.algebra_id != B.algebra_id or A.rep_dim != B.rep_dim:
        raise ValueError("connections take values in different algebras")


def curvature(A: Connection) -> FormField:
    """F = dA + A^A (the matrix wedge equals half the bracket wedge)."""
    return d(A.form) + wedge(A.form, A.form, "matmul")


def covariant_d(A: Connection, omega: FormField) -> FormField:
    """d^A omega = d omega + [A ^ omega] for a Lie-valued form omega."""
    k = omega.degree
    return d(omega) + wedge(A.form, omega, "matmul") - (-1) ** k * wedge(omega, A.form, "matmul")


def _real_if_negligible(omega: FormField) -> FormField:
    c = omega.comps
    if not np.iscomplexobj(c):
        return omega
    scale = 1.0 + float(np.max(np.abs(c.real), initial=0.0))
    if float(np.max(np.abs(c.imag), initial=0.0)) <= 1e-9 * scale:
        return FormField(omega.base, omega.degree, c.real.copy())
    return FormField(omega.base, omega.degree, c)


def poly_wedge(p: liealg.InvariantPolynomial, forms: list[FormField]) -> FormField:
    """p(omega_1, ..., omega_r) with wedge products of the form parts."""
    if len(forms) != p.degree:
        raise ValueError(f"{p.name} takes {p.degree} forms, got {len(forms)}")
    for f in forms:
        if f.algebra is not None:
            p.check_algebra(f.algebra)
    return _real_if_negligible(wedge_many(list(forms), p.polar))


def integrate_poly(p: liealg.InvariantPolynomial, forms: list[FormField], chain: Chain):
    """int_chain p(omega_1, ..., omega_r), evaluated cell by cell."""
    if len(forms) != p.degree:
        raise ValueError(f"{p.name} takes {p.degree} forms, got {len(forms)}")
    for f in forms:
        if f.algebra is not None:
            p.check_algebra(f.algebra)
    return integrate_wedge(list(forms), p.polar, chain)


def char_form(p: liealg.InvariantPolynomial, A: Connection) -> FormField:
    """The Chern-Weil form p(F, ..., F)."""
    if 2 * p.degree > A.base.dim:
        raise ValueError(f"p(F) is a {2 * p.degree}-form; the base has dimension {A.base.dim}")
    F = curvature(A)
    return poly_wedge(p, [F] * p.degree)


def _gauss_legendre_01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def transgression(p: liealg.InvariantPolynomial, A1: Connection, A0: Connection) -> FormField:
    """Tp(A1, A0), a (2r-1)-form, with exact Gauss-Legendre quadrature in t."""
    _compatible(A1, A0)
    r = p.degree
    if 2 * r - 1 > A1.base.dim:
        raise ValueError(f"Tp is a {2 * r - 1}-form; the base has dimension {A1.base.dim}")
    a = A1 - A0
    F0 = curvature(A0)
    dA0a = covariant_d(A0, a)
    aa = wedge(a, a, "matmul")
    nodes, weights = _gauss_legendre_01(r + 2)
    total = None
    for t, w in zip(nodes, weights):
        Ft = F0 + t * dA0a + (t * t) * aa
        term = poly_wedge(p, [a] + [Ft] * (r - 1)) * (r * w)
        total = term if total is None else total + term
    return total


def transgression2(p: liealg.InvariantPolynomial, A: Connection, A0: Connection, A0p: Connection) -> FormField:
    """Second transgression Tp(A, A0, A0') over the 2-simplex, a (2r-2)-form."""
    _compatible(A, A0)
    _compatible(A, A0p)
    r = p.degree
    base = A.base
    if r < 2:
        return zero_form(base, 2 * r - 2 if r >= 1 else 0)
    b = A0 - A
    c = A0p - A
    if r == 2:
        # r(r-1) integrates to exactly 1 over the simplex and no curvature enters
        return poly_wedge(p, [b, c])
    FA = curvature(A)
    dAb, dAc = covariant_d(A, b), covariant_d(A, c)
    bb, cc = wedge(b, b, "matmul"), wedge(c, c, "matmul")
    bc = wedge(b, c, "matmul") + wedge(c, b, "matmul")
    m = r + 2
    u, wu = _gauss_legendre_01(m)
    total = None
    # collapsed coordinates t1 = u, t2 = (1-u) v with Jacobian (1-u)
    for ui, wi in zip(u, wu):
        for vj, wj in zip(u, wu):
            t1, t2 = ui, (1 - ui) * vj
            Ft = FA + t1 * dAb + t2 * dAc + (t1 * t1) * bb + (t2 * t2) * cc + (t1 * t2) * bc
            term = poly_wedge(p, [b, c] + [Ft] * (r - 2)) * (r * (r - 1) * wi * wj * (1 - ui))
            total = term if total is None else total + term
    return total


def cs_action(p: liealg.InvariantPolynomial, u: Chain, A: Connection, A0: Connection):
    """s_u(A) = -int_u Tp(A, A0), returned as (real value, CircleValue)."""
    if u.dim is not None and u.dim != 2 * p.degree - 1:
        raise ValueError(f"s_u needs a {2 * p.degree - 1}-chain, got dimension {u.dim}")
    val = -integrate(transgression(p, A, A0), u)
    val = float(np.real(val))
    return val, CircleValue(val)


# --- gauge maps ----------------------------------------------------------------

def _inverse_values(g, group_id):
    if group_id in ("U1", "SU2", "SO3"):
        return np.conj(np.swapaxes(g, -1, -2))
    return np.linalg.inv(g)


class GaugeMap:
    """Node-sampled map into the structure group together with g^{-1} dg.

    Catalog constructors supply the Maurer-Cartan form analytically; for
    plain samples it is formed with the grid's difference operators.
    """

    def __init__(self, base: GridManifold, group_id: str, values, mc: FormField | None = None,
                 check: bool = True, name: str = "gauge"):
        values = np.asarray(values, dtype=complex)
        if values.shape[:base.dim] != base.shape:
            raise ValueError("gauge map values must be sampled at every node")
        if check and liealg.group_violation(values, group_id) > 1e-10:
            raise ValueError(f"gauge map leaves {group_id}")
        self.base, self.group_id, self.values, self.name = base, group_id, values, name
        self.algebra_id = liealg.ALGEBRA_OF[group_id]
        if mc is None:
            ginv = _inverse_values(values, group_id)
            comps = np.stack([ginv @ base.derivative(values, j) for j in range(base.dim)])
            mc = FormField(base, 1, comps, self.algebra_id)
        self.mc = mc

    @property
    def inverse_values(self):
        return _inverse_values(self.values, self.group_id)

    @classmethod
    def identity(cls, base, group_id, n=None):
        m = liealg.rep_dim(liealg.ALGEBRA_OF[group_id], n)
        vals = np.broadcast_to(np.eye(m, dtype=complex), base.shape + (m, m)).copy()
        return cls(base, group_id, vals, zero_form(base, 1, (m, m), complex, liealg.ALGEBRA_OF[group_id]),
                   name="identity")

    def __matmul__(self, other: GaugeMap) -> GaugeMap:
        """Pointwise product g1 g2, so that A^(g1 g2) = (A^g1)^g2."""
        if other.base != self.base or other.group_id != self.group_id:
            raise ValueError("gauge maps are not composable")
        g2, g2i = other.values, other.inverse_values
        mc = FormField(self.base, 1, g2i[None] @ self.mc.comps @ g2[None] + other.mc.comps, self.algebra_id)
        return GaugeMap(self.base, self.group_id, self.values @ g2, mc, check=False,
                        name=f"({self.name})({other.name})")

    def inverse(self) -> GaugeMap:
        g, gi = self.values, self.inverse_values
        mc = FormField(self.base, 1, -(g[None] @ self.mc.comps @ gi[None]), self.algebra_id)
        return GaugeMap(self.base, self.group_id, gi, mc, check=False, name=f"({self.name})^-1")

    def reorthonormalized(self) -> GaugeMap:
        return GaugeMap(self.base, self.group_id, liealg.project_to_group(self.values, self.group_id),
                        self.mc, name=self.name)


def gauge_apply(phi: GaugeMap, A: Connection) -> Connection:
    """A^phi = phi^{-1} A phi + phi^{-1} d phi."""
    if phi.base != A.base:
        raise ValueError("gauge map and connection live on different bases")
    if phi.algebra_id != A.algebra_id:
        raise ValueError("gauge group does not match the connection's algebra")
    g, gi = phi.values, phi.inverse_values
    comps = gi[None] @ A.form.comps @ g[None] + phi.mc.comps
    return Connection(FormField(A.base, 1, comps, A.algebra_id), A.algebra_id, check=False)


def left_act(phi: GaugeMap, A: Connection) -> Connection:
    """The left action phi . A = A^(phi^{-1})."""
    return gauge_apply(phi.inverse(), A)


def u1_winding(base: GridManifold, winding) -> GaugeMap:
    """exp(2 pi i n . x / L) on a torus-like model (periodic axes only)."""
    winding = tuple(int(k) for k in winding)
    if len(winding) != base.dim:
        raise ValueError("one winding number per axis")
    phase = 0
    coef = []
    for ax, k, x in zip(base.axes, winding, base.coords):
        if k and not ax.periodic:
            raise ValueError("winding along a bounded axis is not periodic")
        c = 2 * np.pi * k / ax.length
        phase = phase + c * (x - ax.lower)
        coef.append(c)
    vals = np.exp(1j * phase)[..., None, None]
    mc = np.stack([np.full(base.shape + (1, 1), 1j * c) for c in coef])
    return GaugeMap(base, "U1", vals, FormField(base, 1, mc, "u1"), name=f"wind{winding}")


def _transition(t):
    """Smooth step equal to 1 for t <= 0 and to 0 for t >= 1, with derivative."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        da = np.where(t < 1, -a / np.where(t < 1, (1 - t) ** 2, 1.0), 0.0)
        db = np.where(t > 0, b / np.where(t > 0, t * t, 1.0), 0.0)
    s = a / (a + b)
    ds = (da * b - a * db) / (a + b) ** 2
    return s, ds


def _poly_step(t):
    """1 - smootherstep(t): C^2 step from 1 at t = 0 to 0 at t = 1, with derivative."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    u = np.clip(t, 0.0, 1.0)
    s = 1 - u ** 3 * (10 - 15 * u + 6 * u * u)
    ds = np.where(inside, -30 * u * u * (1 - u) ** 2, 0.0)
    return s, ds


PROFILES = {"poly": _poly_step, "exp": _transition}


def su2_degree_map(base: GridManifold, degree: int, center=None, radius: float = 0.49,
                   profile: str = "poly") -> GaugeMap:
    """Hedgehog g = cos f + sin f (n . i sigma), f = degree * pi * step(|x - c| / R).

    g is identically 1 outside the ball of radius R, so it descends to a smooth
    map T^3 -> SU(2) collapsing the complement; its degree is ``degree`` up to
    the orientation convention, which the tests pin numerically.  The default
    polynomial step has far smaller high derivatives than the exp(-1/t) step,
    which is what the stencils see.
    """
    if base.dim != 3 or not base.is_closed():
        raise ValueError("degree maps are catalogued on T3")
    if center is None:
        center = [ax.lower + ax.length / 2 for ax in base.axes]
    if 2 * radius >= min(ax.length for ax in base.axes):
        raise ValueError("the bump must fit inside the chart")
    rel = [x - c for x, c in zip(base.coords, center)]
    r = np.sqrt(sum(q * q for q in rel))
    safe = np.where(r > 0, r, 1.0)
    nhat = [np.where(r > 0, q / safe, 0.0) for q in rel]
    s, ds = PROFILES[profile](r / radius)
    f = degree * np.pi * s
    fp = degree * np.pi * ds / radius
    isig = 1j * liealg.PAULI
    n_dot = sum(nhat[a][..., None, None] * isig[a] for a in range(3))
    eye = np.eye(2, dtype=complex)
    cf, sf = np.cos(f)[..., None, None], np.sin(f)[..., None, None]
    g = cf * eye + sf * n_dot
    sinc_r = np.where(r > 0, np.sin(f) / safe, 0.0)[..., None, None]
    gi = np.conj(np.swapaxes(g, -1, -2))
    comps = []
    for i in range(3):
        dn = sum(((1.0 if a == i else 0.0) - nhat[a] * nhat[i])[..., None, None] * isig[a] for a in range(3))
        dg = (fp * nhat[i])[..., None, None] * (-sf * eye + cf * n_dot) + sinc_r * dn
        comps.append(gi @ dg)
    return GaugeMap(base, "SU2", g, FormField(base, 1, np.stack(comps), "su2"), name=f"deg{degree}")


def _dexp_su2(X, dX):
    """Closed form of exp(-X) d exp(X) on su(2), where ad_X has eigenvalues 0, +-2i|x|."""
    x = liealg.su2_coefficients(X)
    th = np.sqrt(np.sum(x * x, axis=-1))
    safe = np.where(th > 1e-6, th, 1.0)
    small = th <= 1e-6
    a = np.where(small, 1 - 2 * th**2 / 3, np.sin(2 * th) / (2 * safe))
    b = np.where(small, 0.5 - th**2 / 6, (1 - np.cos(2 * th)) / (4 * safe**2))
    nx = x / safe[..., None]
    dx = liealg.su2_coefficients(dX)
    par = np.where(small[None, ..., None], 0.0, np.sum(dx * nx[None], axis=-1, keepdims=True) * nx[None])
    perp = dx - par
    brk = X[None] @ dX - dX @ X[None]
    return liealg.su2_from_coefficients(par + a[None, ..., None] * perp) - b[None, ..., None, None] * brk


def _dexp_mc(X, dX, algebra_id=None, nodes: int = 16):
    """g^{-1} dg for g = exp(X): int_0^1 exp(-sX) dX exp(sX) ds."""
    if algebra_id == "su2":
        return _dexp_su2(X, dX)
    s, w = _gauss_legendre_01(nodes)
    out = np.zeros_like(dX)
    for si, wi in zip(s, w):
        E = liealg.exp_array(si * X, algebra_id)
        Ei = liealg.exp_array(-si * X, algebra_id)
        out = out + wi * (Ei[None] @ dX @ E[None])
    return out


def exp_gauge(xi, t: float = 1.0, algebra_id: str = "su2", name: str = "exp") -> GaugeMap:
    """exp(t xi) for a Lie-valued field with analytic gradient (smooth.LieField)."""
    base = xi.base
    X = t * xi(base.coords)
    dX = t * xi.gradient(base.coords)
    g = liealg.exp_array(X, algebra_id if algebra_id in ("u1", "su2") else None)
    if algebra_id == "u1":
        mc = dX
    else:
        mc = _dexp_mc(X, dX, algebra_id if algebra_id in ("u1", "su2") else None)
    return GaugeMap(base, liealg.GROUP_OF[algebra_id], g, FormField(base, 1, mc, algebra_id), name=name)


GAUGE_CATALOG = ("identity", "u1_winding", "su2_degree", "exp")


# --- infinitesimal symmetries ------------------------------------------------------

class InfinitesimalSymmetry:
    """Generator X = (vector field v, Lie-valued 0-form xi).

    ``dxi`` optionally provides d(xi) analytically; pure gauge generators with
    ``dxi`` use it in place of the difference operator.
    """

    def __init__(self, base: GridManifold, algebra_id: str, gauge_part=None, vector_part=None, dxi=None,
                 rep_dim: int | None = None):
        m = rep_dim or liealg.rep_dim(algebra_id, rep_dim)
        if gauge_part is None:
            gauge_part = np.zeros(base.shape + (m, m), dtype=complex)
        self.base, self.algebra_id = base, algebra_id
        self.gauge_part = np.asarray(gauge_part, dtype=complex)
        self.vector_part = None if vector_part is None else np.asarray(vector_part, dtype=float)
        self.dxi = dxi
        if self.vector_part is not None:
            for i, ax in enumerate(base.axes):
                if not ax.periodic:
                    edge = np.take(self.vector_part[i], [0, ax.n - 1], axis=i)
                    if np.max(np.abs(edge), initial=0.0) > 1e-10:
                        raise ValueError("vector part must be tangent to the boundary")

    @classmethod
    def from_field(cls, xi, scale: float = 1.0) -> InfinitesimalSymmetry:
        base = xi.base
        return cls(base, xi.algebra_id, scale * xi(base.coords),
                   dxi=FormField(base, 1, scale * xi.gradient(base.coords), xi.algebra_id))

    @classmethod
    def zero(cls, base, algebra_id, rep_dim=None):
        return cls(base, algebra_id, rep_dim=rep_dim)

    def scaled(self, c: float) -> InfinitesimalSymmetry:
        return InfinitesimalSymmetry(self.base, self.algebra_id, c * self.gauge_part,
                                     None if self.vector_part is None else c * self.vector_part,
                                     None if self.dxi is None else self.dxi * c, self.gauge_part.shape[-1])

    def is_pure_gauge(self) -> bool:
        return self.vector_part is None or not np.any(self.vector_part)

    def v_A(self, A: Connection) -> FormField:
        """v_A(X) = iota_v A + xi."""
        val = self.gauge_part
        if not self.is_pure_gauge():
            val = val + contract(self.vector_part, A.form).comps[0]
        return FormField(self.base, 0, val[None], self.algebra_id)


def infinitesimal_action(X: InfinitesimalSymmetry, A: Connection) -> FormField:
    """X_A(A) = d^A v_A(X), plus iota_v F when X has a vector part.

    The extra term is the horizontal contribution of the Lie derivative of
    the connection along the lifted vector field; it vanishes for pure gauge.
    """
    if X.base != A.base:
        raise ValueError("symmetry and connection live on different bases")
    v = X.v_A(A)
    if X.is_pure_gauge() and X.dxi is not None:
        dv = X.dxi
    else:
        dv = d(v)
    vA = v.comps[0]
    bracket = A.form.comps @ vA[None] - vA[None] @ A.form.comps
    out = FormField(A.base, 1, dv.comps + bracket, A.algebra_id)
    if not X.is_pure_gauge():
        out = out + contract(X.vector_part, curvature(A))
    return out
