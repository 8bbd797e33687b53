"""Finite-dimensional families of connections and their equivariant forms.

A family is ``A(s) = A_base + sum_k f_k(s) a_k`` over a box in R^m (m <= 4),
with amplitude functions picked by name from :data:`AMPLITUDES`.  Tangents
are exact.  Finite differences in s appear only in the ``*_check`` oracles.

For a cycle c of dimension 2r - 2 and background A0:

* ``sigma_c(a, b) = r (r-1) int_c p(a, b, F, ..., F)``
* ``mu_c(X)      = -r int_c p(v_A(X), F, ..., F)``
* ``rho_c(a)     = r (r-1) int_c int_0^1 t p(A - A0, a, F_t, ..., F_t) dt``

and for a (2r-1)-chain u, ``sigma_u(a) = r int_u p(a, F, ..., F)``.
With these signs ``d rho_c = sigma_c`` and ``d s_u = rho_c - sigma_u`` when
c = du.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import liealg, smooth
from .fields import Axis, Chain, FormField, GridManifold, d, integrate, multi_indices, wedge
from .gauge import (Connection, InfinitesimalSymmetry, _gauss_legendre_01, covariant_d, curvature,
                    infinitesimal_action, integrate_poly, poly_wedge, cs_action)

MAX_PARAMS = 4


def _amplitude_table():
    table = {"1": (lambda s: 1.0, lambda s: np.zeros(len(s)))}

    def unit(i, m):
        e = np.zeros(m)
        e[i] = 1.0
        return e

    for i in range(MAX_PARAMS):
        table[f"s{i}"] = (lambda s, i=i: s[i], lambda s, i=i: unit(i, len(s)))
        table[f"s{i}**2"] = (lambda s, i=i: s[i] ** 2, lambda s, i=i: 2 * s[i] * unit(i, len(s)))
        table[f"sin(s{i})"] = (lambda s, i=i: math.sin(s[i]), lambda s, i=i: math.cos(s[i]) * unit(i, len(s)))
        table[f"cos(s{i})"] = (lambda s, i=i: math.cos(s[i]), lambda s, i=i: -math.sin(s[i]) * unit(i, len(s)))
        for j in range(i + 1, MAX_PARAMS):
            table[f"s{i}*s{j}"] = (lambda s, i=i, j=j: s[i] * s[j],
                                   lambda s, i=i, j=j: s[j] * unit(i, len(s)) + s[i] * unit(j, len(s)))
    return table


AMPLITUDES = _amplitude_table()


def _amplitude_params(name: str) -> set[int]:
    return {int(ch) for k, ch in enumerate(name) if ch.isdigit() and k > 0 and name[k - 1] == "s"}


class ConnectionFamily:
    """A(s) = A_base + sum_k f_k(s) a_k with named amplitudes f_k."""

    def __init__(self, base_connection: Connection, directions: list[FormField], amplitudes: list[str],
                 domain, name: str = "family"):
        domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        m = len(domain)
        if not 1 <= m <= MAX_PARAMS:
            raise ValueError(f"parameter dimension must be between 1 and {MAX_PARAMS}")
        if len(directions) != len(amplitudes):
            raise ValueError("one amplitude per direction")
        for nm in amplitudes:
            if nm not in AMPLITUDES:
                raise ValueError(f"unknown amplitude {nm!r}")
            if any(i >= m for i in _amplitude_params(nm)):
                raise ValueError(f"amplitude {nm!r} uses a parameter beyond s{m - 1}")
        alg = base_connection.algebra_id
        for a in directions:
            if a.degree != 1 or a.base != base_connection.base:
                raise ValueError("directions must be 1-forms on the connection's base")
            if liealg.algebra_violation(a.comps, alg) > 1e-10:
                raise ValueError(f"direction values are not in {alg}")
        self.base_connection = base_connection
        self.directions = list(directions)
        self.amplitudes = list(amplitudes)
        self.domain = domain
        self.name = name

    @property
    def base(self) -> GridManifold:
        return self.base_connection.base

    @property
    def algebra_id(self) -> str:
        return self.base_connection.algebra_id

    @property
    def dim(self) -> int:
        return len(self.domain)

    def _s(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if s.shape != (self.dim,):
            raise ValueError(f"parameter must have {self.dim} entries")
        return s

    def at(self, s) -> Connection:
        s = self._s(s)
        comps = self.base_connection.form.comps.copy()
        for a, nm in zip(self.directions, self.amplitudes):
            comps = comps + AMPLITUDES[nm][0](s) * a.comps
        return Connection(FormField(self.base, 1, comps, self.algebra_id), self.algebra_id, check=False)

    def tangent(self, s, i: int) -> FormField:
        s = self._s(s)
        comps = np.zeros_like(self.base_connection.form.comps)
        for a, nm in zip(self.directions, self.amplitudes):
            c = AMPLITUDES[nm][1](s)[i]
            if c:
                comps = comps + c * a.comps
        return FormField(self.base, 1, comps, self.algebra_id)

    def tangents(self, s) -> list[FormField]:
        return [self.tangent(s, i) for i in range(self.dim)]

    def grid(self, n: int = 3) -> list[np.ndarray]:
        """Interior evaluation points, n per parameter."""
        axes = []
        for lo, hi in self.domain:
            axes.append(lo + (hi - lo) * (np.arange(n) + 0.5) / n)
        return [np.array(p) for p in itertools.product(*axes)]

    def tangent_check(self, s, h: float = 1e-3) -> float:
        """Max deviation of the exact tangents from Richardson differences of at()."""
        s = self._s(s)
        worst = 0.0
        for i in range(self.dim):
            fd = richardson(lambda x: self.at(x).form.comps, s, i, h)
            worst = max(worst, float(np.max(np.abs(fd - self.tangent(s, i).comps))))
        return worst


def richardson(fn, s, i: int, h: float = 1e-3):
    """(4 D_{h/2} - D_h) / 3 for the central difference D_h along parameter i."""
    s = np.asarray(s, dtype=float)
    e = np.zeros_like(s)
    e[i] = 1.0

    def central(step):
        return (np.asarray(fn(s + step * e)) - np.asarray(fn(s - step * e))) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


CASE_TAGS = ("gauge_arbitrary_c", "closed_M", "boundary_of_M")


@dataclass(frozen=True)
class CycleData:
    chain: Chain
    case_tag: str = "gauge_arbitrary_c"

    def __post_init__(self):
        if self.case_tag not in CASE_TAGS:
            raise ValueError(f"case tag must be one of {CASE_TAGS}")
        base = self.chain.base
        if self.case_tag == "closed_M":
            if base is None or not base.is_closed() or self.chain != base.fundamental_chain():
                raise ValueError("closed_M needs a closed base and c = M")
        if self.case_tag == "boundary_of_M":
            if base is None or self.chain != base.boundary():
                raise ValueError("boundary_of_M needs c = dM")

    @property
    def dim(self):
        return self.chain.dim

    def negated(self) -> CycleData:
        return CycleData(-self.chain, "gauge_arbitrary_c")


def _check_dim(p, chain: Chain, want: int, label: str):
    if chain.dim is not None and chain.dim != want:
        raise ValueError(f"{label} for a degree-{p.degree} polynomial needs dimension {want}, got {chain.dim}")


def _chain(c) -> Chain:
    return c.chain if isinstance(c, CycleData) else c


def _real(x) -> float:
    return float(np.real(x))


def sigma_at(p, c, A: Connection | None, a: FormField, b: FormField, F: FormField | None = None) -> float:
    """sigma_c(a, b) at the connection A (F may be passed to skip recomputing it)."""
    chain = _chain(c)
    r = p.degree
    _check_dim(p, chain, 2 * r - 2, "sigma_c")
    if r < 2:
        return 0.0
    if F is None and r > 2:
        F = curvature(A)
    return r * (r - 1) * _real(integrate_poly(p, [a, b] + [F] * (r - 2), chain))


def mu_at(p, c, A: Connection, X: InfinitesimalSymmetry) -> float:
    chain = _chain(c)
    r = p.degree
    _check_dim(p, chain, 2 * r - 2, "mu_c")
    v = X.v_A(A)
    if r == 1:
        return -r * _real(integrate_poly(p, [v], chain))
    F = curvature(A)
    return -r * _real(integrate_poly(p, [v] + [F] * (r - 1), chain))


def rho_form(p, A: Connection, A0: Connection, a: FormField) -> FormField | None:
    """The (2r-2)-form r(r-1) int_0^1 t p(A - A0, a, F_t, ...) dt, exact in t."""
    r = p.degree
    if r < 2:
        return None
    diff = A - A0
    if r == 2:
        return poly_wedge(p, [diff, a])
    F0 = curvature(A0)
    dA0 = covariant_d(A0, diff)
    dd = wedge(diff, diff, "matmul")
    nodes, weights = _gauss_legendre_01(r + 2)
    total = None
    for t, w in zip(nodes, weights):
        Ft = F0 + t * dA0 + (t * t) * dd
        term = poly_wedge(p, [diff, a] + [Ft] * (r - 2)) * (r * (r - 1) * w * t)
        total = term if total is None else total + term
    return total


def rho_at(p, c, A: Connection, A0: Connection, a: FormField) -> float:
    chain = _chain(c)
    _check_dim(p, chain, 2 * p.degree - 2, "rho_c")
    r = p.degree
    if r < 2:
        return 0.0
    diff = A - A0
    if r == 2:
        return _real(integrate_poly(p, [diff, a], chain))
    F0, dA0, dd = curvature(A0), covariant_d(A0, diff), wedge(diff, diff, "matmul")
    nodes, weights = _gauss_legendre_01(r + 2)
    terms = []
    for t, w in zip(nodes, weights):
        Ft = F0 + t * dA0 + (t * t) * dd
        terms.append(r * (r - 1) * w * t * _real(integrate_poly(p, [diff, a] + [Ft] * (r - 2), chain)))
    return math.fsum(terms)


def sigma_u_at(p, u: Chain, A: Connection, a: FormField) -> float:
    r = p.degree
    _check_dim(p, u, 2 * r - 1, "sigma_u")
    forms = [a]
    if r > 1:
        forms += [curvature(A)] * (r - 1)
    return r * _real(integrate_poly(p, forms, u))


def sigma_c(p, c, fam: ConnectionFamily, s, a, b) -> float:
    return sigma_at(p, c, fam.at(s) if p.degree > 2 else None, a, b)


def mu_c(p, c, fam: ConnectionFamily, s, X: InfinitesimalSymmetry) -> float:
    return mu_at(p, c, fam.at(s), X)


def rho_c(p, c, fam: ConnectionFamily, A0: Connection, s, a: FormField) -> float:
    return rho_at(p, c, fam.at(s), A0, a)


def sigma_u(p, u: Chain, fam: ConnectionFamily, s, a: FormField) -> float:
    return sigma_u_at(p, u, fam.at(s), a)


def s_u(p, u: Chain, fam: ConnectionFamily, A0: Connection, s) -> float:
    return cs_action(p, u, fam.at(s), A0)[0]


@dataclass
class EquivariantTwoForm:
    """sigma + mu on a family, for a fixed polynomial and cycle."""

    p: liealg.InvariantPolynomial
    cycle: CycleData
    fam: ConnectionFamily

    def sigma(self, s, a, b) -> float:
        return sigma_c(self.p, self.cycle, self.fam, s, a, b)

    def mu(self, s, X) -> float:
        return mu_c(self.p, self.cycle, self.fam, s, X)

    def sigma_matrix(self, s) -> np.ndarray:
        """sigma on the coordinate tangents, an antisymmetric m x m matrix."""
        ts = self.fam.tangents(s)
        F = curvature(self.fam.at(s)) if self.p.degree > 2 else None
        m = self.fam.dim
        out = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                out[i, j] = sigma_at(self.p, self.cycle, None, ts[i], ts[j], F)
                out[j, i] = -out[i, j]
        return out


@dataclass
class CheckReport:
    residual: float
    scale: float
    details: dict = field(default_factory=dict)

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def drho_check(p, c, fam: ConnectionFamily, A0: Connection, points=None, h: float = 1e-3) -> CheckReport:
    """Compare the exterior derivative of rho_c (Richardson in s) with sigma_c."""
    points = fam.grid(2) if points is None else points
    form = EquivariantTwoForm(p, c if isinstance(c, CycleData) else CycleData(c), fam)
    worst, scale, plain = 0.0, 0.0, []
    for s in points:
        sig = form.sigma_matrix(s)
        rho_on = lambda x, j: rho_c(p, c, fam, A0, x, fam.tangent(x, j))  # noqa: E731
        grad = np.zeros((fam.dim, fam.dim))
        for i in range(fam.dim):
            for j in range(fam.dim):
                if i != j:
                    grad[i, j] = richardson(lambda x: rho_on(x, j), s, i, h)
        drho = grad - grad.T
        worst = max(worst, float(np.max(np.abs(drho - sig))))
        scale = max(scale, float(np.max(np.abs(sig))))
        if fam.dim >= 2:
            plain.append(_order_probe(lambda x: rho_on(x, 1), s, 0, h))
    return CheckReport(worst, scale, {"fd_order_estimates": plain})


def _order_probe(fn, s, i, h):
    """Observed order of the plain central difference, from steps h, h/2, h/4."""
    s = np.asarray(s, dtype=float)
    e = np.zeros_like(s)
    e[i] = 1.0
    D = [(fn(s + k * e) - fn(s - k * e)) / (2 * k) for k in (h, h / 2, h / 4)]
    num, den = abs(D[0] - D[1]), abs(D[1] - D[2])
    if den == 0 or num == 0:
        return float("nan")
    return math.log2(num / den)


def span_coefficients(vectors: list[FormField], target: FormField):
    """Least-squares expansion of target in the span of vectors, with relative residual."""
    M = np.stack([v.comps.ravel() for v in vectors], axis=1)
    y = target.comps.ravel()
    M2 = np.concatenate([M.real, M.imag])
    y2 = np.concatenate([y.real, y.imag])
    coef, *_ = np.linalg.lstsq(M2, y2, rcond=None)
    res = float(np.linalg.norm(M2 @ coef - y2))
    norm = float(np.linalg.norm(y2))
    return coef, (res / norm if norm > 0 else res)


class OutOfSpan(ValueError):
    pass


def cartan_D_check(p, c, fam: ConnectionFamily, X: InfinitesimalSymmetry, points=None, h: float = 1e-3,
                   span_tol: float = 1e-8) -> CheckReport:
    """Residual of d mu_c(X) - iota_{X_A} sigma_c over the parameter grid.

    X_A is expanded in the family's coordinate tangents; if it leaves their
    span the check raises :class:`OutOfSpan` with the measured residual.
    """
    points = fam.grid(2) if points is None else points
    form = EquivariantTwoForm(p, c if isinstance(c, CycleData) else CycleData(c), fam)
    worst, scale, span_worst = 0.0, 0.0, 0.0
    for s in points:
        XA = infinitesimal_action(X, fam.at(s))
        ts = fam.tangents(s)
        if np.max(np.abs(XA.comps), initial=0.0) == 0.0:
            coef, span_res = np.zeros(fam.dim), 0.0
        else:
            coef, span_res = span_coefficients(ts, XA)
        span_worst = max(span_worst, span_res)
        if span_res > span_tol:
            raise OutOfSpan(f"the induced motion leaves the family (relative span residual {span_res:.2e})")
        sig = form.sigma_matrix(s)
        iota = coef @ sig
        dmu = np.array([richardson(lambda x: mu_c(p, c, fam, x, X), s, j, h) for j in range(fam.dim)])
        worst = max(worst, float(np.max(np.abs(dmu - iota))))
        scale = max(scale, float(np.max(np.abs(iota), initial=0.0)))
    return CheckReport(worst, scale, {"span_residual": span_worst})


def dsu_check(p, u: Chain, fam: ConnectionFamily, A0: Connection, points=None, h: float = 1e-3) -> CheckReport:
    """d s_u = rho_c - sigma_u with c = du, Richardson differences in s."""
    c = u.boundary()
    points = fam.grid(2) if points is None else points
    worst, scale = 0.0, 0.0
    for s in points:
        for j in range(fam.dim):
            t = fam.tangent(s, j)
            lhs = richardson(lambda x: s_u(p, u, fam, A0, x), s, j, h)
            rhs = rho_c(p, c, fam, A0, s, t) - sigma_u(p, u, fam, s, t)
            worst = max(worst, abs(lhs - rhs))
            scale = max(scale, abs(rhs))
    return CheckReport(worst, scale)


# --- tautological connection on base x S ---------------------------------------------

def tautological_connection(fam: ConnectionFamily, n: int = 6) -> Connection:
    """The connection on base x S evaluating each point's own connection.

    S is sampled on Lobatto nodes; the form has no legs along S, so its
    curvature has a mixed part ds_i ^ tangent_i besides the base curvature.
    """
    base = fam.base
    s_axes = tuple(Axis(f"s{i}", lo, hi, n, False, base.fd_order) for i, (lo, hi) in enumerate(fam.domain))
    prod = GridManifold(f"{base.model_id}xS{fam.dim}", base.axes + s_axes)
    m = fam.base_connection.rep_dim
    comps = np.zeros((prod.dim,) + prod.shape + (m, m), dtype=complex)
    for idx in itertools.product(range(n), repeat=fam.dim):
        s = np.array([ax.nodes[k] for ax, k in zip(s_axes, idx)])
        sl = (slice(0, base.dim),) + (slice(None),) * base.dim + idx
        comps[sl] = fam.at(s).form.comps
    return Connection(FormField(prod, 1, comps, fam.algebra_id), fam.algebra_id, check=False)


def fiber_integral(omega: FormField, base_dim: int, s_index: int = 0) -> np.ndarray:
    """Integrate the (base top, S-degree) part of omega over the base at every S node.

    Returns the coefficients of the S-form on the S grid, for forms whose
    base part is of top degree; components are ordered as the S multi-indices.
    """
    prod = omega.base
    k_s = omega.degree - base_dim
    base_idx = tuple(range(base_dim))
    out = []
    w = np.ones(())
    for ax in prod.axes[:base_dim]:
        w = np.multiply.outer(w, ax.weights)
    for J in multi_indices(prod.dim - base_dim, k_s):
        I = base_idx + tuple(base_dim + j for j in J)
        comp = omega.component(I)
        out.append(np.tensordot(w, comp, axes=(tuple(range(base_dim)), tuple(range(base_dim)))))
    return np.stack(out)


FAMILY_CATALOG = ("u1_exact_plane", "su2_rotation")


def _u1_flux(base: GridManifold) -> FormField:
    """Flux term i(0.3 cos(2 pi x) dz + 0.2 cos(2 pi x + 0.6) dy) along the first axis.

    Random Fourier 1-forms rarely carry x-dependent zero modes in the other
    slots, and without them windings transverse to x pair trivially.
    """
    comps = np.zeros((base.dim,) + base.shape + (1, 1), dtype=complex)
    ax = base.axes[0]
    if ax.periodic and base.dim >= 2:
        w = 2 * np.pi * (base.coords[0] - ax.lower) / ax.length
        comps[1, ..., 0, 0] = 0.2j * np.cos(w + 0.6)
        if base.dim >= 3:
            comps[2, ..., 0, 0] = 0.3j * np.cos(w)
    return FormField(base, 1, comps, "u1")


def catalog_family(name: str, base: GridManifold, rng: np.random.Generator, amplitude: float = 0.3,
                   curved: bool = False):
    """Catalog 2-parameter families with a pure-gauge generator preserving them.

    Returns (family, generator).  ``u1_exact_plane`` is A(s) = A_b + s0 a + s1 d(xi)
    with generator xi; ``su2_rotation`` rotates two directions into each other
    under the constant generator i sigma_3 / 2.  ``curved=True`` adds a third
    direction with amplitude s0*s1 and bends the first amplitude, which makes the
    s-dependence nonlinear (the generator then no longer preserves the family).
    """
    if name == "u1_exact_plane":
        A_b = Connection(smooth.LieOneForm(base, "u1", rng, amplitude=amplitude).form() + _u1_flux(base), "u1")
        a = smooth.LieOneForm(base, "u1", rng, amplitude=amplitude).form()
        xi = smooth.LieField(base, "u1", rng, amplitude=amplitude)
        X = InfinitesimalSymmetry(base, "u1", xi(base.coords))
        b = d(FormField(base, 0, X.gauge_part[None], "u1"))
        dirs, amps = [a, b], ["s0", "s1"]
        if curved:
            dirs.append(smooth.LieOneForm(base, "u1", rng, amplitude=amplitude).form())
            amps = ["sin(s0)", "s1", "s0*s1"]
        return ConnectionFamily(A_b, dirs, amps, [(-1, 1), (-1, 1)], name), X
    if name == "su2_rotation":
        isig = 1j * liealg.PAULI
        alpha = smooth.FourierScalar(base, rng, amplitude=amplitude)
        gamma = smooth.FourierScalar(base, rng, amplitude=amplitude)
        pts = base.coords
        slot = lambda f, j: np.stack([f(pts) if k == j else 0 * pts[0] for k in range(base.dim)])  # noqa: E731
        fa, fg = slot(alpha, 0) + slot(alpha, 1), slot(gamma, 1) + slot(gamma, 2)
        a = fa[..., None, None] * isig[0] + fg[..., None, None] * isig[1]
        b = fa[..., None, None] * isig[1] - fg[..., None, None] * isig[0]
        beta = smooth.FourierScalar(base, rng, amplitude=amplitude)
        Ab = slot(beta, 0) + slot(beta, 2)
        A_b = Connection(FormField(base, 1, Ab[..., None, None] * isig[2], "su2"), "su2")
        dirs, amps = [FormField(base, 1, a, "su2"), FormField(base, 1, b, "su2")], ["s0", "s1"]
        if curved:
            dirs.append(smooth.LieOneForm(base, "su2", rng, amplitude=amplitude).form())
            amps = ["sin(s0)", "s1", "s0*s1"]
        fam = ConnectionFamily(A_b, dirs, amps, [(-1, 1), (-1, 1)], name)
        X = InfinitesimalSymmetry(base, "su2", np.broadcast_to(0.5 * isig[2], base.shape + (2, 2)).copy())
        return fam, X
    raise ValueError(f"unknown family {name!r}; choose from {FAMILY_CATALOG}")
