"""The prequantization bundle over a family of connections.

The bundle is trivialized by the background A0, so its connection is
``theta - 2 pi i rho_c`` and everything is carried by the 1-form rho_c on
the parameter box.  Symmetries act on connections from the left,
``phi . A = A^(phi^{-1})``; a lift of phi multiplies the fibre by
``exp(2 pi i alpha_phi)`` and the lifts satisfy
``alpha_{phi2 phi1}(x) = alpha_{phi1}(x) + alpha_{phi2}(phi1 . x)`` mod 1.

Two independent routes compute alpha:

* along a path phi_t from the identity, integrating rho(X_A) + mu(X) in t;
* from a (2r-1)-chain u with du = c, as ``s_u(phi . x) - s_u(x)``.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate

from . import connfam, liealg
from .circle import CircleValue, circular_distance
from .connfam import ConnectionFamily, CycleData, richardson
from .fields import Chain, FormField, integrate
from .gauge import (Connection, GaugeMap, InfinitesimalSymmetry, cs_action, exp_gauge, gauge_apply,
                    infinitesimal_action, left_act, transgression, transgression2)

QUAD_TOL = 1e-8
QUAD_LIMIT = 2 ** 14

__all__ = ["CircleValue", "PrequantBundle", "SymmetryPath", "PathLift", "BoundaryLift", "AlphaValue",
           "alpha_path", "alpha_boundary", "cocycle_check", "dalpha_check", "covariant_derivative",
           "section_su", "section_check", "log_holonomy", "disk_flux", "Loop", "change_background",
           "cocycle_algebra", "QuadratureError"]


class QuadratureError(RuntimeError):
    pass


class PrequantBundle:
    """Trivialized prequantization bundle of (p, c) over a connection family."""

    def __init__(self, p: liealg.InvariantPolynomial, cycle: CycleData, fam: ConnectionFamily, A0: Connection):
        if A0.base != fam.base or A0.algebra_id != fam.algebra_id:
            raise ValueError("background connection does not match the family")
        if cycle.dim is not None and cycle.dim != 2 * p.degree - 2:
            raise ValueError(f"the cycle must have dimension {2 * p.degree - 2}")
        p.check_algebra(fam.algebra_id)
        self.p, self.cycle, self.fam, self.A0 = p, cycle, fam, A0

    @property
    def chain(self) -> Chain:
        return self.cycle.chain

    @property
    def integral(self) -> bool:
        return self.p.integral

    def connection(self, point) -> Connection:
        """A parameter vector evaluates the family; a Connection is taken as is."""
        return point if isinstance(point, Connection) else self.fam.at(point)

    def rho(self, s) -> np.ndarray:
        """Components of rho_c on the coordinate tangents at s."""
        A = self.fam.at(s)
        return np.array([connfam.rho_at(self.p, self.chain, A, self.A0, t) for t in self.fam.tangents(s)])

    def rho_on(self, point, a: FormField) -> float:
        return connfam.rho_at(self.p, self.chain, self.connection(point), self.A0, a)

    def mu(self, point, X: InfinitesimalSymmetry) -> float:
        return connfam.mu_at(self.p, self.chain, self.connection(point), X)

    def sigma(self, s) -> np.ndarray:
        return connfam.EquivariantTwoForm(self.p, self.cycle, self.fam).sigma_matrix(s)

    def xi(self, s, v) -> complex:
        """The connection form -2 pi i rho_c(v) on a parameter direction v (theta part omitted)."""
        return -2j * math.pi * float(np.dot(self.rho(s), v))

    def curvature_check(self, points=None, h: float = 1e-3) -> connfam.CheckReport:
        return connfam.drho_check(self.p, self.cycle, self.fam, self.A0, points, h)

    def with_cycle(self, cycle: CycleData) -> PrequantBundle:
        return PrequantBundle(self.p, cycle, self.fam, self.A0)

    def with_polynomial(self, p) -> PrequantBundle:
        return PrequantBundle(p, self.cycle, self.fam, self.A0)


# --- symmetry paths ------------------------------------------------------------------

class SymmetryPath:
    """t -> phi_t with phi_0 = 1, given through the right-acting map g_t = phi_t^{-1}.

    ``phi_t . A = A^{g_t}``; the generator eta_t = g_t^{-1} dg_t/dt makes the
    velocity of the connection ``d^{A_t} eta_t``.
    """

    def __init__(self, base, algebra_id: str, right_map, generator, name: str = "path"):
        self.base, self.algebra_id = base, algebra_id
        self._right_map, self._generator = right_map, generator
        self.name = name

    def right_map(self, t: float) -> GaugeMap:
        return self._right_map(t)

    def generator(self, t: float) -> InfinitesimalSymmetry:
        return self._generator(t)

    def phi(self, t: float = 1.0) -> GaugeMap:
        """The left-acting symmetry phi_t."""
        return self.right_map(t).inverse()

    def act(self, t: float, A: Connection) -> Connection:
        return gauge_apply(self.right_map(t), A)

    @classmethod
    def exponential(cls, xi, algebra_id: str | None = None, name: str = "exp") -> SymmetryPath:
        """g_t = exp(t xi) for a smooth Lie field, so the generator is xi for every t."""
        alg = algebra_id or xi.algebra_id
        gen = InfinitesimalSymmetry.from_field(xi)
        return cls(xi.base, alg, lambda t: exp_gauge(xi, t, alg, name=f"{name}({t:g})"), lambda t: gen, name)

    @classmethod
    def identity(cls, base, algebra_id: str, rep_dim=None) -> SymmetryPath:
        gid = liealg.GROUP_OF[algebra_id]
        return cls(base, algebra_id, lambda t: GaugeMap.identity(base, gid, rep_dim),
                   lambda t: InfinitesimalSymmetry.zero(base, algebra_id, rep_dim), "identity")

    def start_residual(self) -> float:
        g0 = self.right_map(0.0).values
        return float(np.max(np.abs(g0 - np.eye(g0.shape[-1]))))

    def check(self, t: float = 0.3, h: float = 1e-3) -> dict:
        """Identity at t = 0 and generator vs Richardson derivative of g_t."""
        start = self.start_residual()
        dg = richardson(lambda x: self.right_map(float(x[0])).values, np.array([t]), 0, h)
        gi = self.right_map(t).inverse_values
        eta = gi @ dg
        gen = float(np.max(np.abs(eta - self.generator(t).gauge_part)))
        return {"identity_at_0": start, "generator_residual": gen}


# --- alpha -------------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaValue:
    real: float
    circle: CircleValue
    abserr: float = 0.0
    evaluations: int = 0
    method: str = ""


def _path_integrand(bundle: PrequantBundle, path: SymmetryPath, A: Connection):
    def f(t):
        At = path.act(t, A)
        X = path.generator(t)
        XA = infinitesimal_action(X, At)
        return connfam.rho_at(bundle.p, bundle.chain, At, bundle.A0, XA) + connfam.mu_at(bundle.p, bundle.chain, At, X)
    return f


def alpha_path(bundle: PrequantBundle, path: SymmetryPath, point) -> AlphaValue:
    """alpha_{phi_1}(x) = int_0^1 (rho_c(X_A) + mu_c(X))(phi_t . x) dt, adaptive in t."""
    if path.start_residual() > 1e-12:
        raise ValueError("the path does not start at the identity")
    A = bundle.connection(point)
    f = _path_integrand(bundle, path, A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = sp_integrate.quad(f, 0.0, 1.0, epsabs=QUAD_TOL, epsrel=0.0, limit=QUAD_LIMIT, full_output=1)
    val, err, info = out[0], out[1], out[2]
    if len(out) > 3 or err > QUAD_TOL:
        raise QuadratureError(f"t-quadrature did not reach {QUAD_TOL:g} (estimate {err:.2e})")
    return AlphaValue(float(val), CircleValue(float(val)), float(err), int(info["neval"]), "path")


def alpha_boundary(bundle: PrequantBundle, phi: GaugeMap, u: Chain, point) -> AlphaValue:
    """alpha_phi(x) = s_u(phi . x) - s_u(x) for a chain u with du = c."""
    if u.boundary() != bundle.chain:
        raise ValueError("the chain's boundary is not the bundle's cycle")
    A = bundle.connection(point)
    s1 = cs_action(bundle.p, u, left_act(phi, A), bundle.A0)[0]
    s0 = cs_action(bundle.p, u, A, bundle.A0)[0]
    return AlphaValue(s1 - s0, CircleValue(s1 - s0), method="boundary")


class PathLift:
    """Lift of an identity-component symmetry computed along a path."""

    def __init__(self, path: SymmetryPath):
        self.path = path
        self._memo = {}

    @property
    def phi(self) -> GaugeMap:
        return self.path.phi(1.0)

    def act(self, A: Connection) -> Connection:
        return self.path.act(1.0, A)

    def alpha(self, bundle, point) -> AlphaValue:
        # the adaptive path integral is the expensive part; repeated queries reuse it
        A = bundle.connection(point)
        key = (id(bundle), hashlib.sha1(np.ascontiguousarray(A.form.comps).tobytes()).hexdigest())
        if key not in self._memo:
            self._memo[key] = alpha_path(bundle, self.path, A)
        return self._memo[key]


class BoundaryLift:
    """Lift of an arbitrary gauge symmetry computed from a chain with du = c."""

    def __init__(self, phi: GaugeMap, u: Chain):
        self.phi_map, self.u = phi, u

    @property
    def phi(self) -> GaugeMap:
        return self.phi_map

    def act(self, A: Connection) -> Connection:
        return left_act(self.phi_map, A)

    def alpha(self, bundle, point) -> AlphaValue:
        return alpha_boundary(bundle, self.phi_map, self.u, point)


def cocycle_check(bundle: PrequantBundle, lift1, lift2, point, u: Chain) -> dict:
    """dist(alpha_{phi2 phi1}(x), alpha_{phi1}(x) + alpha_{phi2}(phi1 . x)); the product uses u."""
    A = bundle.connection(point)
    a1 = lift1.alpha(bundle, A)
    a2 = lift2.alpha(bundle, lift1.act(A))
    a21 = alpha_boundary(bundle, lift2.phi @ lift1.phi, u, A)
    res = circular_distance(a21.circle.rep, (a1.circle + a2.circle).rep)
    return {"residual": res, "alpha_1": a1.real, "alpha_2": a2.real, "alpha_21": a21.real}


def dalpha_check(bundle: PrequantBundle, lift, s, h: float = 1e-3) -> dict:
    """Richardson gradient of the real lift of alpha over S against phi^* rho - rho."""
    fam = bundle.fam
    s = np.asarray(s, dtype=float)
    lhs = np.array([richardson(lambda x: lift.alpha(bundle, x).real, s, j, h) for j in range(fam.dim)])
    A = fam.at(s)
    moved = lift.act(A)
    g = lift.phi.values
    gi = lift.phi.inverse_values
    rhs = []
    for t in fam.tangents(s):
        # the left action moves a tangent a to phi a phi^{-1}
        pushed = FormField(t.base, 1, g[None] @ t.comps @ gi[None], t.algebra)
        rhs.append(bundle.rho_on(moved, pushed) - bundle.rho_on(A, t))
    rhs = np.array(rhs)
    return {"residual": float(np.max(np.abs(lhs - rhs))), "scale": float(np.max(np.abs(rhs))),
            "gradient": lhs.tolist()}


# --- sections ------------------------------------------------------------------------------

def section_su(bundle: PrequantBundle, u: Chain):
    """S_u(s) = exp(2 pi i s_u(A(s))), a unit section when du = c."""
    if u.boundary() != bundle.chain:
        raise ValueError("the chain's boundary is not the bundle's cycle")

    def S(s):
        return complex(np.exp(2j * math.pi * connfam.s_u(bundle.p, u, bundle.fam, bundle.A0, s)))
    return S


def covariant_derivative(bundle: PrequantBundle, section, s, direction, h: float = 1e-3) -> complex:
    """dS(v) - 2 pi i rho_c(v) S(s), with dS by Richardson differences along v."""
    s = np.asarray(s, dtype=float)
    v = np.asarray(direction, dtype=float)
    dS = richardson(lambda x: section(s + x[0] * v), np.array([0.0]), 0, h)
    return complex(dS) - 2j * math.pi * float(np.dot(bundle.rho(s), v)) * section(s)


def section_check(bundle: PrequantBundle, u: Chain, points=None, h: float = 1e-3) -> dict:
    """Residual of nabla S_u + 2 pi i sigma_u S_u on coordinate directions."""
    fam = bundle.fam
    S = section_su(bundle, u)
    points = fam.grid(2) if points is None else points
    worst, scale = 0.0, 0.0
    for s in points:
        val = S(s)
        for j in range(fam.dim):
            e = np.zeros(fam.dim)
            e[j] = 1.0
            nab = covariant_derivative(bundle, S, s, e, h)
            su = connfam.sigma_u(bundle.p, u, fam, s, fam.tangent(s, j))
            worst = max(worst, abs(nab + 2j * math.pi * su * val))
            scale = max(scale, abs(nab))
    return {"residual": worst, "scale": scale}


# --- holonomy -------------------------------------------------------------------------------

@dataclass
class Loop:
    """A closed curve tau -> s(tau) on [0, 1] with its velocity."""

    point: callable
    velocity: callable
    name: str = "loop"

    @classmethod
    def circle(cls, center, radius: float, axes=(0, 1), turns: int = 1, warp: float = 0.0):
        """Circle in the (axes) plane; ``warp`` reparametrizes tau -> tau + warp sin(2 pi tau) / (2 pi)."""
        center = np.asarray(center, dtype=float)
        i, j = axes

        def angle(tau):
            return 2 * math.pi * turns * (tau + warp * math.sin(2 * math.pi * tau) / (2 * math.pi))

        def dangle(tau):
            return 2 * math.pi * turns * (1 + warp * math.cos(2 * math.pi * tau))

        def point(tau):
            s = center.copy()
            s[i] += radius * math.cos(angle(tau))
            s[j] += radius * math.sin(angle(tau))
            return s

        def velocity(tau):
            v = np.zeros_like(center)
            v[i] = -radius * math.sin(angle(tau)) * dangle(tau)
            v[j] = radius * math.cos(angle(tau)) * dangle(tau)
            return v

        return cls(point, velocity, f"circle(r={radius:g}, warp={warp:g})")


def log_holonomy(bundle: PrequantBundle, loop: Loop, tol: float = 1e-12, max_nodes: int = 2 ** 10):
    """(oint rho_c) mod 1 by the periodic trapezoid rule, doubled until converged.

    Returns (CircleValue, real integral).
    """
    if np.max(np.abs(loop.point(0.0) - loop.point(1.0))) > 1e-12:
        raise ValueError("the curve is not closed")
    cache = {}

    def f(tau):
        if tau not in cache:
            cache[tau] = float(np.dot(bundle.rho(loop.point(tau)), loop.velocity(tau)))
        return cache[tau]

    n = 8
    prev = math.fsum(f(k / n) for k in range(n)) / n
    while True:
        n *= 2
        if n > max_nodes:
            raise QuadratureError("holonomy quadrature did not converge")
        cur = math.fsum(f(k / n) for k in range(n)) / n
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return CircleValue(cur), cur
        prev = cur


def disk_flux(bundle: PrequantBundle, center, radius: float, axes=(0, 1), radial: int = 6, angular: int = 12):
    """int_D sigma_c over the disk, Gauss-Legendre in the radius and trapezoid in the angle."""
    center = np.asarray(center, dtype=float)
    i, j = axes
    x, w = np.polynomial.legendre.leggauss(radial)
    rs, wr = radius * (x + 1) / 2, radius * w / 2
    total = []
    for r, wrr in zip(rs, wr):
        for k in range(angular):
            th = 2 * math.pi * k / angular
            s = center.copy()
            s[i] += r * math.cos(th)
            s[j] += r * math.sin(th)
            sig = bundle.sigma(s)[i, j]
            total.append(sig * r * wrr * 2 * math.pi / angular)
    return math.fsum(total)


# --- change of background -----------------------------------------------------------------

@dataclass
class BackgroundChange:
    bundle: PrequantBundle
    beta: callable
    report: dict = field(default_factory=dict)

    def psi(self, s, z: complex) -> complex:
        """The bundle isomorphism (s, z) -> (s, exp(2 pi i beta(s)) z)."""
        return complex(np.exp(2j * math.pi * self.beta(s)) * z)


def change_background(bundle: PrequantBundle, A0p: Connection, points=None, h: float = 1e-3,
                      u: Chain | None = None) -> BackgroundChange:
    """Move the background to A0p; beta_c(s) = -int_c Tp(A(s), A0, A0p).

    The report holds the residual of rho' - rho - d beta and, given u with
    du = c, of Psi o S_u against S'_u exp(2 pi i int_u Tp(A0, A0p)).
    """
    if A0p.base != bundle.A0.base or A0p.algebra_id != bundle.A0.algebra_id:
        raise ValueError("the new background lives on a different base or algebra")
    fam, p, chain = bundle.fam, bundle.p, bundle.chain
    new = PrequantBundle(p, bundle.cycle, fam, A0p)

    def beta(s):
        return -float(np.real(integrate(transgression2(p, fam.at(s), bundle.A0, A0p), chain))) \
            if p.degree >= 2 else 0.0

    points = fam.grid(2) if points is None else points
    worst, scale = 0.0, 0.0
    for s in points:
        dbeta = np.array([richardson(lambda x: beta(x), s, j, h) for j in range(fam.dim)])
        diff = new.rho(s) - bundle.rho(s)
        worst = max(worst, float(np.max(np.abs(diff - dbeta))))
        scale = max(scale, float(np.max(np.abs(diff))))
    report = {"rho_shift_residual": worst, "rho_shift_scale": scale}
    if u is not None:
        S, Sp = section_su(bundle, u), section_su(new, u)
        shift = float(np.real(integrate(transgression(p, bundle.A0, A0p), u)))
        phase = np.exp(2j * math.pi * shift)
        sec = 0.0
        for s in points:
            lhs = np.exp(2j * math.pi * beta(s)) * S(s)
            sec = max(sec, abs(lhs - Sp(s) * phase))
        report["section_residual"] = sec
    return BackgroundChange(new, beta, report)


# --- change of polynomial and cycle ---------------------------------------------------------

def _same_background(bundles):
    ref = bundles[0].A0
    for b in bundles[1:]:
        if b.A0.base != ref.base or not np.array_equal(b.A0.form.comps, ref.form.comps):
            raise ValueError("cocycle algebra needs one shared background connection")
        if b.fam is not bundles[0].fam:
            raise ValueError("cocycle algebra needs one shared family")


COCYCLE_OPS = ("negate_c", "add_c", "negate_p", "add_p", "difference_section")


def cocycle_algebra(op: str, bundles, s, lift=None, u: Chain | None = None) -> dict:
    """Check the sign and additivity rules of rho and alpha under changes of c and p.

    ``negate_*`` takes one bundle, ``add_*`` two; ``difference_section`` takes
    bundles for c and c' plus a boundary lift and u with du = c - c'.  A
    boundary lift follows the cycle: -u for -c, and u + u' for c + c', where
    ``u`` supplies u' with du' = c'.
    """
    if op not in COCYCLE_OPS:
        raise ValueError(f"unknown operation {op!r}; choose from {COCYCLE_OPS}")
    bundles = list(bundles)
    _same_background(bundles)
    b0 = bundles[0]

    def alpha(b, point=s):
        if lift is None:
            return None
        if isinstance(lift, BoundaryLift):
            chain = b.chain
            if chain == lift.u.boundary():
                return lift.alpha(b, point).circle
            if chain == -lift.u.boundary():
                return BoundaryLift(lift.phi, -lift.u).alpha(b, point).circle
            if u is not None and chain == u.boundary():
                return BoundaryLift(lift.phi, u).alpha(b, point).circle
            if u is not None and chain == (lift.u + u).boundary():
                return BoundaryLift(lift.phi, lift.u + u).alpha(b, point).circle
            if u is not None and chain == (lift.u - u).boundary():
                return BoundaryLift(lift.phi, lift.u - u).alpha(b, point).circle
            raise ValueError("no chain bounds this cycle")
        return lift.alpha(b, point).circle

    out = {"op": op}
    if op in ("negate_c", "negate_p"):
        neg = b0.with_cycle(b0.cycle.negated()) if op == "negate_c" else b0.with_polynomial(-b0.p)
        back = neg.with_cycle(neg.cycle.negated()) if op == "negate_c" else neg.with_polynomial(-neg.p)
        out["rho_residual"] = float(np.max(np.abs(neg.rho(s) + b0.rho(s))))
        out["double_negation_residual"] = float(np.max(np.abs(back.rho(s) - b0.rho(s))))
        if lift is not None:
            out["alpha_residual"] = alpha(neg).dist(-alpha(b0))
        return out
    if len(bundles) != 2:
        raise ValueError(f"{op} takes two bundles")
    b1 = bundles[1]
    if op == "add_c":
        total = b0.with_cycle(CycleData(b0.chain + b1.chain))
    elif op == "add_p":
        total = b0.with_polynomial(b0.p + b1.p)
        if b0.chain != b1.chain:
            raise ValueError("add_p needs a common cycle")
    else:
        if lift is None or u is None:
            raise ValueError("difference_section needs a lift and a chain")
        if u.boundary() != b0.chain - b1.chain:
            raise ValueError("the chain's boundary is not c - c'")
        A = b0.connection(s)
        su1 = cs_action(b0.p, u, lift.act(A), b0.A0)[0]
        su0 = cs_action(b0.p, u, A, b0.A0)[0]
        lhs = alpha(b0) - alpha(b1)
        out["alpha_residual"] = lhs.dist(CircleValue(su1 - su0))
        return out
    out["rho_residual"] = float(np.max(np.abs(total.rho(s) - b0.rho(s) - b1.rho(s))))
    if lift is not None:
        out["alpha_residual"] = alpha(total).dist(alpha(b0) + alpha(b1))
    return out
