"""Verification tests addressable by id, as run by the command line tool.

Every test takes the validated config dict, rebuilds the objects it needs
deterministically from the seed and returns ``(residual, details)``.
Random fields are drawn from ``default_rng([seed, crc32(key)])`` so that a
test's inputs do not depend on which other tests ran or in which process.
"""
from __future__ import annotations

import functools
import json
import math
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import connfam, fields, fldio, gauge, liealg, metrics, prequant, smooth
from .circle import circular_distance, distance_to_integer
from .connfam import CycleData
from .gauge import Connection

FAMILY_FOR = {"su2": "su2_rotation", "u1": "u1_exact_plane"}
WINDINGS = {"u1": ((0, 1, 0), (0, 0, 2))}


@dataclass(frozen=True)
class Test:
    test_id: str
    anchor: str
    tolerance: float
    fn: Callable
    integrality: bool = False
    kind: str = "gauge"


REGISTRY: dict[str, Test] = {}


def register(test_id, anchor, tolerance, integrality=False, kind="gauge"):
    def wrap(fn):
        REGISTRY[test_id] = Test(test_id, anchor, tolerance, fn, integrality, kind)
        return fn
    return wrap


# --- context --------------------------------------------------------------------------------

class Context:
    """Objects shared by the gauge tests, built lazily from one config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        m = cfg["model"]
        self.base = fields.make_model(m["id"], m["n"], m.get("fd_order", 4))
        self.algebra_id = liealg.ALGEBRA_OF[cfg["group"]]
        self.seed = int(cfg.get("rng_seed", 0))
        self.point = np.asarray(cfg.get("point", [0.3, -0.2]), dtype=float)
        self.amplitude = float(cfg.get("family", {}).get("amplitude", 0.3))

    def rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(key.encode())])

    @functools.cached_property
    def p(self):
        poly_cfg = self.cfg["polynomial"]
        p = liealg.builtin_polynomial(poly_cfg["name"])
        scale = float(poly_cfg.get("scale", 1.0))
        return p if scale == 1.0 else p.scaled(scale)

    def random_connection(self, key, amplitude=0.3, base=None):
        base = base or self.base
        form = smooth.LieOneForm(base, self.algebra_id, self.rng(key), amplitude=amplitude).form()
        return Connection(form, self.algebra_id)

    @functools.cached_property
    def A0(self):
        path = self.cfg.get("background", {}).get("file")
        if path:
            return Connection(self._load_form(path), self.algebra_id)
        return self.random_connection("background", float(self.cfg.get("background", {}).get("amplitude", 0.3)))

    def _load_form(self, path):
        form = fldio.read(path)
        if (not isinstance(form, fields.FormField) or form.degree != 1 or form.base != self.base
                or form.algebra != self.algebra_id):
            raise ValueError(f"{path} does not hold a {self.algebra_id} 1-form on the configured model")
        return form

    @functools.cached_property
    def u(self):
        n = self.base.axes[0].n
        return fields.slab_chain(self.base, 0, n // 4, 3 * n // 4)

    @functools.cached_property
    def cycle(self):
        return CycleData(self.u.boundary())

    def _family(self, curved):
        fam_cfg = self.cfg.get("family", {})
        if "directions" in fam_cfg:
            # families read from .fld files carry no generator
            dirs = [self._load_form(f) for f in fam_cfg["directions"]]
            base_conn = (Connection(self._load_form(fam_cfg["base_connection"]), self.algebra_id)
                         if fam_cfg.get("base_connection") else Connection.zero(self.base, self.algebra_id))
            amps = fam_cfg.get("amplitudes", [f"s{i}" for i in range(len(dirs))])
            domain = fam_cfg.get("domain", [[-1, 1]] * len(amps))
            return connfam.ConnectionFamily(base_conn, dirs, amps, domain, "from_files"), None
        name = fam_cfg.get("name", FAMILY_FOR[self.algebra_id])
        return connfam.catalog_family(name, self.base, self.rng("family"), self.amplitude, curved=curved)

    @functools.cached_property
    def family(self):
        return self._family(False)

    @functools.cached_property
    def curved_family(self):
        return self._family(True)[0]

    @functools.cached_property
    def bundle(self):
        return prequant.PrequantBundle(self.p, self.cycle, self.family[0], self.A0)

    @functools.cached_property
    def path(self):
        xi = smooth.LieField(self.base, self.algebra_id, self.rng("path"), amplitude=0.5)
        return prequant.SymmetryPath.exponential(xi)

    @functools.cached_property
    def path_lift(self):
        return prequant.PathLift(self.path)

    @functools.cached_property
    def winding_maps(self):
        if self.algebra_id == "su2":
            return [gauge.su2_degree_map(self.base, n) for n in (1, 2)]
        return [gauge.u1_winding(self.base, w) for w in WINDINGS["u1"]]


@functools.lru_cache(maxsize=4)
def _context(key: str) -> Context:
    return Context(json.loads(key))


def context(cfg) -> Context:
    return _context(json.dumps(cfg, sort_keys=True))


# --- gauge-theoretic tests -----------------------------------------------------------------

@register("transgression.exactness", "dTp(A1, A0) = p(F1) - p(F0) on the model times an interval", 1e-5)
def _transgression(cfg, amplitude=0.05, s_nodes=5):
    # the residual scales as amplitude**2 times the relative stencil error
    ctx = context(cfg)
    base = ctx.base
    ext = fields.with_interval(base, s_nodes)
    alg = ctx.algebra_id
    fieldsets = [smooth.LieOneForm(base, alg, ctx.rng(f"transgression{i}"), amplitude=amplitude) for i in range(4)]

    def line(a, b):
        def fn(pts):
            v = a(pts[:-1]) + pts[-1][None, ..., None, None] * b(pts[:-1])
            return np.concatenate([v, np.zeros_like(v[:1])])
        return Connection(fields.from_function(ext, 1, fn, alg), alg)

    A1, A0 = line(*fieldsets[:2]), line(*fieldsets[2:])
    lhs = fields.d(gauge.transgression(ctx.p, A1, A0))
    rhs = gauge.char_form(ctx.p, A1) - gauge.char_form(ctx.p, A0)
    return (lhs - rhs).max_abs(), {"scale": rhs.max_abs(), "amplitude": amplitude, "s_nodes": s_nodes}


def _integer_jumps(ctx):
    M = ctx.base.fundamental_chain()
    A = ctx.family[0].at(ctx.point)
    s0 = gauge.cs_action(ctx.p, M, A, ctx.A0)[0]
    return [gauge.cs_action(ctx.p, M, gauge.gauge_apply(g, A), ctx.A0)[0] - s0 for g in ctx.winding_maps]


@register("cs.integer_jump", "s_M changes by an integer under gauge maps off the identity component", 1e-3,
          integrality=True)
def _cs_integer(cfg):
    ctx = context(cfg)
    jumps = _integer_jumps(ctx)
    if ctx.algebra_id == "su2":
        # degree-n maps must move s_M by +-n, with one sign for both degrees
        signs = {int(np.sign(round(j))) for j in jumps}
        res = max(min(abs(j - n), abs(j + n)) for j, n in zip(jumps, (1, 2)))
        if len(signs) != 1:
            res = max(res, 1.0)
    else:
        res = max(distance_to_integer(j) for j in jumps)
    return res, {"jumps": jumps}


@register("alpha.u_independence", "alpha computed from u and from its complement agree mod 1", 1e-4,
          integrality=True)
def _u_independence(cfg):
    ctx = context(cfg)
    other = ctx.u - ctx.base.fundamental_chain()
    phi = ctx.winding_maps[0]
    a = prequant.alpha_boundary(ctx.bundle, phi, ctx.u, ctx.point).real
    b = prequant.alpha_boundary(ctx.bundle, phi, other, ctx.point).real
    return distance_to_integer(a - b), {"alpha_u": a, "alpha_complement": b}


@register("rho.exterior_derivative", "d rho_c = sigma_c on the parameter space (relative)", 1e-6)
def _drho(cfg):
    ctx = context(cfg)
    r = connfam.drho_check(ctx.p, ctx.cycle, ctx.curved_family, ctx.A0, points=[ctx.point])
    return r.relative, {"absolute": r.residual, "scale": r.scale, **r.details}


@register("moment.identity", "d mu_c(X) = iota_{X_A} sigma_c for a pure-gauge X", 1e-6)
def _moment(cfg):
    ctx = context(cfg)
    fam, X = ctx.family
    if X is None:
        raise ValueError("the moment identity needs a catalog family with a generator")
    r = connfam.cartan_D_check(ctx.p, ctx.cycle, fam, X, points=[ctx.point])
    return r.residual, {"scale": r.scale, **r.details}


@register("alpha.path_vs_boundary", "alpha along a gauge path equals s_u(phi x) - s_u(x) as a real number", 1e-5)
def _path_boundary(cfg):
    ctx = context(cfg)
    ap = ctx.path_lift.alpha(ctx.bundle, ctx.point)
    ab = prequant.alpha_boundary(ctx.bundle, ctx.path.phi(), ctx.u, ctx.point)
    return abs(ap.real - ab.real), {"alpha_path": ap.real, "alpha_boundary": ab.real,
                                    "quad_abserr": ap.abserr, "evaluations": ap.evaluations}


@register("alpha.cocycle", "alpha_{phi2 phi1}(x) = alpha_{phi1}(x) + alpha_{phi2}(phi1 x) mod 1", 1e-6)
def _cocycle(cfg):
    ctx = context(cfg)
    l1, l2 = (prequant.BoundaryLift(g, ctx.u) for g in ctx.winding_maps)
    r = prequant.cocycle_check(ctx.bundle, l1, l2, ctx.point, ctx.u)
    return r.pop("residual"), r


@register("alpha.cocycle_mixed", "cocycle law for a path lift followed by a boundary lift", 1e-5)
def _cocycle_mixed(cfg):
    ctx = context(cfg)
    l2 = prequant.BoundaryLift(ctx.winding_maps[0], ctx.u)
    r = prequant.cocycle_check(ctx.bundle, ctx.path_lift, l2, ctx.point, ctx.u)
    return r.pop("residual"), r


@register("alpha.differential", "d alpha_phi = phi^* rho_c - rho_c on the parameter space", 1e-6)
def _dalpha(cfg):
    ctx = context(cfg)
    # a smooth map keeps the discrete gauge covariance of sigma_u at roundoff level
    lift = prequant.BoundaryLift(ctx.path.phi(), ctx.u)
    r = prequant.dalpha_check(ctx.bundle, lift, ctx.point)
    return r.pop("residual"), r


@functools.lru_cache(maxsize=2)
def _background(key):
    ctx = _context(key)
    A0p = ctx.random_connection("background2")
    return prequant.change_background(ctx.bundle, A0p, points=[ctx.point], u=ctx.u).report


@register("background.rho_shift", "rho' = rho + d beta_c after changing the background", 1e-5)
def _rho_shift(cfg):
    rep = _background(json.dumps(cfg, sort_keys=True))
    return rep["rho_shift_residual"], {"scale": rep["rho_shift_scale"]}


@register("background.section", "Psi o S_u = S'_u exp(2 pi i int_u Tp(A0, A0'))", 1e-6)
def _background_section(cfg):
    rep = _background(json.dumps(cfg, sort_keys=True))
    return rep["section_residual"], {}


@register("section.covariant", "nabla S_u + 2 pi i sigma_u S_u = 0", 1e-6)
def _section(cfg):
    ctx = context(cfg)
    r = prequant.section_check(ctx.bundle, ctx.u, points=[ctx.point])
    return r["residual"], {"scale": r["scale"]}


@register("section.flat_slice", "on a flat slice sigma_u = 0 and S_u is parallel", 1e-8)
def _flat_slice(cfg):
    ctx = context(cfg)
    base = ctx.base
    rng = ctx.rng("flat")
    p = liealg.builtin_polynomial("c1_squared")
    const = np.zeros((base.dim,) + base.shape + (1, 1), dtype=complex)
    for k, val in enumerate(rng.uniform(-1, 1, base.dim)):
        const[k] = 1j * val
    A_b = Connection(fields.FormField(base, 1, const, "u1"), "u1")
    dirs = []
    for _ in range(2):
        h = smooth.FourierScalar(base, rng, amplitude=0.3)(base.coords)
        dirs.append(fields.d(fields.FormField(base, 0, 1j * h[None, ..., None, None], "u1")))
    fam = connfam.ConnectionFamily(A_b, dirs, ["s0", "s1"], [(-1, 1), (-1, 1)], "flat_slice")
    A0 = Connection(smooth.LieOneForm(base, "u1", ctx.rng("flat_background"), amplitude=0.3).form(), "u1")
    bundle = prequant.PrequantBundle(p, ctx.cycle, fam, A0)
    r = prequant.section_check(bundle, ctx.u, points=[ctx.point])
    flat = max(abs(connfam.sigma_u(p, ctx.u, fam, ctx.point, t)) for t in fam.tangents(ctx.point))
    nabla = max(abs(prequant.covariant_derivative(bundle, prequant.section_su(bundle, ctx.u), ctx.point, e))
                for e in np.eye(2))
    return max(r["residual"], flat, nabla), {"sigma_u": flat, "nabla_S": nabla}


RADII = (0.05, 0.1, 0.2, 0.3, 0.4)


def _holonomy_bundle(ctx):
    return prequant.PrequantBundle(ctx.p, ctx.cycle, ctx.curved_family, ctx.A0)


@register("holonomy.flux", "log hol(dD) = int_D sigma_c mod 1 for disks in the parameter space", 1e-5)
def _holonomy(cfg, radii=RADII):
    ctx = context(cfg)
    B = _holonomy_bundle(ctx)
    center = [0.1, 0.0]
    rows = []
    for R in radii:
        h, real = prequant.log_holonomy(B, prequant.Loop.circle(center, R))
        flux = prequant.disk_flux(B, center, R)
        rows.append((R, real, flux, circular_distance(real, flux)))
    return max(r[3] for r in rows), {"rows": rows}


@register("holonomy.reparametrization", "log holonomy does not depend on the loop's parametrization", 1e-10)
def _reparam(cfg):
    ctx = context(cfg)
    B = _holonomy_bundle(ctx)
    worst = 0.0
    for R in (0.1, 0.3):
        a = prequant.log_holonomy(B, prequant.Loop.circle([0.1, 0.0], R))[1]
        b = prequant.log_holonomy(B, prequant.Loop.circle([0.1, 0.0], R, warp=0.5))[1]
        worst = max(worst, circular_distance(a, b))
    return worst, {}


# --- metric tests --------------------------------------------------------------------------

def _metric_cfg(cfg):
    m = {"n": 64, "fd_order": 8, "solid_n": 32, "solid_fd_order": 4}
    m.update(cfg.get("metric", {}))
    return m


def _rng(cfg, key):
    return np.random.default_rng([int(cfg.get("rng_seed", 0)), zlib.crc32(key.encode())])


@register("lc.identities", "Levi-Civita connection is torsion free and metric compatible", 1e-6, kind="metric")
def _lc_identities(cfg):
    m = _metric_cfg(cfg)
    T = fields.torus(2, m["n"], fd_order=m["fd_order"])
    pot = smooth.FourierScalar(T, _rng(cfg, "conformal"), amplitude=0.3)
    g = metrics.conformal_metric(T, pot)
    r = metrics.lc_identity_residuals(g)
    exact = metrics.conformal_christoffel(pot, T.coords, 2)
    closed = float(np.max(np.abs(exact - np.moveaxis(metrics.levi_civita(g).form.comps.real, 0, -1))))
    return max(r.values()), {**r, "closed_form_conformal": closed}


@register("lc.naturality", "LC(phi^* g) = phi^* LC(g) for catalog diffeomorphisms", 1e-5, kind="metric")
def _lc_naturality(cfg):
    m = _metric_cfg(cfg)
    T = fields.torus(2, m["n"], fd_order=m["fd_order"])
    g = metrics.conformal_metric(T, smooth.FourierScalar(T, _rng(cfg, "conformal"), amplitude=0.3))
    per = {nm: metrics.lc_naturality_check(metrics.catalog_diffeo(nm, T), g)["residual"]
           for nm in metrics.DIFFEO_CATALOG}
    return max(per.values()), per


@register("metric.cs_invariance", "metric Chern-Simons section of the solid torus is invariant under a "
          "rotation-translation path", 1e-4, kind="metric")
def _metric_cs(cfg):
    m = _metric_cfg(cfg)
    ST = fields.solid_torus(m["solid_n"], fd_order=m["solid_fd_order"])
    A0 = metrics.levi_civita(metrics.flat_metric(ST))
    h = smooth.CartesianTensor(3, _rng(cfg, "solid"), periods=(4, 4, ST.axes[2].length), amplitude=0.15)
    g = metrics.perturbed_metric(ST, h)
    p = liealg.builtin_polynomial("p1_gl")
    r = metrics.cs_invariance_check(p, g, A0)
    return r["residual"], {"value": r["value"]}


@register("metric.rho_exterior_derivative", "d rho' = sigma' for the Levi-Civita pullback on T2 (relative)", 1e-6,
          kind="metric")
def _metric_drho(cfg):
    m = _metric_cfg(cfg)
    T = fields.torus(2, 32, fd_order=m["fd_order"])
    rng = _rng(cfg, "metric_family")
    dirs = []
    for _ in range(2):
        a, b, c = (smooth.FourierScalar(T, rng, amplitude=0.2)(T.coords) for _ in range(3))
        dirs.append(np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2))
    fam = metrics.MetricFamily(metrics.flat_metric(T), dirs, ["sin(s0)", "s1"], [(-0.5, 0.5)] * 2)
    B = metrics.metric_prequant(liealg.builtin_polynomial("p1_gl"), fam)
    r = connfam.drho_check(B.p, B.cycle, fam, B.A0, points=[np.array([0.2, 0.3])])
    return r.relative, {"absolute": r.residual, "scale": r.scale}


SUITES = {
    "default": [t for t, v in REGISTRY.items() if v.kind == "gauge"],
    "metrics": [t for t, v in REGISTRY.items() if v.kind == "metric"],
}
SUITES["full"] = SUITES["default"] + SUITES["metrics"]


def run_test(test_id: str, cfg: dict) -> dict:
    """One report row; numerical exceptions become failing rows with the message attached."""
    test = REGISTRY[test_id]
    tol = float(cfg.get("tolerances", {}).get(test_id, test.tolerance))
    expected_fail = test_id in set(cfg.get("expected_fail", []))
    row = {"test_id": test_id, "paper_anchor": test.anchor, "tolerance": tol, "expected_fail": expected_fail}
    try:
        residual, details = test.fn(cfg)
        residual = float(residual)
        row.update(residual=residual, details=_plain(details))
        row["pass"] = bool(math.isfinite(residual) and residual < tol)
    except (prequant.QuadratureError, connfam.OutOfSpan, ValueError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        row.update(residual=None, details={"error": f"{type(exc).__name__}: {exc}"})
        row["pass"] = False
    return row


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in sorted(x.items())}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x
