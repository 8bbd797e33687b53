import math

import numpy as np
import pytest

from prequant_lab import connfam, fields, gauge, liealg, prequant, smooth
from prequant_lab.circle import circular_distance
from prequant_lab.connfam import CycleData
from prequant_lab.gauge import Connection
from prequant_lab.prequant import BoundaryLift, Loop, PathLift, PrequantBundle, SymmetryPath

C2 = liealg.builtin_polynomial("c2_su2")
C1SQ = liealg.builtin_polynomial("c1_squared")
N = 16


def random_connection(base, alg, seed, amplitude=0.3):
    return Connection(smooth.LieOneForm(base, alg, np.random.default_rng(seed), amplitude=amplitude).form(), alg)


class Setup:
    def __init__(self, alg, seed=0, n=N):
        self.base = fields.torus(3, n, fd_order=8)
        self.alg = alg
        self.p = C2 if alg == "su2" else C1SQ
        self.u = fields.slab_chain(self.base, 0, n // 4, 3 * n // 4)
        name = "su2_rotation" if alg == "su2" else "u1_exact_plane"
        self.fam, self.X = connfam.catalog_family(name, self.base, np.random.default_rng(seed))
        self.A0 = random_connection(self.base, alg, seed + 1)
        self.bundle = PrequantBundle(self.p, CycleData(self.u.boundary()), self.fam, self.A0)
        xi = smooth.LieField(self.base, alg, np.random.default_rng(seed + 2), amplitude=0.5)
        self.path = SymmetryPath.exponential(xi)
        self.s = np.array([0.2, -0.3])


@pytest.fixture(scope="module")
def su2():
    return Setup("su2")


@pytest.fixture(scope="module")
def u1():
    return Setup("u1")


def test_paths_start_at_the_identity_and_match_their_generator(su2):
    report = su2.path.check()
    assert report["identity_at_0"] < 1e-12
    assert report["generator_residual"] < 1e-8
    ident = SymmetryPath.identity(su2.base, "su2")
    assert ident.start_residual() == 0.0


def test_identity_path_and_identity_map_give_zero(su2):
    ident = SymmetryPath.identity(su2.base, "su2")
    assert prequant.alpha_path(su2.bundle, ident, su2.s).real == 0.0
    lift = BoundaryLift(gauge.GaugeMap.identity(su2.base, "SU2"), su2.u)
    assert lift.alpha(su2.bundle, su2.s).real == 0.0


def test_path_not_starting_at_identity_is_rejected(su2):
    g = gauge.su2_degree_map(su2.base, 1)
    bad = SymmetryPath(su2.base, "su2", lambda t: g, lambda t: gauge.InfinitesimalSymmetry.zero(su2.base, "su2"))
    with pytest.raises(ValueError):
        prequant.alpha_path(su2.bundle, bad, su2.s)


def test_boundary_alpha_needs_a_bounding_chain(u1):
    g = gauge.u1_winding(u1.base, (0, 1, 0))
    with pytest.raises(ValueError):
        prequant.alpha_boundary(u1.bundle, g, fields.slab_chain(u1.base, 0, 0, 3), u1.s)


def test_path_lift_memo_returns_the_same_value(su2):
    lift = PathLift(su2.path)
    first = lift.alpha(su2.bundle, su2.s)
    assert lift.alpha(su2.bundle, su2.s) is first
    assert abs(first.real - prequant.alpha_boundary(su2.bundle, su2.path.phi(), su2.u, su2.s).real) < 1e-5


def test_cocycle_with_identity_second_factor_is_exact(u1):
    l1 = BoundaryLift(gauge.u1_winding(u1.base, (0, 1, 0)), u1.u)
    l2 = BoundaryLift(gauge.GaugeMap.identity(u1.base, "U1"), u1.u)
    assert prequant.cocycle_check(u1.bundle, l1, l2, u1.s, u1.u)["residual"] < 1e-14


def test_cocycle_for_two_windings(u1):
    l1 = BoundaryLift(gauge.u1_winding(u1.base, (0, 1, 0)), u1.u)
    l2 = BoundaryLift(gauge.u1_winding(u1.base, (0, 0, 2)), u1.u)
    assert prequant.cocycle_check(u1.bundle, l1, l2, u1.s, u1.u)["residual"] < 1e-6


@pytest.mark.parametrize("winding", [(0, 1, 0), (1, 1, 0), (0, 2, -1)])
def test_dalpha_for_winding_u1_maps(u1, winding):
    lift = BoundaryLift(gauge.u1_winding(u1.base, winding), u1.u)
    report = prequant.dalpha_check(u1.bundle, lift, u1.s)
    assert report["residual"] < 1e-5


def test_dalpha_for_identity_is_zero(su2):
    lift = BoundaryLift(gauge.GaugeMap.identity(su2.base, "SU2"), su2.u)
    report = prequant.dalpha_check(su2.bundle, lift, su2.s)
    assert report["residual"] == 0.0 and report["scale"] == 0.0


def test_dalpha_for_a_path_endpoint_converges():
    # the identity goes through Stokes on the slab, so it holds up to stencil error
    errs = []
    for n in (16, 32):
        S = Setup("su2", n=n)
        errs.append(prequant.dalpha_check(S.bundle, BoundaryLift(S.path.phi(), S.u), S.s)["residual"])
    assert errs[1] < 1e-5 and errs[0] / errs[1] > 50


def test_alpha_from_the_complement_chain_differs_by_an_integer():
    base = fields.torus(3, 32, fd_order=8)
    fam, _ = connfam.catalog_family("u1_exact_plane", base, np.random.default_rng(3))
    A0 = random_connection(base, "u1", 4)
    u = fields.slab_chain(base, 0, 0, 16)
    # both chains bound the same cycle: the complement is traversed with the opposite orientation
    comp = -fields.slab_chain(base, 0, 16, 32)
    assert comp.boundary() == u.boundary()
    bundle = PrequantBundle(C1SQ, CycleData(u.boundary()), fam, A0)
    g = gauge.u1_winding(base, (0, 1, 0))
    s = [0.1, 0.2]
    a, b = (prequant.alpha_boundary(bundle, g, chain, s).real for chain in (u, comp))
    assert circular_distance(a, b) < 1e-4


def test_section_is_covariantly_constant_up_to_sigma_u(su2):
    report = prequant.section_check(su2.bundle, su2.u, points=[su2.s])
    assert report["residual"] < 1e-6 * max(1.0, report["scale"])
    with pytest.raises(ValueError):
        prequant.section_su(su2.bundle, fields.slab_chain(su2.base, 0, 0, 2))


def test_constant_section_with_zero_rho_is_parallel(su2):
    # at A = A0 on a family through the background rho vanishes
    fam = connfam.ConnectionFamily(su2.A0, [su2.fam.tangent(su2.s, 0)], ["s0"], [(-1, 1)], "through_A0")
    bundle = PrequantBundle(C2, su2.bundle.cycle, fam, su2.A0)
    assert prequant.covariant_derivative(bundle, lambda s: 1.0 + 0j, [0.0], [1.0]) == 0


def test_holonomy_of_a_small_circle_matches_the_flux(su2):
    fam = connfam.catalog_family("su2_rotation", su2.base, np.random.default_rng(5), curved=True)[0]
    bundle = PrequantBundle(C2, su2.bundle.cycle, fam, su2.A0)
    hol, real = prequant.log_holonomy(bundle, Loop.circle([0.0, 0.1], 0.2))
    flux = prequant.disk_flux(bundle, [0.0, 0.1], 0.2)
    assert circular_distance(real, flux) < 1e-5
    assert hol.dist(real) < 1e-12
    # two turns around the same circle double the real value
    _, twice = prequant.log_holonomy(bundle, Loop.circle([0.0, 0.1], 0.2, turns=2))
    assert abs(twice - 2 * real) < 1e-10


def test_constant_loop_and_open_curve(su2):
    point = np.array([0.1, 0.1])
    still = Loop(lambda t: point, lambda t: np.zeros(2), "constant")
    assert prequant.log_holonomy(su2.bundle, still)[1] == 0.0
    line = Loop(lambda t: np.array([t, 0.0]), lambda t: np.array([1.0, 0.0]), "segment")
    with pytest.raises(ValueError):
        prequant.log_holonomy(su2.bundle, line)


def background_alpha_defect(S, A0p):
    """|alpha' - alpha - (beta(phi x) - beta(x))| as reals for the path endpoint."""
    g = S.path.phi()
    A = S.fam.at(S.s)
    new = PrequantBundle(S.p, S.bundle.cycle, S.fam, A0p)
    old_alpha = prequant.alpha_boundary(S.bundle, g, S.u, S.s).real
    new_alpha = prequant.alpha_boundary(new, g, S.u, S.s).real

    def beta(B):
        return -np.real(fields.integrate(gauge.transgression2(C2, B, S.A0, A0p), S.bundle.chain))

    return abs(new_alpha - old_alpha - (beta(gauge.left_act(g, A)) - beta(A)))


def test_change_of_background_shifts_rho(su2):
    A0p = random_connection(su2.base, "su2", 21)
    change = prequant.change_background(su2.bundle, A0p, points=[su2.s], u=su2.u)
    assert change.report["rho_shift_residual"] < 1e-5
    assert change.report["section_residual"] < 1e-6
    z = 0.6 + 0.8j
    assert abs(change.psi(su2.s, z) - np.exp(2j * math.pi * change.beta(su2.s)) * z) < 1e-15
    with pytest.raises(ValueError):
        prequant.change_background(su2.bundle, random_connection(su2.base, "u1", 0))


def test_change_of_background_shifts_alpha_by_beta():
    errs = []
    for n in (16, 32):
        S = Setup("su2", n=n)
        errs.append(background_alpha_defect(S, random_connection(S.base, "su2", 21)))
    assert errs[1] < 1e-8 and errs[0] / errs[1] > 50


def test_cocycle_algebra_rules(u1):
    b = u1.bundle
    lift = BoundaryLift(gauge.u1_winding(u1.base, (0, 1, 0)), u1.u)
    neg = prequant.cocycle_algebra("negate_c", [b], u1.s, lift)
    assert neg["rho_residual"] == 0.0 and neg["double_negation_residual"] == 0.0
    assert neg["alpha_residual"] < 1e-12
    negp = prequant.cocycle_algebra("negate_p", [b], u1.s, lift)
    assert negp["rho_residual"] < 1e-15 and negp["alpha_residual"] < 1e-12
    addp = prequant.cocycle_algebra("add_p", [b, b], u1.s, lift)
    assert addp["rho_residual"] < 1e-15 and addp["alpha_residual"] < 1e-12
    # a second cycle bounded by another slab
    u2 = fields.slab_chain(u1.base, 1, 2, 9)
    b2 = b.with_cycle(CycleData(u2.boundary()))
    addc = prequant.cocycle_algebra("add_c", [b, b2], u1.s, lift, u=u2)
    assert addc["rho_residual"] < 1e-14 and addc["alpha_residual"] < 1e-10
    # c - c' is bounded by u - u2
    diff = prequant.cocycle_algebra("difference_section", [b, b2], u1.s, lift, u=u1.u - u2)
    assert diff["alpha_residual"] < 1e-10
    with pytest.raises(ValueError):
        prequant.cocycle_algebra("scale_c", [b], u1.s)
    with pytest.raises(ValueError):
        prequant.cocycle_algebra("add_c", [b], u1.s)
    other = PrequantBundle(C1SQ, b.cycle, b.fam, random_connection(u1.base, "u1", 99))
    with pytest.raises(ValueError):
        prequant.cocycle_algebra("add_p", [b, other], u1.s)


def test_bundle_construction_errors(su2, u1):
    with pytest.raises(ValueError):
        PrequantBundle(C2, su2.bundle.cycle, su2.fam, u1.A0)
    with pytest.raises(ValueError):
        PrequantBundle(C2, CycleData(su2.base.fundamental_chain()), su2.fam, su2.A0)
    with pytest.raises(ValueError):
        PrequantBundle(C1SQ, su2.bundle.cycle, su2.fam, su2.A0)
