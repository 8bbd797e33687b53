import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prequant_lab import fields, smooth
from prequant_lab.fields import d, integrate, integrate_wedge, pullback, wedge

seeds = st.integers(0, 2**32 - 1)


def random_form(base, degree, rng, amplitude=1.0, complex_values=False):
    """Analytic random k-form with scalar values."""
    idx = fields.multi_indices(base.dim, degree)
    coeffs = [smooth.FourierScalar(base, rng, amplitude=amplitude) for _ in idx]
    imag = [smooth.FourierScalar(base, rng, amplitude=amplitude) for _ in idx] if complex_values else None

    def fn(pts):
        out = np.stack([c(pts) for c in coeffs])
        return out + 1j * np.stack([c(pts) for c in imag]) if imag else out

    return fields.from_function(base, degree, fn)


MODELS = [("T3", 12), ("SlabT2", 9), ("SolidTorus", 9)]


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from(MODELS), st.integers(0, 1), st.sampled_from([2, 4, 8]))
def test_d_squared_vanishes(seed, model, degree, order):
    base = fields.make_model(model[0], model[1], order)
    omega = random_form(base, degree, np.random.default_rng(seed))
    assert d(d(omega)).max_abs() < 1e-9 * max(1.0, d(omega).max_abs())


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from(["SlabT2", "SolidTorus"]))
def test_stokes_on_bounded_models(seed, model):
    base = fields.make_model(model, 32)
    omega = random_form(base, 2, np.random.default_rng(seed))
    M = base.fundamental_chain()
    assert abs(integrate(d(omega), M) - integrate(omega, M.boundary())) < 1e-7


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(7, 11))
def test_stokes_on_periodic_slabs(seed, lo, hi):
    # sums of central differences telescope only over a full period, so slabs carry stencil error
    base = fields.torus(3, 24, fd_order=8)
    omega = random_form(base, 2, np.random.default_rng(seed))
    u = fields.slab_chain(base, 0, lo, hi)
    assert abs(integrate(d(omega), u) - integrate(omega, u.boundary())) < 1e-5


def test_closed_manifold_has_empty_boundary():
    for model in ("T2", "T3"):
        assert fields.make_model(model, 8).boundary().is_empty()
    assert not fields.make_model("SlabT2", 8).boundary().is_empty()


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(MODELS), st.integers(0, 3), st.integers(0, 3))
def test_boundary_of_boundary_is_zero(model, lo, width):
    base = fields.make_model(model[0], model[1])
    chains = [base.fundamental_chain(), fields.slab_chain(base, 2, lo, lo + width + 1)]
    for c in chains:
        assert c.boundary().boundary().is_empty()


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_periodic_stencil_convergence_order(order):
    errs = []
    for n in (32, 64):
        base = fields.torus(1, n, fd_order=order)
        x = base.coords[0]
        f = fields.scalar_field(base, np.sin(2 * np.pi * x) * np.exp(np.cos(2 * np.pi * x)))
        exact = 2 * np.pi * np.exp(np.cos(2 * np.pi * x)) * (np.cos(2 * np.pi * x) - np.sin(2 * np.pi * x) ** 2)
        errs.append(np.max(np.abs(d(f).comps[0] - exact)))
    observed = math.log2(errs[0] / errs[1])
    assert abs(observed - order) < 0.6


def test_lobatto_rule_is_exact_for_collocated_derivatives():
    x, w, D = fields.lobatto_nodes(9)
    f = np.exp(x) * np.cos(3 * x)
    assert abs(w @ (D @ f) - (f[-1] - f[0])) < 1e-13
    assert abs(w @ x ** 14 - 2 / 15) < 1e-13
    D_f = D @ x ** 5
    assert np.allclose(D_f, 5 * x ** 4, atol=1e-11)


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_wedge_is_graded_commutative(seed, k, l):
    base = fields.torus(3, 6)
    if k + l > 3:
        return
    rng = np.random.default_rng(seed)
    a, b = random_form(base, k, rng), random_form(base, l, rng)
    diff = wedge(a, b) - (-1) ** (k * l) * wedge(b, a)
    assert diff.max_abs() < 1e-13


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_leibniz_defect_converges_at_stencil_order(seed):
    errs = []
    for n in (24, 48):
        base = fields.torus(3, n, fd_order=8)
        rng = np.random.default_rng(seed)
        a, b = random_form(base, 1, rng), random_form(base, 1, rng)
        errs.append((d(wedge(a, b)) - (wedge(d(a), b) - wedge(a, d(b)))).max_abs())
    assert errs[1] < 2e-6
    assert errs[0] / errs[1] > 100


@settings(max_examples=10, deadline=None)
@given(seeds, st.booleans())
def test_integrate_wedge_equals_integral_of_wedge(seed, complex_values):
    base = fields.torus(3, 10)
    rng = np.random.default_rng(seed)
    a = random_form(base, 1, rng, complex_values=complex_values)
    b = random_form(base, 2, rng, complex_values=complex_values)
    mul = lambda x, y: x * y  # noqa: E731
    for chain in (base.fundamental_chain(), fields.slab_chain(base, 1, 2, 7)):
        direct = integrate(wedge(a, b), chain)
        fast = integrate_wedge([a, b], mul, chain)
        assert abs(direct - fast) < 1e-12
    face = fields.slab_chain(base, 0, 1, 6).boundary()
    c = random_form(base, 1, rng)
    assert abs(integrate(wedge(a, c), face) - integrate_wedge([a, c], mul, face)) < 1e-12


def test_contract_against_the_coordinate_frame():
    base = fields.torus(3, 6)
    rng = np.random.default_rng(1)
    omega = random_form(base, 2, rng)
    e0 = np.zeros((3,) + base.shape)
    e0[0] = 1.0
    out = fields.contract(e0, omega)
    # iota_{e_x}(f dx^dy + g dx^dz + h dy^dz) = f dy + g dz
    assert np.allclose(out.component((1,)), omega.component((0, 1)))
    assert np.allclose(out.component((2,)), omega.component((0, 2)))
    assert np.allclose(out.component((0,)), 0)


def test_pullback_by_grid_shift_is_a_roll():
    base = fields.torus(2, 16, fd_order=8)
    omega = random_form(base, 1, np.random.default_rng(3))
    phi = fields.Shift(base, (3 / 16, 0))
    pulled = pullback(phi, omega)
    assert np.allclose(pulled.comps, np.roll(omega.comps, -3, axis=1), atol=1e-14)
    assert (d(pulled) - pullback(phi, d(omega))).max_abs() < 1e-12


def test_pullback_by_linear_map_uses_the_jacobian():
    base = fields.torus(2, 16)
    omega = random_form(base, 1, np.random.default_rng(4))
    phi = fields.LinearTorusMap(base, [[1, 1], [0, 1]])
    pulled = pullback(phi, omega)
    x, y = base.coords
    src = omega.source(((x + y) % 1.0, y))
    assert np.allclose(pulled.comps[0], src[0], atol=1e-13)
    assert np.allclose(pulled.comps[1], src[0] + src[1], atol=1e-13)
    # volume is preserved, so the integral of a pulled back top form is unchanged
    top = random_form(base, 2, np.random.default_rng(5))
    M = base.fundamental_chain()
    assert abs(integrate(pullback(phi, top), M) - integrate(top, M)) < 1e-12


def test_pullback_commutes_with_d_up_to_stencil_error():
    errs = []
    for n in (16, 32):
        base = fields.torus(2, n, fd_order=4)
        omega = random_form(base, 1, np.random.default_rng(6))
        phi = fields.Shear(base, 0.3)
        errs.append((d(pullback(phi, omega)) - pullback(phi, d(omega))).max_abs())
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] > 10


def test_slice_pullback_and_boundary_inclusion():
    solid = fields.solid_torus(10)
    inc = fields.boundary_inclusion(solid)
    omega = random_form(solid, 2, np.random.default_rng(7))
    pulled = pullback(inc, omega)
    assert pulled.base.dim == 2
    assert np.allclose(pulled.comps[0], omega.component((1, 2))[-1])


def test_form_errors():
    base = fields.torus(2, 8)
    with pytest.raises(ValueError):
        fields.FormField(base, 3, np.zeros((1, 8, 8)))
    with pytest.raises(ValueError):
        fields.FormField(base, 1, np.zeros((1, 8, 8)))
    one = random_form(base, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        integrate(one, base.fundamental_chain())
    with pytest.raises(ValueError):
        wedge(one, random_form(base, 2, np.random.default_rng(1)))
    with pytest.raises(ValueError):
        one + random_form(fields.torus(2, 10), 1, np.random.default_rng(2))
    with pytest.raises(ValueError):
        fields.make_model("S3", 8)
    with pytest.raises(ValueError):
        fields.Shift(fields.slab_t2(8), (0.1, 0, 0))
    with pytest.raises(ValueError):
        fields.LinearTorusMap(base, [[2, 0], [0, 1]])
    with pytest.raises(TypeError):
        one * one
    with pytest.raises(ValueError):
        pullback(fields.Shear(base, 0.2), fields.FormField(base, 1, one.comps))
