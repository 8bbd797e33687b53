import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from prequant_lab import CircleValue, circular_distance, liealg
from prequant_lab.liealg import LieAlgebraElement, GroupElement

seeds = st.integers(0, 2**32 - 1)
ALGS = ["u1", "su2", "so3"]


def _rng(seed):
    return np.random.default_rng(seed)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(ALGS))
def test_random_elements_lie_in_algebra_and_group(seed, alg):
    rng = _rng(seed)
    X = liealg.random_algebra(alg, rng, shape=(4,))
    assert liealg.algebra_violation(X, alg) < 1e-12
    g = liealg.random_group(liealg.GROUP_OF[alg], rng, shape=(4,))
    assert liealg.group_violation(g, liealg.GROUP_OF[alg]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([("c2_su2", "su2"), ("c1_squared", "u1"), ("p1_gl", "so3")]))
def test_polarization_is_ad_invariant_and_symmetric(seed, case):
    name, alg = case
    p = liealg.builtin_polynomial(name)
    rng = _rng(seed)
    X, Y = liealg.random_algebra(alg, rng, shape=(2,))
    g = liealg.random_group(liealg.GROUP_OF[alg], rng)
    gi = np.linalg.inv(g)
    assert abs(p.polar(X, Y) - p.polar(Y, X)) < 1e-12
    assert abs(p.polar(g @ X @ gi, g @ Y @ gi) - p.polar(X, Y)) < 1e-12
    # the polarization reproduces p on the diagonal and is bilinear
    assert abs(p.polar(X + Y, X + Y) - p(X) - 2 * p.polar(X, Y) - p(Y)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_cubic_trace_polarization_matches_finite_expansion(seed):
    rng = _rng(seed)
    p = liealg.trace_polynomial(3, 1.0, "tr3")
    X, Y, Z = (rng.standard_normal((3, 3)) for _ in range(3))
    # the coefficient of abc in p(aX + bY + cZ) is 6 p(X, Y, Z)
    total = 0.0
    for signs in np.ndindex(2, 2, 2):
        a, b, c = (1 if s else -1 for s in signs)
        total += a * b * c * p(a * X + b * Y + c * Z)
    assert abs(total / 48 - p.polar(X, Y, Z)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_p1_of_adjoint_is_minus_four_c2(seed):
    X, Y = liealg.random_algebra("su2", _rng(seed), shape=(2,))
    c2 = liealg.builtin_polynomial("c2_su2")
    p1 = liealg.builtin_polynomial("p1_gl")
    adX, adY = liealg.su2_adjoint(X), liealg.su2_adjoint(Y)
    assert liealg.algebra_violation(adX, "so3") < 1e-12
    assert abs(p1.polar(adX, adY) + 4 * c2.polar(X, Y)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_c2_and_p1_have_opposite_definiteness(seed):
    # so no isomorphism su(2) -> so(3) can carry p1 to a positive multiple of c2
    rng = _rng(seed)
    X = liealg.random_algebra("su2", rng)
    Y = liealg.random_algebra("so3", rng)
    assert liealg.builtin_polynomial("c2_su2")(X).real < 0
    assert liealg.builtin_polynomial("p1_gl")(Y).real > 0


def test_su2_adjoint_is_the_commutator():
    rng = _rng(5)
    X, Y = liealg.random_algebra("su2", rng, shape=(2,))
    lhs = liealg.su2_coefficients(X @ Y - Y @ X)
    rhs = liealg.su2_adjoint(X).real @ liealg.su2_coefficients(Y)
    assert np.allclose(lhs, rhs, atol=1e-13)
    A, B = liealg.su2_adjoint(X), liealg.su2_adjoint(Y)
    assert np.allclose(A @ B - B @ A, liealg.su2_adjoint(X @ Y - Y @ X), atol=1e-13)


def test_c2_on_unit_generator():
    # tr((i sigma_3)^2) = -2
    p = liealg.builtin_polynomial("c2_su2")
    X = 1j * liealg.PAULI[2]
    assert math.isclose(p(X).real, -2 / (8 * math.pi ** 2), rel_tol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.0, 6.0))
def test_su2_closed_form_exponential_matches_expm(seed, scale):
    X = liealg.random_algebra("su2", _rng(seed), scale=scale)
    assert np.allclose(liealg.exp_array(X, "su2"), scipy.linalg.expm(X), atol=1e-11)


def test_exp_map_and_group_operations():
    X = LieAlgebraElement(liealg.random_algebra("so3", _rng(2)), "so3")
    g = liealg.exp_map(X, 0.7)
    assert g.group_id == "SO3"
    h = g @ g.inverse()
    assert np.allclose(h.entries, np.eye(3), atol=1e-13)
    Y = LieAlgebraElement(liealg.random_algebra("so3", _rng(3)), "so3")
    assert liealg.algebra_violation(g.Ad(Y).entries, "so3") < 1e-12


def test_projection_repairs_drift():
    rng = _rng(4)
    g = liealg.random_group("SU2", rng, shape=(5,))
    noisy = g + 1e-6 * rng.standard_normal(g.shape)
    fixed = liealg.project_to_group(noisy, "SU2")
    assert liealg.group_violation(fixed, "SU2") < 1e-12
    assert np.max(np.abs(fixed - g)) < 1e-5


def test_membership_errors():
    with pytest.raises(ValueError):
        LieAlgebraElement(np.eye(2), "su2")
    with pytest.raises(ValueError):
        GroupElement(2 * np.eye(2), "SU2")
    with pytest.raises(ValueError):
        liealg.builtin_polynomial("c2_su2").check_algebra("u1")
    with pytest.raises(ValueError):
        liealg.builtin_polynomial("c3")
    with pytest.raises(ValueError):
        liealg.rep_dim("gl_n")
    X = LieAlgebraElement(1j * liealg.PAULI[0], "su2")
    Y = LieAlgebraElement(np.array([[1j]]), "u1")
    with pytest.raises(ValueError):
        liealg.polarize(liealg.builtin_polynomial("c2_su2"), X, Y)


def test_polynomial_algebra():
    p = liealg.builtin_polynomial("c2_su2")
    assert p.integral
    assert not p.scaled(2 ** 0.5).integral
    assert p.scaled(3).integral
    X = liealg.random_algebra("su2", _rng(6))
    assert abs((p + p)(X) - 2 * p(X)) < 1e-15
    assert abs((-p)(X) + p(X)) < 1e-15
    with pytest.raises(ValueError):
        p + liealg.builtin_polynomial("c1")


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_circle_values(a, b):
    d = CircleValue(a).dist(CircleValue(b))
    assert 0 <= d <= 0.5
    assert abs(d - circular_distance(a, b)) < 1e-9
    assert CircleValue(a + 3).dist(a) < 1e-9
    assert (CircleValue(a) - CircleValue(a)).dist(0.0) < 1e-12
