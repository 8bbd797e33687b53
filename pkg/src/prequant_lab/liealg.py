"""Matrix Lie algebras, groups and Ad-invariant polynomials.

Algebra elements are stored as complex matrices in a fixed representation:

* ``u1``  -- 1x1 purely imaginary (u(1) = iR),
* ``su2`` -- 2x2 traceless anti-Hermitian,
* ``so3`` -- 3x3 real antisymmetric (defining representation),
* ``gl_n`` -- real n x n.

Array helpers accept stacks of matrices with shape ``(..., m, m)`` so that the
same code evaluates a polynomial at one element or at every grid node.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

ALGEBRAS = ("u1", "su2", "so3", "gl_n")
GROUP_OF = {"u1": "U1", "su2": "SU2", "so3": "SO3", "gl_n": "GLp"}
ALGEBRA_OF = {v: k for k, v in GROUP_OF.items()}
MEMBERSHIP_TOL = 1e-12

PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


def rep_dim(algebra_id: str, n: int | None = None) -> int:
    if algebra_id == "u1":
        return 1
    if algebra_id == "su2":
        return 2
    if algebra_id == "so3":
        return 3
    if algebra_id == "gl_n":
        if n is None:
            raise ValueError("gl_n needs an explicit dimension")
        return n
    raise ValueError(f"unknown algebra {algebra_id!r}")


def algebra_violation(entries, algebra_id: str) -> float:
    """Largest deviation of ``entries`` (stack of matrices) from the algebra."""
    X = np.asarray(entries)
    if algebra_id == "u1":
        return float(np.max(np.abs(X.real), initial=0.0))
    if algebra_id == "su2":
        herm = X + np.conj(np.swapaxes(X, -1, -2))
        tr = np.trace(X, axis1=-2, axis2=-1)
        return float(max(np.max(np.abs(herm), initial=0.0), np.max(np.abs(tr), initial=0.0)))
    if algebra_id == "so3":
        asym = X + np.swapaxes(X, -1, -2)
        return float(max(np.max(np.abs(asym), initial=0.0), np.max(np.abs(X.imag), initial=0.0)))
    if algebra_id == "gl_n":
        return float(np.max(np.abs(X.imag), initial=0.0))
    raise ValueError(f"unknown algebra {algebra_id!r}")


def group_violation(entries, group_id: str) -> float:
    """Largest deviation of a stack of matrices from the group."""
    g = np.asarray(entries)
    if group_id == "GLp":
        det = np.linalg.det(g)
        bad = np.abs(det.imag) + np.maximum(0.0, -det.real)
        return float(np.max(np.abs(g.imag), initial=0.0) + np.max(bad, initial=0.0))
    eye = np.eye(g.shape[-1])
    gh = np.conj(np.swapaxes(g, -1, -2))
    unit = np.max(np.abs(gh @ g - eye), initial=0.0)
    det = np.linalg.det(g)
    if group_id == "U1":
        return float(unit)
    if group_id == "SU2":
        return float(max(unit, np.max(np.abs(det - 1), initial=0.0)))
    if group_id == "SO3":
        return float(max(unit, np.max(np.abs(det - 1), initial=0.0), np.max(np.abs(g.imag), initial=0.0)))
    raise ValueError(f"unknown group {group_id!r}")


@dataclass(frozen=True)
class LieAlgebraElement:
    entries: np.ndarray
    algebra_id: str

    def __post_init__(self):
        X = np.asarray(self.entries, dtype=complex)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ValueError("entries must be a square matrix")
        if self.algebra_id != "gl_n" and X.shape[0] != rep_dim(self.algebra_id):
            raise ValueError(f"{self.algebra_id} elements are {rep_dim(self.algebra_id)}x{rep_dim(self.algebra_id)}")
        if algebra_violation(X, self.algebra_id) > 1e-10:
            raise ValueError(f"matrix is not in {self.algebra_id}")
        object.__setattr__(self, "entries", X)

    @property
    def rep_dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class GroupElement:
    entries: np.ndarray
    group_id: str

    def __post_init__(self):
        g = np.asarray(self.entries, dtype=complex)
        if group_violation(g, self.group_id) > MEMBERSHIP_TOL * 100:
            raise ValueError(f"matrix is not in {self.group_id}")
        object.__setattr__(self, "entries", g)

    @property
    def rep_dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return GroupElement(self.entries @ other.entries, self.group_id)

    def inverse(self) -> GroupElement:
        return GroupElement(np.linalg.inv(self.entries), self.group_id)

    def Ad(self, X: LieAlgebraElement) -> LieAlgebraElement:
        g = self.entries
        return LieAlgebraElement(g @ X.entries @ np.linalg.inv(g), X.algebra_id)


def random_algebra(algebra_id: str, rng: np.random.Generator, shape=(), n: int | None = None, scale=1.0):
    """Random algebra values with leading ``shape`` (Gaussian coefficients)."""
    shape = tuple(shape)
    if algebra_id == "u1":
        return 1j * scale * rng.standard_normal(shape + (1, 1))
    if algebra_id == "su2":
        c = scale * rng.standard_normal(shape + (3,))
        return 1j * np.einsum("...a,aij->...ij", c, PAULI)
    if algebra_id == "so3":
        c = scale * rng.standard_normal(shape + (3,))
        return so3_from_vector(c).astype(complex)
    if algebra_id == "gl_n":
        m = rep_dim("gl_n", n)
        return (scale * rng.standard_normal(shape + (m, m))).astype(complex)
    raise ValueError(f"unknown algebra {algebra_id!r}")


def random_group(group_id: str, rng: np.random.Generator, shape=(), n: int | None = None):
    """Random group elements as exponentials of random algebra elements."""
    X = random_algebra(ALGEBRA_OF[group_id], rng, shape, n=n, scale=1.3)
    return exp_array(X, ALGEBRA_OF[group_id])


def so3_from_vector(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2], out[..., 1, 2] = -v[..., 2], v[..., 1], -v[..., 0]
    out[..., 1, 0], out[..., 2, 0], out[..., 2, 1] = v[..., 2], -v[..., 1], v[..., 0]
    return out


def su2_coefficients(X):
    """Real coefficients x_a with X = sum_a x_a (i sigma_a)."""
    X = np.asarray(X)
    a, b = X[..., 0, 1], X[..., 1, 0]
    return np.stack([(a + b).imag / 2, (a - b).real / 2, (X[..., 0, 0] - X[..., 1, 1]).imag / 2], axis=-1)


def su2_from_coefficients(x):
    """sum_a x_a (i sigma_a) for a stack of real coefficient vectors."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = 1j * x[..., 2]
    out[..., 1, 1] = -1j * x[..., 2]
    out[..., 0, 1] = x[..., 1] + 1j * x[..., 0]
    out[..., 1, 0] = -x[..., 1] + 1j * x[..., 0]
    return out


def su2_adjoint(X):
    """Matrix of ad_X on su(2) in the basis (i sigma_1, i sigma_2, i sigma_3).

    [i s_a, i s_b] = -2 eps_abc i s_c, so the matrix is a real antisymmetric
    3x3 and lands in so(3).
    """
    x = su2_coefficients(X)
    return so3_from_vector(-2.0 * x).astype(complex)


def exp_array(X, algebra_id: str | None = None):
    """Matrix exponential of a stack of matrices (closed forms for u1/su2)."""
    X = np.asarray(X, dtype=complex)
    if algebra_id == "u1" or (X.shape[-1] == 1 and algebra_id is None):
        return np.exp(X)
    if algebra_id == "su2":
        x = su2_coefficients(X)
        theta = np.sqrt(np.sum(x * x, axis=-1))
        sinc = np.sinc(theta / np.pi)
        eye = np.eye(2, dtype=complex)
        return np.cos(theta)[..., None, None] * eye + sinc[..., None, None] * X
    return scipy.linalg.expm(X)


def exp_map(X: LieAlgebraElement, t: float = 1.0) -> GroupElement:
    g = exp_array(t * X.entries, X.algebra_id)
    if X.algebra_id in ("so3", "gl_n"):
        g = g.real.astype(complex)
    return GroupElement(g, GROUP_OF[X.algebra_id])


def project_to_group(g, group_id: str):
    """Nearest group element (re-orthonormalization of drifted values)."""
    g = np.asarray(g, dtype=complex)
    if group_id == "U1":
        return g / np.abs(g)
    if group_id == "GLp":
        return g.real.astype(complex)
    u, _, vh = np.linalg.svd(g)
    w = u @ vh
    det = np.linalg.det(w)
    if group_id == "SU2":
        return w / np.sqrt(det)[..., None, None]
    if group_id == "SO3":
        w = w.real
        fix = np.where(np.linalg.det(w) < 0, -1.0, 1.0)
        u = u.real.copy()
        u[..., :, -1] *= fix[..., None]
        return (u @ vh.real).astype(complex)
    raise ValueError(f"unknown group {group_id!r}")


def _trace_product(*Xs):
    if len(Xs) == 2:
        return np.einsum("...ij,...ji->...", Xs[0], Xs[1])
    out = Xs[0]
    for X in Xs[1:]:
        out = out @ X
    return np.trace(out, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class InvariantPolynomial:
    """Degree-r Ad-invariant polynomial given by its polarization.

    ``polar`` is a symmetric r-linear map acting on stacks of matrices and
    returning a stack of complex scalars.  ``algebras`` lists the algebras the
    polynomial is defined on; an empty tuple means any matrix algebra.
    """

    name: str
    degree: int
    polar: Callable = field(repr=False, compare=False)
    integral: bool = True
    algebras: tuple = ()

    def __call__(self, X):
        return self.evaluate_polarized(*([X] * self.degree))

    def evaluate_polarized(self, *Xs):
        if len(Xs) != self.degree:
            raise ValueError(f"{self.name} takes {self.degree} arguments, got {len(Xs)}")
        arrays = []
        for X in Xs:
            if isinstance(X, LieAlgebraElement):
                self.check_algebra(X.algebra_id)
                arrays.append(X.entries)
            else:
                arrays.append(np.asarray(X))
        return self.polar(*arrays)

    def check_algebra(self, algebra_id: str):
        if self.algebras and algebra_id not in self.algebras:
            raise ValueError(f"{self.name} is not defined on {algebra_id}")

    def scaled(self, lam: float, name: str | None = None) -> InvariantPolynomial:
        integral = self.integral and float(lam).is_integer()
        polar = self.polar
        return InvariantPolynomial(
            name or f"{lam!r}*{self.name}", self.degree,
            lambda *Xs: lam * polar(*Xs), integral, self.algebras,
        )

    def __neg__(self):
        return self.scaled(-1.0, f"-{self.name}")

    def __add__(self, other: InvariantPolynomial) -> InvariantPolynomial:
        if other.degree != self.degree:
            raise ValueError("can only add polynomials of equal degree")
        algs = tuple(a for a in self.algebras if a in other.algebras) if self.algebras and other.algebras \
            else (self.algebras or other.algebras)
        f, g = self.polar, other.polar
        return InvariantPolynomial(
            f"({self.name}+{other.name})", self.degree,
            lambda *Xs: f(*Xs) + g(*Xs), self.integral and other.integral, algs,
        )


def trace_polynomial(r: int, coefficient: complex, name: str, algebras=(), integral=True):
    """coefficient * tr(X^r), polarized by averaging over argument orders."""
    perms = [p for p in itertools.permutations(range(r)) if p[0] == 0]

    def polar(*Xs):
        acc = 0
        for p in perms:
            acc = acc + _trace_product(*[Xs[i] for i in p])
        return coefficient * acc / len(perms)

    return InvariantPolynomial(name, r, polar, integral, tuple(algebras))


def _c1_polar(X):
    return (1j / (2 * math.pi)) * np.trace(X, axis1=-2, axis2=-1)


def builtin_polynomial(name: str) -> InvariantPolynomial:
    """Normalized Chern and Pontryagin polynomials.

    c1(X) = (i/2pi) tr X, c1_squared = c1 * c1, c2_su2(X) = tr(X^2)/(8 pi^2),
    p1_gl(X) = -tr(X^2)/(8 pi^2).
    """
    if name == "c1":
        return InvariantPolynomial("c1", 1, _c1_polar, True, ("u1",))
    if name == "c1_squared":
        return InvariantPolynomial(
            "c1_squared", 2, lambda X, Y: _c1_polar(X) * _c1_polar(Y), True, ("u1",)
        )
    if name == "c2_su2":
        return trace_polynomial(2, 1 / (8 * math.pi**2), "c2_su2", ("su2",))
    if name == "p1_gl":
        return trace_polynomial(2, -1 / (8 * math.pi**2), "p1_gl", ("gl_n", "so3"))
    raise ValueError(f"unknown polynomial {name!r}")


BUILTINS = ("c1", "c1_squared", "c2_su2", "p1_gl")


def polarize(p: InvariantPolynomial, *Xs):
    """p(X_1, ..., X_r) for algebra elements or stacks of matrices."""
    ids = {X.algebra_id for X in Xs if isinstance(X, LieAlgebraElement)}
    if len(ids) > 1:
        raise ValueError(f"arguments from different algebras: {sorted(ids)}")
    return p.evaluate_polarized(*Xs)
