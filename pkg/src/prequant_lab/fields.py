"""Structured-grid model manifolds with a node-sampled exterior calculus.

A :class:`GridManifold` is a tensor product of axes.  Periodic axes carry
uniform nodes, central finite differences (4th order by default) and the
trapezoid rule.  Bounded axes carry Legendre-Gauss-Lobatto nodes with the
matching collocation derivative and Lobatto weights, so that
``sum(w * D f) == f(b) - f(a)`` holds to rounding.

Forms store one node-sampled array per strictly increasing multi-index;
values may be real, complex or matrices (Lie-algebra valued forms).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

FD_WEIGHTS = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n), k))


def permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] == seq[j]:
                return 0
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def fsum_array(values) -> complex | float:
    """Exactly rounded sum in lexicographic order (deterministic)."""
    v = np.ascontiguousarray(values).ravel()
    if np.iscomplexobj(v):
        return complex(math.fsum(v.real), math.fsum(v.imag))
    return math.fsum(v)


def lobatto_nodes(n: int):
    """Legendre-Gauss-Lobatto nodes, weights and derivative matrix on [-1, 1]."""
    if n < 3:
        raise ValueError("need at least 3 Lobatto nodes")
    N = n - 1
    interior = legendre.Legendre.basis(N).deriv().roots()
    x = np.concatenate([[-1.0], np.sort(interior.real), [1.0]])
    PN = legendre.legval(x, np.eye(n)[N])
    w = 2.0 / (N * (N + 1) * PN**2)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = PN[i] / (PN[j] * (x[i] - x[j]))
    D[0, 0] = -N * (N + 1) / 4
    D[N, N] = N * (N + 1) / 4
    return x, w, D


class Axis:
    """One coordinate direction: nodes, quadrature and differentiation."""

    def __init__(self, name: str, lower: float, upper: float, n: int, periodic: bool, fd_order: int = 4):
        if n < 5:
            raise ValueError("an axis needs at least 5 nodes")
        if fd_order not in FD_WEIGHTS:
            raise ValueError(f"unsupported stencil order {fd_order}")
        self.name, self.lower, self.upper, self.n = name, float(lower), float(upper), n
        self.periodic, self.fd_order = periodic, fd_order
        self.length = self.upper - self.lower
        if periodic:
            self.h = self.length / n
            self.nodes = self.lower + self.h * np.arange(n)
            self.weights = np.full(n, self.h)
            self._D = None
        else:
            x, w, D = lobatto_nodes(n)
            half = self.length / 2
            self.nodes = self.lower + half * (x + 1)
            self.nodes[0], self.nodes[-1] = self.lower, self.upper
            self.weights = half * w
            self._D = D / half
            self.h = None

    def key(self):
        return (self.name, self.lower, self.upper, self.n, self.periodic, self.fd_order)

    def derivative(self, arr: np.ndarray, axis: int) -> np.ndarray:
        if self.periodic:
            out = np.zeros_like(arr)
            for m, c in enumerate(FD_WEIGHTS[self.fd_order], start=1):
                out += c * (np.roll(arr, -m, axis=axis) - np.roll(arr, m, axis=axis))
            return out / self.h
        moved = np.moveaxis(arr, axis, 0)
        res = np.tensordot(self._D, moved, axes=(1, 0))
        return np.moveaxis(res, 0, axis)

    def interval_weights(self, a: float, b: float) -> np.ndarray:
        """Node weights integrating the interpolant over [a, b].

        Periodic axes use the trigonometric interpolant, bounded axes the
        Lobatto polynomial interpolant; both are spectrally accurate.
        """
        if self.periodic:
            N, L = self.n, self.length
            j = np.arange(N)
            k = np.fft.fftfreq(N, d=1.0 / N)
            ta, tb = a - self.lower, b - self.lower
            with np.errstate(invalid="ignore", divide="ignore"):
                omega = 2 * np.pi * k / L
                I = np.where(k == 0, tb - ta, (np.exp(1j * omega * tb) - np.exp(1j * omega * ta)) / (1j * omega))
            if N % 2 == 0:
                nyq = N // 2
                # Nyquist mode enters the interpolant as cos(pi N x / L)
                om = np.pi * N / L
                I[nyq] = (np.sin(om * tb) - np.sin(om * ta)) / om
            phase = np.exp(-2j * np.pi * np.outer(j, k) / N)
            w = (phase * I[None, :]).sum(axis=1).real / N
            return w
        t = lambda x: 2 * (x - self.lower) / self.length - 1  # noqa: E731
        V = legendre.legvander(2 * (self.nodes - self.lower) / self.length - 1, self.n - 1)
        I = np.empty(self.n)
        for m in range(self.n):
            antider = legendre.Legendre.basis(m).integ()
            I[m] = (antider(t(b)) - antider(t(a))) * self.length / 2
        return np.linalg.solve(V.T, I)

    def locate(self, x) -> np.ndarray | None:
        """Node indices for coordinates ``x`` if they all sit on nodes, else None."""
        x = np.asarray(x, dtype=float)
        if self.periodic:
            q = (x - self.lower) / self.h
            idx = np.rint(q)
            if np.max(np.abs(q - idx), initial=0.0) > 1e-9:
                return None
            return np.mod(idx.astype(int), self.n)
        idx = np.searchsorted(self.nodes, x).clip(0, self.n - 1)
        lo = (idx - 1).clip(0)
        pick = np.where(np.abs(self.nodes[lo] - x) < np.abs(self.nodes[idx] - x), lo, idx)
        if np.max(np.abs(self.nodes[pick] - x), initial=0.0) > 1e-9 * max(1.0, self.length):
            return None
        return pick


class GridManifold:
    """A model manifold sampled on a tensor-product grid."""

    def __init__(self, model_id: str, axes: tuple[Axis, ...]):
        self.model_id = model_id
        self.axes = tuple(axes)

    def key(self):
        return (self.model_id,) + tuple(a.key() for a in self.axes)

    def __eq__(self, other):
        return isinstance(other, GridManifold) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"GridManifold({self.model_id}, {self.resolution})"

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    resolution = shape

    @property
    def periodic_axes(self) -> tuple[bool, ...]:
        return tuple(a.periodic for a in self.axes)

    @property
    def chart(self) -> tuple[tuple[float, float], ...]:
        return tuple((a.lower, a.upper) for a in self.axes)

    @property
    def fd_order(self) -> int:
        return self.axes[0].fd_order

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[a.nodes for a in self.axes], indexing="ij"))

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        w = np.ones(())
        for a in self.axes:
            w = np.multiply.outer(w, a.weights)
        return w

    @property
    def volume(self) -> float:
        return math.prod(a.length for a in self.axes)

    def fundamental_chain(self) -> Chain:
        return Chain.of(Cell(self, (None,) * self.dim))

    def boundary(self) -> Chain:
        return self.fundamental_chain().boundary()

    def is_closed(self) -> bool:
        return all(self.periodic_axes)

    def derivative(self, arr: np.ndarray, axis: int) -> np.ndarray:
        return self.axes[axis].derivative(arr, axis)


def torus(dim: int, n: int, length: float = 1.0, fd_order: int = 4) -> GridManifold:
    names = ("x", "y", "z", "w")[:dim]
    return GridManifold(f"T{dim}", tuple(Axis(nm, 0.0, length, n, True, fd_order) for nm in names))


def slab_t2(n: int, fd_order: int = 4) -> GridManifold:
    """[0,1] x T^2 with the bounded axis first."""
    return GridManifold("SlabT2", (
        Axis("x", 0.0, 1.0, n, False, fd_order),
        Axis("y", 0.0, 1.0, n, True, fd_order),
        Axis("z", 0.0, 1.0, n, True, fd_order),
    ))


def solid_torus(n: int, fd_order: int = 4) -> GridManifold:
    """D^2 x S^1 in the polar chart (r, theta, z), r in [1/(4n), 1]."""
    return GridManifold("SolidTorus", (
        Axis("r", 1.0 / (4 * n), 1.0, n, False, fd_order),
        Axis("theta", 0.0, 2 * np.pi, n, True, fd_order),
        Axis("z", 0.0, 1.0, n, True, fd_order),
    ))


def with_interval(base: GridManifold, n: int = 6, name: str = "s") -> GridManifold:
    """base x [0, 1] with a Lobatto parameter axis appended last.

    Families of forms that depend on a parameter live here, so that top-degree
    forms on ``base`` still have a meaningful exterior derivative.
    """
    return GridManifold(f"{base.model_id}x I", base.axes + (Axis(name, 0.0, 1.0, n, False, base.fd_order),))


MODELS = {"T2": lambda n, o=4: torus(2, n, fd_order=o), "T3": lambda n, o=4: torus(3, n, fd_order=o),
          "SlabT2": slab_t2, "SolidTorus": solid_torus}


def make_model(model_id: str, n: int, fd_order: int = 4) -> GridManifold:
    if model_id not in MODELS:
        raise ValueError(f"unknown model {model_id!r}; choose from {sorted(MODELS)}")
    return MODELS[model_id](n, fd_order)


def sub_manifold(base: GridManifold, keep: tuple[int, ...], model_id: str | None = None) -> GridManifold:
    axes = tuple(base.axes[i] for i in keep)
    return GridManifold(model_id or f"{base.model_id}[{','.join(a.name for a in axes)}]", axes)


class FormField:
    """A degree-k form sampled at the nodes of a grid manifold.

    ``comps`` has shape ``(C(dim, k), *grid_shape, *value_shape)``.  ``source``
    optionally keeps the analytic expression: a callable taking a tuple of
    coordinate arrays and returning the component stack at those points.
    """

    __slots__ = ("base", "degree", "comps", "algebra", "source")

    def __init__(self, base: GridManifold, degree: int, comps, algebra: str | None = None,
                 source: Callable | None = None):
        if not 0 <= degree <= base.dim:
            raise ValueError(f"degree {degree} out of range for a {base.dim}-manifold")
        comps = np.asarray(comps)
        ncomp = math.comb(base.dim, degree)
        if comps.shape[:1 + base.dim] != (ncomp,) + base.shape:
            raise ValueError(f"components must have leading shape {(ncomp,) + base.shape}, got {comps.shape}")
        self.base, self.degree, self.comps = base, degree, comps
        self.algebra, self.source = algebra, source

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.comps.shape[1 + self.base.dim:]

    @property
    def value_kind(self) -> str:
        if self.algebra is not None:
            return f"lie({self.algebra})"
        return "complex" if np.iscomplexobj(self.comps) else "real"

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return multi_indices(self.base.dim, self.degree)

    def component(self, I) -> np.ndarray:
        return self.comps[self.indices.index(tuple(I))]

    def _like(self, comps, source=None):
        return FormField(self.base, self.degree, comps, self.algebra, source)

    def _check(self, other: FormField):
        if other.base != self.base or other.degree != self.degree:
            raise ValueError("forms live on different bases or have different degrees")

    def __add__(self, other: FormField) -> FormField:
        self._check(other)
        src = None
        if self.source is not None and other.source is not None:
            f, g = self.source, other.source
            src = lambda pts: f(pts) + g(pts)  # noqa: E731
        return self._like(self.comps + other.comps, src)

    def __sub__(self, other: FormField) -> FormField:
        return self + (-other)

    def __neg__(self) -> FormField:
        src = None if self.source is None else (lambda pts, f=self.source: -f(pts))
        return self._like(-self.comps, src)

    def __mul__(self, c) -> FormField:
        if not np.isscalar(c):
            raise TypeError("forms scale by scalars only; use wedge for products")
        src = None if self.source is None else (lambda pts, f=self.source: c * f(pts))
        return self._like(c * self.comps, src)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.comps), initial=0.0))

    def real(self) -> FormField:
        return FormField(self.base, self.degree, self.comps.real.copy(), None)


def zero_form(base: GridManifold, degree: int, value_shape=(), dtype=float, algebra=None) -> FormField:
    shape = (math.comb(base.dim, degree),) + base.shape + tuple(value_shape)
    return FormField(base, degree, np.zeros(shape, dtype=dtype), algebra)


def from_function(base: GridManifold, degree: int, fn: Callable, algebra: str | None = None) -> FormField:
    """Sample an analytic form.  ``fn(coords)`` returns the component stack."""
    comps = np.asarray(fn(base.coords))
    return FormField(base, degree, comps, algebra, source=fn)


def scalar_field(base: GridManifold, values, algebra=None) -> FormField:
    return FormField(base, 0, np.asarray(values)[None], algebra)


def _stencil_source(base: GridManifold, src: Callable, axis: int) -> Callable:
    ax = base.axes[axis]

    def deriv(pts):
        acc = 0
        for m, c in enumerate(FD_WEIGHTS[ax.fd_order], start=1):
            plus = list(pts)
            minus = list(pts)
            plus[axis] = pts[axis] + m * ax.h
            minus[axis] = pts[axis] - m * ax.h
            acc = acc + c * (np.asarray(src(tuple(plus))) - np.asarray(src(tuple(minus))))
        return acc / ax.h

    return deriv


def d(omega: FormField) -> FormField:
    """Exterior derivative by the grid's difference / collocation operators."""
    base, k = omega.base, omega.degree
    if k >= base.dim:
        raise ValueError("exterior derivative of a top-degree form")
    src_idx = omega.indices
    out_idx = multi_indices(base.dim, k + 1)
    derivs: dict[tuple[int, int], np.ndarray] = {}
    out = np.zeros((len(out_idx),) + omega.comps.shape[1:], dtype=omega.comps.dtype)
    for n_out, K in enumerate(out_idx):
        for p, j in enumerate(K):
            I = K[:p] + K[p + 1:]
            key = (src_idx.index(I), j)
            if key not in derivs:
                derivs[key] = base.derivative(omega.comps[key[0]], j)
            if p % 2:
                out[n_out] -= derivs[key]
            else:
                out[n_out] += derivs[key]
    source = None
    if omega.source is not None and base.is_closed():
        source = _d_source(base, omega.source, k, src_idx, out_idx)
    return FormField(base, k + 1, out, omega.algebra, source)


def _d_source(base, src, k, src_idx, out_idx):
    parts = {}

    def comp_src(i):
        return lambda pts: np.asarray(src(pts))[i]

    def out(pts):
        res = []
        for K in out_idx:
            acc = 0
            for p, j in enumerate(K):
                I = K[:p] + K[p + 1:]
                key = (src_idx.index(I), j)
                if key not in parts:
                    parts[key] = _stencil_source(base, comp_src(key[0]), j)
                val = parts[key](pts)
                acc = acc - val if p % 2 else acc + val
            res.append(acc)
        return np.stack(res)

    return out


def _pairing(name_or_fn, va: tuple, vb: tuple) -> Callable:
    if callable(name_or_fn):
        return name_or_fn
    if name_or_fn == "mul":
        if len(va) == 2 and len(vb) == 2:
            return lambda a, b: a @ b
        if len(va) == 2 and not vb:
            return lambda a, b: a * b[..., None, None]
        if not va and len(vb) == 2:
            return lambda a, b: a[..., None, None] * b
        return lambda a, b: a * b
    if name_or_fn == "matmul":
        return lambda a, b: a @ b
    if name_or_fn == "bracket":
        return lambda a, b: a @ b - b @ a
    if name_or_fn == "trace":
        return lambda a, b: np.einsum("...ij,...ji->...", a, b)
    raise ValueError(f"unknown pairing {name_or_fn!r}")


def wedge_many(forms: list[FormField], multilinear: Callable, algebra: str | None = None) -> FormField:
    """Graded product of several forms with a multilinear value pairing."""
    if not forms:
        raise ValueError("need at least one form")
    base = forms[0].base
    for f in forms:
        if f.base != base:
            raise ValueError("forms live on different bases")
    degs = [f.degree for f in forms]
    total = sum(degs)
    if total > base.dim:
        raise ValueError(f"wedge degree {total} exceeds dimension {base.dim}")
    out_idx = multi_indices(base.dim, total)
    acc: list = [None] * len(out_idx)
    for combo in itertools.product(*[list(enumerate(f.indices)) for f in forms]):
        flat = sum((I for _, I in combo), ())
        sign = permutation_sign(flat)
        if sign == 0:
            continue
        val = multilinear(*[f.comps[n] for f, (n, _) in zip(forms, combo)])
        pos = out_idx.index(tuple(sorted(flat)))
        acc[pos] = sign * val if acc[pos] is None else acc[pos] + sign * val
    template = next(a for a in acc if a is not None) if any(a is not None for a in acc) else None
    if template is None:
        val = multilinear(*[f.comps[0] for f in forms])
        template = np.zeros_like(val)
    comps = np.stack([np.zeros_like(template) if a is None else a for a in acc])
    return FormField(base, total, comps, algebra)


def wedge(omega: FormField, eta: FormField, pairing="mul", algebra: str | None = None) -> FormField:
    """omega ^ eta with values combined by ``pairing``.

    Named pairings: ``mul`` (scalar or matrix product), ``matmul``,
    ``bracket`` (matrix commutator) and ``trace`` (tr(ab)).
    """
    fn = _pairing(pairing, omega.value_shape, eta.value_shape)
    if algebra is None and pairing in ("mul", "matmul", "bracket"):
        algebra = omega.algebra or eta.algebra
    return wedge_many([omega, eta], fn, algebra)


def contract(v, omega: FormField) -> FormField:
    """Interior product of a vector field (array ``(dim, *grid)``) into omega."""
    if omega.degree == 0:
        raise ValueError("cannot contract a vector field into a 0-form")
    base = omega.base
    v = np.asarray(v)
    if v.shape != (base.dim,) + base.shape:
        raise ValueError(f"vector field must have shape {(base.dim,) + base.shape}")
    vshape = omega.value_shape
    src_idx = omega.indices
    out_idx = multi_indices(base.dim, omega.degree - 1)
    out = np.zeros((len(out_idx),) + omega.comps.shape[1:], dtype=np.result_type(omega.comps, v))
    expand = (slice(None),) * base.dim + (None,) * len(vshape)
    for n_out, J in enumerate(out_idx):
        for i in range(base.dim):
            if i in J:
                continue
            K = tuple(sorted(J + (i,)))
            sign = -1 if K.index(i) % 2 else 1
            out[n_out] += sign * v[i][expand] * omega.comps[src_idx.index(K)]
    return FormField(base, omega.degree - 1, out, omega.algebra)


# --- chains -----------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    """An oriented coordinate box inside a grid manifold.

    ``slots[i]`` is ``None`` (the whole axis), ``("at", j)`` (fixed at node j)
    or ``("range", j0, j1)`` (from node j0 to node j1; on periodic axes j1 may
    equal the node count, meaning the wrap-around point).
    """

    base: GridManifold
    slots: tuple

    def __post_init__(self):
        if len(self.slots) != self.base.dim:
            raise ValueError("one slot per axis required")
        for ax, s in zip(self.base.axes, self.slots):
            if s is None:
                continue
            if s[0] == "at":
                if not 0 <= s[1] < ax.n:
                    raise ValueError("fixed index outside the grid")
            elif s[0] == "range":
                hi = ax.n if ax.periodic else ax.n - 1
                if not 0 <= s[1] < s[2] <= hi:
                    raise ValueError(f"bad range {s[1:]} on axis {ax.name}")
            else:
                raise ValueError(f"unknown slot {s!r}")

    @property
    def free_axes(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if s is None or s[0] == "range")

    @property
    def dim(self) -> int:
        return len(self.free_axes)

    def sort_key(self):
        return (repr(self.base.key()), repr(self.slots))

    def boundary_terms(self):
        terms = []
        for p, i in enumerate(self.free_axes):
            ax, s = self.base.axes[i], self.slots[i]
            sgn = -1 if p % 2 else 1
            if s is None:
                if ax.periodic:
                    continue
                lo, hi = 0, ax.n - 1
            else:
                lo, hi = s[1], s[2]
            for idx, orient in ((hi, sgn), (lo, -sgn)):
                slots = list(self.slots)
                slots[i] = ("at", idx % ax.n)
                terms.append((Cell(self.base, tuple(slots)), orient))
        return terms

    def weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in self.free_axes:
            ax, s = self.base.axes[i], self.slots[i]
            if s is None:
                out.append(ax.weights)
            else:
                a = ax.nodes[s[1]]
                b = ax.nodes[s[2]] if s[2] < ax.n else ax.upper
                out.append(ax.interval_weights(a, b))
        return tuple(out)

    def describe(self) -> str:
        parts = []
        for ax, s in zip(self.base.axes, self.slots):
            if s is None:
                parts.append(ax.name)
            elif s[0] == "at":
                parts.append(f"{ax.name}={ax.nodes[s[1]]:.6g}")
            else:
                b = ax.nodes[s[2]] if s[2] < ax.n else ax.upper
                parts.append(f"{ax.name}in[{ax.nodes[s[1]]:.6g},{b:.6g}]")
        return f"{self.base.model_id}({', '.join(parts)})"


class Chain:
    """Formal integer combination of oriented cells."""

    def __init__(self, terms=()):
        merged: dict = {}
        cells: dict = {}
        for cell, coef in terms:
            k = cell.sort_key()
            merged[k] = merged.get(k, 0) + int(coef)
            cells[k] = cell
        self.terms = tuple((cells[k], merged[k]) for k in sorted(merged) if merged[k] != 0)
        dims = {c.dim for c, _ in self.terms}
        if len(dims) > 1:
            raise ValueError("chain mixes cells of different dimension")

    @classmethod
    def of(cls, cell: Cell, sign: int = 1) -> Chain:
        return cls([(cell, sign)])

    @property
    def dim(self) -> int | None:
        return self.terms[0][0].dim if self.terms else None

    @property
    def base(self) -> GridManifold | None:
        return self.terms[0][0].base if self.terms else None

    def is_empty(self) -> bool:
        return not self.terms

    def __add__(self, other: Chain) -> Chain:
        return Chain(self.terms + other.terms)

    def __neg__(self) -> Chain:
        return Chain((c, -k) for c, k in self.terms)

    def __sub__(self, other: Chain) -> Chain:
        return self + (-other)

    def __rmul__(self, k: int) -> Chain:
        return Chain((c, k * m) for c, m in self.terms)

    def __eq__(self, other):
        return isinstance(other, Chain) and [(c.sort_key(), k) for c, k in self.terms] == \
            [(c.sort_key(), k) for c, k in other.terms]

    def __hash__(self):
        return hash(tuple((c.sort_key(), k) for c, k in self.terms))

    def boundary(self) -> Chain:
        out = []
        for cell, coef in self.terms:
            out.extend((c, coef * s) for c, s in cell.boundary_terms())
        return Chain(out)

    def describe(self) -> str:
        if not self.terms:
            return "0"
        return " ".join(f"{'+' if k > 0 else '-'}{abs(k) if abs(k) != 1 else ''}{c.describe()}"
                        for c, k in self.terms)


def slice_chain(base: GridManifold, axis: int, index: int, sign: int = 1) -> Chain:
    """The codimension-one torus {x_axis = node} with the induced coordinate orientation."""
    slots = [None] * base.dim
    slots[axis] = ("at", index)
    return Chain.of(Cell(base, tuple(slots)), sign)


def slab_chain(base: GridManifold, axis: int, lo: int, hi: int, sign: int = 1) -> Chain:
    slots = [None] * base.dim
    slots[axis] = ("range", lo, hi)
    return Chain.of(Cell(base, tuple(slots)), sign)


def integrate(omega: FormField, chain: Chain):
    """Integral of a form over a chain of coordinate cells."""
    if chain.is_empty():
        return 0.0
    if omega.value_shape:
        raise ValueError("only scalar-valued forms can be integrated")
    total = []
    for cell, coef in chain.terms:
        if cell.base != omega.base:
            raise ValueError("chain and form live on different bases")
        if cell.dim != omega.degree:
            raise ValueError(f"cannot integrate a {omega.degree}-form over a {cell.dim}-chain")
        arr = omega.component(cell.free_axes)
        take = tuple(s[1] if (s is not None and s[0] == "at") else slice(None) for s in cell.slots)
        arr = arr[take]
        w = np.ones(())
        for wi in cell.weights():
            w = np.multiply.outer(w, wi)
        total.append(coef * fsum_array(arr * w))
    if any(isinstance(t, complex) for t in total):
        re = math.fsum(complex(t).real for t in total)
        im = math.fsum(complex(t).imag for t in total)
        return complex(re, im)
    return math.fsum(total)


def integrate_wedge(forms: list[FormField], multilinear: Callable, chain: Chain):
    """int_chain of the wedge product of ``forms`` without building it on the whole grid.

    Each factor is cut down to the cell's nodes and free-axis components
    first, so that only the top-degree component on each cell is formed.
    """
    if chain.is_empty():
        return 0.0
    total = []
    for cell, coef in chain.terms:
        for f in forms:
            if f.base != cell.base:
                raise ValueError("chain and form live on different bases")
        free = cell.free_axes
        if sum(f.degree for f in forms) != cell.dim:
            raise ValueError(f"cannot integrate a {sum(f.degree for f in forms)}-form over a {cell.dim}-chain")
        take = tuple(sl[1] if (sl is not None and sl[0] == "at") else slice(None) for sl in cell.slots)
        acc = None
        for parts in _ordered_splits(free, [f.degree for f in forms]):
            sign = permutation_sign(sum(parts, ()))
            val = multilinear(*[f.comps[f.indices.index(I)][take] for f, I in zip(forms, parts)])
            acc = sign * val if acc is None else acc + sign * val
        w = np.ones(())
        for wi in cell.weights():
            w = np.multiply.outer(w, wi)
        total.append(coef * fsum_array(acc * w))
    if any(isinstance(t, complex) for t in total):
        return complex(math.fsum(complex(t).real for t in total), math.fsum(complex(t).imag for t in total))
    return math.fsum(total)


def _ordered_splits(axes, degrees):
    """All ways of handing the axes out to factors of the given degrees, each part sorted."""
    if not degrees:
        yield ()
        return
    for first in itertools.combinations(axes, degrees[0]):
        rest = tuple(a for a in axes if a not in first)
        for tail in _ordered_splits(rest, degrees[1:]):
            yield (first,) + tail


# --- catalogued maps and pullback --------------------------------------------

class GridMap:
    """Smooth map from the nodes of ``source`` into the chart of ``target``.

    Subclasses supply ``apply(pts)`` and ``jacobian(pts)`` (shape
    ``(target.dim, source.dim, *pts_shape)``) as analytic expressions.
    """

    name = "map"

    def __init__(self, source: GridManifold, target: GridManifold):
        self.source, self.target = source, target

    def apply(self, pts):
        raise NotImplementedError

    def jacobian(self, pts):
        raise NotImplementedError

    def __matmul__(self, other: GridMap) -> GridMap:
        return Composition(self, other)


class Identity(GridMap):
    name = "identity"

    def __init__(self, base):
        super().__init__(base, base)

    def apply(self, pts):
        return tuple(pts)

    def jacobian(self, pts):
        n = self.source.dim
        ones = np.ones_like(pts[0])
        return np.array([[ones if a == b else 0 * ones for b in range(n)] for a in range(n)])


class Shift(GridMap):
    """Coordinate translation x -> x + offset on a periodic model."""

    name = "shift"

    def __init__(self, base, offset):
        super().__init__(base, base)
        self.offset = tuple(float(o) for o in offset)
        for ax, o in zip(base.axes, self.offset):
            if o and not ax.periodic:
                raise ValueError("shifts act along periodic axes only")

    def apply(self, pts):
        return tuple(p + o for p, o in zip(pts, self.offset))

    def jacobian(self, pts):
        return Identity(self.source).jacobian(pts)


class LinearTorusMap(GridMap):
    """x -> M x (mod 1) on the unit torus with M integral and det M = 1."""

    name = "linear"

    def __init__(self, base, matrix):
        super().__init__(base, base)
        M = np.asarray(matrix, dtype=float)
        if M.shape != (base.dim, base.dim) or not np.allclose(M, np.rint(M)) or round(np.linalg.det(M)) != 1:
            raise ValueError("linear torus maps need an integral matrix with determinant 1")
        if not base.is_closed():
            raise ValueError("linear maps act on tori only")
        self.M = M

    def apply(self, pts):
        return tuple(sum(self.M[a, b] * pts[b] for b in range(len(pts))) for a in range(len(pts)))

    def jacobian(self, pts):
        ones = np.ones_like(pts[0])
        return np.array([[self.M[a, b] * ones for b in range(self.source.dim)] for a in range(self.source.dim)])


class Shear(GridMap):
    """(x, y) -> (x + eps sin(2 pi k y)/(2 pi k), y): an area-preserving diffeomorphism of T^2."""

    name = "shear"

    def __init__(self, base, eps: float, k: int = 1):
        if base.dim != 2 or not base.is_closed():
            raise ValueError("shear acts on T2")
        super().__init__(base, base)
        self.eps, self.k = float(eps), int(k)
        self.L = base.axes[1].length

    def apply(self, pts):
        x, y = pts
        w = 2 * np.pi * self.k / self.L
        return (x + self.eps * np.sin(w * y) / w, y)

    def jacobian(self, pts):
        x, y = pts
        w = 2 * np.pi * self.k / self.L
        ones, zeros = np.ones_like(x), np.zeros_like(x)
        return np.array([[ones, self.eps * np.cos(w * y)], [zeros, ones]])


class SliceEmbedding(GridMap):
    """Inclusion of the slice {x_axis = value} (a node) of a grid manifold."""

    name = "slice"

    def __init__(self, target: GridManifold, axis: int, index: int):
        keep = tuple(i for i in range(target.dim) if i != axis)
        model = "T2" if target.model_id == "T3" else None
        super().__init__(sub_manifold(target, keep, model), target)
        self.axis, self.index, self.keep = axis, index, keep
        self.value = target.axes[axis].nodes[index]

    def apply(self, pts):
        out = list(pts)
        out.insert(self.axis, np.full_like(pts[0], self.value))
        return tuple(out)

    def jacobian(self, pts):
        n, m = self.target.dim, self.source.dim
        ones, zeros = np.ones_like(pts[0]), np.zeros_like(pts[0])
        return np.array([[ones if self.keep[b] == a else zeros for b in range(m)] for a in range(n)])


def boundary_inclusion(solid: GridManifold) -> SliceEmbedding:
    """The outer boundary torus r = 1 of the solid-torus chart."""
    if solid.model_id != "SolidTorus":
        raise ValueError("boundary inclusion is catalogued for SolidTorus")
    return SliceEmbedding(solid, 0, solid.axes[0].n - 1)


class Composition(GridMap):
    name = "composition"

    def __init__(self, outer: GridMap, inner: GridMap):
        if inner.target != outer.source:
            raise ValueError("maps do not compose")
        super().__init__(inner.source, outer.target)
        self.outer, self.inner = outer, inner

    def apply(self, pts):
        return self.outer.apply(self.inner.apply(pts))

    def jacobian(self, pts):
        mid = self.inner.apply(pts)
        Jo, Ji = self.outer.jacobian(mid), self.inner.jacobian(pts)
        return np.einsum("ab...,bc...->ac...", Jo, Ji)


MAP_CATALOG = ("identity", "shift", "linear", "shear", "slice", "boundary_inclusion")


def _on_chart(target: GridManifold, pts):
    out = []
    for ax, p in zip(target.axes, pts):
        out.append(ax.lower + np.mod(p - ax.lower, ax.length) if ax.periodic else p)
    return tuple(out)


def _values_at(omega: FormField, pts):
    """Components of omega at chart points: node gather or analytic source."""
    target = omega.base
    wrapped = _on_chart(target, pts)
    idx = [ax.locate(p) for ax, p in zip(target.axes, wrapped)]
    if all(i is not None for i in idx):
        return omega.comps[(slice(None),) + tuple(idx)]
    if omega.source is None:
        raise ValueError("map images are off the grid and the form has no analytic source")
    return np.asarray(omega.source(tuple(pts)))


def pullback(phi: GridMap, omega: FormField) -> FormField:
    """Chain-rule pullback phi^* omega sampled at the nodes of phi.source."""
    if not isinstance(phi, GridMap):
        raise ValueError("map not in catalog")
    if omega.base != phi.target:
        raise ValueError("form does not live on the map's target")
    src = phi.source
    k = omega.degree
    if k > src.dim:
        raise ValueError("form degree exceeds the source dimension")

    def build(pts, vals):
        J = phi.jacobian(pts)
        t_idx = multi_indices(phi.target.dim, k)
        s_idx = multi_indices(src.dim, k)
        vshape = vals.shape[1 + len(np.shape(pts[0])):]
        expand = (Ellipsis,) + (None,) * len(vshape)
        out = []
        for I in s_idx:
            acc = 0
            for n, T in enumerate(t_idx):
                if k == 0:
                    minor = 1.0
                else:
                    sub = J[list(T)][:, list(I)]
                    minor = _det_stack(sub)
                acc = acc + (minor[expand] if k else 1.0) * vals[n]
            out.append(acc)
        return np.stack(out)

    comps = build(src.coords, _values_at(omega, phi.apply(src.coords)))
    source = None
    if omega.source is not None:
        f = omega.source
        source = lambda pts: build(pts, np.asarray(f(phi.apply(pts))))  # noqa: E731
    return FormField(src, k, comps, omega.algebra, source)


def _det_stack(M):
    """Determinant of a (k, k, ...) block of node arrays."""
    k = M.shape[0]
    if k == 1:
        return M[0, 0]
    if k == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    moved = np.moveaxis(np.moveaxis(M, 0, -1), 0, -1)
    return np.linalg.det(moved)
