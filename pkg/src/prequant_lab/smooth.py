"""Random smooth test fields with analytic gradients.

A field is a short sum of Fourier modes along periodic axes and cosine
modes along bounded ones, so that every value and derivative is available
in closed form at arbitrary points.
"""
from __future__ import annotations

import numpy as np

from . import liealg
from .fields import FormField, GridManifold, torus


def algebra_basis(algebra_id: str, n: int | None = None) -> np.ndarray:
    if algebra_id == "u1":
        return np.array([[[1j]]])
    if algebra_id == "su2":
        return 1j * liealg.PAULI
    if algebra_id == "so3":
        return np.stack([liealg.so3_from_vector(e) for e in np.eye(3)]).astype(complex)
    if algebra_id == "gl_n":
        m = liealg.rep_dim("gl_n", n)
        out = np.zeros((m * m, m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                out[i * m + j, i, j] = 1
        return out
    raise ValueError(f"unknown algebra {algebra_id!r}")


class FourierScalar:
    """f(x) = sum_t a_t cos(k_t . x + phase_t) on the base chart."""

    def __init__(self, base: GridManifold, rng: np.random.Generator, terms: int = 3, max_mode: int = 1,
                 amplitude: float = 1.0, constant: float = 0.0):
        self.dim = base.dim
        self.freq = np.zeros((terms, base.dim))
        self.offset = np.array([ax.lower for ax in base.axes])
        for t in range(terms):
            for i, ax in enumerate(base.axes):
                m = rng.integers(-max_mode, max_mode + 1)
                # bounded axes get half-period cosines, still analytic
                step = 2 * np.pi / ax.length if ax.periodic else np.pi / ax.length
                self.freq[t, i] = m * step
        self.amp = amplitude * rng.standard_normal(terms) / np.sqrt(terms)
        self.phase = rng.uniform(0, 2 * np.pi, terms)
        self.constant = float(constant)

    def _arg(self, pts, t):
        return sum(self.freq[t, i] * (pts[i] - self.offset[i]) for i in range(self.dim)) + self.phase[t]

    def __call__(self, pts):
        out = self.constant + 0 * pts[0]
        for t in range(len(self.amp)):
            out = out + self.amp[t] * np.cos(self._arg(pts, t))
        return out

    def gradient(self, pts):
        out = []
        for i in range(self.dim):
            acc = 0 * pts[0]
            for t in range(len(self.amp)):
                acc = acc - self.amp[t] * self.freq[t, i] * np.sin(self._arg(pts, t))
            out.append(acc)
        return np.stack(out)


class LieField:
    """Lie-algebra valued 0-form  xi = sum_a f_a(x) e_a  with analytic gradient."""

    def __init__(self, base, algebra_id, rng, n=None, **kw):
        self.base, self.algebra_id = base, algebra_id
        self.basis = algebra_basis(algebra_id, n)
        self.coeffs = [FourierScalar(base, rng, **kw) for _ in range(len(self.basis))]

    def __call__(self, pts):
        vals = np.stack([c(pts) for c in self.coeffs], axis=-1)
        return np.einsum("...a,aij->...ij", vals, self.basis)

    def gradient(self, pts):
        grads = np.stack([c.gradient(pts) for c in self.coeffs], axis=-1)
        return np.einsum("k...a,aij->k...ij", grads, self.basis)

    def zero_form(self) -> FormField:
        return FormField(self.base, 0, self(self.base.coords)[None], self.algebra_id,
                         source=lambda pts: self(pts)[None])

    def differential(self) -> FormField:
        """The analytic 1-form d(xi)."""
        return FormField(self.base, 1, self.gradient(self.base.coords), self.algebra_id,
                         source=self.gradient)


class LieOneForm:
    """Lie-algebra valued 1-form with Fourier coefficients in every slot."""

    def __init__(self, base, algebra_id, rng, n=None, **kw):
        self.base, self.algebra_id = base, algebra_id
        self.basis = algebra_basis(algebra_id, n)
        self.slots = [[FourierScalar(base, rng, **kw) for _ in range(len(self.basis))] for _ in range(base.dim)]

    def __call__(self, pts):
        out = []
        for slot in self.slots:
            vals = np.stack([c(pts) for c in slot], axis=-1)
            out.append(np.einsum("...a,aij->...ij", vals, self.basis))
        return np.stack(out)

    def form(self) -> FormField:
        return FormField(self.base, 1, self(self.base.coords), self.algebra_id, source=self)


class CartesianTensor:
    """Symmetric n x n field with FourierScalar entries in Cartesian coordinates.

    ``periods`` sets the Cartesian period of each coordinate; keep it at the
    chart period along axes that are periodic in the chart.
    """

    def __init__(self, dim, rng, periods, amplitude=0.2, max_mode=1, terms=3):
        self.dim = dim
        unit = torus(dim, 8)
        self.entries = {}
        for i in range(dim):
            for j in range(i, dim):
                f = FourierScalar(unit, rng, terms=terms, max_mode=max_mode, amplitude=amplitude)
                f.freq = f.freq / np.asarray(periods, dtype=float)
                self.entries[i, j] = f

    def __call__(self, x):
        out = np.zeros(np.shape(x[0]) + (self.dim, self.dim))
        for (i, j), f in self.entries.items():
            out[..., i, j] = out[..., j, i] = f(x)
        return out

    def gradient(self, x):
        out = np.zeros((self.dim,) + np.shape(x[0]) + (self.dim, self.dim))
        for (i, j), f in self.entries.items():
            g = f.gradient(x)
            out[:, ..., i, j] = g
            out[:, ..., j, i] = g
        return out
