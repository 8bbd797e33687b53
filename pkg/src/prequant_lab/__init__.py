"""Grid-based verification of Chern-Simons prequantization identities.

Modules: ``liealg`` (matrix Lie algebras, invariant polynomials), ``fields``
(grid manifolds, forms, chains, pullbacks), ``gauge`` (connections,
Chern-Weil and transgression forms, gauge maps), ``connfam`` (finite
parameter families and the equivariant 2-form), ``prequant`` (the
prequantum bundle, cocycles, sections, holonomy), ``metrics`` (Levi-Civita
map) and ``cli`` (the ``prequant-lab`` command).
"""
from .circle import CircleValue, circular_distance, distance_to_integer

__version__ = "0.1.0"

__all__ = ["CircleValue", "circular_distance", "distance_to_integer", "__version__"]
