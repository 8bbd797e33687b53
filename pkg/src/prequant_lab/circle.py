"""Values in R/Z compared by circular distance."""
from __future__ import annotations

import math
from dataclasses import dataclass


def circular_distance(a: float, b: float) -> float:
    t = (a - b) % 1.0
    return min(t, 1.0 - t)


def distance_to_integer(x: float) -> float:
    return abs(x - round(x))


@dataclass(frozen=True)
class CircleValue:
    rep: float

    def __post_init__(self):
        if not math.isfinite(self.rep):
            raise ValueError("circle values must be finite")
        r = float(self.rep) % 1.0
        object.__setattr__(self, "rep", 0.0 if r == 1.0 else r)

    def __add__(self, other):
        other = other.rep if isinstance(other, CircleValue) else float(other)
        return CircleValue(self.rep + other)

    def __neg__(self):
        return CircleValue(-self.rep)

    def __sub__(self, other):
        return self + (-(other if isinstance(other, CircleValue) else CircleValue(other)))

    def dist(self, other) -> float:
        other = other.rep if isinstance(other, CircleValue) else float(other)
        return circular_distance(self.rep, other)
