"""Standard objects: coordinates, the rotation and Euler fields, and the
plane modules used throughout the tests and the paper-suite battery."""

from __future__ import annotations

import math

import numpy as np

from .geometry import FormalDiffeo, FormalVectorField
from .jets import DEFAULT_ORDER, TruncatedSeries
from .modules import FoliationModule


def coords(dim: int, order: int = DEFAULT_ORDER) -> list[TruncatedSeries]:
    return [TruncatedSeries.variable(dim, order, i) for i in range(dim)]


def rot(order: int = DEFAULT_ORDER) -> FormalVectorField:
    """``x d/dy - y d/dx``."""
    x, y = coords(2, order)
    return FormalVectorField.from_components([-y, x])


def euler(order: int = DEFAULT_ORDER, dim: int = 2) -> FormalVectorField:
    return FormalVectorField.from_components(coords(dim, order))


def radius2(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    x, y = coords(2, order)
    return x * x + y * y


def circles(order: int = DEFAULT_ORDER) -> FoliationModule:
    return FoliationModule([rot(order)], name="circles")


def spiral_generator(order: int = DEFAULT_ORDER) -> FormalVectorField:
    return rot(order) + radius2(order) * euler(order)


def spirals(order: int = DEFAULT_ORDER) -> FoliationModule:
    return FoliationModule([spiral_generator(order)], name="spirals")


def all_fields(dim: int = 2, order: int = DEFAULT_ORDER) -> FoliationModule:
    """Every field vanishing at 0: generated by ``x_j d/dx_i``."""
    gens = []
    for i in range(dim):
        for j in range(dim):
            m = np.zeros((dim, dim))
            m[i, j] = 1.0
            gens.append(FormalVectorField.linear(m, order))
    return FoliationModule(gens, name="all-fields")


def rotation_matrix(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def rotation(theta: float, order: int = DEFAULT_ORDER) -> FormalDiffeo:
    return FormalDiffeo.linear(rotation_matrix(theta), order)


def reflection(order: int = DEFAULT_ORDER) -> FormalDiffeo:
    """``(x, y) -> (x, -y)``."""
    return FormalDiffeo.linear(np.diag([1.0, -1.0]), order)


def shear(order: int = DEFAULT_ORDER) -> FormalDiffeo:
    """``(x, y) -> (x + y, y)``."""
    return FormalDiffeo.linear(np.array([[1.0, 1.0], [0.0, 1.0]]), order)
