"""Formal vector fields and formal diffeomorphisms fixing the origin.

Both objects store their ``d`` component series as one ``(d, M)`` coefficient
array on the shared :class:`~folia.jets.Layout`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .jets import DEFAULT_TOL, Layout, TruncatedSeries, default_names, layout

MAX_TAYLOR_TERMS = 50
# Taylor sums stop once the increment is at rounding level of the running total
TAYLOR_RTOL = 1e-17


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _identity_rows(dim: int, order: int) -> np.ndarray:
    rows = np.zeros((dim, layout(dim, order).size))
    for i in range(dim):
        rows[i, 1 + i] = 1.0
    return rows


class _Components:
    __slots__ = ("dim", "order", "comps")
    __hash__ = None  # type: ignore[assignment]

    def __init__(self, dim: int, order: int, comps):
        lay = layout(dim, order)
        comps = np.asarray(comps, dtype=float)
        if comps.shape != (dim, lay.size):
            raise StructuralError(f"expected component array of shape {(dim, lay.size)}, got {comps.shape}")
        self.dim = dim
        self.order = order
        self.comps = _frozen(comps)

    @classmethod
    def from_components(cls, components: Sequence[TruncatedSeries]):
        if not components:
            raise StructuralError("need at least one component")
        c0 = components[0]
        if len(components) != c0.dim:
            raise StructuralError(f"{len(components)} components for dimension {c0.dim}")
        for c in components:
            c0._check(c)
        return cls(c0.dim, c0.order, np.stack([c.coeffs for c in components]))

    @property
    def layout(self) -> Layout:
        return layout(self.dim, self.order)

    @property
    def components(self) -> list[TruncatedSeries]:
        return [TruncatedSeries(self.dim, self.order, row) for row in self.comps]

    def _check(self, other) -> None:
        if not isinstance(other, _Components) or other.dim != self.dim or other.order != self.order:
            raise StructuralError("dimension/order mismatch")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.comps)))

    def linear_part(self) -> np.ndarray:
        """Matrix ``A[i, j]`` = coefficient of ``x_j`` in component ``i``."""
        return np.array(self.comps[:, 1 : 1 + self.dim])

    def truncate(self, order: int):
        return type(self)(self.dim, order, self.comps[:, : layout(self.dim, order).size])

    def extend(self, order: int):
        c = np.zeros((self.dim, layout(self.dim, order).size))
        c[:, : self.comps.shape[1]] = self.comps
        return type(self)(self.dim, order, c)

    def equal_within(self, other, tol: float = DEFAULT_TOL) -> bool:
        self._check(other)
        scale = max(1.0, self.max_abs(), other.max_abs())
        return bool(np.all(np.abs(self.comps - other.comps) <= tol * scale))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.dim == other.dim and self.order == other.order and np.array_equal(self.comps, other.comps)

    def to_string(self, names: Sequence[str] | None = None) -> str:
        names = names or default_names(self.dim)
        return "(" + ", ".join(c.to_string(names) for c in self.components) + ")"


class FormalVectorField(_Components):
    """``X = sum_i X_i d/dx_i`` with truncated series coefficients."""

    __slots__ = ()

    @classmethod
    def zero(cls, dim: int, order: int) -> FormalVectorField:
        return cls(dim, order, np.zeros((dim, layout(dim, order).size)))

    @classmethod
    def linear(cls, matrix, order: int) -> FormalVectorField:
        """Linear field ``x -> A x``."""
        a = np.asarray(matrix, dtype=float)
        d = a.shape[0]
        comps = np.zeros((d, layout(d, order).size))
        comps[:, 1 : 1 + d] = a
        return cls(d, order, comps)

    def valuation(self, tol: float = DEFAULT_TOL) -> int:
        thresh = tol * max(1.0, self.max_abs())
        nz = np.flatnonzero(np.any(np.abs(self.comps) > thresh, axis=0))
        if nz.size == 0:
            return self.order + 1
        return int(self.layout.degrees[nz[0]])

    def vanishes_at_zero(self, tol: float = DEFAULT_TOL) -> bool:
        return self.order_at_least(1, tol)

    def order_at_least(self, k: int, tol: float = DEFAULT_TOL) -> bool:
        return self.valuation(tol) >= k

    def graded_piece(self, k: int) -> FormalVectorField:
        c = np.zeros_like(self.comps)
        if 0 <= k <= self.order:
            s = self.layout.degree_slice(k)
            c[:, s] = self.comps[:, s]
        return FormalVectorField(self.dim, self.order, c)

    def apply_rows(self, rows: np.ndarray) -> np.ndarray:
        """Derivation ``X[F]`` applied to each row of ``rows`` (shape ``(K, M)``)."""
        lay = self.layout
        k = rows.shape[0]
        derivs = np.concatenate([lay.diff_rows(rows, v) for v in range(self.dim)])
        coeffs = np.repeat(self.comps, k, axis=0)
        prods = lay.mul_rows(coeffs, derivs)
        return prods.reshape(self.dim, k, lay.size).sum(axis=0)

    def apply(self, f: TruncatedSeries) -> TruncatedSeries:
        if f.dim != self.dim or f.order != self.order:
            raise StructuralError("field/series mismatch")
        return TruncatedSeries(self.dim, self.order, self.apply_rows(f.coeffs[None, :])[0])

    def __add__(self, other):
        self._check(other)
        return FormalVectorField(self.dim, self.order, self.comps + other.comps)

    def __sub__(self, other):
        self._check(other)
        return FormalVectorField(self.dim, self.order, self.comps - other.comps)

    def __neg__(self):
        return FormalVectorField(self.dim, self.order, -self.comps)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return FormalVectorField(self.dim, self.order, self.comps * float(other))
        if isinstance(other, TruncatedSeries):
            if other.dim != self.dim or other.order != self.order:
                raise StructuralError("series/field mismatch")
            prods = self.layout.mul_rows(np.repeat(other.coeffs[None, :], self.dim, axis=0), self.comps)
            return FormalVectorField(self.dim, self.order, prods)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return FormalVectorField(self.dim, self.order, self.comps / float(other))

    def __repr__(self):
        return f"FormalVectorField{self.to_string()}"


class FormalDiffeo(_Components):
    """Formal map germ ``(R^d, 0) -> (R^d, 0)`` with invertible linear part."""

    __slots__ = ()

    def __init__(self, dim: int, order: int, comps, tol: float = DEFAULT_TOL):
        super().__init__(dim, order, comps)
        if np.any(np.abs(self.comps[:, 0]) > tol * max(1.0, self.max_abs())):
            raise DomainError("formal diffeomorphism must fix the origin")
        if self.comps[:, 0].any():
            c = np.array(self.comps)
            c[:, 0] = 0.0
            self.comps = _frozen(c)
        if abs(np.linalg.det(self.linear_part())) <= tol:
            raise DomainError("linear part is singular")

    @classmethod
    def identity(cls, dim: int, order: int) -> FormalDiffeo:
        return cls(dim, order, _identity_rows(dim, order))

    @classmethod
    def linear(cls, matrix, order: int) -> FormalDiffeo:
        a = np.asarray(matrix, dtype=float)
        d = a.shape[0]
        comps = np.zeros((d, layout(d, order).size))
        comps[:, 1 : 1 + d] = a
        return cls(d, order, comps)

    def determinant(self) -> float:
        return float(np.linalg.det(self.linear_part()))

    def monomial_table(self) -> np.ndarray:
        return self.layout.monomial_table(self.comps)

    def pullback(self, f: TruncatedSeries) -> TruncatedSeries:
        """``f o self``."""
        if f.dim != self.dim or f.order != self.order:
            raise StructuralError("series/diffeo mismatch")
        return TruncatedSeries(self.dim, self.order, Layout.compose_rows(f.coeffs[None, :], self.monomial_table())[0])

    def tangent_to_identity_order(self, tol: float = DEFAULT_TOL) -> int:
        """Valuation of ``self - id``; ``order + 1`` means identical through the order."""
        diff = FormalVectorField(self.dim, self.order, self.comps - _identity_rows(self.dim, self.order))
        return diff.valuation(tol)

    def compose(self, other: FormalDiffeo) -> FormalDiffeo:
        return diffeo_compose(self, other)

    def inverse(self) -> FormalDiffeo:
        return diffeo_invert(self)

    def __matmul__(self, other):
        return diffeo_compose(self, other)

    def __repr__(self):
        return f"FormalDiffeo{self.to_string()}"


def lie_bracket(x: FormalVectorField, y: FormalVectorField) -> FormalVectorField:
    """``[X, Y]_i = X[Y_i] - Y[X_i]``."""
    x._check(y)
    return FormalVectorField(x.dim, x.order, x.apply_rows(np.array(y.comps)) - y.apply_rows(np.array(x.comps)))


def diffeo_compose(f: FormalDiffeo, g: FormalDiffeo) -> FormalDiffeo:
    """``f o g``."""
    f._check(g)
    return FormalDiffeo(f.dim, f.order, Layout.compose_rows(np.array(f.comps), g.monomial_table()))


def diffeo_invert(f: FormalDiffeo) -> FormalDiffeo:
    """Two-sided inverse, corrected one degree at a time.

    The degree-k correction only needs ``f o g`` through degree k, so each
    step runs in the layout truncated at k.
    """
    a_inv = np.linalg.inv(f.linear_part())
    fc = np.array(f.comps)
    g = np.zeros_like(fc)
    g[:, 1 : 1 + f.dim] = a_inv
    if not fc[:, 1 + f.dim :].any():
        return FormalDiffeo(f.dim, f.order, g)
    for k in range(2, f.order + 1):
        lay = layout(f.dim, k)
        n = lay.size
        resid = Layout.compose_rows(fc[:, :n], lay.monomial_table(g[:, :n]))
        s = lay.degree_slice(k)
        g[:, s] -= a_inv @ resid[:, s]
    return FormalDiffeo(f.dim, f.order, g)


def pushforward(phi: FormalDiffeo, x: FormalVectorField, tol: float = DEFAULT_TOL) -> FormalVectorField:
    """``(D phi . X) o phi^{-1}``: the field whose flow is ``phi`` conjugating the flow of ``X``."""
    phi._check(x)
    if not x.vanishes_at_zero(tol):
        raise DomainError("pushforward expects a field vanishing at 0")
    moved = x.apply_rows(np.array(phi.comps))
    table = diffeo_invert(phi).monomial_table()
    return FormalVectorField(x.dim, x.order, Layout.compose_rows(moved, table))


def exp_field(x: FormalVectorField, tol: float = DEFAULT_TOL) -> FormalDiffeo:
    """Time-one flow of ``x``.

    Fields of valuation >= 2 use the terminating series directly.  Otherwise
    ``x`` is scaled by ``2**-m`` until its largest coefficient is below 1/4,
    the operator Taylor series ``sum X^n[x_i]/n!`` is summed until the
    increment falls below ``TAYLOR_RTOL`` relative to the sum, and the result
    is self-composed ``m`` times.
    """
    if not x.vanishes_at_zero(tol):
        raise DomainError("exp_field expects a field vanishing at 0")
    comps = np.array(x.comps)
    comps[:, 0] = 0.0
    if not comps[:, 1 : 1 + x.dim].any():
        # valuation >= 2: X^n raises degree by n, so the series stops by itself
        clean = FormalVectorField(x.dim, x.order, comps)
        term = _identity_rows(x.dim, x.order)
        total = term.copy()
        for n in range(1, x.order + 1):
            term = clean.apply_rows(term) / n
            if not term.any():
                break
            total += term
        return FormalDiffeo(x.dim, x.order, total)
    norm = float(np.max(np.abs(comps)))
    m = 0
    while norm / 2.0**m >= 0.25:
        m += 1
    small = FormalVectorField(x.dim, x.order, comps / 2.0**m)
    term = _identity_rows(x.dim, x.order)
    total = term.copy()
    for n in range(1, MAX_TAYLOR_TERMS + 1):
        term = small.apply_rows(term) / n
        total += term
        if np.max(np.abs(term)) < TAYLOR_RTOL * max(1.0, float(np.max(np.abs(total)))):
            break
    phi = FormalDiffeo(x.dim, x.order, total)
    for _ in range(m):
        phi = diffeo_compose(phi, phi)
    return phi


def flow(x: FormalVectorField, time: float, tol: float = DEFAULT_TOL) -> FormalDiffeo:
    """Time-``time`` flow; internal helper, equal to ``exp_field(time * x)``."""
    return exp_field(x * time, tol)


def log_diffeo(phi: FormalDiffeo, tol: float = DEFAULT_TOL) -> FormalVectorField:
    """Unique field of valuation >= 2 whose time-one flow is ``phi``.

    ``phi`` must be tangent to the identity.  The degree-``k`` part of
    ``exp(X)`` is ``X_k`` plus terms in ``X_{<k}`` only, so ``X`` is solved one
    degree at a time, each step computing ``exp`` at truncation order ``k``.
    """
    lin = phi.linear_part()
    if not np.allclose(lin, np.eye(phi.dim), rtol=0.0, atol=tol * max(1.0, phi.max_abs())):
        raise DomainError("log requires tangent-to-identity input")
    target = np.array(phi.comps)
    z = np.zeros_like(target)
    for k in range(2, phi.order + 1):
        sl = layout(phi.dim, k).degree_slice(k)
        approx = exp_field(FormalVectorField(phi.dim, phi.order, z).truncate(k), tol)
        z[:, sl] = target[:, sl] - (np.array(approx.comps)[:, sl] - z[:, sl])
    return FormalVectorField(phi.dim, phi.order, z)


__all__ = [
    "FormalDiffeo",
    "FormalVectorField",
    "diffeo_compose",
    "diffeo_invert",
    "exp_field",
    "flow",
    "lie_bracket",
    "log_diffeo",
    "pushforward",
]
