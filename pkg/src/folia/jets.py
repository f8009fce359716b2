"""Dense truncated multivariate power series.

A series in ``dim`` variables truncated at total degree ``order`` is a flat
float vector indexed by the graded-lexicographic rank of its monomials.  All
index tables live on a cached :class:`Layout`, so arithmetic is a handful of
vectorised numpy calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, NotAFunctionOfInvariant, StructuralError

DEFAULT_ORDER = 12
DEFAULT_TOL = 1e-9


def _exponents_of_degree(dim: int, degree: int) -> list[tuple[int, ...]]:
    # lexicographically descending: x^2, x*y, y^2
    if dim == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _exponents_of_degree(dim - 1, degree - first):
            out.append((first,) + rest)
    return out


class Layout:
    """Index tables for series in ``dim`` variables truncated at ``order``."""

    def __init__(self, dim: int, order: int):
        if dim < 1 or order < 0:
            raise StructuralError(f"invalid layout dim={dim} order={order}")
        self.dim = dim
        self.order = order
        exps = []
        self.starts = []
        for k in range(order + 1):
            self.starts.append(len(exps))
            exps.extend(_exponents_of_degree(dim, k))
        self.starts.append(len(exps))
        self.size = len(exps)
        self.exponents = np.array(exps, dtype=np.int64).reshape(self.size, dim)
        self.degrees = self.exponents.sum(axis=1)
        self.index = {e: i for i, e in enumerate(exps)}

        pi, pj, pt = [], [], []
        for i, a in enumerate(exps):
            da = self.degrees[i]
            for j, b in enumerate(exps[: self.starts[order - da + 1]]):
                pi.append(i)
                pj.append(j)
                pt.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.pair_i = np.array(pi, dtype=np.int64)
        self.pair_j = np.array(pj, dtype=np.int64)
        self.pair_t = np.array(pt, dtype=np.int64)

        self.deriv = []
        for v in range(dim):
            src, dst, fac = [], [], []
            for i, e in enumerate(exps):
                if e[v] > 0:
                    lowered = list(e)
                    lowered[v] -= 1
                    src.append(i)
                    dst.append(self.index[tuple(lowered)])
                    fac.append(float(e[v]))
            self.deriv.append((np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(fac)))

        # each monomial of positive degree = parent monomial * x_var
        self.parent = np.zeros(self.size, dtype=np.int64)
        self.parent_var = np.zeros(self.size, dtype=np.int64)
        for i, e in enumerate(exps[1:], start=1):
            v = max(k for k in range(dim) if e[k] > 0)
            lowered = list(e)
            lowered[v] -= 1
            self.parent[i] = self.index[tuple(lowered)]
            self.parent_var[i] = v

    def degree_slice(self, k: int) -> slice:
        return slice(self.starts[k], self.starts[k + 1])

    def upto(self, k: int) -> int:
        """Number of monomials of total degree <= k."""
        return self.starts[min(k, self.order) + 1] if k >= 0 else 0

    def monomial_name(self, idx: int, names: Sequence[str]) -> str:
        parts = []
        for name, p in zip(names, self.exponents[idx]):
            if p == 1:
                parts.append(name)
            elif p > 1:
                parts.append(f"{name}^{p}")
        return "*".join(parts) if parts else "1"

    # -- batched kernels; rows are independent series --------------------

    def mul_rows(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        rows = a.shape[0]
        w = a[:, self.pair_i] * b[:, self.pair_j]
        tgt = (np.arange(rows)[:, None] * self.size + self.pair_t[None, :]).ravel()
        return np.bincount(tgt, weights=w.ravel(), minlength=rows * self.size).reshape(rows, self.size)

    def diff_rows(self, a: np.ndarray, var: int) -> np.ndarray:
        src, dst, fac = self.deriv[var]
        out = np.zeros_like(a)
        out[..., dst] = a[..., src] * fac
        return out

    def _table_pairs(self, k: int):
        # products landing in table rows of degree k: parent degree >= k-1, subst degree >= 1
        cache = self.__dict__.setdefault("_tp", {})
        if k not in cache:
            keep = (self.degrees[self.pair_i] >= k - 1) & (self.degrees[self.pair_j] >= 1)
            cache[k] = (self.pair_i[keep], self.pair_j[keep], self.pair_t[keep])
        return cache[k]

    def monomial_table(self, subst: np.ndarray) -> np.ndarray:
        """Row ``i`` holds the coefficients of ``subst**exponents[i]`` (``subst`` vanishes at 0)."""
        table = np.zeros((self.size, self.size))
        table[0, 0] = 1.0
        for k in range(1, self.order + 1):
            s = self.degree_slice(k)
            pi, pj, pt = self._table_pairs(k)
            a = table[self.parent[s]]
            b = subst[self.parent_var[s]]
            rows = a.shape[0]
            w = a[:, pi] * b[:, pj]
            tgt = (np.arange(rows)[:, None] * self.size + pt[None, :]).ravel()
            table[s] = np.bincount(tgt, weights=w.ravel(), minlength=rows * self.size).reshape(rows, self.size)
        return table

    @staticmethod
    def compose_rows(rows: np.ndarray, table: np.ndarray) -> np.ndarray:
        # sequential sum over the monomial axis keeps truncations bit-identical
        return (rows[:, :, None] * table[None, :, :]).sum(axis=1)


@lru_cache(maxsize=None)
def layout(dim: int, order: int) -> Layout:
    return Layout(dim, order)


def num_monomials(dim: int, order: int) -> int:
    return comb(order + dim, dim)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class TruncatedSeries:
    """Real power series in ``dim`` variables modulo terms of degree > ``order``."""

    __slots__ = ("dim", "order", "coeffs")
    __hash__ = None  # type: ignore[assignment]

    def __init__(self, dim: int, order: int, coeffs=None):
        lay = layout(dim, order)
        if coeffs is None:
            coeffs = np.zeros(lay.size)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (lay.size,):
            raise StructuralError(f"expected {lay.size} coefficients, got shape {coeffs.shape}")
        self.dim = dim
        self.order = order
        self.coeffs = _frozen(coeffs)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, order: int) -> TruncatedSeries:
        return cls(dim, order)

    @classmethod
    def constant(cls, dim: int, order: int, value: float) -> TruncatedSeries:
        c = np.zeros(layout(dim, order).size)
        c[0] = value
        return cls(dim, order, c)

    @classmethod
    def variable(cls, dim: int, order: int, var: int) -> TruncatedSeries:
        e = [0] * dim
        e[var] = 1
        return cls.monomial(dim, order, e)

    @classmethod
    def monomial(cls, dim: int, order: int, exponents: Sequence[int], coeff: float = 1.0) -> TruncatedSeries:
        return cls.from_terms(dim, order, {tuple(exponents): coeff})

    @classmethod
    def from_terms(cls, dim: int, order: int, terms: Mapping[tuple, float]) -> TruncatedSeries:
        """Build from ``{exponent tuple: coefficient}``; terms above ``order`` are dropped."""
        lay = layout(dim, order)
        c = np.zeros(lay.size)
        for e, v in terms.items():
            e = tuple(int(p) for p in e)
            if len(e) != dim or min(e) < 0:
                raise StructuralError(f"bad exponent {e} for dim {dim}")
            if sum(e) <= order:
                c[lay.index[e]] += v
        return cls(dim, order, c)

    # -- basic structure ---------------------------------------------------

    @property
    def layout(self) -> Layout:
        return layout(self.dim, self.order)

    def _check(self, other: TruncatedSeries) -> None:
        if not isinstance(other, TruncatedSeries):
            raise StructuralError(f"expected TruncatedSeries, got {type(other).__name__}")
        if other.dim != self.dim or other.order != self.order:
            raise StructuralError(
                f"series mismatch: (dim {self.dim}, order {self.order}) vs (dim {other.dim}, order {other.order})"
            )

    def coefficient(self, exponents: Sequence[int]) -> float:
        e = tuple(exponents)
        if sum(e) > self.order:
            return 0.0
        return float(self.coeffs[self.layout.index[e]])

    def terms(self) -> Iterator[tuple[tuple[int, ...], float]]:
        lay = self.layout
        for i in np.flatnonzero(self.coeffs):
            yield tuple(int(p) for p in lay.exponents[i]), float(self.coeffs[i])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def truncate(self, order: int) -> TruncatedSeries:
        if order > self.order:
            raise StructuralError("truncate() cannot raise the order; use extend()")
        return TruncatedSeries(self.dim, order, self.coeffs[: layout(self.dim, order).size])

    def extend(self, order: int) -> TruncatedSeries:
        """Same polynomial viewed at a higher truncation order (zero-padded)."""
        c = np.zeros(layout(self.dim, order).size)
        c[: self.coeffs.size] = self.coeffs
        return TruncatedSeries(self.dim, order, c)

    def graded_piece(self, k: int) -> TruncatedSeries:
        c = np.zeros_like(self.coeffs)
        if 0 <= k <= self.order:
            s = self.layout.degree_slice(k)
            c[s] = self.coeffs[s]
        return TruncatedSeries(self.dim, self.order, c)

    def derivative(self, var: int) -> TruncatedSeries:
        return TruncatedSeries(self.dim, self.order, self.layout.diff_rows(self.coeffs, var))

    def valuation(self, tol: float = DEFAULT_TOL) -> int:
        return valuation(self, tol)

    def equal_within(self, other: TruncatedSeries, tol: float = DEFAULT_TOL) -> bool:
        self._check(other)
        scale = max(1.0, self.max_abs(), other.max_abs())
        return bool(np.all(np.abs(self.coeffs - other.coeffs) <= tol * scale))

    def compose(self, subst: Sequence[TruncatedSeries]) -> TruncatedSeries:
        return series_compose(self, subst)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = TruncatedSeries.constant(self.dim, self.order, other)
        return series_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.dim, self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return TruncatedSeries(self.dim, self.order, self.coeffs * float(other))
        if isinstance(other, TruncatedSeries):
            return series_mul(self, other)
        return NotImplemented

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other: float):
        return TruncatedSeries(self.dim, self.order, self.coeffs / float(other))

    def __pow__(self, n: int):
        if n < 0:
            raise DomainError("negative powers are not supported")
        out = TruncatedSeries.constant(self.dim, self.order, 1.0)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.dim == other.dim and self.order == other.order and np.array_equal(self.coeffs, other.coeffs)

    def to_string(self, names: Sequence[str] | None = None) -> str:
        names = names or default_names(self.dim)
        lay = self.layout
        parts = []
        for i in np.flatnonzero(self.coeffs):
            parts.append(f"{self.coeffs[i]:+.6g}*{lay.monomial_name(i, names)}")
        return " ".join(parts) if parts else "0"

    def __repr__(self):
        return f"TruncatedSeries(dim={self.dim}, order={self.order}, {self.to_string()})"


def default_names(dim: int) -> list[str]:
    if dim <= 3:
        return ["x", "y", "z"][:dim]
    return [f"x{i + 1}" for i in range(dim)]


def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    a._check(b)
    return TruncatedSeries(a.dim, a.order, a.coeffs + b.coeffs)


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    a._check(b)
    return TruncatedSeries(a.dim, a.order, a.layout.mul_rows(a.coeffs, b.coeffs)[0])


def series_compose(f: TruncatedSeries, subst: Sequence[TruncatedSeries]) -> TruncatedSeries:
    """``f(subst_1, ..., subst_d)`` truncated at the common order."""
    if len(subst) != f.dim:
        raise StructuralError(f"need {f.dim} substitutions, got {len(subst)}")
    for s in subst:
        if s.order != f.order:
            raise StructuralError("substitution order mismatch")
        if s.dim != subst[0].dim:
            raise StructuralError("substitutions live in different dimensions")
        if s.coeffs[0] != 0.0:
            raise DomainError("substitution has a nonzero constant term")
    target = layout(subst[0].dim, f.order)
    if subst[0].dim == f.dim:
        table = target.monomial_table(np.stack([s.coeffs for s in subst]))
    else:
        table = _rect_monomial_table(f.layout, target, np.stack([s.coeffs for s in subst]))
    return TruncatedSeries(subst[0].dim, f.order, Layout.compose_rows(f.coeffs[None, :], table)[0])


def _rect_monomial_table(src: Layout, target: Layout, subst: np.ndarray) -> np.ndarray:
    table = np.zeros((src.size, target.size))
    table[0, 0] = 1.0
    for k in range(1, src.order + 1):
        s = src.degree_slice(k)
        table[s] = target.mul_rows(table[src.parent[s]], subst[src.parent_var[s]])
    return table


def valuation(a: TruncatedSeries, tol: float = DEFAULT_TOL) -> int:
    """Lowest degree with a coefficient above ``tol`` (relative to max(1, scale)).

    Returns ``order + 1`` when every coefficient vanishes, standing for ">= N+1".
    """
    thresh = tol * max(1.0, a.max_abs())
    nz = np.flatnonzero(np.abs(a.coeffs) > thresh)
    if nz.size == 0:
        return a.order + 1
    return int(a.layout.degrees[nz[0]])


@dataclass(frozen=True)
class ScalarJet:
    """One-variable jet ``c0 + c1 t + ... + cN t^N``."""

    coeffs: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, s: TruncatedSeries) -> TruncatedSeries:
        """Evaluate on a series without constant term (Horner)."""
        if abs(s.coeffs[0]) > 0:
            raise DomainError("scalar jets are evaluated on series without constant term")
        out = TruncatedSeries.constant(s.dim, s.order, self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            out = out * s + c
        return out

    def compose(self, inner: ScalarJet) -> ScalarJet:
        """``self(inner(t))`` truncated at the smaller order."""
        n = min(self.order, inner.order)
        t_inner = TruncatedSeries(1, n, np.array(inner.coeffs[: n + 1]))
        if inner.coeffs[0] != 0.0:
            raise DomainError("inner jet must fix 0")
        return ScalarJet(tuple(float(c) for c in ScalarJet(self.coeffs[: n + 1])(t_inner).coeffs))

    def equal_within(self, other: ScalarJet, tol: float = DEFAULT_TOL) -> bool:
        n = min(self.order, other.order)
        a = np.array(self.coeffs[: n + 1])
        b = np.array(other.coeffs[: n + 1])
        scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        return bool(np.all(np.abs(a - b) <= tol * scale))


def scalar_jet_solve(lhs: TruncatedSeries, invariant: TruncatedSeries, tol: float = DEFAULT_TOL) -> ScalarJet:
    """Find ``g`` with ``g(invariant) == lhs`` degree by degree.

    The jet has order ``N // v`` where ``v`` is the valuation of ``invariant``.
    Raises :class:`NotAFunctionOfInvariant` at the first degree where the
    residual cannot be absorbed by a multiple of the next power.
    """
    lhs._check(invariant)
    v = valuation(invariant, tol)
    if v == 0 or v > invariant.order:
        raise DomainError("invariant must have positive finite valuation")
    lay = lhs.layout
    thresh = tol * max(1.0, lhs.max_abs(), invariant.max_abs())
    residual = lhs.coeffs.copy()
    coeffs = [float(residual[0])]
    residual[0] = 0.0
    power = TruncatedSeries.constant(lhs.dim, lhs.order, 1.0)
    checked = 0
    for n in range(1, lhs.order // v + 1):
        power = power * invariant
        deg = n * v
        for k in range(checked + 1, deg):
            bad = float(np.max(np.abs(residual[lay.degree_slice(k)])))
            if bad > thresh:
                raise NotAFunctionOfInvariant(k, bad)
        block = power.coeffs[lay.degree_slice(deg)]
        target = residual[lay.degree_slice(deg)]
        c = float(block @ target / (block @ block))
        bad = float(np.max(np.abs(target - c * block)))
        if bad > thresh:
            raise NotAFunctionOfInvariant(deg, bad)
        residual = residual - c * power.coeffs
        coeffs.append(c)
        checked = deg
    for k in range(checked + 1, lhs.order + 1):
        bad = float(np.max(np.abs(residual[lay.degree_slice(k)])))
        if bad > thresh:
            raise NotAFunctionOfInvariant(k, bad)
    return ScalarJet(tuple(coeffs))


def monomial_basis(dim: int, degree: int) -> Iterable[tuple[int, ...]]:
    """Exponent tuples of one total degree, in layout order."""
    return _exponents_of_degree(dim, degree)


def identity_substitution(dim: int, order: int) -> list[TruncatedSeries]:
    return [TruncatedSeries.variable(dim, order, i) for i in range(dim)]


__all__ = [
    "DEFAULT_ORDER",
    "DEFAULT_TOL",
    "Layout",
    "ScalarJet",
    "TruncatedSeries",
    "default_names",
    "identity_substitution",
    "layout",
    "monomial_basis",
    "num_monomials",
    "scalar_jet_solve",
    "series_add",
    "series_compose",
    "series_mul",
    "valuation",
]
