"""Finitely generated modules of formal vector fields.

Membership ``X = sum_j f_j V_j`` is a linear problem in the coefficients of
the ``f_j``.  Equations are ordered by total degree, and the equations of
degree <= k only involve coefficient pieces of degree <= k - val(V_j), so
truncating the system at degree ``k`` gives an exact sub-problem.  The first
failing degree is the smallest ``k`` whose truncated system is inconsistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InconsistencyError, StructuralError
from .geometry import FormalVectorField, lie_bracket
from .jets import DEFAULT_TOL, TruncatedSeries, layout

RANK_RTOL = 1e-7


@dataclass
class MembershipCertificate:
    """Coefficients ``f_j`` with ``X = sum f_j V_j`` through the module order."""

    coefficients: list[TruncatedSeries]
    residuals: list[float]
    tol: float = DEFAULT_TOL

    member = True

    @property
    def valid(self) -> bool:
        return all(r <= self.tol for r in self.residuals)

    def __bool__(self) -> bool:
        return True


@dataclass
class MembershipFailure:
    """First degree where ``X`` leaves the module, with the unexplained part there."""

    degree: int
    residual: FormalVectorField
    residual_norm: float
    residuals: list[float] = field(default_factory=list)

    member = False

    def __bool__(self) -> bool:
        return False


@dataclass
class _Solver:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    cols: np.ndarray
    nrows: int

    @property
    def rank(self) -> int:
        return self.s.size


class FoliationModule:
    """Module ``<V_1, ..., V_m>`` over formal functions, truncated at ``order``.

    Generators must vanish at 0.  Unless ``check_closure`` is false, every
    pairwise bracket is verified to lie in the module at construction.
    """

    def __init__(
        self,
        generators: Sequence[FormalVectorField],
        dim: int | None = None,
        order: int | None = None,
        tol: float = DEFAULT_TOL,
        check_closure: bool = True,
        name: str | None = None,
    ):
        generators = list(generators)
        if generators:
            dim = generators[0].dim if dim is None else dim
            order = generators[0].order if order is None else order
        if dim is None or order is None:
            raise StructuralError("an empty module needs explicit dim and order")
        for g in generators:
            if g.dim != dim or g.order != order:
                raise StructuralError("generators must share dimension and order")
            if not g.vanishes_at_zero(tol):
                raise DomainError("module generators must vanish at 0")
        self.dim = dim
        self.order = order
        self.tol = tol
        self.name = name
        self.generators = tuple(generators)
        self._solvers: dict = {}
        self._graded: dict = {}
        self._build_columns()
        if check_closure:
            self._check_closure()

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<FoliationModule{label} dim={self.dim} order={self.order} generators={len(self.generators)}>"

    # -- linear system -----------------------------------------------------

    def _build_columns(self) -> None:
        lay = layout(self.dim, self.order)
        d, n = self.dim, self.order
        # rows ordered by (degree, component, monomial): degree <= k is a prefix
        perm = []
        self._row_ends = []
        for k in range(n + 1):
            s = lay.degree_slice(k)
            for i in range(d):
                perm.extend(i * lay.size + np.arange(s.start, s.stop))
            self._row_ends.append(len(perm))
        self._perm = np.array(perm, dtype=np.int64)

        cols, meta = [], []
        self._gen_vals = []
        for j, g in enumerate(self.generators):
            v = g.valuation(self.tol)
            self._gen_vals.append(v)
            for b in range(lay.upto(n - v)):
                mono = np.zeros(lay.size)
                mono[b] = 1.0
                prod = lay.mul_rows(np.repeat(mono[None, :], d, axis=0), np.array(g.comps))
                cols.append(prod.ravel()[self._perm])
                meta.append((j, b, int(lay.degrees[b]), v))
        self._matrix = np.array(cols).T if cols else np.zeros((len(perm), 0))
        self._col_gen = np.array([m[0] for m in meta], dtype=np.int64)
        self._col_mono = np.array([m[1] for m in meta], dtype=np.int64)
        self._col_deg = np.array([m[2] for m in meta], dtype=np.int64)
        self._col_low = np.array([m[2] + m[3] for m in meta], dtype=np.int64)

    def _rows_upto(self, k: int) -> int:
        return self._row_ends[k] if k >= 0 else 0

    def _solver(self, k: int, min_vals: tuple[int, ...]) -> _Solver:
        key = (k, min_vals)
        if key not in self._solvers:
            keep = self._col_low <= k
            if self._col_gen.size:
                keep &= self._col_deg >= np.array(min_vals)[self._col_gen]
            cols = np.flatnonzero(keep)
            nrows = self._rows_upto(k)
            a = self._matrix[:nrows][:, cols]
            if a.size:
                u, s, vt = np.linalg.svd(a, full_matrices=False)
                r = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
                u, s, vt = u[:, :r], s[:r], vt[:r]
            else:
                u, s, vt = np.zeros((nrows, 0)), np.zeros(0), np.zeros((0, cols.size))
            self._solvers[key] = _Solver(u, s, vt, cols, nrows)
        return self._solvers[key]

    def _flatten(self, x: FormalVectorField) -> np.ndarray:
        return np.array(x.comps).ravel()[self._perm]

    def _unflatten(self, vec: np.ndarray) -> FormalVectorField:
        lay = layout(self.dim, self.order)
        flat = np.zeros(self.dim * lay.size)
        flat[self._perm[: vec.size]] = vec
        return FormalVectorField(self.dim, self.order, flat.reshape(self.dim, lay.size))

    def _solve(self, k: int, min_vals: tuple[int, ...], b: np.ndarray):
        sv = self._solver(k, min_vals)
        rhs = b[: sv.nrows]
        proj = sv.u.T @ rhs
        resid = rhs - sv.u @ proj
        coeffs = sv.vt.T @ (proj / sv.s) if sv.rank else np.zeros(sv.cols.size)
        return sv, coeffs, resid

    def _degree_residuals(self, resid: np.ndarray, upto: int) -> list[float]:
        out = []
        for k in range(upto + 1):
            block = resid[self._rows_upto(k - 1) : self._rows_upto(k)]
            out.append(float(np.max(np.abs(block))) if block.size else 0.0)
        return out

    def _min_vals(self, min_coeff_valuation: int | Sequence[int]) -> tuple[int, ...]:
        if isinstance(min_coeff_valuation, int):
            return (min_coeff_valuation,) * len(self.generators)
        return tuple(int(v) for v in min_coeff_valuation)

    # -- public queries ----------------------------------------------------

    def membership(self, x: FormalVectorField, min_coeff_valuation: int | Sequence[int] = 0):
        """Decide ``x in self``; returns a certificate or a failure value.

        ``min_coeff_valuation`` (one int, or one per generator) forces the
        coefficient series ``f_j`` to vanish to that order.
        """
        if x.dim != self.dim or x.order != self.order:
            raise StructuralError("field/module mismatch")
        min_vals = self._min_vals(min_coeff_valuation)
        b = self._flatten(x)
        thresh = self.tol * max(1.0, x.max_abs())

        def ok(k):
            _, _, resid = self._solve(k, min_vals, b)
            return not resid.size or float(np.max(np.abs(resid))) <= thresh

        n = self.order
        sv, coeffs, resid = self._solve(n, min_vals, b)
        if not resid.size or float(np.max(np.abs(resid))) <= thresh:
            return self._certificate(sv, coeffs, resid, thresh)
        lo, hi = 0, n  # ok(lo) holds (degree-0 rows are absent for vanishing x), ok(hi) fails
        if not ok(lo):
            hi = lo
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                lo = mid
            else:
                hi = mid
        _, _, resid = self._solve(hi, min_vals, b)
        piece = np.zeros_like(resid)
        start = self._rows_upto(hi - 1)
        piece[start:] = resid[start:]
        residual = self._unflatten(piece)
        return MembershipFailure(
            degree=hi,
            residual=residual,
            residual_norm=float(np.max(np.abs(piece))),
            residuals=self._degree_residuals(resid, hi),
        )

    def _certificate(self, sv: _Solver, coeffs: np.ndarray, resid: np.ndarray, thresh: float) -> MembershipCertificate:
        lay = layout(self.dim, self.order)
        fs = [np.zeros(lay.size) for _ in self.generators]
        for c, col in zip(coeffs, sv.cols):
            fs[self._col_gen[col]][self._col_mono[col]] += c
        return MembershipCertificate(
            coefficients=[TruncatedSeries(self.dim, self.order, f) for f in fs],
            residuals=self._degree_residuals(resid, self.order),
            tol=thresh,
        )

    def contains(self, x: FormalVectorField) -> bool:
        return bool(self.membership(x))

    def filtration_membership(self, k: int, x: FormalVectorField, strict: bool = False):
        """Membership in the sub-module of elements vanishing to order >= k.

        An element of the module that happens to vanish to order k already
        lies in the filtration, so the default is plain membership.  With
        ``strict`` each product ``f_j V_j`` must vanish to order k on its own.
        """
        if x.valuation(self.tol) < k:
            raise DomainError(f"field has valuation {x.valuation(self.tol)} < {k}")
        if strict:
            return self.membership(x, [max(0, k - v) for v in self._gen_vals])
        return self.membership(x)

    def degree_dimensions(self) -> list[int]:
        """Entry ``k`` is the dimension of (elements vanishing to order k) mod (order k+1)."""
        zero = (0,) * len(self.generators)
        ranks = [self._solver(k, zero).rank for k in range(self.order + 1)]
        return [ranks[0]] + [ranks[k] - ranks[k - 1] for k in range(1, self.order + 1)]

    def graded_basis(self, k: int) -> tuple[list[FormalVectorField], np.ndarray]:
        """Module elements of valuation >= k whose degree-k parts are orthonormal.

        Returns the elements (full jets) and the matrix whose columns are their
        degree-k parts, flattened component-major.
        """
        if k in self._graded:
            return self._graded[k]
        lay = layout(self.dim, self.order)
        cols = np.flatnonzero(self._col_low <= k)
        lo_rows = self._rows_upto(k - 1)
        a_low = self._matrix[:lo_rows][:, cols]
        a_k = self._matrix[lo_rows : self._rows_upto(k)][:, cols]
        if cols.size == 0:
            basis = ([], np.zeros((a_k.shape[0], 0)))
        else:
            if a_low.shape[0]:
                _, s, vt = np.linalg.svd(a_low, full_matrices=True)
                r = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
                null = vt[r:].T
            else:
                null = np.eye(cols.size)
            y = a_k @ null
            if y.size:
                u, s, wt = np.linalg.svd(y, full_matrices=False)
                r = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
            else:
                r = 0
            if r == 0:
                basis = ([], np.zeros((a_k.shape[0], 0)))
            else:
                coeff = null @ wt[:r].T / s[:r]
                full = self._matrix[:, cols] @ coeff
                full[: self._rows_upto(k - 1)] = 0.0
                fields = [self._unflatten(full[:, i]) for i in range(r)]
                # degree-k parts in component-major layout
                s_k = lay.degree_slice(k)
                parts = np.stack([np.array(f.comps)[:, s_k].ravel() for f in fields], axis=1)
                basis = (fields, parts)
        self._graded[k] = basis
        return basis

    def linear_part_algebra(self) -> list[np.ndarray]:
        """Basis of the linear parts of module elements, taken from the generators."""
        basis: list[np.ndarray] = []
        flat: list[np.ndarray] = []
        for g in self.generators:
            a = g.linear_part()
            cand = np.array(flat + [a.ravel()])
            s = np.linalg.svd(cand, compute_uv=False)
            if s[0] > 0 and np.sum(s > RANK_RTOL * s[0]) == len(flat) + 1:
                basis.append(a)
                flat.append(a.ravel())
        if flat:
            q, _ = np.linalg.qr(np.array(flat).T)
            scale = max(1.0, max(float(np.max(np.abs(b))) for b in basis))
            for a in basis:
                for b in basis:
                    c = (a @ b - b @ a).ravel()
                    resid = c - q @ (q.T @ c)
                    if np.max(np.abs(resid)) > self.tol * scale**2 * 10:
                        raise InconsistencyError("linear parts are not closed under commutator")
        return basis

    def _check_closure(self) -> None:
        gens = self.generators
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                res = self.membership(lie_bracket(gens[i], gens[j]))
                if not res:
                    raise InconsistencyError(
                        f"bracket of generators {i} and {j} leaves the module at degree {res.degree}",
                        pair=(i, j),
                        degree=res.degree,
                    )


def membership(module: FoliationModule, x: FormalVectorField, min_coeff_valuation: int = 0):
    return module.membership(x, min_coeff_valuation)


def filtration_membership(module: FoliationModule, k: int, x: FormalVectorField, strict: bool = False):
    return module.filtration_membership(k, x, strict)


def degree_dimensions(module: FoliationModule) -> list[int]:
    return module.degree_dimensions()


def linear_part_algebra(module: FoliationModule) -> list[np.ndarray]:
    return module.linear_part_algebra()


def module_equal(f: FoliationModule, g: FoliationModule) -> bool:
    """Mutual inclusion of generated modules."""
    if f.dim != g.dim or f.order != g.order:
        raise StructuralError("modules live in different jet spaces")
    return all(g.contains(v) for v in f.generators) and all(f.contains(v) for v in g.generators)


__all__ = [
    "FoliationModule",
    "MembershipCertificate",
    "MembershipFailure",
    "degree_dimensions",
    "filtration_membership",
    "linear_part_algebra",
    "membership",
    "module_equal",
]
