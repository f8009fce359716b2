"""Order-by-order lifting of locally constant transition data on a finite nerve.

Transition data ``sigma_ab`` (one symmetry per double overlap, ``a < b``) is
a cocycle at level ``k`` when every triple composite
``sigma_ab o sigma_bc o sigma_ac^-1`` lies in ``exp`` of the module elements
vanishing to order ``k``.  A lift corrects ``sigma_ab -> sigma_ab o exp(theta_ab)``
so that the composites vanish to order ``k + 1``; the degree-``k`` equations
are linear in the graded coordinates of ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DefectEscape, DomainError, InconsistencyError
from .geometry import FormalDiffeo, FormalVectorField, diffeo_compose, diffeo_invert, exp_field, log_diffeo
from .jets import Layout, layout
from .modules import FoliationModule

Pair = tuple[int, int]
Triple = tuple[int, int, int]


@dataclass(frozen=True)
class Nerve:
    """Nerve of a finite cover; ``faces[t]`` lists ``(pair, sign)`` for triple ``t``."""

    name: str
    opens: tuple[str, ...]
    pairs: tuple[Pair, ...]
    triples: tuple[Triple, ...]

    def __post_init__(self):
        ps = set(self.pairs)
        for a, b in self.pairs:
            if not a < b:
                raise DomainError(f"pair {(a, b)} is not increasing")
        for t in self.triples:
            a, b, c = t
            if not a < b < c:
                raise DomainError(f"triple {t} is not increasing")
            for p in ((a, b), (b, c), (a, c)):
                if p not in ps:
                    raise DomainError(f"pair {p} of triple {t} is missing")

    def faces(self, t: Triple) -> tuple[tuple[Pair, int], ...]:
        a, b, c = t
        return (((b, c), 1), ((a, c), -1), ((a, b), 1))


def _torus_grid(n: int) -> Nerve:
    # open stars of the vertices of the n x n periodic grid, each square cut by its diagonal
    def v(i, j):
        return (i % n) * n + (j % n)

    edges, tris = set(), set()
    for i in range(n):
        for j in range(n):
            a, b, c, d = v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1)
            for e in ((a, b), (a, c), (a, d)):
                edges.add(tuple(sorted(e)))
            tris.add(tuple(sorted((a, b, d))))
            tris.add(tuple(sorted((a, c, d))))
    opens = tuple(f"U{i}{j}" for i in range(n) for j in range(n))
    return Nerve(f"torus{n}x{n}", opens, tuple(sorted(edges)), tuple(sorted(tris)))


def builtin_nerve(name: str) -> Nerve:
    """``circle3``: three arcs.  ``torus3x3``: open stars of the 3x3 triangulated torus."""
    if name == "circle3":
        return Nerve("circle3", ("U0", "U1", "U2"), ((0, 1), (0, 2), (1, 2)), ())
    if name == "torus3x3":
        return _torus_grid(3)
    raise DomainError(f"unknown nerve {name!r}", choices=["circle3", "torus3x3"])


@dataclass(eq=False)
class TransitionCocycle:
    nerve: Nerve
    module: FoliationModule
    level: int
    sigma: Mapping[Pair, FormalDiffeo]
    thetas: dict | None = field(default=None, repr=False)
    theta_norm: float = 0.0
    sigma_inv: dict = field(default_factory=dict, repr=False)
    _logs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.level < 2:
            raise DomainError("cocycle level must be at least 2")
        missing = [p for p in self.nerve.pairs if p not in self.sigma]
        if missing:
            raise DomainError(f"no transition map on pairs {missing}")
        self.sigma = {p: self.sigma[p] for p in self.nerve.pairs}
        for p, s in self.sigma.items():
            if s.dim != self.module.dim or s.order != self.module.order:
                raise DomainError(f"transition map on {p} does not match the module")

    def inverse(self, p: Pair) -> FormalDiffeo:
        if p not in self.sigma_inv:
            self.sigma_inv[p] = diffeo_invert(self.sigma[p])
        return self.sigma_inv[p]

    def composite(self, t: Triple) -> FormalDiffeo:
        a, b, c = t
        s = self.sigma
        return diffeo_compose(diffeo_compose(s[(a, b)], s[(b, c)]), self.inverse((a, c)))

    def composite_log(self, t: Triple) -> FormalVectorField:
        if t not in self._logs:
            comp = self.composite(t)
            if comp.tangent_to_identity_order(1e-7) < 2:
                raise DomainError(f"composite on triple {t} is not tangent to the identity", triple=t)
            self._logs[t] = log_diffeo(comp, max(self.module.tol, 1e-7))
        return self._logs[t]

    def check_triple(self, t: Triple) -> None:
        """Raise ``DefectEscape`` unless the composite lies in ``exp`` of level-k module elements."""
        tau = self.composite_log(t)
        v = tau.valuation(self.module.tol)
        if v < self.level:
            raise DefectEscape(
                f"composite on triple {t} vanishes only to order {v} < {self.level}",
                level=self.level,
                triple=t,
                degree=v,
            )
        res = self.module.membership(tau)
        if not res:
            raise DefectEscape(
                f"defect on triple {t} escapes the module at degree {res.degree}",
                level=self.level,
                triple=t,
                degree=res.degree,
                residual_norm=res.residual_norm,
            )

    def is_valid(self) -> bool:
        try:
            for t in self.nerve.triples:
                self.check_triple(t)
        except DefectEscape:
            return False
        return True


def _flat_piece(x: FormalVectorField, k: int) -> np.ndarray:
    s = layout(x.dim, x.order).degree_slice(k)
    return np.array(x.comps)[:, s].ravel()


def cocycle_defect(tc: TransitionCocycle) -> dict[Triple, FormalVectorField]:
    """Degree-``level`` part of ``log`` of each triple composite."""
    k = tc.level
    out = {}
    for t in tc.nerve.triples:
        tc.check_triple(t)
        out[t] = tc.composite_log(t).graded_piece(k)
    return out


def _action(module: FoliationModule, g: FormalDiffeo, k: int, parts: np.ndarray) -> np.ndarray:
    """Matrix of the linear part of ``g`` acting on the degree-k graded coordinates.

    For a linear map ``L`` the pushforward of a homogeneous field ``p`` is
    ``L p(L^-1 x)``, again homogeneous of degree ``k``.
    """
    lay = layout(module.dim, module.order)
    a = g.linear_part()
    table = FormalDiffeo.linear(np.linalg.inv(a), module.order).monomial_table()
    s = lay.degree_slice(k)
    width = s.stop - s.start
    r = parts.shape[1]
    comps = np.zeros((r * module.dim, lay.size))
    comps[:, s] = parts.T.reshape(r * module.dim, width)
    moved = Layout.compose_rows(comps, table)[:, s].reshape(r, module.dim, width)
    moved = np.einsum("ij,rjw->riw", a, moved).reshape(r, module.dim * width)
    return parts.T @ moved.T


@dataclass
class Obstruction:
    """Why a lift stopped: a non-coboundary defect, or a defect outside the module."""

    level: int
    kind: str
    message: str
    residual: dict = field(default_factory=dict)
    residual_norm: float = 0.0
    triple: Triple | None = None
    degree: int | None = None

    def __bool__(self) -> bool:
        return False


def lift_cocycle(tc: TransitionCocycle) -> TransitionCocycle | Obstruction:
    """Lift a level-k cocycle to level k+1 or return the obstruction 2-cochain.

    With ``g = sigma_ab``, ``f = sigma_ac`` and graded corrections
    ``alpha, beta, gamma`` on ``ab, bc, ac``, the new defect's degree-k part is
    ``tau + g.alpha + f.(beta - gamma)`` where ``.`` is the linear-part action.
    """
    module, k = tc.module, tc.level
    if k + 1 > module.order:
        raise DomainError(f"cannot lift beyond the truncation order {module.order}")
    defects = cocycle_defect(tc)
    fields, parts = module.graded_basis(k)
    r = len(fields)
    pairs = tc.nerve.pairs
    col = {p: i for i, p in enumerate(pairs)}
    triples = tc.nerve.triples
    if r == 0 or not triples:
        # nothing to correct at this degree; the verification below still applies
        thetas = {p: FormalVectorField.zero(module.dim, module.order) for p in pairs}
        theta_norm = 0.0
        rhs_norm = max((float(np.max(np.abs(_flat_piece(d, k)))) for d in defects.values()), default=0.0)
        if rhs_norm > module.tol:
            return Obstruction(k, "cohomological", "nonzero defect with no graded room", dict(defects), rhs_norm)
    else:
        a_mat = np.zeros((len(triples) * r, len(pairs) * r))
        b = np.zeros(len(triples) * r)
        actions = {}

        def act(p):
            if p not in actions:
                actions[p] = _action(module, tc.sigma[p], k, parts)
            return actions[p]

        for ti, t in enumerate(triples):
            a, bb, c = t
            rows = slice(ti * r, (ti + 1) * r)
            b[rows] = -(parts.T @ _flat_piece(defects[t], k))
            a_mat[rows, col[(a, bb)] * r : (col[(a, bb)] + 1) * r] += act((a, bb))
            a_mat[rows, col[(bb, c)] * r : (col[(bb, c)] + 1) * r] += act((a, c))
            a_mat[rows, col[(a, c)] * r : (col[(a, c)] + 1) * r] -= act((a, c))
        x, *_ = np.linalg.lstsq(a_mat, b, rcond=None)
        resid = a_mat @ x - b
        scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0)
        rnorm = float(np.max(np.abs(resid))) if resid.size else 0.0
        if rnorm > module.tol * scale * 10:
            residual = {}
            for ti, t in enumerate(triples):
                v = parts @ resid[ti * r : (ti + 1) * r]
                residual[t] = _unflatten_piece(module, v, k)
            return Obstruction(k, "cohomological", "defect is not a twisted coboundary", residual, rnorm)
        thetas = {}
        for p, i in col.items():
            coords = x[i * r : (i + 1) * r]
            z = FormalVectorField.zero(module.dim, module.order)
            for cj, fj in zip(coords, fields):
                if cj != 0.0:
                    z = z + fj * float(cj)
            thetas[p] = z
        theta_norm = float(np.max(np.abs(x))) if x.size else 0.0
    new_sigma, new_inv = {}, {}
    for p in pairs:
        if thetas[p].max_abs() == 0.0:
            new_sigma[p] = tc.sigma[p]
            if p in tc.sigma_inv:
                new_inv[p] = tc.sigma_inv[p]
        else:
            new_sigma[p] = diffeo_compose(tc.sigma[p], exp_field(thetas[p], module.tol))
            if p in tc.sigma_inv:
                new_inv[p] = diffeo_compose(exp_field(-thetas[p], module.tol), tc.sigma_inv[p])
    lifted = TransitionCocycle(tc.nerve, module, k + 1, new_sigma, thetas, theta_norm, new_inv)
    for t in triples:
        try:
            lifted.check_triple(t)
        except DefectEscape as e:
            raise InconsistencyError(f"lifted cocycle fails verification at level {k + 1}: {e.message}", **e.details)
    return lifted


def _unflatten_piece(module: FoliationModule, v: np.ndarray, k: int) -> FormalVectorField:
    lay = layout(module.dim, module.order)
    comps = np.zeros((module.dim, lay.size))
    comps[:, lay.degree_slice(k)] = v.reshape(module.dim, -1)
    return FormalVectorField(module.dim, module.order, comps)


@dataclass
class LevelLog:
    level: int
    defect_norm: float
    theta_norm: float


@dataclass
class LiftResult:
    cocycle: TransitionCocycle
    log: list[LevelLog]
    stopped: Obstruction | None = None

    @property
    def success(self) -> bool:
        return self.stopped is None


def _escape(tc: TransitionCocycle, e: DefectEscape) -> Obstruction:
    d = e.details
    return Obstruction(tc.level, "defect-escape", e.message, residual_norm=d.get("residual_norm", 0.0), triple=d.get("triple"), degree=d.get("degree"))


def lift_to_order(tc: TransitionCocycle, target_k: int) -> LiftResult:
    """Lift repeatedly until ``target_k``; stop at the first obstruction or escape."""
    if target_k > tc.module.order - 1:
        raise DomainError(f"target level {target_k} exceeds order - 1 = {tc.module.order - 1}")
    log: list[LevelLog] = []
    cur = tc
    while cur.level < target_k:
        try:
            defects = cocycle_defect(cur)
        except DefectEscape as e:
            return LiftResult(cur, log, _escape(cur, e))
        dnorm = max((d.max_abs() for d in defects.values()), default=0.0)
        nxt = lift_cocycle(cur)
        if isinstance(nxt, Obstruction):
            log.append(LevelLog(cur.level, dnorm, float("nan")))
            return LiftResult(cur, log, nxt)
        log.append(LevelLog(cur.level, dnorm, nxt.theta_norm))
        cur = nxt
    if not log or cur.level == target_k:
        try:
            for t in cur.nerve.triples:
                cur.check_triple(t)
        except DefectEscape as e:
            return LiftResult(cur, log, _escape(cur, e))
    return LiftResult(cur, log)


def identity_cocycle(nerve: Nerve, module: FoliationModule, level: int = 2) -> TransitionCocycle:
    ident = FormalDiffeo.identity(module.dim, module.order)
    return TransitionCocycle(nerve, module, level, {p: ident for p in nerve.pairs})


def coboundary_cocycle(nerve: Nerve, module: FoliationModule, zs, level: int = 2) -> TransitionCocycle:
    """``sigma_ab = exp(Z_a) o exp(-Z_b)`` from a 0-cochain of module elements."""
    gs = [exp_field(z, module.tol) for z in zs]
    inv = [exp_field(-z, module.tol) for z in zs]
    sigma = {(a, b): diffeo_compose(gs[a], inv[b]) for a, b in nerve.pairs}
    sigma_inv = {(a, b): diffeo_compose(gs[b], inv[a]) for a, b in nerve.pairs}
    return TransitionCocycle(nerve, module, level, sigma, sigma_inv=sigma_inv)


__all__ = [
    "LevelLog",
    "LiftResult",
    "Nerve",
    "Obstruction",
    "TransitionCocycle",
    "builtin_nerve",
    "coboundary_cocycle",
    "cocycle_defect",
    "identity_cocycle",
    "lift_cocycle",
    "lift_to_order",
]
