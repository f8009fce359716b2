"""Foliations around a circle or torus leaf with base-constant horizontal data.

A leaf foliation is given by one transverse field ``V_i`` per leaf direction,
standing for the horizontal generator ``d/dtheta_i + V_i``, together with the
vertical module ``T``.  Parallel transport around the i-th fundamental loop
is the time-1 flow of ``V_i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InconsistencyError, NotAConnection
from .geometry import FormalDiffeo, FormalVectorField, diffeo_compose, diffeo_invert, exp_field, lie_bracket
from .jets import TruncatedSeries
from .modules import FoliationModule, module_equal
from .symmetry import InnerCertificate, InnerFailure, inner_certificate, is_symmetry, out_class_invariant

REPORT_DIGITS = 8


class LeafKind(str, enum.Enum):
    CIRCLE = "circle"
    TORUS = "torus"

    @property
    def loops(self) -> int:
        return 1 if self is LeafKind.CIRCLE else 2


@dataclass(frozen=True, eq=False)
class LeafFoliation:
    leaf: LeafKind
    horizontal: tuple[FormalVectorField, ...]
    vertical: FoliationModule
    name: str | None = None

    @property
    def dim(self) -> int:
        return self.vertical.dim

    @property
    def order(self) -> int:
        return self.vertical.order


def _check_connection(leaf: LeafKind, vs: Sequence[FormalVectorField], module: FoliationModule) -> None:
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            res = module.membership(lie_bracket(vs[i], vs[j]))
            if not res:
                raise NotAConnection(
                    f"bracket of horizontal fields {i + 1} and {j + 1} leaves the module at degree {res.degree}",
                    bracket=(f"V{i + 1}", f"V{j + 1}"),
                    degree=res.degree,
                )
    for i, v in enumerate(vs):
        for j, w in enumerate(module.generators):
            res = module.membership(lie_bracket(v, w))
            if not res:
                raise NotAConnection(
                    f"bracket of horizontal field {i + 1} with generator {j + 1} leaves the module at degree {res.degree}",
                    bracket=(f"V{i + 1}", f"W{j + 1}"),
                    degree=res.degree,
                )


def build_leaf_foliation(
    leaf: LeafKind | str, fields: Sequence[FormalVectorField], module: FoliationModule, name: str | None = None
) -> LeafFoliation:
    """Assemble and verify the generators ``d/dtheta_i + V_i`` plus ``module``."""
    leaf = LeafKind(leaf)
    fields = tuple(fields)
    if len(fields) != leaf.loops:
        raise DomainError(f"a {leaf.value} leaf needs {leaf.loops} horizontal field(s), got {len(fields)}")
    for v in fields:
        if v.dim != module.dim or v.order != module.order:
            raise DomainError("horizontal field does not match the transverse module")
        if not v.vanishes_at_zero(module.tol):
            raise DomainError("horizontal fields must vanish on the leaf")
    _check_connection(leaf, fields, module)
    return LeafFoliation(leaf, fields, module, name)


def suspension(module: FoliationModule, v: FormalVectorField, name: str | None = None) -> LeafFoliation:
    """Circle leaf whose holonomy is ``exp(v)``."""
    return build_leaf_foliation(LeafKind.CIRCLE, [v], module, name)


def holonomy(lf: LeafFoliation, loop_index: int, turns: int = 1) -> FormalDiffeo:
    if not 1 <= loop_index <= lf.leaf.loops:
        raise DomainError(f"loop index {loop_index} out of range for a {lf.leaf.value} leaf")
    phi = exp_field(lf.horizontal[loop_index - 1] * float(turns), lf.vertical.tol)
    if not is_symmetry(lf.vertical, phi):
        raise InconsistencyError(f"holonomy around loop {loop_index} is not a symmetry of the module")
    return phi


@dataclass
class TorusTriple:
    phi: FormalDiffeo
    psi: FormalDiffeo
    kappa: FormalDiffeo
    kappa_tangent_order: int
    inner: InnerCertificate | InnerFailure


def torus_triple_check(lf: LeafFoliation, angle_window: int = 3) -> TorusTriple:
    """``kappa = psi o phi o psi^-1 o phi^-1`` and an inner certificate for it."""
    if lf.leaf is not LeafKind.TORUS:
        raise DomainError("torus triples need a torus leaf")
    phi = holonomy(lf, 1)
    psi = holonomy(lf, 2)
    kappa = diffeo_compose(diffeo_compose(psi, phi), diffeo_compose(diffeo_invert(psi), diffeo_invert(phi)))
    order = kappa.tangent_to_identity_order(lf.vertical.tol)
    return TorusTriple(phi, psi, kappa, order, inner_certificate(lf.vertical, kappa, angle_window))


def _quantize(c: float) -> float:
    q = float(f"{c:.{REPORT_DIGITS}g}")
    return 0.0 if q == 0 else q


@dataclass(frozen=True)
class LoopClass:
    """Outer-class data of one fundamental loop, rounded to a fixed grid."""

    loop: int
    trivial: bool
    stage: int | None = None
    reason: str | None = None
    fail_degree: int | None = None
    refuted: bool = False
    g: tuple[float, ...] | None = None
    sign: int | None = None


@dataclass(frozen=True)
class OuterHolonomyReport:
    """Class data only; presentation-dependent remarks live in :func:`closed_form_notes`."""

    loops: tuple[LoopClass, ...]

    def nontrivial(self) -> list[int]:
        return [c.loop for c in self.loops if not c.trivial]


def closed_form_notes(lf: LeafFoliation) -> dict[int, str]:
    """Flag where a one-variable flow ``t' = m t^p + ...`` puts its ``m^2`` term.

    The flow of ``m t^p d/dt`` is ``t + m t^p + (p/2) m^2 t^(2p-1) + ...``;
    a closed form with the square term at ``t^(2p)`` disagrees with it.
    These remarks describe the chosen horizontal fields, not the outer
    class, so they are kept out of :class:`OuterHolonomyReport`.
    """
    notes: dict[int, str] = {}
    if lf.dim != 1:
        return notes
    for i, v in enumerate(lf.horizontal, start=1):
        c = v.components[0]
        p = c.valuation(lf.vertical.tol)
        if p < 2 or 2 * p - 1 > lf.order:
            continue
        if any(abs(c.coefficient((k,))) > lf.vertical.tol for k in range(p + 1, 2 * p - 1)):
            continue
        m = c.coefficient((p,))
        sq = p / 2 * m * m
        notes[i] = (
            f"loop {i}: computed holonomy has {sq:.17g} t^{2 * p - 1} as its m^2 term; "
            f"a closed form t + m t^{p} + ({p}/2) m^2 t^{2 * p} would misplace it at t^{2 * p}"
        )
    return notes


def outer_holonomy_report(
    lf: LeafFoliation, invariant: TruncatedSeries | None = None, angle_window: int = 3
) -> OuterHolonomyReport:
    """Per-loop Out-class data: triviality via inner certificates, else g-jet and sign.

    Only class-level data enters the report (no residual norms or factor
    jets), rounded to ``REPORT_DIGITS`` significant digits, so that
    equivalent F-connections give identical reports.
    """
    classes = []
    for i in range(1, lf.leaf.loops + 1):
        phi = holonomy(lf, i)
        res = inner_certificate(lf.vertical, phi, angle_window)
        if res:
            classes.append(LoopClass(i, True))
            continue
        g = sign = None
        if invariant is not None:
            oc = out_class_invariant(lf.vertical, invariant, phi)
            g = tuple(_quantize(c) for c in oc.g.coeffs)
            sign = oc.sign
        classes.append(LoopClass(i, False, res.stage, res.reason, res.degree, res.refuted, g, sign))
    return OuterHolonomyReport(tuple(classes))


def field_redefinition(lf: LeafFoliation, lambdas: Sequence[FormalVectorField]) -> LeafFoliation:
    """Shift each ``V_i`` by a vertical ``lambda_i``; the generated foliation is unchanged."""
    lambdas = list(lambdas)
    if len(lambdas) != len(lf.horizontal):
        raise DomainError("one redefinition field per loop is required")
    for i, lam in enumerate(lambdas, start=1):
        res = lf.vertical.membership(lam)
        if not res:
            raise DomainError(f"not a vertical redefinition: lambda_{i} leaves the module at degree {res.degree}", degree=res.degree)
    new = build_leaf_foliation(lf.leaf, [v + lam for v, lam in zip(lf.horizontal, lambdas)], lf.vertical, lf.name)
    if not generated_module_equal(lf, new):
        raise InconsistencyError("field redefinition changed the generated foliation")
    return new


def generated_module_equal(a: LeafFoliation, b: LeafFoliation) -> bool:
    """Mutual membership of the generators ``d/dtheta_i + V_i`` and the vertical ones."""
    if a.leaf is not b.leaf or a.dim != b.dim or a.order != b.order:
        return False
    if not module_equal(a.vertical, b.vertical):
        return False
    for va, vb in zip(a.horizontal, b.horizontal):
        # d/dtheta_i + V'_i lies in the other module iff V'_i - V_i is vertical there
        if not a.vertical.contains(vb - va) or not b.vertical.contains(va - vb):
            return False
    return True


DISTINGUISHED = "distinguished"
INDISTINGUISHABLE = "indistinguishable-by-invariants"


def circle_class_compare(a: LeafFoliation, b: LeafFoliation, invariant: TruncatedSeries | None = None) -> str:
    """Compare the Out-class invariants of two circle-leaf foliations.

    Different invariants prove the foliations are not isomorphic; equal ones
    make no conjugacy claim.
    """
    if a.leaf is not LeafKind.CIRCLE or b.leaf is not LeafKind.CIRCLE:
        raise DomainError("circle_class_compare needs two circle leaves")
    if a.dim != b.dim or a.order != b.order or not module_equal(a.vertical, b.vertical):
        raise DomainError("the two foliations have different transverse modules")
    pa, pb = holonomy(a, 1), holonomy(b, 1)
    if invariant is None:
        sa = 1 if pa.determinant() > 0 else -1
        sb = 1 if pb.determinant() > 0 else -1
        return DISTINGUISHED if sa != sb else INDISTINGUISHABLE
    ca = out_class_invariant(a.vertical, invariant, pa)
    cb = out_class_invariant(b.vertical, invariant, pb)
    if ca.sign != cb.sign:
        return DISTINGUISHED
    ga, gb = np.array(ca.g.coeffs), np.array(cb.g.coeffs)
    scale = max(1.0, float(np.max(np.abs(ga))), float(np.max(np.abs(gb))))
    if np.max(np.abs(ga - gb)) > a.vertical.tol * scale:
        return DISTINGUISHED
    return INDISTINGUISHABLE


__all__ = [
    "DISTINGUISHED",
    "INDISTINGUISHABLE",
    "LeafFoliation",
    "LeafKind",
    "LoopClass",
    "OuterHolonomyReport",
    "TorusTriple",
    "build_leaf_foliation",
    "circle_class_compare",
    "closed_form_notes",
    "field_redefinition",
    "generated_module_equal",
    "holonomy",
    "outer_holonomy_report",
    "suspension",
    "torus_triple_check",
]
