"""Jet-level tests for symmetries, inner symmetries and outer classes of a module."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm, logm, polar

from .errors import DomainError, UnsupportedError
from .geometry import FormalDiffeo, FormalVectorField, diffeo_compose, diffeo_invert, exp_field, lie_bracket, log_diffeo, pushforward
from .jets import ScalarJet, TruncatedSeries, scalar_jet_solve
from .modules import RANK_RTOL, FoliationModule, MembershipCertificate, MembershipFailure

DEFAULT_ANGLE_WINDOW = 3


@dataclass
class SymmetryReport:
    """Per-generator membership outcomes for ``phi_* V_j`` and ``(phi^-1)_* V_j``."""

    forward: list
    backward: list

    @property
    def is_symmetry(self) -> bool:
        return all(self.forward) and all(self.backward)

    def __bool__(self) -> bool:
        return self.is_symmetry

    def fail_degrees(self) -> list[int | None]:
        return [None if r else r.degree for r in self.forward + self.backward]


def is_symmetry(module: FoliationModule, phi: FormalDiffeo) -> SymmetryReport:
    inv = diffeo_invert(phi)
    fwd = [module.membership(pushforward(phi, v, module.tol)) for v in module.generators]
    bwd = [module.membership(pushforward(inv, v, module.tol)) for v in module.generators]
    return SymmetryReport(fwd, bwd)


def is_infinitesimal_symmetry(module: FoliationModule, x: FormalVectorField) -> bool:
    if not x.vanishes_at_zero(module.tol):
        raise DomainError("infinitesimal symmetries must vanish at 0")
    return all(module.contains(lie_bracket(x, v)) for v in module.generators)


@dataclass
class InnerCertificate:
    """``exp(Z_1) o ... o exp(Z_r) == phi`` with every ``Z_i`` in the module."""

    factors: list[FormalVectorField]
    memberships: list[MembershipCertificate]
    recompose_error: float
    angle_turns: int = 0

    found = True

    def __bool__(self) -> bool:
        return True


@dataclass
class InnerFailure:
    stage: int
    reason: str
    refuted: bool = False
    degree: int | None = None
    log: FormalVectorField | None = None
    membership: MembershipFailure | None = None

    found = False

    def __bool__(self) -> bool:
        return False


def _linear_generators(module: FoliationModule) -> tuple[list[int], list[np.ndarray]]:
    idx, mats, flat = [], [], []
    for j, g in enumerate(module.generators):
        a = g.linear_part()
        cand = np.array(flat + [a.ravel()])
        s = np.linalg.svd(cand, compute_uv=False)
        if s[0] > 0 and np.sum(s > RANK_RTOL * s[0]) == len(flat) + 1:
            idx.append(j)
            mats.append(a)
            flat.append(a.ravel())
    return idx, mats


def _span_coords(mats: list[np.ndarray], target: np.ndarray, tol: float) -> np.ndarray | None:
    basis = np.array([m.ravel() for m in mats]).T
    c, *_ = np.linalg.lstsq(basis, target.ravel(), rcond=None)
    if np.max(np.abs(basis @ c - target.ravel())) > tol * max(1.0, float(np.max(np.abs(target)))):
        return None
    return c


def _rotation_type(b: np.ndarray, tol: float) -> tuple[float, np.ndarray] | None:
    """``(omega, v)`` when ``b`` is semisimple with eigenvalues in ``{0, +-i omega}``."""
    w, vecs = np.linalg.eig(b)
    if np.max(np.abs(w.real)) > tol:
        return None
    pos = [i for i in range(w.size) if w[i].imag > tol]
    if not pos:
        return None
    omega = float(w[pos[0]].imag)
    if any(abs(w[i].imag - omega) > 1e-6 * omega for i in pos):
        return None
    return omega, vecs[:, pos[0]]


def _phase(a: np.ndarray, v: np.ndarray) -> float:
    return cmath.phase(np.vdot(v, a @ v) / np.vdot(v, v))


def _orthogonal_log(r: np.ndarray) -> np.ndarray | None:
    if r.shape == (2, 2):
        ang = math.atan2(r[1, 0], r[0, 0])
        return np.array([[0.0, -ang], [ang, 0.0]])
    lr = logm(r)
    if np.max(np.abs(np.imag(lr))) >= 1e-7:
        return None
    return np.real(lr)


def _linear_solutions(mats: list[np.ndarray], a: np.ndarray, window: int, tol: float):
    """Candidate factorisations ``a = expm(L_1) ... expm(L_p)`` with ``L_i`` in the span."""
    d = a.shape[0]
    check = 1e-7
    if not mats:
        if np.allclose(a, np.eye(d), atol=check):
            yield [], 0
        return
    if len(mats) == 1:
        b = mats[0]
        rt = _rotation_type(b, 1e-10 * max(1.0, float(np.max(np.abs(b)))))
        if rt is not None:
            omega, v = rt
            s0 = _phase(a, v) / omega
            for n in sorted(range(-window, window + 1), key=lambda n: (abs(n), -n)):
                s = s0 + 2 * math.pi * n / omega
                if np.allclose(expm(s * b), a, atol=check):
                    yield [[s]], n
            return
    ell = logm(a)
    if np.max(np.abs(np.imag(ell))) < check:
        c = _span_coords(mats, np.real(ell), check)
        if c is not None:
            yield [c], 0
            return
    # two factors from the polar decomposition a = R P
    r, p = polar(a)
    w, q = np.linalg.eigh(p)
    if np.min(w) <= 0:
        return
    lp = (q * np.log(w)) @ q.T
    lr = _orthogonal_log(r)
    if lr is None:
        return
    cr = _span_coords(mats, lr, check)
    cp = _span_coords(mats, lp, check)
    if cr is not None and cp is not None:
        yield [cr, cp], 0


def inner_certificate(
    module: FoliationModule, phi: FormalDiffeo, angle_window: int = DEFAULT_ANGLE_WINDOW
) -> InnerCertificate | InnerFailure:
    """Search for ``phi`` as a product of exponentials of module elements.

    Stage 1 matches the linear part with exponentials of the linear-part
    algebra (enumerating ``2 pi n`` shifts for rotation-type algebras);
    stage 2 requires the logarithm of the remaining tangent-to-identity
    factor to lie in the module.  A stage-1 failure on a non-positive
    determinant is a refutation; other failures only mean no certificate of
    this shape was found.
    """
    tol = module.tol
    a = phi.linear_part()
    if np.linalg.det(a) <= 0:
        return InnerFailure(1, "linear part not in exp of linear algebra", refuted=True)
    gens, mats = _linear_generators(module)
    first_failure = None
    any_linear = False
    for coeff_list, turns in _linear_solutions(mats, a, angle_window, tol):
        any_linear = True
        factors = []
        for c in coeff_list:
            z = FormalVectorField.zero(module.dim, module.order)
            for cj, j in zip(c, gens):
                z = z + module.generators[j] * float(cj)
            factors.append(z)
        rest = phi
        for z in factors:
            rest = diffeo_compose(exp_field(-z, tol), rest)
        z_last = log_diffeo(rest, max(tol, 1e-7))
        res = module.membership(z_last)
        if not res:
            if first_failure is None:
                first_failure = InnerFailure(2, "no certificate found", degree=res.degree, log=z_last, membership=res)
            continue
        factors.append(z_last)
        memberships = [module.membership(z) for z in factors]
        if not all(memberships):
            continue
        total = FormalDiffeo.identity(module.dim, module.order)
        for z in factors:
            total = diffeo_compose(total, exp_field(z, tol))
        err = float(np.max(np.abs(total.comps - phi.comps)))
        return InnerCertificate(factors, memberships, err, turns)
    if not any_linear:
        return InnerFailure(1, "linear part not in exp of linear algebra")
    return first_failure


@dataclass
class FilteredInnerResult:
    passed: bool
    obstruction_degree: int | None
    log: FormalVectorField
    membership: MembershipCertificate | MembershipFailure | None = None

    def __bool__(self) -> bool:
        return self.passed


def inner_geq_k_test(module: FoliationModule, k: int, phi: FormalDiffeo) -> FilteredInnerResult:
    """Complete test for ``phi in exp((module)_{>=k})``: its logarithm must lie there."""
    if k < 2:
        raise DomainError("filtered inner test needs k >= 2")
    z = log_diffeo(phi, max(module.tol, 1e-7))
    v = z.valuation(module.tol)
    if v < k:
        return FilteredInnerResult(False, v, z)
    res = module.filtration_membership(k, z)
    if res:
        return FilteredInnerResult(True, None, z, res)
    return FilteredInnerResult(False, res.degree, z, res)


@dataclass(frozen=True)
class OutClass:
    g: ScalarJet
    sign: int


def check_first_integral(module: FoliationModule, invariant: TruncatedSeries) -> None:
    for j, v in enumerate(module.generators):
        val = v.apply(invariant)
        if val.max_abs() > module.tol * max(1.0, invariant.max_abs()):
            raise DomainError(f"invariant is not annihilated by generator {j}")


def out_class_invariant(module: FoliationModule, invariant: TruncatedSeries, phi: FormalDiffeo) -> OutClass:
    """``(g, sign)`` with ``phi^* invariant = g(invariant)`` and ``sign = sign det D phi(0)``."""
    check_first_integral(module, invariant)
    g = scalar_jet_solve(phi.pullback(invariant), invariant, module.tol)
    return OutClass(g, 1 if phi.determinant() > 0 else -1)


def winding_number(module: FoliationModule, path: Sequence[FormalDiffeo]) -> int:
    """Turns swept by the linear parts of a closed path of inner symmetries.

    Only rotation-type one-dimensional linear algebras are supported; the
    orientation is that of the first generator carrying a linear part.
    """
    _, mats = _linear_generators(module)
    if len(mats) != 1:
        raise UnsupportedError("winding numbers need a one-dimensional linear algebra")
    rt = _rotation_type(mats[0], 1e-10 * max(1.0, float(np.max(np.abs(mats[0])))))
    if rt is None:
        raise UnsupportedError("linear algebra is not of rotation type")
    _, v = rt
    eye = np.eye(module.dim)
    if not path:
        raise DomainError("empty path")
    if not np.allclose(path[0].linear_part(), eye, atol=1e-7):
        raise DomainError("path must start at the identity")
    if not np.allclose(path[-1].linear_part(), eye, atol=1e-7):
        raise DomainError("path must end at the identity for an integer winding number")
    total = 0.0
    prev = 0.0
    for p in path[1:]:
        ph = _phase(p.linear_part(), v)
        step = (ph - prev + math.pi) % (2 * math.pi) - math.pi
        if abs(step) >= math.pi / 2:
            raise DomainError("path too coarse")
        total += step
        prev = ph
    return int(round(total / (2 * math.pi)))


__all__ = [
    "DEFAULT_ANGLE_WINDOW",
    "FilteredInnerResult",
    "InnerCertificate",
    "InnerFailure",
    "OutClass",
    "SymmetryReport",
    "check_first_integral",
    "inner_certificate",
    "inner_geq_k_test",
    "is_infinitesimal_symmetry",
    "is_symmetry",
    "out_class_invariant",
    "winding_number",
]
