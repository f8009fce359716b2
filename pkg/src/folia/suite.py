"""Battery of worked examples behind ``folia paper-suite``.

Everything here is deterministic (fixed seeds, fixed sample counts) so the
JSON report can be compared byte for byte against a golden file.
"""

from __future__ import annotations

import math

import numpy as np

from . import report
from .cech import TransitionCocycle, builtin_nerve, coboundary_cocycle, cocycle_defect, identity_cocycle, lift_to_order
from .dsl import prelude
from .geometry import FormalDiffeo, FormalVectorField, diffeo_compose, exp_field
from .jets import DEFAULT_ORDER, DEFAULT_TOL, TruncatedSeries, layout
from .leaves import (
    circle_class_compare,
    closed_form_notes,
    field_redefinition,
    generated_module_equal,
    holonomy,
    outer_holonomy_report,
    torus_triple_check,
)
from .symmetry import inner_certificate, inner_geq_k_test, is_symmetry, out_class_invariant, winding_number


def _jet(g, n=6):
    return [report.number(c) for c in g.coeffs[:n]]


def circles_tower(ns) -> dict:
    circles = ns.get("circles", "module").value
    r2 = ns.get("r2", "series").value
    out = {}
    for name in ("rotation07", "reflection", "radial", "shear"):
        phi = ns.get(name, "diffeo").value
        sym = is_symmetry(circles, phi)
        entry = {"is_symmetry": sym.is_symmetry}
        if sym:
            cert = inner_certificate(circles, phi)
            entry["inner_found"] = bool(cert)
            if not cert:
                entry.update(stage=cert.stage, reason=cert.reason, refuted=cert.refuted, degree=cert.degree)
            oc = out_class_invariant(circles, r2, phi)
            entry["g"] = _jet(oc.g)
            entry["sign"] = oc.sign
        out[name] = entry
    return out


def circles_vs_spirals(ns) -> dict:
    names = ("x", "y")
    circles = ns.get("circles", "module").value
    spirals = ns.get("spirals", "module").value
    rot = ns.get("rot", "field").value
    out = {}
    flow_c = exp_field(2 * math.pi * rot, circles.tol)
    res = inner_geq_k_test(circles, 2, flow_c)
    ident = FormalDiffeo.identity(2, circles.order)
    out["circles"] = {
        "passed": res.passed,
        "flow_is_identity": bool(np.max(np.abs(flow_c.comps - ident.comps)) < 1e-8),
    }
    gen = spirals.generators[0]
    res = inner_geq_k_test(spirals, 2, exp_field(2 * math.pi * gen, spirals.tol))
    cubic = res.log.graded_piece(3)
    out["spirals"] = {
        "passed": res.passed,
        "obstruction_degree": res.obstruction_degree,
        "leading_coefficient": report.number(cubic.components[0].coefficient((3, 0))),
        "log_cubic_part": report.field_json(cubic, names),
    }
    return out


def torus_example(ns) -> dict:
    ext = ns.get("ext", "leaf").value
    names = ("t",)
    tt = torus_triple_check(ext)
    rep = outer_holonomy_report(ext)
    return {
        "holonomy_loop1": report.diffeo_json(holonomy(ext, 1), names),
        "holonomy_loop2": report.diffeo_json(holonomy(ext, 2), names),
        "kappa_tangent_order": tt.kappa_tangent_order,
        "kappa_inner_found": bool(tt.inner),
        "outer_nontrivial_loops": rep.nontrivial(),
        "outer_fail_degrees": [c.fail_degree for c in rep.loops],
        "notes": list(closed_form_notes(ext).values()),
    }


def redefinitions(ns) -> dict:
    ext = ns.get("ext", "leaf").value
    t = TruncatedSeries.variable(1, ext.order, 0)
    lam = [FormalVectorField.from_components([t**10]), FormalVectorField.zero(1, ext.order)]
    new = field_redefinition(ext, lam)
    susp = ns.get("susp_radial", "leaf").value
    x = TruncatedSeries.variable(2, susp.order, 0)
    r2 = ns.get("r2", "series").value
    rot = ns.get("rot", "field").value
    new_s = field_redefinition(susp, [(x * x) * rot])
    return {
        "torus": {
            "module_equal": generated_module_equal(ext, new),
            "outer_identical": outer_holonomy_report(ext) == outer_holonomy_report(new),
        },
        "circle_suspension": {
            "module_equal": generated_module_equal(susp, new_s),
            "outer_identical": outer_holonomy_report(susp, r2) == outer_holonomy_report(new_s, r2),
        },
    }


def windings(ns) -> dict:
    circles = ns.get("circles", "module").value
    rot = ns.get("rot", "field").value
    lin = rot.truncate(1).extend(circles.order)

    def kappa(n, samples=64):
        return [exp_field((2 * math.pi * n * s / (samples - 1)) * lin, circles.tol) for s in range(samples)]

    out = {str(n): winding_number(circles, kappa(n)) for n in range(-2, 3)}
    out["concat_1_-1"] = winding_number(circles, kappa(1) + kappa(-1)[1:])
    return out


def cech(ns, order: int) -> dict:
    circles = ns.get("circles", "module").value
    r2 = ns.get("r2", "series").value
    rot = ns.get("rot", "field").value
    eul = ns.get("eul", "field").value
    nerve = builtin_nerve("torus3x3")
    target = order - 1
    out = {"nerve": {"opens": len(nerve.opens), "pairs": len(nerve.pairs), "triples": len(nerve.triples)}}
    res = lift_to_order(identity_cocycle(nerve, circles), target)
    out["identity"] = {"success": res.success, "final_level": res.cocycle.level, "all_theta_zero": all(e.theta_norm == 0 for e in res.log)}
    rng = np.random.default_rng(0)
    lay = layout(2, order)
    zs = []
    for _ in nerve.opens:
        c = rng.normal(size=lay.size) * 0.3
        c[:1] = 0.0
        zs.append(TruncatedSeries(2, order, c) * rot)
    res = lift_to_order(coboundary_cocycle(nerve, circles, zs), target)
    out["exact"] = {"success": res.success, "final_level": res.cocycle.level}
    ident = FormalDiffeo.identity(2, order)
    sigma = {p: ident for p in nerve.pairs}
    sigma[(0, 1)] = exp_field(0.37 * r2 * rot, circles.tol)
    tc = TransitionCocycle(nerve, circles, 3, sigma)
    defects = cocycle_defect(tc)
    hit = sorted(t for t, v in defects.items() if v.max_abs() > 1e-8)
    res = lift_to_order(tc, target)
    out["perturbed_pair"] = {
        "defect_triples": [list(t) for t in hit],
        "defect_coefficients": [report.number(defects[t].max_abs()) for t in hit],
        "success": res.success,
        "final_level": res.cocycle.level,
    }
    sigma = dict(sigma)
    sigma[(0, 1)] = exp_field(0.37 * r2 * eul, circles.tol)
    res = lift_to_order(TransitionCocycle(nerve, circles, 2, sigma), target)
    ob = res.stopped
    out["defect_escape"] = {
        "success": res.success,
        "kind": None if ob is None else ob.kind,
        "level": None if ob is None else ob.level,
        "degree": None if ob is None else ob.degree,
        "triple": None if ob is None or ob.triple is None else list(ob.triple),
    }
    return out


def outis(ns) -> dict:
    allf = ns.get("allfields", "module").value
    n = allf.order
    rng = np.random.default_rng(1)
    x = TruncatedSeries.variable(2, n, 0)
    y = TruncatedSeries.variable(2, n, 1)
    found, refuted = [], []
    for i in range(6):
        m = rng.normal(size=(2, 2))
        if (np.linalg.det(m) > 0) != (i < 3):
            m[0] *= -1
        z = FormalVectorField.from_components([rng.normal() * x * y, rng.normal() * y**3])
        phi = diffeo_compose(FormalDiffeo.linear(m, n), exp_field(z, allf.tol))
        cert = inner_certificate(allf, phi)
        (found if i < 3 else refuted).append(bool(cert) if i < 3 else bool(not cert and cert.refuted))
    return {"positive_det_certified": found, "negative_det_refuted": refuted}


def s1_classes(ns) -> dict:
    r2 = ns.get("r2", "series").value
    a = ns.get("susp_rot1", "leaf").value
    b = ns.get("susp_rot2", "leaf").value
    triv = ns.get("trivial_circle", "leaf").value
    rad = ns.get("susp_radial", "leaf").value
    return {
        "rotations": circle_class_compare(a, b, r2),
        "t_vs_t_plus_2t2": circle_class_compare(triv, rad, r2),
        "same": circle_class_compare(rad, rad, r2),
    }


def modules(ns) -> dict:
    names = ("x", "y")
    circles = ns.get("circles", "module").value
    spirals = ns.get("spirals", "module").value
    allf = ns.get("allfields", "module").value
    eul = ns.get("eul", "field").value
    r2 = ns.get("r2", "series").value
    res = circles.membership(eul)
    res2 = spirals.membership(2 * math.pi * r2 * eul, 1)
    return {
        "degree_dimensions": {
            "circles": circles.degree_dimensions(),
            "spirals": spirals.degree_dimensions(),
            "allfields": allf.degree_dimensions(),
        },
        "linear_part_algebra": {
            "circles": [report.matrix_json(a) for a in circles.linear_part_algebra()],
            "allfields_dim": len(allf.linear_part_algebra()),
        },
        "euler_in_circles": {"member": bool(res), "fail_degree": None if res else res.degree},
        "radial_in_spirals_vanishing_coeffs": {"member": bool(res2), "fail_degree": None if res2 else res2.degree},
        "r2_rot_in_circles": report.series_json(circles.membership(r2 * circles.generators[0]).coefficients[0], names),
    }


def paper_suite(order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL) -> dict:
    ns = prelude(order, tol)
    return {
        "examples": {
            "modules": modules(ns),
            "circles_tower": circles_tower(ns),
            "circles_vs_spirals": circles_vs_spirals(ns),
            "torus_example": torus_example(ns),
            "field_redefinition": redefinitions(ns),
            "winding": windings(ns),
            "cech_lifting": cech(ns, order),
            "positive_determinant": outis(ns),
            "circle_classes": s1_classes(ns),
        }
    }
