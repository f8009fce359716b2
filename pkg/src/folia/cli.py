"""``folia`` command line: evaluate definitions, run one analysis, print JSON."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report
from .cech import TransitionCocycle, builtin_nerve, lift_to_order
from .dsl import Namespace, prelude
from .errors import DomainError, FoliaError
from .geometry import FormalDiffeo, FormalVectorField, exp_field, lie_bracket, log_diffeo
from .jets import DEFAULT_ORDER, DEFAULT_TOL, TruncatedSeries
from .leaves import closed_form_notes, field_redefinition, generated_module_equal, holonomy, outer_holonomy_report, torus_triple_check
from .symmetry import DEFAULT_ANGLE_WINDOW, inner_certificate, inner_geq_k_test, is_symmetry, out_class_invariant

COMMANDS = (
    "bracket",
    "exp",
    "log",
    "member",
    "sym",
    "inner",
    "inner-geq-k",
    "out-class",
    "holonomy",
    "torus-triple",
    "outer-holonomy",
    "redefine",
    "lift-cocycle",
    "dims",
    "paper-suite",
)


class UsageError(FoliaError):
    code = "usage"


@dataclass(frozen=True)
class SessionConfig:
    order: int = DEFAULT_ORDER
    tol: float = DEFAULT_TOL
    angle_window: int = DEFAULT_ANGLE_WINDOW
    output: str | None = None

    def __post_init__(self):
        if not 2 <= self.order <= 16:
            raise UsageError(f"order must be between 2 and 16, got {self.order}")
        if not self.tol > 0:
            raise UsageError(f"tolerance must be positive, got {self.tol}")
        if self.angle_window < 0:
            raise UsageError("angle window must be non-negative")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--defs", help="definition file loaded on top of the built-in prelude")
    common.add_argument("--order", type=int, default=DEFAULT_ORDER, help="truncation order N (2..16)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative tolerance")
    common.add_argument("--json", dest="output", help="write the report here instead of stdout")
    common.add_argument("--angle-window", type=int, default=DEFAULT_ANGLE_WINDOW)
    common.add_argument("--vars", help="comma-separated variables for free expressions")

    p = _Parser(prog="folia", description="Finite-jet analysis of singular foliations around a leaf.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    c = cmd("bracket", "Lie bracket of two fields")
    c.add_argument("--field", action="append", required=True)
    c = cmd("exp", "time-one flow of a field")
    c.add_argument("--field", required=True)
    c = cmd("log", "logarithm of a tangent-to-identity diffeomorphism")
    c.add_argument("--diffeo", required=True)
    c = cmd("member", "module membership")
    c.add_argument("--module", required=True)
    c.add_argument("--field", required=True)
    c.add_argument("--min-coeff-valuation", type=int, default=0)
    c = cmd("sym", "two-sided symmetry test")
    c.add_argument("--module", required=True)
    c.add_argument("--diffeo", required=True)
    c = cmd("inner", "inner-symmetry certificate search")
    c.add_argument("--module", required=True)
    c.add_argument("--diffeo", required=True)
    c = cmd("inner-geq-k", "complete test for the filtered inner group")
    c.add_argument("--module", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--diffeo", required=True)
    c = cmd("out-class", "outer class data from a first integral")
    c.add_argument("--module", required=True)
    c.add_argument("--invariant", required=True)
    c.add_argument("--diffeo", required=True)
    c = cmd("holonomy", "holonomy around a fundamental loop")
    c.add_argument("--leaf", required=True)
    c.add_argument("--loop", type=int, default=1)
    c.add_argument("--turns", type=int, default=1)
    c = cmd("torus-triple", "commutator of the two torus holonomies")
    c.add_argument("--leaf", required=True)
    c = cmd("outer-holonomy", "outer class of every loop")
    c.add_argument("--leaf", required=True)
    c.add_argument("--invariant")
    c = cmd("redefine", "field redefinition by vertical fields")
    c.add_argument("--leaf", required=True)
    c.add_argument("--lambda", dest="lambdas", action="append", required=True)
    c.add_argument("--invariant")
    c = cmd("lift-cocycle", "order-by-order lifting of transition data")
    c.add_argument("--module", required=True)
    c.add_argument("--nerve", default="torus3x3", choices=["circle3", "torus3x3"])
    c.add_argument("--sigma", action="append", default=[], help="A,B=DIFFEO for the pair (A,B); others are the identity")
    c.add_argument("--level", type=int, default=2)
    c.add_argument("--target", type=int)
    c = cmd("dims", "graded dimensions and linear-part algebra of a module")
    c.add_argument("--module", required=True)
    c = cmd("paper-suite", "run the worked-example battery")
    c.add_argument("--check", help="golden JSON file to compare against")
    return p


# -- helpers ---------------------------------------------------------------


def _namespace(args, cfg: SessionConfig) -> Namespace:
    ns = prelude(cfg.order, cfg.tol)
    if args.defs:
        try:
            text = Path(args.defs).read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read definitions: {e}") from None
        ns = Namespace(cfg.order, cfg.tol, parent=ns).load(text)
    return ns


def _vars(args):
    return tuple(v.strip() for v in args.vars.split(",")) if args.vars else None


def _value(ns: Namespace, text: str, kind: str, names=None):
    (v,), names = _values(ns, [text], kind, names)
    return v, names


def _values(ns: Namespace, texts, kind: str, names=None):
    vs, names = ns.expressions(texts, names)
    for v, text in zip(vs, texts):
        got = "series" if isinstance(v, TruncatedSeries) else "diffeo" if isinstance(v, FormalDiffeo) else "field"
        if got != kind:
            raise DomainError(f"expected a {kind}, got a {got}: {text!r}")
    return vs, names


def certificate_json(res, names) -> dict:
    if res:
        return {
            "found": True,
            "angle_turns": res.angle_turns,
            "factors": [report.field_json(z, names) for z in res.factors],
        }
    return {"found": False, "stage": res.stage, "reason": res.reason, "refuted": res.refuted, "degree": res.degree}


def outer_json(rep) -> dict:
    loops = []
    for c in rep.loops:
        loops.append(
            {
                "loop": c.loop,
                "trivial": c.trivial,
                "stage": c.stage,
                "reason": c.reason,
                "fail_degree": c.fail_degree,
                "refuted": c.refuted,
                "g": list(c.g) if c.g is not None else None,
                "sign": c.sign,
            }
        )
    return {"loops": loops}


def membership_json(res, names) -> dict:
    if res:
        return {"member": True, "coefficients": [report.series_json(f, names) for f in res.coefficients]}
    return {"member": False, "fail_degree": res.degree, "residual": report.field_json(res.residual, names)}


def _pair(spec: str):
    try:
        lhs, expr = spec.split("=", 1)
        a, b = (int(v) for v in lhs.split(","))
    except ValueError:
        raise UsageError(f"--sigma expects A,B=DIFFEO, got {spec!r}") from None
    return (min(a, b), max(a, b)), expr, a > b


# -- commands --------------------------------------------------------------


def run_command(args, cfg: SessionConfig) -> dict:
    cmd = args.command
    if cmd == "paper-suite":
        from .suite import paper_suite

        return paper_suite(cfg.order, cfg.tol)
    ns = _namespace(args, cfg)
    fixed = _vars(args)

    if cmd == "bracket":
        if len(args.field) != 2:
            raise UsageError("bracket needs exactly two --field options")
        (x, y), names = _values(ns, args.field, "field", fixed)
        return {"inputs": {"fields": args.field}, "bracket": report.field_json(lie_bracket(x, y), names)}
    if cmd == "exp":
        x, names = _value(ns, args.field, "field", fixed)
        return {"inputs": {"field": args.field}, "diffeo": report.diffeo_json(exp_field(x, cfg.tol), names)}
    if cmd == "log":
        p, names = _value(ns, args.diffeo, "diffeo", fixed)
        return {"inputs": {"diffeo": args.diffeo}, "field": report.field_json(log_diffeo(p, max(cfg.tol, 1e-7)), names)}
    if cmd in ("member", "sym", "inner", "inner-geq-k", "out-class", "dims", "lift-cocycle"):
        mobj = ns.get(args.module, "module")
        mod, names = mobj.value, mobj.names
        inputs = {"module": args.module}
        if cmd == "member":
            x, _ = _value(ns, args.field, "field", names)
            inputs["field"] = args.field
            return {"inputs": inputs, **membership_json(mod.membership(x, args.min_coeff_valuation), names)}
        if cmd == "dims":
            return {
                "inputs": inputs,
                "degree_dimensions": mod.degree_dimensions(),
                "linear_part_algebra": [report.matrix_json(a) for a in mod.linear_part_algebra()],
            }
        if cmd == "lift-cocycle":
            nerve = builtin_nerve(args.nerve)
            ident = FormalDiffeo.identity(mod.dim, mod.order)
            sigma = {p: ident for p in nerve.pairs}
            for spec in args.sigma:
                pair, expr, flipped = _pair(spec)
                if pair not in sigma:
                    raise DomainError(f"pair {pair} is not an overlap of {args.nerve}")
                d, _ = _value(ns, expr, "diffeo", names)
                sigma[pair] = d.inverse() if flipped else d
            target = args.target if args.target is not None else mod.order - 1
            res = lift_to_order(TransitionCocycle(nerve, mod, args.level, sigma), target)
            inputs.update(nerve=args.nerve, sigma=args.sigma, level=args.level, target=target)
            return {"inputs": inputs, **lift_json(res)}
        p, _ = _value(ns, args.diffeo, "diffeo", names)
        inputs["diffeo"] = args.diffeo
        if cmd == "sym":
            rep = is_symmetry(mod, p)
            return {
                "inputs": inputs,
                "is_symmetry": rep.is_symmetry,
                "forward_fail_degrees": [None if r else r.degree for r in rep.forward],
                "backward_fail_degrees": [None if r else r.degree for r in rep.backward],
            }
        if cmd == "inner":
            return {"inputs": inputs, "inner_certificate": certificate_json(inner_certificate(mod, p, cfg.angle_window), names)}
        if cmd == "inner-geq-k":
            res = inner_geq_k_test(mod, args.k, p)
            inputs["k"] = args.k
            return {
                "inputs": inputs,
                "passed": res.passed,
                "obstruction_degree": res.obstruction_degree,
                "log": report.field_json(res.log, names),
            }
        inv, _ = _value(ns, args.invariant, "series", names)
        inputs["invariant"] = args.invariant
        oc = out_class_invariant(mod, inv, p)
        return {"inputs": inputs, "g": report.jet_json(oc.g), "sign": oc.sign}

    lobj = ns.get(args.leaf, "leaf")
    lf, names = lobj.value, lobj.names
    inputs = {"leaf": args.leaf}
    if cmd == "holonomy":
        inputs.update(loop=args.loop, turns=args.turns)
        return {
            "inputs": inputs,
            "diffeo": report.diffeo_json(holonomy(lf, args.loop, args.turns), names),
            "notes": [closed_form_notes(lf)[args.loop]] if args.turns == 1 and args.loop in closed_form_notes(lf) else [],
        }
    if cmd == "torus-triple":
        tt = torus_triple_check(lf, cfg.angle_window)
        return {
            "inputs": inputs,
            "phi": report.diffeo_json(tt.phi, names),
            "psi": report.diffeo_json(tt.psi, names),
            "kappa": report.diffeo_json(tt.kappa, names),
            "kappa_tangent_order": tt.kappa_tangent_order,
            "inner_certificate": certificate_json(tt.inner, names),
        }
    inv = None
    if args.invariant:
        inv, _ = _value(ns, args.invariant, "series", names)
        inputs["invariant"] = args.invariant
    if cmd == "outer-holonomy":
        rep = outer_holonomy_report(lf, inv, cfg.angle_window)
        return {"inputs": inputs, **outer_json(rep), "notes": list(closed_form_notes(lf).values())}
    if cmd == "redefine":
        lams = [_value(ns, s, "field", names)[0] for s in args.lambdas]
        inputs["lambdas"] = args.lambdas
        new = field_redefinition(lf, lams)
        before = outer_holonomy_report(lf, inv, cfg.angle_window)
        after = outer_holonomy_report(new, inv, cfg.angle_window)
        return {
            "inputs": inputs,
            "module_equal": generated_module_equal(lf, new),
            "outer_identical": before == after,
            "outer_before": outer_json(before),
            "outer_after": outer_json(after),
        }
    raise UsageError(f"unknown command {cmd!r}")


def lift_json(res) -> dict:
    out = {
        "success": res.success,
        "final_level": res.cocycle.level,
        "levels": [{"level": e.level, "defect_norm": e.defect_norm, "theta_norm": e.theta_norm} for e in res.log],
    }
    if res.stopped is not None:
        ob = res.stopped
        out["obstruction"] = {
            "kind": ob.kind,
            "level": ob.level,
            "message": ob.message,
            "triple": list(ob.triple) if ob.triple else None,
            "degree": ob.degree,
            "residual_norm": ob.residual_norm,
        }
    return out


def error_json(e: Exception) -> dict:
    if isinstance(e, FoliaError):
        details = {k: (list(v) if isinstance(v, tuple) else v) for k, v in e.details.items()}
        return {"error": {"code": e.code, "message": e.message, "details": details}}
    return {"error": {"code": "internal", "message": f"{type(e).__name__}: {e}", "details": {}}}


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    path = None
    try:
        args = build_parser().parse_args(argv)
        path = args.output
        cfg = SessionConfig(args.order, args.tol, args.angle_window, args.output)
        result = {"command": args.command, "config": {"order": cfg.order, "tol": cfg.tol, "angle_window": cfg.angle_window}}
        result.update(run_command(args, cfg))
        if args.command == "paper-suite" and args.check:
            golden = Path(args.check).read_text(encoding="utf-8")
            text = report.dumps(result)
            _emit(text, path)
            if text != golden:
                _emit(report.dumps({"error": {"code": "golden-mismatch", "message": f"output differs from {args.check}", "details": {}}}), None)
                return 1
            return 0
        _emit(report.dumps(result), path)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except Exception as e:  # every failure becomes a JSON error object
        _emit(report.dumps(error_json(e)), path)
        return 2


if __name__ == "__main__":
    sys.exit(main())
