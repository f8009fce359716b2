"""Definition language for series, fields, diffeomorphisms, modules and leaves.

Grammar (EBNF; see docs/grammar.md)::

    file     = { stmt } ;
    stmt     = "vars" IDENT { "," IDENT }
             | ( "series" | "field" | "diffeo" ) IDENT "=" expr
             | "module" IDENT "=" "[" [ expr { "," expr } ] "]"
             | "leaf" IDENT "=" leafexpr ;
    leafexpr = "torus" "(" expr "," expr ";" [ "module" ] IDENT ")"
             | "circle" "(" expr ";" [ "module" ] IDENT ")" ;
    expr     = term { ( "+" | "-" ) term } ;
    term     = unary { [ "*" | "/" ] unary } ;      (juxtaposition multiplies)
    unary    = ( "-" | "+" ) unary | power ;
    power    = atom [ "^" INT ] ;
    atom     = NUMBER | "pi" | IDENT | IDENT "(" expr { "," expr } ")"
             | "(" expr { "," expr } ")" ;

``d<var>`` names the coordinate field of a declared variable; a parenthesised
list of series is a diffeomorphism.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, FoliaError, ParseError, StructuralError
from .geometry import FormalDiffeo, FormalVectorField, diffeo_compose, diffeo_invert, exp_field, log_diffeo
from .jets import DEFAULT_ORDER, DEFAULT_TOL, TruncatedSeries
from .leaves import LeafFoliation, build_leaf_foliation
from .modules import FoliationModule

KEYWORDS = {"vars", "series", "field", "diffeo", "module", "leaf", "torus", "circle", "pi"}
FUNCTIONS = {"sin", "cos", "sqrt", "exp", "log", "inv", "compose"}

Pos = tuple[int, int]


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Pi:
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    ident: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Tuple:
    items: tuple
    pos: Pos = field(default=(0, 0), compare=False)


Expr = Union[Num, Pi, Name, Call, Neg, BinOp, Pow, Tuple]


@dataclass(frozen=True)
class VarsStmt:
    names: tuple[str, ...]
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Def:
    kind: str
    name: str
    expr: Expr
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    generators: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class LeafDef:
    name: str
    leaf: str
    fields: tuple
    module: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class DefinitionFile:
    statements: tuple


# -- lexer -----------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<num>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\],;=])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "num":
            out.append(Token("num", m.group(), line, col))
        elif kind == "ident":
            word = m.group()
            out.append(Token("kw" if word in KEYWORDS and word != "pi" else "ident", word, line, col))
        elif kind == "op":
            out.append(Token("op", m.group(), line, col))
        i = m.end()
    out.append(Token("eof", "", line, i - line_start + 1))
    return out


# -- parser ----------------------------------------------------------------


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{msg}, found {found}", tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> Token | None:
        if self.tok.kind in ("op", "kw") and self.tok.text == text:
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            raise self.error(f"expected {text!r}")
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected a name")
        return self.advance()

    # statements

    def parse_file(self) -> DefinitionFile:
        stmts = []
        while self.tok.kind != "eof":
            stmts.append(self.statement())
        return DefinitionFile(tuple(stmts))

    def statement(self):
        t = self.tok
        pos = (t.line, t.col)
        if self.accept("vars"):
            names = [self.ident().text]
            while self.accept(","):
                names.append(self.ident().text)
            return VarsStmt(tuple(names), pos)
        for kind in ("series", "field", "diffeo"):
            if self.accept(kind):
                name = self.ident().text
                self.expect("=")
                return Def(kind, name, self.expr(), pos)
        if self.accept("module"):
            name = self.ident().text
            self.expect("=")
            self.expect("[")
            gens = []
            if not self.accept("]"):
                gens.append(self.expr())
                while self.accept(","):
                    gens.append(self.expr())
                self.expect("]")
            return ModuleDef(name, tuple(gens), pos)
        if self.accept("leaf"):
            name = self.ident().text
            self.expect("=")
            if self.accept("torus"):
                self.expect("(")
                f1 = self.expr()
                self.expect(",")
                f2 = self.expr()
                fields = (f1, f2)
                leaf = "torus"
            elif self.accept("circle"):
                self.expect("(")
                fields = (self.expr(),)
                leaf = "circle"
            else:
                raise self.error("expected 'torus' or 'circle'")
            self.expect(";")
            self.accept("module")
            mod = self.ident().text
            self.expect(")")
            return LeafDef(name, leaf, fields, mod, pos)
        raise self.error("expected a statement (vars, series, field, diffeo, module, leaf)")

    # expressions

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            left = BinOp(op.text, left, self.term(), (op.line, op.col))
        return left

    def _starts_atom(self) -> bool:
        t = self.tok
        return t.kind in ("num", "ident") or (t.kind == "op" and t.text == "(")

    def term(self):
        left = self.unary()
        while True:
            t = self.tok
            if t.kind == "op" and t.text in "*/":
                self.advance()
                left = BinOp(t.text, left, self.unary(), (t.line, t.col))
            elif self._starts_atom():
                left = BinOp("*", left, self.unary(), (t.line, t.col))
            else:
                return left

    def unary(self):
        t = self.tok
        if t.kind == "op" and t.text == "-":
            self.advance()
            return Neg(self.unary(), (t.line, t.col))
        if t.kind == "op" and t.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        t = self.tok
        if self.accept("^"):
            e = self.tok
            if e.kind != "num" or not e.text.isdigit():
                raise self.error("expected a non-negative integer exponent")
            self.advance()
            return Pow(base, int(e.text), (t.line, t.col))
        return base

    def atom(self):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), pos)
        if t.kind == "ident":
            self.advance()
            if t.text == "pi":
                return Pi(pos)
            if self.tok.kind == "op" and self.tok.text == "(" and t.text in FUNCTIONS:
                self.advance()
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), pos)
            return Name(t.text, pos)
        if self.accept("("):
            items = [self.expr()]
            while self.accept(","):
                items.append(self.expr())
            self.expect(")")
            return items[0] if len(items) == 1 else Tuple(tuple(items), pos)
        raise self.error("expected an expression")


def parse_definition(text: str) -> DefinitionFile:
    return Parser(text).parse_file()


def parse_expression(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return e


# -- pretty printer --------------------------------------------------------


def format_expr(e) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.operand)})"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Pow):
        base = format_expr(e.base)
        return f"({base})^{e.exponent}" if isinstance(e.base, Pow) else f"{base}^{e.exponent}"
    if isinstance(e, Tuple):
        return f"({', '.join(format_expr(a) for a in e.items)})"
    raise TypeError(f"not an expression node: {e!r}")


def format_statement(s) -> str:
    if isinstance(s, VarsStmt):
        return "vars " + ", ".join(s.names)
    if isinstance(s, Def):
        return f"{s.kind} {s.name} = {format_expr(s.expr)}"
    if isinstance(s, ModuleDef):
        return f"module {s.name} = [{', '.join(format_expr(g) for g in s.generators)}]"
    if isinstance(s, LeafDef):
        return f"leaf {s.name} = {s.leaf}({', '.join(format_expr(f) for f in s.fields)}; module {s.module})"
    raise TypeError(f"not a statement: {s!r}")


def format_definition(d: DefinitionFile) -> str:
    return "".join(format_statement(s) + "\n" for s in d.statements)


# -- evaluation ------------------------------------------------------------


def _identifiers(e, out: set) -> None:
    if isinstance(e, Name):
        out.add(e.ident)
    elif isinstance(e, Call):
        for a in e.args:
            _identifiers(a, out)
    elif isinstance(e, Neg):
        _identifiers(e.operand, out)
    elif isinstance(e, BinOp):
        _identifiers(e.left, out)
        _identifiers(e.right, out)
    elif isinstance(e, Pow):
        _identifiers(e.base, out)
    elif isinstance(e, Tuple):
        for a in e.items:
            _identifiers(a, out)


def infer_variables(exprs: Sequence, known: set[str] = frozenset()) -> tuple[str, ...]:
    """Alphabetical variables of free expressions; ``dv`` counts as the field of ``v``."""
    ids: set = set()
    for e in exprs:
        _identifiers(e, ids)
    ids -= set(known)
    names = set()
    for i in ids:
        if len(i) > 1 and i.startswith("d"):
            names.add(i[1:])
        else:
            names.add(i)
    return tuple(sorted(names))


@dataclass
class Obj:
    kind: str  # series, field, diffeo, module, leaf
    value: object
    names: tuple[str, ...]


class Namespace:
    """Evaluated definitions at a fixed truncation order and tolerance."""

    def __init__(self, order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, parent: Namespace | None = None):
        self.order = order
        self.tol = tol
        self.parent = parent
        self.objects: dict[str, Obj] = {}

    def lookup(self, name: str) -> Obj | None:
        if name in self.objects:
            return self.objects[name]
        return self.parent.lookup(name) if self.parent else None

    def load(self, text: str) -> Namespace:
        self.run(parse_definition(text))
        return self

    def run(self, d: DefinitionFile) -> None:
        names: tuple[str, ...] | None = None
        pending = list(d.statements)
        for idx, s in enumerate(pending):
            if isinstance(s, VarsStmt):
                if len(set(s.names)) != len(s.names):
                    raise ParseError("repeated variable name", *s.pos)
                names = s.names
                continue
            if names is None:
                # infer from the statements up to the next vars declaration
                block = []
                for t in pending[idx:]:
                    if isinstance(t, VarsStmt):
                        break
                    block.extend(_stmt_exprs(t))
                defined = {t.name for t in pending if not isinstance(t, VarsStmt)}
                names = infer_variables(block, defined | self._all_names())
                if not names:
                    raise ParseError("cannot infer variables; add a 'vars' declaration", *s.pos)
            if s.name in self.objects:
                raise ParseError(f"{s.name!r} is already defined", *s.pos)
            self.objects[s.name] = self._eval_stmt(s, names)

    def _all_names(self) -> set[str]:
        out = set(self.objects)
        if self.parent:
            out |= self.parent._all_names()
        return out

    def _eval_stmt(self, s, names) -> Obj:
        try:
            if isinstance(s, Def):
                v = self.evaluate(s.expr, names)
                kind = _kind_of(v)
                if kind != s.kind:
                    raise DomainError(f"{s.name!r} is declared {s.kind} but evaluates to {kind}")
                return Obj(kind, v, names)
            if isinstance(s, ModuleDef):
                gens = []
                for g in s.generators:
                    v = self.evaluate(g, names)
                    if _kind_of(v) != "field":
                        raise DomainError(f"module {s.name!r}: generators must be fields")
                    gens.append(v)
                return Obj("module", FoliationModule(gens, len(names), self.order, self.tol, name=s.name), names)
            if isinstance(s, LeafDef):
                m = self.lookup(s.module)
                if m is None or m.kind != "module":
                    raise DomainError(f"leaf {s.name!r}: {s.module!r} is not a module")
                if m.names != names:
                    raise DomainError(f"leaf {s.name!r}: module {s.module!r} uses other variables")
                fs = []
                for f in s.fields:
                    v = self.evaluate(f, names)
                    if _kind_of(v) != "field":
                        raise DomainError(f"leaf {s.name!r}: horizontal parts must be fields")
                    fs.append(v)
                return Obj("leaf", build_leaf_foliation(s.leaf, fs, m.value, s.name), names)
        except FoliaError as e:
            if isinstance(e, ParseError):
                raise
            e.details.setdefault("line", s.pos[0])
            e.details.setdefault("column", s.pos[1])
            raise
        raise TypeError(s)

    # expressions

    def evaluate(self, e, names: Sequence[str]):
        names = tuple(names)
        d = len(names)
        n = self.order

        def err(msg, node):
            return DomainError(msg, line=node.pos[0], column=node.pos[1])

        def ev(node):
            if isinstance(node, Num):
                return TruncatedSeries.constant(d, n, node.value)
            if isinstance(node, Pi):
                return TruncatedSeries.constant(d, n, math.pi)
            if isinstance(node, Name):
                if node.ident in names:
                    return TruncatedSeries.variable(d, n, names.index(node.ident))
                obj = self.lookup(node.ident)
                if obj is not None:
                    if obj.names != names:
                        raise err(f"{node.ident!r} is defined over variables {obj.names}, not {names}", node)
                    if obj.kind in ("module", "leaf"):
                        raise err(f"{node.ident!r} is a {obj.kind}, not an expression", node)
                    return obj.value
                if node.ident.startswith("d") and node.ident[1:] in names:
                    m = np.zeros((d, TruncatedSeries.zero(d, n).coeffs.size))
                    m[names.index(node.ident[1:]), 0] = 1.0
                    return FormalVectorField(d, n, m)
                raise err(f"undefined name {node.ident!r}", node)
            if isinstance(node, Neg):
                v = ev(node.operand)
                if isinstance(v, FormalDiffeo):
                    raise err("cannot negate a diffeomorphism", node)
                return -v
            if isinstance(node, BinOp):
                a, b = ev(node.left), ev(node.right)
                ka, kb = _kind_of(a), _kind_of(b)
                if "diffeo" in (ka, kb):
                    raise err("diffeomorphisms only combine through compose(...)", node)
                if node.op in "+-":
                    if ka != kb:
                        raise err(f"cannot {'add' if node.op == '+' else 'subtract'} {ka} and {kb}", node)
                    return a + b if node.op == "+" else a - b
                if node.op == "*":
                    if ka == "field" and kb == "field":
                        raise err("cannot multiply two fields", node)
                    if ka == "field":
                        return a * b
                    return b * a if kb == "field" else a * b
                # division by constants only
                if kb != "series" or b.valuation(0.0) != 0 or np.any(b.coeffs[1:] != 0):
                    raise err("can only divide by a nonzero constant", node)
                return a * (1.0 / float(b.coeffs[0]))
            if isinstance(node, Pow):
                v = ev(node.base)
                if _kind_of(v) != "series":
                    raise err("only series can be raised to a power", node)
                return v**node.exponent
            if isinstance(node, Tuple):
                items = [ev(x) for x in node.items]
                if any(_kind_of(x) != "series" for x in items):
                    raise err("a diffeomorphism is a tuple of series", node)
                if len(items) != d:
                    raise err(f"a diffeomorphism needs {d} components, got {len(items)}", node)
                try:
                    return FormalDiffeo(d, n, np.array([x.coeffs for x in items]), self.tol)
                except FoliaError as exc:
                    raise err(exc.message, node) from None
            if isinstance(node, Call):
                args = [ev(a) for a in node.args]
                kinds = [_kind_of(a) for a in args]
                f = node.func
                if f in ("sin", "cos", "sqrt"):
                    if kinds != ["series"] or np.any(args[0].coeffs[1:] != 0):
                        raise err(f"{f} takes a constant", node)
                    c = float(args[0].coeffs[0])
                    if f == "sqrt" and c < 0:
                        raise err("sqrt of a negative constant", node)
                    return TruncatedSeries.constant(d, n, getattr(math, f)(c))
                if f == "exp":
                    if kinds != ["field"]:
                        raise err("exp takes one field", node)
                    return exp_field(args[0], self.tol)
                if f == "log":
                    if kinds != ["diffeo"]:
                        raise err("log takes one diffeomorphism", node)
                    return log_diffeo(args[0], max(self.tol, 1e-7))
                if f == "inv":
                    if kinds != ["diffeo"]:
                        raise err("inv takes one diffeomorphism", node)
                    return diffeo_invert(args[0])
                if f == "compose":
                    if len(args) < 2 or any(k != "diffeo" for k in kinds):
                        raise err("compose takes two or more diffeomorphisms", node)
                    out = args[0]
                    for a in args[1:]:
                        out = diffeo_compose(out, a)
                    return out
            raise err(f"cannot evaluate {type(node).__name__}", node)

        return ev(e)

    def expression(self, text: str, names: Sequence[str] | None = None):
        """Parse and evaluate ``text``; variables come from ``names`` or are inferred."""
        e = parse_expression(text)
        if names is None:
            names = self.names_for(e)
        return self.evaluate(e, names), tuple(names)

    def expressions(self, texts: Sequence[str], names: Sequence[str] | None = None):
        """Evaluate several expressions over one jointly inferred coordinate system."""
        es = [parse_expression(t) for t in texts]
        if names is None:
            names = self.names_for(*es)
        return [self.evaluate(e, names) for e in es], tuple(names)

    def names_for(self, *es) -> tuple[str, ...]:
        ids: set = set()
        for e in es:
            _identifiers(e, ids)
        owners = {self.lookup(i).names for i in ids if self.lookup(i) is not None}
        if len(owners) > 1:
            raise DomainError("expression mixes objects over different variables")
        if owners:
            return owners.pop()
        names = infer_variables(list(es))
        if not names:
            raise DomainError("cannot infer variables for a constant expression; pass --vars")
        return names

    def get(self, name: str, kind: str) -> Obj:
        obj = self.lookup(name)
        if obj is None:
            raise DomainError(f"undefined {kind} {name!r}")
        if obj.kind != kind:
            raise DomainError(f"{name!r} is a {obj.kind}, not a {kind}")
        return obj


def _stmt_exprs(s) -> list:
    if isinstance(s, Def):
        return [s.expr]
    if isinstance(s, ModuleDef):
        return list(s.generators)
    if isinstance(s, LeafDef):
        return list(s.fields)
    return []


def _kind_of(v) -> str:
    if isinstance(v, TruncatedSeries):
        return "series"
    if isinstance(v, FormalDiffeo):
        return "diffeo"
    if isinstance(v, FormalVectorField):
        return "field"
    if isinstance(v, FoliationModule):
        return "module"
    if isinstance(v, LeafFoliation):
        return "leaf"
    raise StructuralError(f"unexpected value {type(v).__name__}")


PRELUDE = """\
# standard objects in the plane
vars x, y
field rot = x dy - y dx
field eul = x dx + y dy
series r2 = x^2 + y^2
module circles = [ x dy - y dx ]
module spirals = [ x dy - y dx + (x^2+y^2)*(x dx + y dy) ]
module allfields = [ x dx, y dx, x dy, y dy ]
diffeo rotation07 = (cos(0.7) x - sin(0.7) y, sin(0.7) x + cos(0.7) y)
diffeo reflection = (x, -y)
diffeo shear = (x + y, y)
diffeo radial = exp(r2 eul)
leaf trivial_circle = circle(0 dx; circles)
leaf susp_rot1 = circle(0.3 rot; circles)
leaf susp_rot2 = circle(1.1 rot; circles)
leaf susp_radial = circle(r2 eul; circles)

# a torus leaf with non-commuting holonomies
vars t
module m10 = [ t^10 dt ]
leaf ext = torus(t^5 dt, t^6 dt; module m10)
leaf trivial_torus = torus(0 dt, 0 dt; module m10)
"""


def prelude(order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL) -> Namespace:
    return Namespace(order, tol).load(PRELUDE)


__all__ = [
    "BinOp",
    "Call",
    "Def",
    "DefinitionFile",
    "LeafDef",
    "ModuleDef",
    "Name",
    "Namespace",
    "Neg",
    "Num",
    "PRELUDE",
    "Pi",
    "Pow",
    "Tuple",
    "VarsStmt",
    "format_definition",
    "format_expr",
    "infer_variables",
    "parse_definition",
    "parse_expression",
    "prelude",
    "tokenize",
]
