"""Deterministic JSON encoding of series, fields, diffeomorphisms and results."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .geometry import FormalDiffeo, FormalVectorField
from .jets import ScalarJet, TruncatedSeries, layout

DROP_RTOL = 1e-13


def number(x: float):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    return x + 0.0


def coefficient_table(coeffs: np.ndarray, dim: int, order: int, names: Sequence[str], scale: float | None = None) -> dict:
    """Nonzero coefficients keyed by monomial names in graded-lex order."""
    lay = layout(dim, order)
    if scale is None:
        scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    cut = DROP_RTOL * max(1.0, scale)
    return {lay.monomial_name(i, names): number(c) for i, c in enumerate(coeffs) if abs(c) > cut}


def series_json(s: TruncatedSeries, names: Sequence[str]) -> dict:
    return coefficient_table(s.coeffs, s.dim, s.order, names)


def field_json(x: FormalVectorField, names: Sequence[str]) -> dict:
    comps = np.array(x.comps)
    scale = float(np.max(np.abs(comps))) if comps.size else 0.0
    return {f"d{n}": coefficient_table(comps[i], x.dim, x.order, names, scale) for i, n in enumerate(names)}


def diffeo_json(p: FormalDiffeo, names: Sequence[str]) -> dict:
    comps = np.array(p.comps)
    scale = float(np.max(np.abs(comps)))
    return {n: coefficient_table(comps[i], p.dim, p.order, names, scale) for i, n in enumerate(names)}


def jet_json(g: ScalarJet) -> list:
    return [number(c) for c in g.coeffs]


def matrix_json(a: np.ndarray) -> list:
    return [[number(v) for v in row] for row in np.asarray(a)]


def _encode(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = number(obj)
        out.append("null" if v is None else format(v, ".17g"))
    elif isinstance(obj, str):
        out.append(_string(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + _string(str(k)) + ": ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def _string(s: str) -> str:
    esc = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}
    body = "".join(esc.get(ch, ch if ord(ch) >= 0x20 else f"\\u{ord(ch):04x}") for ch in s)
    return f'"{body}"'


def dumps(obj, indent: int = 2) -> str:
    """JSON text with insertion-ordered keys and 17-significant-digit floats."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"
