"""Textual expression format.

Grammar (whitespace separated, ``;`` starts a comment)::

    expr   := (seq expr expr...)         sequential composite, left to right
            | (par expr expr...)         parallel composite
            | (prim NAME arg...)         catalogue primitive
            | (id SHAPE...) | (copy SHAPE...) | (sum SHAPE...) | (delete SHAPE...)
            | (proj INDEX SHAPE...)      project onto one of several wires
            | (perm (INDEX...) SHAPE...) reorder wires
            | (const SHAPE NUMBER...)    constant tensor, row-major values
    SHAPE  := INT | INTxINT[xINT] | scalar
    arg    := SHAPE | NUMBER

Read as a plain morphism, ``(seq (prim linear 2 3) (prim tanh 3))`` has the
two input wires ``[2], [2x3]``.  :func:`lenslearn.para.parse_para` reads the
same text as a parametric map, splitting the weight wires of ``linear`` and
the ``bias`` family off into the parameter port, so that
``(seq (prim linear 2 3) (prim bias 3) (prim tanh 3))`` is a dense layer.
"""
from __future__ import annotations

import re

import numpy as np

from ..errors import ExprTypeError
from ..lens import Port
from ..rig import REAL, Rig
from ..tensor import Tensor, as_shape
from .expr import Const, Copy, Delete, Id, MorphExpr, Par, Perm, Prim, Proj, Seq, Sum

_TOKEN = re.compile(r"\s*(?:;[^\n]*\n?\s*)*([()]|[^\s()]+)")


def tokenize(text: str) -> list:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        tokens.append(m.group(1))
        pos = m.end()
    return [t for t in tokens if t is not None]


def _read(tokens, i):
    if i >= len(tokens):
        raise ExprTypeError("unexpected end of input")
    tok = tokens[i]
    if tok == "(":
        items, i = [], i + 1
        while i < len(tokens) and tokens[i] != ")":
            item, i = _read(tokens, i)
            items.append(item)
        if i >= len(tokens):
            raise ExprTypeError("unbalanced parenthesis")
        return items, i + 1
    if tok == ")":
        raise ExprTypeError("unexpected ')'")
    return tok, i + 1


def read(text: str):
    tokens = tokenize(text)
    tree, i = _read(tokens, 0)
    if i != len(tokens):
        raise ExprTypeError(f"trailing input after expression: {' '.join(tokens[i:])}")
    return tree


def parse_shape(tok) -> tuple:
    if tok == "scalar":
        return ()
    if not isinstance(tok, str) or not re.fullmatch(r"\d+(x\d+)*", tok):
        raise ExprTypeError(f"bad shape {tok!r}")
    return as_shape(tuple(int(p) for p in tok.split("x")))


def _arg(tok):
    if isinstance(tok, list):
        raise ExprTypeError("primitive arguments must be atoms")
    if re.fullmatch(r"\d+", tok):
        return int(tok)
    if tok == "scalar" or re.fullmatch(r"\d+(x\d+)+", tok):
        return parse_shape(tok)
    try:
        return float(tok)
    except ValueError:
        raise ExprTypeError(f"bad primitive argument {tok!r}") from None


def _port(rig, toks) -> Port:
    return Port(tuple(parse_shape(t) for t in toks), rig)


def build(tree, rig: Rig = REAL, path: str = "") -> MorphExpr:
    if not isinstance(tree, list) or not tree:
        raise ExprTypeError("expected a parenthesised form", path or "root")
    head, rest = tree[0], tree[1:]
    here = f"{path}.{head}" if path else str(head)
    try:
        if head in ("seq", "par"):
            if not rest:
                raise ExprTypeError(f"{head} needs at least one operand")
            kids = [build(t, rig, f"{here}[{i}]") for i, t in enumerate(rest)]
            out = kids[0] if head == "par" else kids[-1]
            if head == "seq":
                for k in reversed(kids[:-1]):
                    out = Seq(k, out)
            else:
                for k in kids[1:]:
                    out = Par(out, k)
            return out
        if head == "prim":
            if not rest:
                raise ExprTypeError("prim needs a name")
            return Prim(rest[0], tuple(_arg(t) for t in rest[1:]), rig)
        if head in ("id", "copy", "sum", "delete"):
            return {"id": Id, "copy": Copy, "sum": Sum, "delete": Delete}[head](_port(rig, rest))
        if head == "proj":
            ports = tuple(Port((parse_shape(t),), rig) for t in rest[1:])
            return Proj(int(rest[0]), ports)
        if head == "perm":
            return Perm(_port(rig, rest[1:]), tuple(int(t) for t in rest[0]))
        if head == "const":
            shape = parse_shape(rest[0])
            vals = np.array([float(t) for t in rest[1:]])
            if vals.size != int(np.prod(shape, dtype=int)):
                raise ExprTypeError(f"constant of shape {shape} needs {int(np.prod(shape, dtype=int))} values")
            return Const(Tensor(rig, vals.reshape(shape)))
    except ExprTypeError as exc:
        if exc.path.startswith(here):
            raise
        raise ExprTypeError(str(exc).split(": ", 1)[-1] if exc.path else str(exc), here) from None
    except (ValueError, TypeError, IndexError) as exc:
        raise ExprTypeError(str(exc), here) from None
    raise ExprTypeError(f"unknown form {head!r}", here)


def parse(text: str, rig: Rig = REAL) -> MorphExpr:
    return build(read(text), rig)


def _shape_tok(s) -> str:
    return "x".join(map(str, s)) if s else "scalar"


def _fmt_arg(a) -> str:
    if isinstance(a, tuple):
        return _shape_tok(a)
    if isinstance(a, float):
        return repr(a)
    return str(a)


def to_text(e: MorphExpr) -> str:
    if isinstance(e, Seq):
        return f"(seq {to_text(e.left)} {to_text(e.right)})"
    if isinstance(e, Par):
        return f"(par {to_text(e.left)} {to_text(e.right)})"
    if isinstance(e, Prim):
        return " ".join(["(prim", e.name, *map(_fmt_arg, e.args)]) + ")"
    for cls, word in ((Id, "id"), (Copy, "copy"), (Sum, "sum"), (Delete, "delete")):
        if isinstance(e, cls):
            return " ".join([f"({word}", *map(_shape_tok, e.port.shapes)]) + ")"
    if isinstance(e, Proj):
        return " ".join([f"(proj {e.index}", *(_shape_tok(p.shapes[0]) for p in e.ports)]) + ")"
    if isinstance(e, Perm):
        return (f"(perm ({' '.join(map(str, e.order))}) "
                + " ".join(map(_shape_tok, e.port.shapes)) + ")")
    if isinstance(e, Const):
        if len(e.value) != 1:
            return "(par " + " ".join(to_text(Const(t)) for t in e.value) + ")"
        t = e.value[0]
        return " ".join([f"(const {_shape_tok(t.shape)}", *(repr(float(v)) for v in t.data.reshape(-1))]) + ")"
    raise TypeError(f"not a morphism expression: {e!r}")
