"""The reverse-derivative functor and the plain forward interpreter.

``differentiate`` is structural: sequential nodes become lens composites and
parallel nodes become parallel lenses, so the chain rule holds by
construction.  ``evaluate`` is an independent recursive interpreter of the
same trees; its agreement with the forward half of ``differentiate`` is the
projection law tested in the suite.
"""
from __future__ import annotations

from ..lens import (Lens, Mode, PrimLens, compose_lens, constant_lens, copy_lens,
                    delete_lens, identity_lens, par_lens, perm_lens, proj_lens, sum_lens)
from ..tensor import add
from . import primitives
from .expr import Const, Copy, Delete, Id, MorphExpr, Par, Perm, Prim, Proj, Seq, Sum


def prim_lens(node: Prim, key: str | None = None) -> Lens:
    spec = primitives.lookup(node.name)
    args = node.args
    fwd, bwd = spec.fwd, spec.bwd
    return PrimLens(node.dom, node.cod,
                    lambda x: fwd(args, x),
                    lambda x, dy: bwd(args, x, dy),
                    key=key or node.name)


def differentiate(e: MorphExpr, mode: Mode = Mode.MEMOISED, _path: str = "") -> Lens:
    """Return the lens whose forward part is ``e`` and whose backward part is R[e].

    Primitive lenses are keyed ``name@path`` (path = string of 0/1 steps from
    the root) so that instrumented call counts can tell repeated primitives
    apart.
    """
    key = lambda base: f"{base}@{_path or 'root'}"
    if isinstance(e, Seq):
        return compose_lens(differentiate(e.left, mode, _path + "0"),
                            differentiate(e.right, mode, _path + "1"), mode)
    if isinstance(e, Par):
        return par_lens(differentiate(e.left, mode, _path + "0"),
                        differentiate(e.right, mode, _path + "1"))
    if isinstance(e, Prim):
        return prim_lens(e, key(e.name))
    if isinstance(e, Id):
        return identity_lens(e.port, key("id"))
    if isinstance(e, Copy):
        return copy_lens(e.port, key("copy"))
    if isinstance(e, Sum):
        return sum_lens(e.port, key("sum"))
    if isinstance(e, Delete):
        return delete_lens(e.port, key("delete"))
    if isinstance(e, Const):
        return constant_lens(e.value, key("const"))
    if isinstance(e, Proj):
        return proj_lens(e.ports, e.index, key("proj"))
    if isinstance(e, Perm):
        return perm_lens(e.port, e.order, key("perm"))
    raise TypeError(f"not a morphism expression: {e!r}")


def evaluate(e: MorphExpr, x: tuple) -> tuple:
    """Plain forward semantics of ``e`` at ``x``."""
    e.dom.check(x, "evaluate")
    return _eval(e, x)


def _eval(e, x):
    if isinstance(e, Seq):
        return _eval(e.right, _eval(e.left, x))
    if isinstance(e, Par):
        a, c = e.left.dom.take(x)
        return _eval(e.left, a) + _eval(e.right, c)
    if isinstance(e, Prim):
        return primitives.lookup(e.name).fwd(e.args, x)
    if isinstance(e, Id):
        return x
    if isinstance(e, Copy):
        return x + x
    if isinstance(e, Sum):
        a, b = e.port.take(x)
        return tuple(add(s, t) for s, t in zip(a, b))
    if isinstance(e, Delete):
        return ()
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Proj):
        start = sum(len(q) for q in e.ports[:e.index])
        return x[start:start + len(e.ports[e.index])]
    if isinstance(e, Perm):
        return tuple(x[i] for i in e.order)
    raise TypeError(f"not a morphism expression: {e!r}")
