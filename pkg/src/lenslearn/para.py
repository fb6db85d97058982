"""Parametric morphisms and parametric lenses.

A :class:`ParaMorph` is a body expression ``X (x) P -> Y``: input wires come
first, parameter wires second, everywhere in this package.  Composites put
the left factor's parameters before the right factor's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import sexpr
from .autodiff.expr import Copy, Id, MorphExpr, Par, Perm, Prim, Seq, copy_n
from .autodiff.functor import differentiate, evaluate
from .errors import CompositionError, ContractError, ExprTypeError, ShapeError
from .lens import (Lens, Mode, Port, compose_lens, identity_lens, par_lens, perm_lens, unit)
from .rig import REAL, Z2
from .tensor import Tensor


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def sample(self, rng: np.random.Generator, shape, rig) -> Tensor:
        if rig is Z2:
            return Tensor(rig, rng.integers(0, 2, size=shape))
        return Tensor(rig, rng.uniform(self.lo, self.hi, size=shape))


def fan_in_uniform(fan_in: int) -> Uniform:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return Uniform(-bound, bound)


@dataclass(frozen=True, eq=False)
class ParaMorph:
    input: Port
    param: Port
    body: MorphExpr
    init: tuple | None = None

    def __post_init__(self):
        if self.body.dom != self.input + self.param:
            raise ExprTypeError(
                f"body domain {self.body.dom!r} is not input {self.input!r} followed by "
                f"parameter {self.param!r}", "para")
        if self.init is not None and len(self.init) != len(self.param):
            raise ShapeError("one initialiser per parameter wire is required")

    @property
    def output(self) -> Port:
        return self.body.cod

    @property
    def rig(self):
        return self.body.rig

    def fwd(self, x: tuple, p: tuple) -> tuple:
        return evaluate(self.body, tuple(x) + tuple(p))

    def param_size(self) -> int:
        return sum(int(np.prod(s, dtype=int)) for s in self.param.shapes)

    def init_params(self, rng: np.random.Generator) -> tuple:
        out = []
        for i, shape in enumerate(self.param.shapes):
            scheme = self.init[i] if self.init is not None and self.init[i] is not None \
                else fan_in_uniform(shape[0] if shape else 1)
            out.append(scheme.sample(rng, shape, self.param.rig))
        return tuple(out)


def trivial(e: MorphExpr) -> ParaMorph:
    """View a plain morphism as one with the unit parameter."""
    return ParaMorph(e.dom, unit(e.rig), e, ())


def _cat_init(f: ParaMorph, g: ParaMorph):
    if f.init is None or g.init is None:
        return None
    return tuple(f.init) + tuple(g.init)


def para_seq(f: ParaMorph, g: ParaMorph) -> ParaMorph:
    if f.output != g.input:
        raise CompositionError(f"cannot compose parametric maps: output {f.output!r} "
                               f"does not match input {g.input!r}")
    body = Seq(Par(f.body, Id(g.param)), g.body)
    return ParaMorph(f.input, f.param + g.param, body, _cat_init(f, g))


def para_seq_all(*fs: ParaMorph) -> ParaMorph:
    out = fs[0]
    for g in fs[1:]:
        out = para_seq(out, g)
    return out


def _interleave(a: Port, c: Port, p: Port, q: Port) -> Perm:
    """Reorder wires (a, c, p, q) into (a, p, c, q)."""
    na, nc, np_, nq = len(a), len(c), len(p), len(q)
    ia, ic = list(range(na)), list(range(na, na + nc))
    ip, iq = list(range(na + nc, na + nc + np_)), list(range(na + nc + np_, na + nc + np_ + nq))
    return Perm(a + c + p + q, tuple(ia + ip + ic + iq))


def para_par(f: ParaMorph, g: ParaMorph) -> ParaMorph:
    if len(f.body.dom) and len(g.body.dom) and f.rig != g.rig:
        raise ContractError(f"rig mismatch: {f.rig} vs {g.rig}")
    body = Seq(_interleave(f.input, g.input, f.param, g.param), Par(f.body, g.body))
    return ParaMorph(f.input + g.input, f.param + g.param, body, _cat_init(f, g))


def reparam(f: ParaMorph, r: MorphExpr, init: tuple | None = None) -> ParaMorph:
    """Precompose the parameter port of ``f`` with ``r : Q -> P``."""
    if r.cod != f.param:
        raise CompositionError(f"reparameterisation codomain {r.cod!r} does not match "
                               f"parameter port {f.param!r}")
    body = Seq(Par(Id(f.input), r), f.body)
    return ParaMorph(f.input, r.dom, body, init)


def weight_tying(f: ParaMorph) -> ParaMorph:
    """Tie the two equal halves of ``f``'s parameter port with the copy map."""
    n = len(f.param)
    half = Port(f.param.shapes[: n // 2], f.param.rig)
    if n % 2 or half + half != f.param:
        raise ShapeError(f"parameter port {f.param!r} does not split into two equal halves")
    init = tuple(f.init[: n // 2]) if f.init is not None else None
    return reparam(f, Copy(half), init)


def tie_n(f: ParaMorph, n: int) -> ParaMorph:
    """Tie n equal blocks of the parameter port with the n-fold copy."""
    k = len(f.param)
    if n < 1 or k % n:
        raise ShapeError(f"parameter port {f.param!r} does not split into {n} equal blocks")
    block = Port(f.param.shapes[: k // n], f.param.rig)
    init = tuple(f.init[: k // n]) if f.init is not None else None
    return reparam(f, copy_n(block, n), init)


def batching(f: ParaMorph, n: int) -> ParaMorph:
    """n parallel copies of ``f`` sharing one parameter."""
    if n < 1:
        raise ValueError("batching needs n >= 1")
    if n == 1:
        return f
    wide = f
    for _ in range(n - 1):
        wide = para_par(wide, f)
    return tie_n(wide, n)


@dataclass(frozen=True, eq=False)
class ParaLens:
    input: Port
    param: Port
    lens: Lens

    @property
    def output(self) -> Port:
        return self.lens.cod

    def fwd(self, x: tuple, p: tuple) -> tuple:
        return self.lens.fwd(tuple(x) + tuple(p))

    def bwd(self, x: tuple, p: tuple, dy: tuple):
        """Return (input gradient, parameter gradient)."""
        d = self.lens.bwd(tuple(x) + tuple(p), tuple(dy))
        return self.input.take(d)

    def then(self, other: "ParaLens", mode: Mode = Mode.MEMOISED) -> "ParaLens":
        """Sequential composite of parametric lenses, parameters concatenated."""
        lens = compose_lens(par_lens(self.lens, identity_lens(other.param)), other.lens, mode)
        return ParaLens(self.input, self.param + other.param, lens)

    def beside(self, other: "ParaLens") -> "ParaLens":
        a, c, p, q = self.input, other.input, self.param, other.param
        perm = _interleave(a, c, p, q)
        lens = compose_lens(perm_lens(perm.port, perm.order), par_lens(self.lens, other.lens))
        return ParaLens(a + c, p + q, lens)


def para_differentiate(f: ParaMorph, mode: Mode = Mode.MEMOISED) -> ParaLens:
    return ParaLens(f.input, f.param, differentiate(f.body, mode))


# --- textual parametric reading ----------------------------------------------

PARAM_WIRES = {"linear": 1, "bias": 1, "bias_rows": 1, "bias_cols": 1}


def _para_build(tree, rig, path=""):
    head = tree[0] if isinstance(tree, list) and tree else None
    here = f"{path}.{head}" if path else str(head)
    if head in ("seq", "par"):
        kids = [_para_build(t, rig, f"{here}[{i}]") for i, t in enumerate(tree[1:])]
        if not kids:
            raise ExprTypeError(f"{head} needs at least one operand", here)
        out = kids[0]
        for k in kids[1:]:
            try:
                out = para_seq(out, k) if head == "seq" else para_par(out, k)
            except CompositionError as exc:
                raise ExprTypeError(str(exc), here) from None
        return out
    e = sexpr.build(tree, rig, path)
    if isinstance(e, Prim) and e.name in PARAM_WIRES:
        k = PARAM_WIRES[e.name]
        dom = e.dom
        inp = Port(dom.shapes[: len(dom) - k], dom.rig)
        par_ = Port(dom.shapes[len(dom) - k:], dom.rig)
        return ParaMorph(inp, par_, e)
    return trivial(e)


def parse_para(text: str, rig=None) -> ParaMorph:
    """Read an expression as a parametric map; weights and biases become parameters."""
    return _para_build(sexpr.read(text), rig or REAL)


__all__ = ["ParaMorph", "ParaLens", "Uniform", "trivial", "para_seq", "para_seq_all", "para_par",
           "reparam", "weight_tying", "tie_n", "batching", "para_differentiate", "parse_para"]
