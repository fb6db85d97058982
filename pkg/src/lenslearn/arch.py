"""Layer and network builders returning parametric maps.

Weights follow the ``linear`` primitive's layout: an ``in x out`` matrix
``W`` applied as ``Wᵀx``.  Batched variants carry examples as the rows of
a ``batch x features`` matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff.expr import Const, Copy, Id, MorphExpr, Par, Perm, Prim, Sum, par, seq
from .autodiff.primitives import ACTIVATIONS
from .errors import CatalogueError, ConfigError, ShapeError
from .lens import Port
from .para import (ParaMorph, para_par, para_seq, para_seq_all, parse_para, tie_n, trivial)
from .rig import REAL, Z2, Rig
from .tensor import Tensor


def _positive(*dims):
    for d in dims:
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise ShapeError(f"dimensions must be positive integers, got {dims}")


def linear(n_in: int, n_out: int, batch: int | None = None, rig: Rig = REAL) -> ParaMorph:
    _positive(n_in, n_out)
    if batch is None:
        body = Prim("linear", (n_in, n_out), rig)
        return ParaMorph(Port(((n_in,),), rig), Port(((n_in, n_out),), rig), body)
    _positive(batch)
    body = Prim("matmul", (batch, n_in, n_out), rig)
    return ParaMorph(Port(((batch, n_in),), rig), Port(((n_in, n_out),), rig), body)


def bias(n: int, batch: int | None = None, rig: Rig = REAL) -> ParaMorph:
    _positive(n)
    if batch is None:
        body = Prim("bias", ((n,),), rig)
        return ParaMorph(Port(((n,),), rig), Port(((n,),), rig), body)
    _positive(batch)
    body = Prim("bias_rows", (batch, n), rig)
    return ParaMorph(Port(((batch, n),), rig), Port(((n,),), rig), body)


def activation(name: str, shape) -> ParaMorph:
    if name not in ACTIVATIONS:
        raise CatalogueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    return trivial(Prim(name, (shape,)))


def dense(n_in: int, n_out: int, act: str = "identity", batch: int | None = None) -> ParaMorph:
    """linear ; bias ; activation."""
    out_shape = (n_out,) if batch is None else (batch, n_out)
    return para_seq(para_seq(linear(n_in, n_out, batch), bias(n_out, batch)),
                    activation(act, out_shape))


def unroll_tied(cell: ParaMorph, n: int) -> ParaMorph:
    """Run ``cell : X ⊗ H -> H`` over n inputs with one shared parameter.

    The result has input ``X^n ⊗ H`` and the cell's parameter port; its
    parameter gradient is the sum of the per-step gradients.
    """
    if n < 1:
        raise ValueError("unrolling needs n >= 1")
    h = cell.output
    nx = len(cell.input) - len(h)
    if nx < 0 or Port(cell.input.shapes[nx:], cell.input.rig) != h:
        raise ShapeError(f"cell input {cell.input!r} must end with its output port {h!r}")
    x = Port(cell.input.shapes[:nx], cell.input.rig)
    stages = []
    for k in range(n):
        rest = n - k - 1
        if rest == 0:
            stages.append(cell)
            continue
        # (x_k, x_{k+1..n}, h) -> (x_{k+1..n}, x_k, h) -> (x_{k+1..n}, h')
        later = Port(x.shapes * rest, x.rig)
        dom = x + later + h
        order = (tuple(range(nx, nx + len(later))) + tuple(range(nx))
                 + tuple(range(nx + len(later), len(dom))))
        stages.append(para_seq(trivial(Perm(dom, order)), para_par(trivial(Id(later)), cell)))
    return tie_n(para_seq_all(*stages), n)


def gcnn_layer(n: int, in_feat: int, out_feat: int, act: str = "relu") -> ParaMorph:
    """σ(WᵀXA + B) with the adjacency matrix passed through unchanged.

    Input ``X [in_feat, n] ⊗ A [n, n]``; parameters ``W [in_feat, out_feat] ⊗
    B [out_feat]`` with B broadcast across nodes; output ``Y [out_feat, n] ⊗ A``.
    """
    _positive(n, in_feat, out_feat)
    if act not in ACTIVATIONS:
        raise CatalogueError(f"unknown activation {act!r}")
    xs, a_s, ws, bs, ys = (in_feat, n), (n, n), (in_feat, out_feat), (out_feat,), (out_feat, n)
    P = lambda *shapes: Port(shapes, REAL)
    body = seq(
        Par(Par(Id(P(xs)), Copy(P(a_s))), Id(P(ws, bs))),        # X A A W B
        Perm(P(xs, a_s, a_s, ws, bs), (3, 0, 1, 4, 2)),         # W X A B A
        par(Prim("transpose", ws), Id(P(xs, a_s, bs, a_s))),
        par(Prim("matmul", (out_feat, in_feat, n)), Id(P(a_s, bs, a_s))),
        par(Prim("matmul", (out_feat, n, n)), Id(P(bs, a_s))),
        par(Prim("bias_cols", (out_feat, n)), Id(P(a_s))),
        par(Prim(act, (ys,)), Id(P(a_s))),
    )
    return ParaMorph(P(xs, a_s), P(ws, bs), body)


def _rowwise_softargmax(rows: int, cols: int) -> MorphExpr:
    return seq(Prim("unstack", (rows, cols)),
               par(*[Prim("softargmax", (cols,)) for _ in range(rows)]),
               Prim("stack", (rows, cols)))


def attend(seq_len: int, key: int, val: int, rig: Rig = REAL) -> MorphExpr:
    """Softargmax(QKᵀ/√key) V on ``Q [seq,key] ⊗ K [seq,key] ⊗ V [seq,val]``."""
    _positive(seq_len, key, val)
    if rig is not REAL:
        from .errors import RigSupportError
        raise RigSupportError("attention needs softargmax, which is only defined over the reals")
    v = Port(((seq_len, val),), REAL)
    return seq(
        par(Id(Port(((seq_len, key),), REAL)), Prim("transpose", (seq_len, key)), Id(v)),
        Par(Prim("matmul", (seq_len, key, seq_len)), Id(v)),
        Par(Prim("scale", ((seq_len, seq_len), 1.0 / math.sqrt(key))), Id(v)),
        Par(_rowwise_softargmax(seq_len, seq_len), Id(v)),
        Prim("matmul", (seq_len, seq_len, val)),
    )


def attention(seq_len: int, key: int, val: int) -> ParaMorph:
    return trivial(attend(seq_len, key, val))


# --- Z2 gates ------------------------------------------------------------------

def xor_gate(n: int = 1) -> MorphExpr:
    return Sum(Port(((n,),), Z2))


def and_gate(n: int = 1) -> MorphExpr:
    return Prim("mul", ((n,),), Z2)


def not_gate(n: int = 1) -> MorphExpr:
    p = Port(((n,),), Z2)
    return seq(Par(Id(p), Const(Tensor(Z2, np.ones(n, dtype=np.uint8)))), Sum(p))


def masked_and() -> ParaMorph:
    """f(x, p) = (x1 ⊕ p1) ∧ (x2 ⊕ p2): a two-input circuit with one parameter bit per input."""
    return parse_para("(seq (par (prim bias 1) (prim bias 1)) (prim mul 1))", Z2)


# --- declarative layer lists ---------------------------------------------------

KINDS = ("linear", "bias", "activation", "dense", "gcnn", "attention")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    dims: tuple = ()
    activation: str | None = None
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "dims", tuple(self.dims))
        if any(not isinstance(d, int) or d < 1 for d in self.dims):
            raise ConfigError(f"layer dims must be positive integers, got {self.dims}")
        if self.activation is not None and self.activation not in ACTIVATIONS:
            raise CatalogueError(f"unknown activation {self.activation!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        unknown = set(d) - {"kind", "dims", "activation", "attrs"}
        if unknown:
            raise ConfigError(f"unknown layer keys {sorted(unknown)}")
        return cls(d["kind"], tuple(d.get("dims", ())), d.get("activation"), dict(d.get("attrs", {})))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dims": list(self.dims)}
        if self.activation is not None:
            out["activation"] = self.activation
        if self.attrs:
            out["attrs"] = dict(self.attrs)
        return out

    def build(self) -> ParaMorph:
        d, batch = self.dims, self.attrs.get("batch")
        try:
            if self.kind == "linear":
                return linear(d[0], d[1], batch)
            if self.kind == "bias":
                return bias(d[0], batch)
            if self.kind == "activation":
                return activation(self.activation or "identity", d)
            if self.kind == "dense":
                return dense(d[0], d[1], self.activation or "identity", batch)
            if self.kind == "gcnn":
                return gcnn_layer(self.attrs["n"], d[0], d[1], self.activation or "relu")
            return attention(*d)
        except (IndexError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad {self.kind} layer {self.to_dict()}: {exc}") from None


def build_network(specs) -> ParaMorph:
    layers = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in specs]
    if not layers:
        raise ConfigError("architecture needs at least one layer")
    return para_seq_all(*(s.build() for s in layers))


__all__ = ["linear", "bias", "activation", "dense", "unroll_tied", "gcnn_layer", "attend",
           "attention", "xor_gate", "and_gate", "not_gate", "masked_and", "LayerSpec",
           "build_network"]
