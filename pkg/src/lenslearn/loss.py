"""Loss functions and learning rates.

A loss is a parametric map from predictions to a scalar payoff whose
parameter port carries the labels.  Every loss here is an expression built
from catalogue primitives, so its backward pass comes from the same
differentiation functor as the model's.

A learning rate is a costate on the payoff: a lens ``L -> I`` whose
backward pass turns the loss value into the cotangent that seeds
backpropagation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .autodiff.expr import Copy, Id, MorphExpr, Par, Perm, Prim, Sum, seq
from .errors import CatalogueError, RigSupportError, ShapeError
from .lens import Lens, Port, lens, unit
from .para import ParaMorph
from .rig import REAL, Z2, Rig
from .tensor import Tensor, as_shape, scale

SCALAR = ()


@dataclass(frozen=True, eq=False)
class LossFn:
    name: str
    para: ParaMorph

    def __post_init__(self):
        if self.para.output.shapes != (SCALAR,):
            raise ShapeError(f"loss payoff must be a single scalar wire, got {self.para.output!r}")

    @property
    def output(self) -> Port:
        """The prediction port the loss consumes."""
        return self.para.input

    @property
    def labels(self) -> Port:
        return self.para.param

    @property
    def payoff(self) -> Port:
        return self.para.output

    def __call__(self, y_p: tuple, y_t: tuple) -> float:
        return self.para.fwd(y_p, y_t)[0].item()


def _port_of(spec, rig: Rig) -> Port:
    if isinstance(spec, Port):
        return spec
    return Port((as_shape(spec),), rig)


def _sum_scalars(n: int, rig: Rig) -> MorphExpr:
    """Fold n scalar wires into one with the rig sum."""
    s = Port((SCALAR,), rig)
    if n == 1:
        return Id(s)
    out: MorphExpr = Sum(s)
    for _ in range(n - 2):
        out = seq(Par(out, Id(s)), Sum(s))
    return out


def _wirewise(p: Port, pair: Callable[[tuple, Rig], MorphExpr]) -> MorphExpr:
    """(y_1..y_k, t_1..t_k) -> sum_i pair(y_i, t_i), each pair map landing in a scalar."""
    k = len(p)
    order = []
    for i in range(k):
        order += [i, k + i]
    blocks = [pair(shape, p.rig) for shape in p.shapes]
    body = blocks[0]
    for b in blocks[1:]:
        body = Par(body, b)
    return seq(Perm(p + p, tuple(order)), body, _sum_scalars(k, p.rig))


def _loss(name: str, p: Port, pair) -> LossFn:
    body = _wirewise(p, pair)
    return LossFn(name, ParaMorph(p, p, body))


def _require(p: Port, rig: Rig, name: str):
    if p.rig is not rig:
        raise RigSupportError(f"{name} loss is only defined over {rig}")


def mse(shape, mean: bool = False) -> LossFn:
    """Half the summed squared error; ``mean=True`` also divides by the element count."""
    p = _port_of(shape, REAL)
    _require(p, REAL, "mse")
    count = sum(math.prod(s) for s in p.shapes)
    factor = 0.5 / count if mean else 0.5

    def pair(s, rig):
        return seq(Par(Id(Port((s,), rig)), Prim("neg", (s,), rig)),
                   Prim("bias", (s,), rig),
                   Copy(Port((s,), rig)),
                   Prim("mul", (s,), rig),
                   Prim("reduce_sum", (s,), rig),
                   Prim("scale", (SCALAR, factor), rig))
    return _loss("mse", p, pair)


def softargmax_cross_entropy(n) -> LossFn:
    """½ Σ_i S(y_t)_i ((y_p)_i − log S(y_p)_i) with S the softargmax."""
    p = _port_of(n, REAL)
    _require(p, REAL, "softargmax cross-entropy")

    def pair(s, rig):
        if len(s) != 1:
            raise ShapeError("softargmax cross-entropy needs vector wires")
        v = Port((s,), rig)
        # y_p -> y_p - log S(y_p)
        centred = seq(Copy(v),
                      Par(Id(v), seq(Prim("softargmax", (s[0],), rig), Prim("log", (s,), rig),
                                     Prim("neg", (s,), rig))),
                      Prim("bias", (s,), rig))
        return seq(Par(centred, Prim("softargmax", (s[0],), rig)),
                   Prim("mul", (s,), rig),
                   Prim("reduce_sum", (s,), rig),
                   Prim("scale", (SCALAR, 0.5), rig))
    return _loss("sce", p, pair)


def dot_loss(shape) -> LossFn:
    """y_p · y_t; with several wires the per-wire dot products are summed."""
    p = _port_of(shape, REAL)
    _require(p, REAL, "dot")

    def pair(s, rig):
        return seq(Prim("mul", (s,), rig), Prim("reduce_sum", (s,), rig))
    return _loss("dot", p, pair)


def xor_loss(shape) -> LossFn:
    """Bitwise XOR of prediction and label, folded to one payoff bit."""
    p = _port_of(shape, Z2)
    _require(p, Z2, "xor")

    def pair(s, rig):
        return seq(Sum(Port((s,), rig)), Prim("reduce_sum", (s,), rig))
    return _loss("xor", p, pair)


LOSSES = {"mse": mse, "sce": softargmax_cross_entropy, "dot": dot_loss, "xor": xor_loss}


def loss_by_name(name: str, port) -> LossFn:
    try:
        return LOSSES[name](port)
    except KeyError:
        raise CatalogueError(f"unknown loss {name!r}") from None


# --- learning rates ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LearningRate:
    kind: str
    value: float | None
    map: Callable[[Tensor], Tensor]

    def __call__(self, l):
        if isinstance(l, Tensor):
            return self.map(l)
        return self.map(Tensor(REAL, l)).item()

    def lens(self, payoff: Port) -> Lens:
        """The costate ``L -> I``: backward sends the payoff to its seed cotangent."""
        return lens(payoff, unit(payoff.rig), lambda x: (),
                    lambda x, d: (self.map(x[0]),), key="rate", additive=False)


def constant_rate(c: float) -> LearningRate:
    return LearningRate("constant", c, lambda l: Tensor(l.rig, l.data * 0 + c))


def identity_rate() -> LearningRate:
    return LearningRate("identity", None, lambda l: l)


def proportional_rate(eps: float) -> LearningRate:
    def fn(l):
        if l.rig is not REAL:
            raise RigSupportError("proportional learning rate needs the reals")
        return scale(eps, l)
    return LearningRate("proportional", eps, fn)


def rate_from_config(cfg: dict) -> LearningRate:
    kind = cfg.get("kind")
    if kind == "constant":
        return constant_rate(cfg["value"])
    if kind == "identity":
        return identity_rate()
    if kind == "proportional":
        return proportional_rate(cfg["value"])
    raise CatalogueError(f"unknown learning rate kind {kind!r}")


__all__ = ["LossFn", "LearningRate", "mse", "softargmax_cross_entropy", "dot_loss", "xor_loss",
           "loss_by_name", "constant_rate", "identity_rate", "proportional_rate",
           "rate_from_config", "LOSSES"]
