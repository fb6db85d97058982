"""Combinator trees describing morphisms of the base category.

Nodes are shape-checked when constructed, so an ill-typed tree cannot
exist.  ``dom`` and ``cod`` are derived bottom-up.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ExprTypeError, ShapeError
from ..lens import Port, unit
from ..rig import REAL, Rig
from ..tensor import Tensor
from . import primitives


class MorphExpr:
    dom: Port
    cod: Port

    def __rshift__(self, other: "MorphExpr") -> "MorphExpr":
        return Seq(self, other)

    def __or__(self, other: "MorphExpr") -> "MorphExpr":
        return Par(self, other)

    @property
    def rig(self) -> Rig:
        return (self.dom if len(self.dom) else self.cod).rig


def _set(obj, **kw):
    for k, v in kw.items():
        object.__setattr__(obj, k, v)


@dataclass(frozen=True, eq=False)
class Prim(MorphExpr):
    name: str
    args: tuple = ()
    rig: Rig = REAL
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        args = self.args if isinstance(self.args, tuple) else (self.args,)
        dom, cod = primitives.signature(self.name, self.rig, args)
        _set(self, args=args, dom=dom, cod=cod)


@dataclass(frozen=True, eq=False)
class Seq(MorphExpr):
    left: MorphExpr
    right: MorphExpr
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        if self.left.cod != self.right.dom:
            raise ExprTypeError(
                f"codomain {self.left.cod!r} of the left factor does not match "
                f"domain {self.right.dom!r} of the right factor", "seq")
        _set(self, dom=self.left.dom, cod=self.right.cod)


@dataclass(frozen=True, eq=False)
class Par(MorphExpr):
    left: MorphExpr
    right: MorphExpr
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        try:
            _set(self, dom=self.left.dom + self.right.dom, cod=self.left.cod + self.right.cod)
        except Exception as exc:
            raise ExprTypeError(str(exc), "par") from None


@dataclass(frozen=True, eq=False)
class Id(MorphExpr):
    port: Port

    @property
    def dom(self):
        return self.port

    @property
    def cod(self):
        return self.port


@dataclass(frozen=True, eq=False)
class Copy(MorphExpr):
    port: Port

    @property
    def dom(self):
        return self.port

    @property
    def cod(self):
        return self.port + self.port


@dataclass(frozen=True, eq=False)
class Sum(MorphExpr):
    port: Port

    @property
    def dom(self):
        return self.port + self.port

    @property
    def cod(self):
        return self.port


@dataclass(frozen=True, eq=False)
class Delete(MorphExpr):
    port: Port

    @property
    def dom(self):
        return self.port

    @property
    def cod(self):
        return unit(self.port.rig)


@dataclass(frozen=True, eq=False)
class Const(MorphExpr):
    value: tuple
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        value = (self.value,) if isinstance(self.value, Tensor) else tuple(self.value)
        if not value or not all(isinstance(t, Tensor) for t in value):
            raise ExprTypeError("a constant needs at least one tensor", "const")
        rig = value[0].rig
        if any(t.rig != rig for t in value):
            raise ExprTypeError("constant wires over different rigs", "const")
        _set(self, value=value, dom=unit(rig), cod=Port(tuple(t.shape for t in value), rig))


@dataclass(frozen=True, eq=False)
class Proj(MorphExpr):
    index: int
    ports: tuple
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        ports = tuple(self.ports)
        if not 0 <= self.index < len(ports):
            raise ExprTypeError(f"projection index {self.index} out of range for {len(ports)} factors", "proj")
        dom = ports[0]
        for q in ports[1:]:
            dom = dom + q
        _set(self, ports=ports, dom=dom, cod=ports[self.index])


@dataclass(frozen=True, eq=False)
class Perm(MorphExpr):
    """Wire permutation: output wire i is input wire ``order[i]``."""

    port: Port
    order: tuple
    dom: Port = field(init=False, repr=False)
    cod: Port = field(init=False, repr=False)

    def __post_init__(self):
        order = tuple(self.order)
        if sorted(order) != list(range(len(self.port))):
            raise ExprTypeError(f"{order} is not a permutation of {len(self.port)} wires", "perm")
        _set(self, order=order, dom=self.port,
             cod=Port(tuple(self.port.shapes[i] for i in order), self.port.rig))


def seq(*es: MorphExpr) -> MorphExpr:
    """Right-nested sequential composite of one or more expressions."""
    if not es:
        raise ExprTypeError("seq needs at least one expression")
    out = es[-1]
    for i in range(len(es) - 2, -1, -1):
        try:
            out = Seq(es[i], out)
        except ExprTypeError as exc:
            raise ExprTypeError(str(exc), f"seq[{i}]") from None
    return out


def par(*es: MorphExpr) -> MorphExpr:
    if not es:
        raise ExprTypeError("par needs at least one expression")
    out = es[0]
    for e in es[1:]:
        out = Par(out, e)
    return out


def prim(name: str, *args, rig: Rig = REAL) -> Prim:
    return Prim(name, tuple(args), rig)


def copy_n(p: Port, n: int) -> MorphExpr:
    """The n-fold copy P -> P^n."""
    if n < 1:
        raise ShapeError("n-fold copy needs n >= 1")
    out: MorphExpr = Id(p)
    for k in range(1, n):
        # P -> P (x) P^k built as copy ; (id (x) previous)
        out = Seq(Copy(p), Par(Id(p), out))
    return out


def swap(a: Port, b: Port) -> MorphExpr:
    na, nb = len(a), len(b)
    return Perm(a + b, tuple(range(na, na + nb)) + tuple(range(na)))


def walk(e: MorphExpr, path: str = ""):
    """Yield (path, node) for every node in the tree, parents first."""
    yield path, e
    if isinstance(e, (Seq, Par)):
        yield from walk(e.left, path + "0")
        yield from walk(e.right, path + "1")


def size(e: MorphExpr) -> int:
    return sum(1 for _ in walk(e))


def depth(e: MorphExpr) -> int:
    if isinstance(e, (Seq, Par)):
        return 1 + max(depth(e.left), depth(e.right))
    return 0
