"""Lenses whose backward pass is additive in the cotangent.

A value crossing a :class:`Port` is a tuple of tensors, one per wire; the
empty tuple is the unit port.  Every lens exposes two evaluation interfaces:

* ``fwd(x)`` / ``bwd(x, dy)``: the plain pair of maps.
* ``fwd_res(x) -> (y, residual)`` / ``bwd_res(residual, dy)``: a combined
  evaluation in which the forward pass leaves behind whatever the backward
  pass needs.

Sequential composites come in two operational modes.  A memoised composite
stores the constituent residuals (the constituent inputs) and never reruns a
forward pass during backward.  A checkpointed composite keeps only its own
input and recomputes ``f.fwd`` inside the backward pass.  Both denote the
same lens.

Call counts are gathered per evaluation with :func:`instrument`.
"""
from __future__ import annotations

import contextvars
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .errors import CompositionError, ContractError, ShapeError
from .rig import Rig
from .tensor import Tensor, add, as_shape, hadamard, zeros


class Mode(str, Enum):
    CHECKPOINTED = "checkpointed"
    MEMOISED = "memoised"


@dataclass(frozen=True)
class Port:
    """A product of tensor wires over one rig.  Forward and backward shapes coincide."""

    shapes: tuple
    rig: Rig

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(as_shape(s) for s in self.shapes))

    @property
    def fwd_shape(self):
        return self.shapes

    bwd_shape = fwd_shape

    def __len__(self):
        return len(self.shapes)

    def __add__(self, other: "Port") -> "Port":
        if self.shapes and other.shapes and self.rig != other.rig:
            raise ContractError(f"rig mismatch: {self.rig} vs {other.rig}")
        return Port(self.shapes + other.shapes, self.rig if self.shapes else other.rig)

    def __eq__(self, other):
        if not isinstance(other, Port):
            return NotImplemented
        if not self.shapes and not other.shapes:
            return True
        return self.shapes == other.shapes and self.rig == other.rig

    def __hash__(self):
        return hash(self.shapes)

    def __repr__(self):
        if not self.shapes:
            return "<I>"
        wires = " (x) ".join("[" + ",".join(map(str, s)) + "]" for s in self.shapes)
        return f"<{self.rig} {wires}>"

    def zeros(self) -> tuple:
        return tuple(zeros(self.rig, s) for s in self.shapes)

    def check(self, value, what="value"):
        if not isinstance(value, tuple) or len(value) != len(self.shapes):
            raise ShapeError(f"{what}: expected {len(self.shapes)} wire(s) for {self!r}, got {value!r}")
        for i, (t, s) in enumerate(zip(value, self.shapes)):
            if not isinstance(t, Tensor):
                raise ShapeError(f"{what}: wire {i} is not a tensor")
            if t.shape != s:
                raise ShapeError(f"{what}: wire {i} has shape {t.shape}, port expects {s}")
            if t.rig != self.rig:
                raise ContractError(f"{what}: wire {i} is over {t.rig}, port is over {self.rig}")

    def take(self, value: tuple) -> tuple:
        """Split ``value`` into (the wires of this port, the rest)."""
        n = len(self.shapes)
        return value[:n], value[n:]


def port(rig: Rig, *shapes) -> Port:
    return Port(tuple(shapes), rig)


def unit(rig: Rig) -> Port:
    return Port((), rig)


def add_values(a: tuple, b: tuple) -> tuple:
    return tuple(add(x, y) for x, y in zip(a, b, strict=True))


# --- instrumentation ---------------------------------------------------------

@dataclass
class EvalReport:
    fwd_calls: Counter = field(default_factory=Counter)
    bwd_calls: Counter = field(default_factory=Counter)
    live_residuals: int = 0
    peak_residuals: int = 0

    def hold(self, n):
        self.live_residuals += n
        self.peak_residuals = max(self.peak_residuals, self.live_residuals)

    def release(self, n):
        self.live_residuals -= n


_current: contextvars.ContextVar = contextvars.ContextVar("lenslearn_report", default=None)


@contextmanager
def instrument():
    """Collect call counts for every lens evaluated inside the block."""
    report = EvalReport()
    token = _current.set(report)
    try:
        yield report
    finally:
        _current.reset(token)


# --- lenses ------------------------------------------------------------------

class Lens:
    dom: Port
    cod: Port
    additive: bool = True

    def fwd(self, x: tuple) -> tuple:
        raise NotImplementedError

    def bwd(self, x: tuple, dy: tuple) -> tuple:
        raise NotImplementedError

    def fwd_res(self, x: tuple):
        raise NotImplementedError

    def bwd_res(self, res, dy: tuple) -> tuple:
        raise NotImplementedError

    def __call__(self, x: tuple) -> tuple:
        return self.fwd(x)

    def __rshift__(self, other: "Lens") -> "Lens":
        return compose_lens(self, other)


class PrimLens(Lens):
    """A lens given directly by a pair of functions.  Its residual is its input."""

    def __init__(self, dom: Port, cod: Port, fwd: Callable, bwd: Callable, key: str = "prim",
                 additive: bool = True):
        self.dom, self.cod = dom, cod
        self._fwd, self._bwd = fwd, bwd
        self.key = key
        self.additive = additive

    def __repr__(self):
        return f"PrimLens({self.key}: {self.dom!r} -> {self.cod!r})"

    def fwd(self, x):
        report = _current.get()
        if report is not None:
            report.fwd_calls[self.key] += 1
        return self._fwd(x)

    def bwd(self, x, dy):
        report = _current.get()
        if report is not None:
            report.bwd_calls[self.key] += 1
        return self._bwd(x, dy)

    def fwd_res(self, x):
        y = self.fwd(x)
        report = _current.get()
        if report is not None:
            report.hold(len(x))
        return y, x

    def bwd_res(self, res, dy):
        report = _current.get()
        if report is not None:
            report.release(len(res))
        return self.bwd(res, dy)


class Composite(Lens):
    def __init__(self, f: Lens, g: Lens, mode: Mode):
        self.f, self.g, self.mode = f, g, Mode(mode)
        self.dom, self.cod = f.dom, g.cod
        self.additive = f.additive and g.additive

    def __repr__(self):
        return f"({self.f!r} ; {self.g!r})[{self.mode.value}]"

    def fwd(self, x):
        return self.g.fwd(self.f.fwd(x))

    def bwd(self, x, dz):
        if self.mode is Mode.CHECKPOINTED:
            return self.f.bwd(x, self.g.bwd(self.f.fwd(x), dz))
        _, res = self.fwd_res(x)
        return self.bwd_res(res, dz)

    def fwd_res(self, x):
        if self.mode is Mode.CHECKPOINTED:
            report = _current.get()
            if report is not None:
                report.hold(len(x))
            return self.fwd(x), x
        y, rf = self.f.fwd_res(x)
        z, rg = self.g.fwd_res(y)
        return z, (rf, rg)

    def bwd_res(self, res, dz):
        if self.mode is Mode.CHECKPOINTED:
            report = _current.get()
            if report is not None:
                report.release(len(res))
            return self.bwd(res, dz)
        rf, rg = res
        return self.f.bwd_res(rf, self.g.bwd_res(rg, dz))


class Parallel(Lens):
    def __init__(self, f: Lens, g: Lens):
        self.f, self.g = f, g
        self.dom, self.cod = f.dom + g.dom, f.cod + g.cod
        self.additive = f.additive and g.additive

    def __repr__(self):
        return f"({self.f!r} (x) {self.g!r})"

    def fwd(self, x):
        a, c = self.f.dom.take(x)
        return self.f.fwd(a) + self.g.fwd(c)

    def bwd(self, x, dy):
        a, c = self.f.dom.take(x)
        da, dc = self.f.cod.take(dy)
        return self.f.bwd(a, da) + self.g.bwd(c, dc)

    def fwd_res(self, x):
        a, c = self.f.dom.take(x)
        b, rf = self.f.fwd_res(a)
        d, rg = self.g.fwd_res(c)
        return b + d, (rf, rg)

    def bwd_res(self, res, dy):
        rf, rg = res
        da, dc = self.f.cod.take(dy)
        return self.f.bwd_res(rf, da) + self.g.bwd_res(rg, dc)


def lens(dom: Port, cod: Port, fwd: Callable, bwd: Callable, key="lens", additive=True) -> Lens:
    return PrimLens(dom, cod, fwd, bwd, key=key, additive=additive)


def identity_lens(p: Port, key="id") -> Lens:
    return PrimLens(p, p, lambda x: x, lambda x, dy: dy, key=key)


def compose_lens(f: Lens, g: Lens, mode: Mode = Mode.MEMOISED) -> Lens:
    if f.cod != g.dom:
        raise CompositionError(f"cannot compose: codomain {f.cod!r} does not match domain {g.dom!r}")
    return Composite(f, g, mode)


def chain(lenses: Sequence[Lens], mode: Mode = Mode.MEMOISED) -> Lens:
    """Right-nested composite l1 ; (l2 ; (... ; ln))."""
    if not lenses:
        raise CompositionError("empty chain")
    out = lenses[-1]
    for f in reversed(lenses[:-1]):
        out = compose_lens(f, out, mode)
    return out


def par_lens(f: Lens, g: Lens) -> Lens:
    if f.dom.shapes and g.dom.shapes and f.dom.rig != g.dom.rig:
        raise ContractError(f"rig mismatch in parallel composition: {f.dom.rig} vs {g.dom.rig}")
    return Parallel(f, g)


def par_all(lenses: Sequence[Lens]) -> Lens:
    out = lenses[0]
    for g in lenses[1:]:
        out = par_lens(out, g)
    return out


def forget_backward(f: Lens) -> Callable:
    return f.fwd


def run(f: Lens, x: tuple, dy: tuple):
    """One combined forward+backward evaluation; returns (y, dx, report)."""
    with instrument() as report:
        y, res = f.fwd_res(x)
        dx = f.bwd_res(res, dy)
    return y, dx, report


# --- structural lenses -------------------------------------------------------

def copy_lens(p: Port, key="copy") -> Lens:
    def fwd(x):
        return x + x

    def bwd(x, d):
        a, b = p.take(d)
        return add_values(a, b)
    return PrimLens(p, p + p, fwd, bwd, key=key)


def sum_lens(p: Port, key="sum") -> Lens:
    def fwd(x):
        a, b = p.take(x)
        return add_values(a, b)

    def bwd(x, d):
        return d + d
    return PrimLens(p + p, p, fwd, bwd, key=key)


def delete_lens(p: Port, key="delete") -> Lens:
    return PrimLens(p, unit(p.rig), lambda x: (), lambda x, d: p.zeros(), key=key)


def constant_lens(c, key="const") -> Lens:
    value = (c,) if isinstance(c, Tensor) else tuple(c)
    cod = Port(tuple(t.shape for t in value), value[0].rig)
    return PrimLens(unit(cod.rig), cod, lambda x: value, lambda x, d: (), key=key)


def mul_lens(rig: Rig, shape, key="mul") -> Lens:
    """Pointwise product (x, y) -> x*y with backward ((x, y), a) -> (a*y, a*x)."""
    p = port(rig, shape)

    def fwd(x):
        return (hadamard(x[0], x[1]),)

    def bwd(x, d):
        return (hadamard(d[0], x[1]), hadamard(d[0], x[0]))
    return PrimLens(p + p, p, fwd, bwd, key=key)


def proj_lens(ports: Sequence[Port], index: int, key="proj") -> Lens:
    dom = ports[0]
    for q in ports[1:]:
        dom = dom + q
    start = sum(len(q) for q in ports[:index])
    stop = start + len(ports[index])

    def fwd(x):
        return x[start:stop]

    def bwd(x, d):
        zs = dom.zeros()
        return zs[:start] + tuple(d) + zs[stop:]
    return PrimLens(dom, ports[index], fwd, bwd, key=key)


def perm_lens(p: Port, order: Sequence[int], key="perm") -> Lens:
    """Reorder wires: output wire i is input wire order[i]."""
    order = tuple(order)
    if sorted(order) != list(range(len(p))):
        raise ShapeError(f"{order} is not a permutation of {len(p)} wires")
    cod = Port(tuple(p.shapes[i] for i in order), p.rig)
    inverse = [0] * len(order)
    for out_pos, in_pos in enumerate(order):
        inverse[in_pos] = out_pos

    def fwd(x):
        return tuple(x[i] for i in order)

    def bwd(x, d):
        return tuple(d[j] for j in inverse)
    return PrimLens(p, cod, fwd, bwd, key=key)
