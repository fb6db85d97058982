"""Dense, immutable, row-major tensors over a rig.

Storage is a read-only numpy array (float64 for the reals, uint8 bits for
Z2).  There is no broadcasting: every binary operation demands identical
shapes, and scalar-times-tensor goes through :func:`scale`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ContractError, ShapeError
from .rig import REAL, Rig, RigValue, Z2

Shape = tuple

MAX_RANK = 3


def as_shape(dims) -> Shape:
    if isinstance(dims, int):
        dims = (dims,)
    shape = tuple(int(d) for d in dims)
    if any(d < 0 for d in shape):
        raise ShapeError(f"negative extent in shape {shape}")
    if len(shape) > MAX_RANK:
        raise ShapeError(f"rank {len(shape)} exceeds the supported maximum of {MAX_RANK}")
    return shape


class Tensor:
    __slots__ = ("rig", "data")

    def __init__(self, rig: Rig, data):
        arr = rig.coerce(data)
        if arr.ndim > MAX_RANK:
            raise ShapeError(f"rank {arr.ndim} exceeds the supported maximum of {MAX_RANK}")
        # coerce always copies, so freezing never aliases caller memory
        arr.flags.writeable = False
        self.rig = rig
        self.data = arr

    @property
    def shape(self) -> Shape:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor({self.rig}, {self.data.tolist()!r})"

    def __getitem__(self, idx) -> RigValue:
        return RigValue(self.rig.id, self.data[idx])

    def item(self):
        return self.data.item()

    def tolist(self):
        return self.data.tolist()

    def flat(self) -> list:
        return [RigValue(self.rig.id, v) for v in self.data.reshape(-1)]

    def __eq__(self, other):
        return (isinstance(other, Tensor) and self.rig == other.rig
                and self.shape == other.shape and np.array_equal(self.data, other.data))

    __hash__ = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(other))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return hadamard(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(values, rig: Rig = REAL) -> Tensor:
    return Tensor(rig, values)


def zeros(r: Rig, s) -> Tensor:
    return Tensor(r, np.zeros(as_shape(s), dtype=r.dtype))


def ones(r: Rig, s) -> Tensor:
    return Tensor(r, np.ones(as_shape(s), dtype=r.dtype))


def _same_rig(*ts: Tensor) -> Rig:
    r = ts[0].rig
    for t in ts[1:]:
        if t.rig != r:
            raise ContractError(f"rig mismatch: {r} vs {t.rig}")
    return r


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    r = _same_rig(a, b)
    _same_shape(a, b, "add")
    return Tensor(r, r.vadd(a.data, b.data))


def neg(a: Tensor) -> Tensor:
    return Tensor(a.rig, a.rig.vneg(a.data))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    r = _same_rig(a, b)
    _same_shape(a, b, "hadamard")
    return Tensor(r, r.vmul(a.data, b.data))


def scale(c, a: Tensor) -> Tensor:
    if isinstance(c, RigValue):
        if c.rig_id != a.rig.id:
            raise ContractError(f"rig mismatch: scalar from {c.rig_id}, tensor over {a.rig}")
        c = c.payload
    c = a.rig.coerce(c)
    if c.ndim:
        raise ShapeError("scale expects a scalar coefficient")
    return Tensor(a.rig, a.rig.vmul(c, a.data))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    r = _same_rig(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    if r is Z2:
        return Tensor(r, (a.data.astype(np.int64) @ b.data.astype(np.int64)) & 1)
    return Tensor(r, a.data @ b.data)


def outer(u: Tensor, v: Tensor) -> Tensor:
    r = _same_rig(u, v)
    if u.data.ndim != 1 or v.data.ndim != 1:
        raise ShapeError(f"outer expects rank-1 operands, got {u.shape} and {v.shape}")
    return Tensor(r, r.vmul(u.data[:, None], v.data[None, :]))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a rank-2 tensor, got {a.shape}")
    return Tensor(a.rig, a.data.T)


def reduce_sum(a: Tensor, axis=None) -> Tensor:
    if a.rig is Z2:
        return Tensor(a.rig, np.bitwise_xor.reduce(a.data, axis=axis) if a.size else
                      np.zeros(np.sum(a.data, axis=axis).shape, dtype=np.uint8))
    return Tensor(a.rig, np.sum(a.data, axis=axis))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of nothing")
    r = _same_rig(*parts)
    try:
        return Tensor(r, np.concatenate([p.data for p in parts], axis=axis))
    except (ValueError, np.exceptions.AxisError) as exc:
        raise ShapeError(f"concat: {exc}") from None


def split(a: Tensor, sizes: Sequence[int], axis: int = 0) -> tuple:
    if a.data.ndim == 0 or sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split: sizes {list(sizes)} do not cover axis {axis} of {a.shape}")
    cuts = np.cumsum(sizes)[:-1]
    return tuple(Tensor(a.rig, piece) for piece in np.split(a.data, cuts, axis=axis))


def allclose(a: Tensor, b: Tensor, atol: float = 0.0) -> bool:
    if a.shape != b.shape or a.rig != b.rig:
        return False
    if a.rig is Z2 or atol == 0.0:
        return bool(np.array_equal(a.data, b.data))
    return bool(np.all(np.abs(a.data - b.data) <= atol))


def max_abs_diff(xs, ys) -> float:
    """Largest absolute entry difference between two equally shaped tuples of tensors."""
    worst = 0.0
    for a, b in zip(xs, ys, strict=True):
        if a.shape != b.shape:
            raise ShapeError(f"cannot compare {a.shape} with {b.shape}")
        if a.size:
            worst = max(worst, float(np.max(np.abs(a.data.astype(np.float64) - b.data.astype(np.float64)))))
    return worst
