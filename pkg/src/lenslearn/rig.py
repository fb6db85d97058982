"""Commutative rigs: the reals (64-bit floats) and Z2 (bits).

A :class:`Rig` carries both scalar operations on :class:`RigValue` and the
vectorised numpy equivalents used by :mod:`lenslearn.tensor`.  Z2 addition is
XOR, multiplication is AND, and negation is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Rig:
    id: str
    dtype: Any
    vadd: Callable = None
    vmul: Callable = None
    vneg: Callable = None

    @property
    def zero(self) -> "RigValue":
        return RigValue(self.id, self.dtype.type(0))

    @property
    def one(self) -> "RigValue":
        return RigValue(self.id, self.dtype.type(1))

    def __repr__(self):
        return self.id

    def coerce(self, value) -> np.ndarray:
        arr = np.asarray(value)
        if self.id == "Z2":
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise ContractError(f"non-bit value for Z2: {value!r}")
            return arr.astype(np.uint8)
        return arr.astype(np.float64)


def _z2_neg(a):
    return np.asarray(a, dtype=np.uint8).copy()


REAL = Rig("Real", np.dtype(np.float64), np.add, np.multiply, np.negative)
Z2 = Rig("Z2", np.dtype(np.uint8), np.bitwise_xor, np.bitwise_and, _z2_neg)

RIGS = {"real": REAL, "z2": Z2}


def rig_by_name(name: str) -> Rig:
    try:
        return RIGS[name.lower()]
    except KeyError:
        raise ContractError(f"unknown rig {name!r}; expected one of {sorted(RIGS)}") from None


@dataclass(frozen=True)
class RigValue:
    rig_id: str
    payload: Any

    def __float__(self):
        return float(self.payload)

    def __int__(self):
        return int(self.payload)


def value(r: Rig, x) -> RigValue:
    return RigValue(r.id, r.coerce(x)[()])


def _check(r: Rig, *vals: RigValue):
    for v in vals:
        if v.rig_id != r.id:
            raise ContractError(f"value from rig {v.rig_id} used with rig {r.id}")


def rig_add(r: Rig, a: RigValue, b: RigValue) -> RigValue:
    _check(r, a, b)
    return RigValue(r.id, r.vadd(a.payload, b.payload))


def rig_mul(r: Rig, a: RigValue, b: RigValue) -> RigValue:
    _check(r, a, b)
    return RigValue(r.id, r.vmul(a.payload, b.payload))


def rig_neg(r: Rig, a: RigValue) -> RigValue:
    _check(r, a)
    if r.id == "Z2":
        return a
    return RigValue(r.id, r.vneg(a.payload))
