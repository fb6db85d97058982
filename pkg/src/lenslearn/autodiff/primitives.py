"""The primitive catalogue: forward maps paired with their reverse derivatives.

Every entry's backward map is the transposed Jacobian action, and therefore
linear in the cotangent.  Argument conventions (the ``args`` tuple):

=================  ===========================  ==============================
name               args                         wires
=================  ===========================  ==============================
identity, sigmoid  (shape,)                     [s] -> [s]
tanh, relu, gelu
exp, log, neg
leaky_relu         (shape, slope=0.01)          [s] -> [s]
scale              (shape, c)                   [s] -> [s]
softargmax         (n,)                         [n] -> [n]
linear             (in, out)                    [in], [in,out] -> [out]
matmul             (m, k, n)                    [m,k], [k,n] -> [m,n]
matvec             (m, n)                       [m,n], [n] -> [m]
transpose          (m, n)                       [m,n] -> [n,m]
bias               (shape,)                     [s], [s] -> [s]
bias_rows          (b, n)                       [b,n], [n] -> [b,n]
bias_cols          (n, m)                       [n,m], [n] -> [n,m]
mul                (shape,)                     [s], [s] -> [s]
reduce_sum         (shape,)                     [s] -> []
stack              (m, n)                       m x [n] -> [m,n]
unstack            (m, n)                       [m,n] -> m x [n]
=================  ===========================  ==============================
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import CatalogueError, ExprTypeError, RigSupportError
from ..lens import port
from ..rig import REAL, Z2, Rig
from ..tensor import (Tensor, add, as_shape, hadamard, matmul, neg, outer, reduce_sum,
                      scale, transpose)

BOTH = frozenset({"Real", "Z2"})
REAL_ONLY = frozenset({"Real"})


@dataclass(frozen=True)
class PrimSpec:
    name: str
    rigs: frozenset
    signature: Callable  # (rig, *args) -> (dom, cod)
    fwd: Callable        # (args, xs) -> ys
    bwd: Callable        # (args, xs, dys) -> dxs
    activation: bool = False


CATALOGUE: dict = {}


def register(spec: PrimSpec) -> PrimSpec:
    CATALOGUE[spec.name] = spec
    return spec


def lookup(name: str) -> PrimSpec:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise CatalogueError(f"unknown primitive {name!r}") from None


ACTIVATIONS = ("identity", "sigmoid", "tanh", "relu", "leaky_relu", "gelu")


def _dims(*ds):
    for d in ds:
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise ExprTypeError(f"dimension must be a positive integer, got {d!r}")


def _R(a) -> Tensor:
    return Tensor(REAL, a)


# --- pointwise maps ----------------------------------------------------------

def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def _pointwise(name, f, df, rigs=REAL_ONLY, activation=False, extra=0):
    """Register a unary pointwise map; ``df(x, *extra_args)`` is its derivative."""
    def signature(rig, shape, *rest):
        if len(rest) > extra:
            raise ExprTypeError(f"{name} takes at most {extra + 1} argument(s)")
        p = port(rig, as_shape(shape))
        return p, p

    def fwd(args, xs):
        return (_R(f(xs[0].data, *args[1:])),)

    def bwd(args, xs, ds):
        return (_R(ds[0].data * df(xs[0].data, *args[1:])),)
    register(PrimSpec(name, rigs, signature, fwd, bwd, activation=activation))


_pointwise("identity", lambda x: x, lambda x: np.ones_like(x), activation=True)
_pointwise("sigmoid", _sigmoid, lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)), activation=True)
_pointwise("tanh", np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, activation=True)
# non-smooth points take the left derivative: relu'(0) = 0, leaky_relu'(0) = slope
_pointwise("relu", lambda x: np.maximum(0.0, x), lambda x: (x > 0).astype(np.float64), activation=True)
_pointwise("leaky_relu",
           lambda x, a=0.01: np.where(x > 0, x, a * x),
           lambda x, a=0.01: np.where(x > 0, 1.0, a), activation=True, extra=1)


def _gelu(x):
    return x * _sigmoid(1.702 * x)


def _gelu_grad(x):
    s = _sigmoid(1.702 * x)
    return s + 1.702 * x * s * (1.0 - s)


_pointwise("gelu", _gelu, _gelu_grad, activation=True)
_pointwise("exp", np.exp, np.exp)
_pointwise("log", np.log, lambda x: 1.0 / x)


def _scale_sig(rig, shape, c):
    p = port(rig, as_shape(shape))
    return p, p


register(PrimSpec(
    "scale", REAL_ONLY, _scale_sig,
    lambda a, xs: (scale(float(a[1]), xs[0]),),
    lambda a, xs, ds: (scale(float(a[1]), ds[0]),)))


def _unary_sig(rig, shape):
    p = port(rig, as_shape(shape))
    return p, p


# negation is the identity over Z2
register(PrimSpec("neg", BOTH, _unary_sig,
                  lambda a, xs: (neg(xs[0]),),
                  lambda a, xs, ds: (neg(ds[0]),)))


# --- softargmax --------------------------------------------------------------

def softargmax_array(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / np.sum(e)


def _softargmax_sig(rig, n):
    _dims(n)
    p = port(rig, (n,))
    return p, p


def _softargmax_bwd(args, xs, ds):
    s = softargmax_array(xs[0].data)
    v = ds[0].data
    return (_R(s * (v - np.dot(s, v))),)


register(PrimSpec("softargmax", REAL_ONLY, _softargmax_sig,
                  lambda a, xs: (_R(softargmax_array(xs[0].data)),), _softargmax_bwd))


# --- linear algebra ----------------------------------------------------------

def _linear_sig(rig, n_in, n_out):
    _dims(n_in, n_out)
    return port(rig, (n_in,), (n_in, n_out)), port(rig, (n_out,))


def _vec_to_col(t: Tensor) -> Tensor:
    return Tensor(t.rig, t.data[:, None])


def _col_to_vec(t: Tensor) -> Tensor:
    return Tensor(t.rig, t.data[:, 0])


def _linear_fwd(args, xs):
    x, w = xs
    return (_col_to_vec(matmul(transpose(w), _vec_to_col(x))),)


def _linear_bwd(args, xs, ds):
    # input gradient W dy; weight gradient outer(x, dy), same layout as W
    x, w = xs
    dy = ds[0]
    return (_col_to_vec(matmul(w, _vec_to_col(dy))), outer(x, dy))


register(PrimSpec("linear", BOTH, _linear_sig, _linear_fwd, _linear_bwd))


def _matmul_sig(rig, m, k, n):
    _dims(m, k, n)
    return port(rig, (m, k), (k, n)), port(rig, (m, n))


def _matmul_bwd(args, xs, ds):
    a, b = xs
    d = ds[0]
    return (matmul(d, transpose(b)), matmul(transpose(a), d))


register(PrimSpec("matmul", BOTH, _matmul_sig,
                  lambda args, xs: (matmul(xs[0], xs[1]),), _matmul_bwd))


def _matvec_sig(rig, m, n):
    _dims(m, n)
    return port(rig, (m, n), (n,)), port(rig, (m,))


def _matvec_fwd(args, xs):
    a, v = xs
    return (_col_to_vec(matmul(a, _vec_to_col(v))),)


def _matvec_bwd(args, xs, ds):
    a, v = xs
    d = ds[0]
    return (outer(d, v), _col_to_vec(matmul(transpose(a), _vec_to_col(d))))


register(PrimSpec("matvec", BOTH, _matvec_sig, _matvec_fwd, _matvec_bwd))


def _transpose_sig(rig, m, n):
    _dims(m, n)
    return port(rig, (m, n)), port(rig, (n, m))


register(PrimSpec("transpose", BOTH, _transpose_sig,
                  lambda a, xs: (transpose(xs[0]),),
                  lambda a, xs, ds: (transpose(ds[0]),)))


# --- additive structure ------------------------------------------------------

def _binary_pointwise_sig(rig, shape):
    p = port(rig, as_shape(shape))
    return p + p, p


register(PrimSpec("bias", BOTH, _binary_pointwise_sig,
                  lambda a, xs: (add(xs[0], xs[1]),),
                  lambda a, xs, ds: (ds[0], ds[0])))

register(PrimSpec("mul", BOTH, _binary_pointwise_sig,
                  lambda a, xs: (hadamard(xs[0], xs[1]),),
                  lambda a, xs, ds: (hadamard(ds[0], xs[1]), hadamard(ds[0], xs[0]))))


def _bias_rows_sig(rig, b, n):
    _dims(b, n)
    return port(rig, (b, n), (n,)), port(rig, (b, n))


def _bias_cols_sig(rig, n, m):
    _dims(n, m)
    return port(rig, (n, m), (n,)), port(rig, (n, m))


def _broadcast(t: Tensor, axis: int, reps: int) -> Tensor:
    return Tensor(t.rig, np.repeat(np.expand_dims(t.data, axis), reps, axis=axis))


register(PrimSpec(
    "bias_rows", BOTH, _bias_rows_sig,
    lambda a, xs: (add(xs[0], _broadcast(xs[1], 0, a[0])),),
    lambda a, xs, ds: (ds[0], reduce_sum(ds[0], axis=0))))

register(PrimSpec(
    "bias_cols", BOTH, _bias_cols_sig,
    lambda a, xs: (add(xs[0], _broadcast(xs[1], 1, a[1])),),
    lambda a, xs, ds: (ds[0], reduce_sum(ds[0], axis=1))))


def _reduce_sum_sig(rig, shape):
    return port(rig, as_shape(shape)), port(rig, ())


def _reduce_sum_bwd(args, xs, ds):
    shape = xs[0].shape
    return (Tensor(ds[0].rig, np.broadcast_to(ds[0].data, shape).copy()),)


register(PrimSpec("reduce_sum", BOTH, _reduce_sum_sig,
                  lambda a, xs: (reduce_sum(xs[0]),), _reduce_sum_bwd))


# --- restructuring -----------------------------------------------------------

def _stack_sig(rig, m, n):
    _dims(m, n)
    return port(rig, *[(n,)] * m), port(rig, (m, n))


def _unstack_sig(rig, m, n):
    dom, cod = _stack_sig(rig, m, n)
    return cod, dom


def _stack(xs):
    return (Tensor(xs[0].rig, np.stack([x.data for x in xs])),)


def _unstack(t):
    return tuple(Tensor(t.rig, row) for row in t.data)


register(PrimSpec("stack", BOTH, _stack_sig,
                  lambda a, xs: _stack(xs), lambda a, xs, ds: _unstack(ds[0])))
register(PrimSpec("unstack", BOTH, _unstack_sig,
                  lambda a, xs: _unstack(xs[0]), lambda a, xs, ds: _stack(ds)))


# --- fault injection ---------------------------------------------------------

@contextmanager
def mutated(name: str):
    """Temporarily flip the sign of one primitive's backward map.

    Lenses built inside the block pick up the faulty rule; used to show that
    the property suites notice a wrong derivative.
    """
    original = lookup(name)

    def flipped(args, xs, ds):
        return tuple(neg(t) for t in original.bwd(args, xs, ds))
    CATALOGUE[name] = replace(original, bwd=flipped)
    try:
        yield
    finally:
        CATALOGUE[name] = original


def signature(name: str, rig: Rig, args: tuple):
    spec = lookup(name)
    if rig.id not in spec.rigs:
        raise RigSupportError(f"primitive {name!r} is not defined over {rig}")
    try:
        return spec.signature(rig, *args)
    except TypeError as exc:
        raise ExprTypeError(f"bad arguments {args!r} for primitive {name!r}: {exc}") from None


__all__ = ["PrimSpec", "CATALOGUE", "ACTIVATIONS", "register", "lookup", "mutated",
           "signature", "softargmax_array", "REAL", "Z2"]
