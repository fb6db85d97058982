"""Optimisers as lenses from (state, parameter) to parameter.

The forward map hands a parameter to the model (Nesterov's lookahead lives
here); the backward map consumes ``(s, p)`` together with the parameter
gradient ``p'`` and returns the next ``(s, p)``.  State is threaded by the
caller and never stored in the lens.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RigSupportError
from .lens import Lens, Port, lens, par_lens, perm_lens, unit
from .rig import REAL
from .tensor import Tensor, add, hadamard, neg, scale


@dataclass(frozen=True, eq=False)
class Optimiser:
    name: str
    state: Port
    param: Port
    lens: Lens

    @property
    def additive(self) -> bool:
        return self.lens.additive

    def init_state(self) -> tuple:
        return self.state.zeros()

    def lookahead(self, s: tuple, p: tuple) -> tuple:
        return self.lens.fwd(tuple(s) + tuple(p))

    def update(self, s: tuple, p: tuple, grad: tuple):
        """Return (new state, new parameter)."""
        out = self.lens.bwd(tuple(s) + tuple(p), tuple(grad))
        return self.state.take(out)


def _as_port(p, rig=REAL) -> Port:
    if isinstance(p, Port):
        return p
    return Port((tuple(p) if not isinstance(p, int) else (p,),), rig)


def _real_only(p: Port, what: str):
    if len(p) and p.rig is not REAL:
        raise RigSupportError(f"{what} is only defined over the reals")


def gradient_ascent(param) -> Optimiser:
    p = _as_port(param)
    f = lens(p, p, lambda x: x,
             lambda x, d: tuple(add(a, b) for a, b in zip(x, d)), key="ascent")
    return Optimiser("ascent", unit(p.rig), p, f)


def gradient_descent(param) -> Optimiser:
    # over Z2 negation is the identity, so this coincides with ascent
    p = _as_port(param)
    f = lens(p, p, lambda x: x,
             lambda x, d: tuple(add(a, neg(b)) for a, b in zip(x, d)), key="descent")
    return Optimiser("descent", unit(p.rig), p, f)


def _momentum_lens(p: Port, gamma: float, lookahead: bool, key: str) -> Lens:
    n = len(p)

    def fwd(x):
        s, q = x[:n], x[n:]
        if not lookahead:
            return q
        return tuple(add(b, scale(gamma, a)) for a, b in zip(s, q))

    def bwd(x, d):
        s, q = x[:n], x[n:]
        s_new = tuple(add(scale(-gamma, a), g) for a, g in zip(s, d))
        return s_new + tuple(add(b, a) for a, b in zip(s_new, q))
    return lens(p + p, p, fwd, bwd, key=key)


def momentum(param, gamma: float) -> Optimiser:
    """s' = -gamma*s + p', p_new = p + s'; the forward pass discards the state."""
    p = _as_port(param)
    _real_only(p, "momentum")
    return Optimiser("momentum", p, p, _momentum_lens(p, gamma, False, "momentum"))


def nesterov(param, gamma: float) -> Optimiser:
    """Momentum whose forward pass hands the lookahead p + gamma*s to the model."""
    p = _as_port(param)
    _real_only(p, "nesterov")
    return Optimiser("nesterov", p, p, _momentum_lens(p, gamma, True, "nesterov"))


def adagrad(param, eps: float, delta: float = 1e-7) -> Optimiser:
    p = _as_port(param)
    _real_only(p, "adagrad")
    n = len(p)

    def bwd(x, d):
        g, q = x[:n], x[n:]
        g_new = tuple(add(a, hadamard(b, b)) for a, b in zip(g, d))
        q_new = tuple(Tensor(REAL, w.data + eps / (delta + np.sqrt(acc.data)) * grad.data)
                      for w, acc, grad in zip(q, g_new, d))
        return g_new + q_new
    f = lens(p + p, p, lambda x: x[n:], bwd, key="adagrad", additive=False)
    return Optimiser("adagrad", p, p, f)


def adam(param, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-3,
         delta: float = 1e-8) -> Optimiser:
    """State is (m..., v..., t) with the step counter t as a trailing scalar wire."""
    p = _as_port(param)
    _real_only(p, "adam")
    n = len(p)
    state = p + p + Port(((),), REAL)

    def bwd(x, d):
        m, v, t, q = x[:n], x[n:2 * n], x[2 * n], x[2 * n + 1:]
        step = float(t.item()) + 1.0
        m_new = tuple(beta1 * a.data + (1.0 - beta1) * g.data for a, g in zip(m, d))
        v_new = tuple(beta2 * b.data + (1.0 - beta2) * g.data ** 2 for b, g in zip(v, d))
        m_hat = [a / (1.0 - beta1 ** step) for a in m_new]
        v_hat = [b / (1.0 - beta2 ** step) for b in v_new]
        q_new = tuple(Tensor(REAL, w.data + eps / (delta + np.sqrt(vh)) * mh)
                      for w, mh, vh in zip(q, m_hat, v_hat))
        return (tuple(Tensor(REAL, a) for a in m_new) + tuple(Tensor(REAL, b) for b in v_new)
                + (Tensor(REAL, step),) + q_new)
    f = lens(state + p, p, lambda x: x[2 * n + 1:], bwd, key="adam", additive=False)
    return Optimiser("adam", state, p, f)


def par_optimisers(a: Optimiser, b: Optimiser) -> Optimiser:
    """Product optimiser on (P, Q) with state (S_a, S_b)."""
    sa, sb, pa, pb = len(a.state), len(b.state), len(a.param), len(b.param)
    dom = a.state + b.state + a.param + b.param
    # (S_a, S_b, P_a, P_b) -> (S_a, P_a, S_b, P_b)
    order = (list(range(sa)) + list(range(sa + sb, sa + sb + pa))
             + list(range(sa, sa + sb)) + list(range(sa + sb + pa, sa + sb + pa + pb)))
    route = perm_lens(dom, order, key="route")
    inner = par_lens(a.lens, b.lens)

    def fwd(x):
        return inner.fwd(route.fwd(x))

    def bwd(x, d):
        out = inner.bwd(route.fwd(x), d)
        return route.bwd(x, out)
    f = lens(dom, a.param + b.param, fwd, bwd, key=f"{a.name}*{b.name}",
             additive=a.additive and b.additive)
    return Optimiser(f"{a.name}*{b.name}", a.state + b.state, a.param + b.param, f)


def gda(param_p, param_q) -> Optimiser:
    """Descent on the first block, ascent on the second."""
    out = par_optimisers(gradient_descent(_as_port(param_p)), gradient_ascent(_as_port(param_q)))
    return Optimiser("gda", out.state, out.param, out.lens)


def from_config(cfg: dict, param: Port) -> Optimiser:
    kind = cfg.get("kind")
    if kind in ("gd", "descent", "gradient_descent"):
        return gradient_descent(param)
    if kind in ("ascent", "gradient_ascent"):
        return gradient_ascent(param)
    if kind == "momentum":
        return momentum(param, cfg["gamma"])
    if kind == "nesterov":
        return nesterov(param, cfg["gamma"])
    if kind == "adagrad":
        return adagrad(param, cfg["eps"], cfg.get("delta", 1e-7))
    if kind == "adam":
        return adam(param, cfg.get("beta1", 0.9), cfg.get("beta2", 0.999), cfg["eps"],
                    cfg.get("delta", 1e-8))
    from .errors import CatalogueError
    raise CatalogueError(f"unknown optimiser kind {kind!r}")


__all__ = ["Optimiser", "gradient_ascent", "gradient_descent", "momentum", "nesterov",
           "adagrad", "adam", "gda", "par_optimisers", "from_config"]
