"""Property suites shared by ``lenslearn check`` and the test-suite.

Each suite returns a :class:`SuiteResult`.  The oracles here are written
independently of the differentiation functor: central finite differences
for the reals, forward-mode dual numbers for Z2, and hand-coded numpy
gradients for the worked learning updates.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import primitives
from .autodiff.expr import (Const, Copy, Delete, Id, MorphExpr, Par, Perm, Prim, Proj, Seq, Sum,
                            seq)
from .autodiff.functor import differentiate, evaluate
from .lens import Mode, Port, add_values, compose_lens, instrument
from .learner import Learner, Phase, TrainState, dream_step, gan_learner, update_step
from .loss import constant_rate, dot_loss, identity_rate, mse, softargmax_cross_entropy, xor_loss
from .optim import gradient_ascent, gradient_descent, nesterov
from .para import ParaMorph, para_differentiate, para_seq, parse_para
from .rig import REAL, Z2
from .tensor import Tensor


@dataclass
class SuiteResult:
    name: str
    passed: bool
    cases: int
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"; first failure: {self.failures[0]}" if self.failures else ""
        return f"[{status}] {self.name}: {self.cases} cases in {self.seconds:.2f}s{extra}"


class _Tally:
    def __init__(self, name, stop_on_fail=False):
        self.name, self.stop = name, stop_on_fail
        self.cases, self.failures = 0, []
        self.t0 = time.perf_counter()

    def check(self, ok: bool, what: str):
        self.cases += 1
        if not ok:
            self.failures.append(what)
        return ok

    @property
    def done(self):
        return self.stop and bool(self.failures)

    def result(self) -> SuiteResult:
        return SuiteResult(self.name, not self.failures, self.cases, self.failures,
                           time.perf_counter() - self.t0)


# --- value helpers -------------------------------------------------------------

def P(*shapes, rig=REAL) -> Port:
    return Port(tuple((s,) if isinstance(s, int) else s for s in shapes), rig)


def rand_value(rng, port: Port, positive=False) -> tuple:
    if port.rig is Z2:
        return tuple(Tensor(Z2, rng.integers(0, 2, size=s)) for s in port.shapes)
    if positive:
        return tuple(Tensor(REAL, rng.uniform(0.5, 2.0, size=s)) for s in port.shapes)
    return tuple(Tensor(REAL, rng.normal(size=s)) for s in port.shapes)


def pairing(a: tuple, b: tuple) -> float:
    return float(sum(np.sum(s.data * t.data) for s, t in zip(a, b, strict=True)))


def _axpy(x: tuple, u: tuple, h: float) -> tuple:
    return tuple(Tensor(REAL, s.data + h * t.data) for s, t in zip(x, u))


def max_diff(a: tuple, b: tuple) -> float:
    if len(a) != len(b):
        return float("inf")
    out = 0.0
    for s, t in zip(a, b):
        if s.shape != t.shape:
            return float("inf")
        if s.size:
            out = max(out, float(np.max(np.abs(s.data.astype(float) - t.data.astype(float)))))
    return out


def fd_pairing(fwd: Callable, x: tuple, u: tuple, v: tuple, h: float = 1e-5) -> float:
    """⟨v, J u⟩ by central differences."""
    plus, minus = fwd(_axpy(x, u, h)), fwd(_axpy(x, u, -h))
    return (pairing(v, plus) - pairing(v, minus)) / (2.0 * h)


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


# --- primitive cases -----------------------------------------------------------

# name -> (args, inputs must be positive)
REAL_CASES = {
    "identity": (((3,),), False),
    "sigmoid": (((3,),), False),
    "tanh": (((2, 2),), False),
    "relu": (((4,),), False),
    "leaky_relu": (((4,), 0.1), False),
    "gelu": (((3,),), False),
    "exp": (((3,),), False),
    "log": (((3,),), True),
    "scale": (((2, 3), 1.7), False),
    "neg": (((3,),), False),
    "softargmax": ((4,), False),
    "linear": ((3, 2), False),
    "matmul": ((2, 3, 4), False),
    "matvec": ((3, 2), False),
    "transpose": ((2, 3), False),
    "bias": (((3,),), False),
    "mul": (((3,),), False),
    "bias_rows": ((2, 3), False),
    "bias_cols": ((3, 2), False),
    "reduce_sum": (((2, 3),), False),
    "stack": ((3, 2), False),
    "unstack": ((3, 2), False),
}

# small enough that every input bit pattern can be enumerated
Z2_CASES = {
    "neg": ((3,),),
    "linear": (2, 2),
    "matmul": (1, 2, 2),
    "matvec": (2, 2),
    "transpose": (2, 2),
    "bias": ((2,),),
    "mul": ((2,),),
    "bias_rows": (2, 2),
    "bias_cols": (2, 2),
    "reduce_sum": ((3,),),
    "stack": (2, 2),
    "unstack": (2, 2),
}


def real_primitives() -> list:
    return sorted(n for n, s in primitives.CATALOGUE.items() if REAL.id in s.rigs)


def z2_primitives() -> list:
    return sorted(n for n, s in primitives.CATALOGUE.items() if Z2.id in s.rigs)


# --- random expression corpus ----------------------------------------------------

_SMOOTH = ("sigmoid", "tanh", "gelu", "leaky_relu", "identity")


def _const(rng, shape, rig=REAL, scale_=1.0):
    if rig is Z2:
        return Const(Tensor(Z2, rng.integers(0, 2, size=shape)))
    return Const(Tensor(REAL, rng.normal(scale=scale_, size=shape)))


def _with_const(rng, op: MorphExpr, n: int, shape, rig=REAL, scale_=1.0) -> MorphExpr:
    return seq(Par(Id(P(n, rig=rig)), _const(rng, shape, rig, scale_)), op)


def _real_leaf(rng, n_in, n_out) -> MorphExpr:
    if n_in != n_out or rng.random() < 0.25:
        lin = _with_const(rng, Prim("linear", (n_in, n_out)), n_in, (n_in, n_out),
                          scale_=1.0 / np.sqrt(n_in))
        return lin
    kind = rng.choice(["act", "act", "softargmax", "scale", "bias", "neg"])
    if kind == "act":
        name = str(rng.choice(_SMOOTH))
        args = ((n_in,), 0.1) if name == "leaky_relu" else ((n_in,),)
        return Prim(name, args)
    if kind == "softargmax":
        return Prim("softargmax", (n_in,))
    if kind == "scale":
        return Prim("scale", ((n_in,), float(rng.uniform(-2, 2))))
    if kind == "bias":
        return _with_const(rng, Prim("bias", ((n_in,),)), n_in, (n_in,))
    return Prim("neg", ((n_in,),))


def random_real_expr(rng, n_in: int, n_out: int, depth: int, width: int = 8) -> MorphExpr:
    """A random composite ``[n_in] -> [n_out]`` of nesting depth at most ``depth``."""
    if depth <= 0 or rng.random() < 0.2:
        return _real_leaf(rng, n_in, n_out)
    kind = rng.choice(["seq", "seq", "mul", "add"])
    if kind == "seq":
        k = int(rng.integers(1, width + 1))
        return Seq(random_real_expr(rng, n_in, k, depth - 1, width),
                   random_real_expr(rng, k, n_out, depth - 1, width))
    left = random_real_expr(rng, n_in, n_out, depth - 1, width)
    right = random_real_expr(rng, n_in, n_out, depth - 1, width)
    join = Prim("mul", ((n_out,),)) if kind == "mul" else Sum(P(n_out))
    return seq(Copy(P(n_in)), Par(left, right), join)


def _z2_leaf(rng, n_in, n_out) -> MorphExpr:
    if n_in != n_out or rng.random() < 0.25:
        return _with_const(rng, Prim("linear", (n_in, n_out), Z2), n_in, (n_in, n_out), Z2)
    kind = rng.choice(["bias", "mask", "not", "neg"])
    p = P(n_in, rig=Z2)
    if kind == "bias":
        return _with_const(rng, Prim("bias", ((n_in,),), Z2), n_in, (n_in,), Z2)
    if kind == "mask":
        return _with_const(rng, Prim("mul", ((n_in,),), Z2), n_in, (n_in,), Z2)
    if kind == "not":
        return seq(Par(Id(p), Const(Tensor(Z2, np.ones(n_in, dtype=np.uint8)))), Sum(p))
    return Prim("neg", ((n_in,),), Z2)


def random_z2_expr(rng, n_in: int, n_out: int, depth: int, width: int = 4) -> MorphExpr:
    if depth <= 0 or rng.random() < 0.2:
        return _z2_leaf(rng, n_in, n_out)
    kind = rng.choice(["seq", "mul", "add"])
    if kind == "seq":
        k = int(rng.integers(1, width + 1))
        return Seq(random_z2_expr(rng, n_in, k, depth - 1, width),
                   random_z2_expr(rng, k, n_out, depth - 1, width))
    left = random_z2_expr(rng, n_in, n_out, depth - 1, width)
    right = random_z2_expr(rng, n_in, n_out, depth - 1, width)
    join = Prim("mul", ((n_out,),), Z2) if kind == "mul" else Sum(P(n_out, rig=Z2))
    return seq(Copy(P(n_in, rig=Z2)), Par(left, right), join)


def real_corpus(seed: int, count: int, depth: int = 5, width: int = 8):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n_in, n_out = int(rng.integers(1, width + 1)), int(rng.integers(1, width + 1))
        yield random_real_expr(rng, n_in, n_out, depth, width), rng


def z2_corpus(seed: int, count: int, depth: int = 4, max_in: int = 4):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n_in, n_out = int(rng.integers(1, max_in + 1)), int(rng.integers(1, 4))
        yield random_z2_expr(rng, n_in, n_out, depth), rng


# --- suite 1: finite differences -------------------------------------------------

def _fd_expr(t: _Tally, e: MorphExpr, rng, label, positive=False, n_dirs=10, tol=1e-4):
    lens = differentiate(e)
    x = rand_value(rng, e.dom, positive)
    v = rand_value(rng, e.cod)
    grad = lens.bwd(x, v)
    for _ in range(n_dirs):
        u = rand_value(rng, e.dom)
        if positive:
            u = tuple(Tensor(REAL, 0.1 * s.data) for s in u)
        a, b = fd_pairing(lambda z: evaluate(e, z), x, u, v), pairing(grad, u)
        if not t.check(rel_err(a, b) <= tol, f"{label}: fd {a:.6g} vs bwd {b:.6g}"):
            return


def suite_fd(seed: int = 0, composites: int = 50, stop_on_fail=False) -> SuiteResult:
    t = _Tally("finite differences", stop_on_fail)
    rng = np.random.default_rng(seed)
    missing = set(real_primitives()) - set(REAL_CASES)
    t.check(not missing, f"primitives without a finite-difference case: {sorted(missing)}")
    for name in real_primitives():
        if name not in REAL_CASES or t.done:
            continue
        args, positive = REAL_CASES[name]
        _fd_expr(t, Prim(name, args if isinstance(args, tuple) else (args,)), rng, name, positive)
    for i, (e, r) in enumerate(real_corpus(seed + 1, composites)):
        if t.done:
            break
        _fd_expr(t, e, r, f"composite {i}")
    return t.result()


# --- suite 2: functoriality ------------------------------------------------------

def suite_functoriality(seed: int = 0, instances: int = 100, stop_on_fail=False) -> SuiteResult:
    t = _Tally("functoriality", stop_on_fail)
    rng = np.random.default_rng(seed)
    for i in range(instances):
        if t.done:
            break
        rig = Z2 if i % 4 == 3 else REAL
        gen = random_z2_expr if rig is Z2 else random_real_expr
        n, k, m = (int(rng.integers(1, 5)) for _ in range(3))
        f, g = gen(rng, n, k, 2), gen(rng, k, m, 2)
        x, v = rand_value(rng, f.dom), rand_value(rng, g.cod)
        tol = 0.0 if rig is Z2 else 1e-12
        whole = differentiate(Seq(f, g))
        parts = compose_lens(differentiate(f), differentiate(g))
        t.check(max_diff(whole.bwd(x, v), parts.bwd(x, v)) <= tol, f"{i}: R[f;g] != R[f];R[g]")
        t.check(max_diff(whole.fwd(x), evaluate(Seq(f, g), x)) <= tol, f"{i}: projection law")
        ck = differentiate(Seq(f, g), Mode.CHECKPOINTED)
        t.check(max_diff(whole.bwd(x, v), ck.bwd(x, v)) <= tol, f"{i}: checkpointed vs memoised")
    # parametric chain rule on dense layers
    for i in range(instances // 4):
        if t.done:
            break
        a, b, c = (int(rng.integers(1, 5)) for _ in range(3))
        act = str(rng.choice(_SMOOTH[:3]))
        F = parse_para(f"(seq (prim linear {a} {b}) (prim bias {b}) (prim {act} {b}))")
        G = parse_para(f"(seq (prim linear {b} {c}) (prim bias {c}))")
        x, v = rand_value(rng, F.input), rand_value(rng, G.output)
        p = rand_value(rng, F.param + G.param)
        joint = para_differentiate(para_seq(F, G))
        split = para_differentiate(F).then(para_differentiate(G))
        dj, ds = joint.bwd(x, p, v), split.bwd(x, p, v)
        t.check(max_diff(dj[0] + dj[1], ds[0] + ds[1]) <= 1e-12, f"para {i}: parametric chain rule")
    return t.result()


# --- suite 3: reverse derivative axioms ------------------------------------------

def suite_rdc_axioms(seed: int = 0, instances: int = 60, stop_on_fail=False) -> SuiteResult:
    t = _Tally("reverse derivative axioms 1-5", stop_on_fail)
    rng = np.random.default_rng(seed)
    for i in range(instances):
        if t.done:
            break
        rig = Z2 if i % 3 == 2 else REAL
        gen = random_z2_expr if rig is Z2 else random_real_expr
        tol = 0.0 if rig is Z2 else 1e-10
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        f, g = gen(rng, n, m, 3), gen(rng, n, m, 3)
        pin, pout = P(n, rig=rig), P(m, rig=rig)
        x = rand_value(rng, pin)
        a, b = rand_value(rng, pout), rand_value(rng, pout)
        Rf, Rg = differentiate(f), differentiate(g)
        add = add_values

        # 1: R[f + g] = R[f] + R[g]
        f_plus_g = seq(Copy(pin), Par(f, g), Sum(pout))
        t.check(max_diff(differentiate(f_plus_g).bwd(x, a), add(Rf.bwd(x, a), Rg.bwd(x, a))) <= tol,
                f"{i}: axiom 1")
        # 2: additive in the cotangent, zero to zero
        t.check(max_diff(Rf.bwd(x, add(a, b)), add(Rf.bwd(x, a), Rf.bwd(x, b))) <= tol,
                f"{i}: axiom 2 additivity")
        t.check(max_diff(Rf.bwd(x, pout.zeros()), pin.zeros()) == 0.0, f"{i}: axiom 2 zero")
        # 3: identities and projections
        t.check(max_diff(differentiate(Id(pin)).bwd(x, x), x) == 0.0, f"{i}: axiom 3 identity")
        y = rand_value(rng, pout)
        pr = differentiate(Proj(0, (pin, pout))).bwd(x + y, x)
        t.check(max_diff(pr, x + pout.zeros()) == 0.0, f"{i}: axiom 3 projection")
        # 4: pairings
        pairing_expr = seq(Copy(pin), Par(f, g))
        lhs = differentiate(pairing_expr).bwd(x, a + b)
        t.check(max_diff(lhs, add(Rf.bwd(x, a), Rg.bwd(x, b))) <= tol, f"{i}: axiom 4")
        # 5: chain rule
        h = gen(rng, m, n, 2)
        t.check(max_diff(differentiate(Seq(f, h)).bwd(x, x),
                         compose_lens(Rf, differentiate(h)).bwd(x, x)) <= (0.0 if rig is Z2 else 1e-12),
                f"{i}: axiom 5")
    return t.result()


# --- suite 4: worked learning updates ----------------------------------------------

def _softargmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def tanh_model(n_in: int, n_out: int) -> ParaMorph:
    return parse_para(f"(seq (prim linear {n_in} {n_out}) (prim bias {n_out}) (prim tanh {n_out}))")


def tanh_model_fwd(x, W, b):
    return np.tanh(W.T @ x + b)


def tanh_model_rev(x, W, b, dy):
    """Hand-written reverse derivative of tanh(Wᵀx + b): returns (dx, dW, db)."""
    y = np.tanh(W.T @ x + b)
    dz = dy * (1.0 - y * y)
    return W @ dz, np.outer(x, dz), dz


def _T(*arrays):
    return tuple(Tensor(REAL, a) for a in arrays)


def _close(got: tuple, want, tol):
    return max_diff(got, _T(*want)) <= tol


def suite_worked_examples(seed: int = 0, instances: int = 100, stop_on_fail=False) -> SuiteResult:
    t = _Tally("worked examples", stop_on_fail)
    rng = np.random.default_rng(seed)
    n_in, n_out, tol = 3, 2, 1e-12
    f = tanh_model(n_in, n_out)

    def draw():
        x = rng.normal(size=n_in)
        W, b = rng.normal(size=(n_in, n_out)), rng.normal(size=n_out)
        return x, W, b, rng.normal(size=n_out), float(rng.uniform(0.001, 0.5))

    # quadratic loss, gradient descent
    for i in range(instances):
        x, W, b, yt, alpha = draw()
        L = Learner(f, mse(n_out), constant_rate(alpha), gradient_descent(f.param))
        st = update_step(L, TrainState(_T(W, b), ()), _T(x), _T(yt))
        _, dW, db = tanh_model_rev(x, W, b, tanh_model_fwd(x, W, b) - yt)
        if not t.check(_close(st.params, (W - alpha * dW, b - alpha * db), tol), f"quadratic+gd {i}"):
            break

    # softargmax cross-entropy, gradient descent; the loss gradient in y_p is ½ S(y_p)
    for i in range(instances):
        x, W, b, yt, alpha = draw()
        L = Learner(f, softargmax_cross_entropy(n_out), constant_rate(alpha), gradient_descent(f.param))
        st = update_step(L, TrainState(_T(W, b), ()), _T(x), _T(yt))
        _, dW, db = tanh_model_rev(x, W, b, alpha * 0.5 * _softargmax(tanh_model_fwd(x, W, b)))
        if not t.check(_close(st.params, (W - dW, b - db), tol), f"softargmax+gd {i}"):
            break

    # quadratic loss, Nesterov momentum
    for i in range(instances):
        x, W, b, yt, alpha = draw()
        gamma = float(rng.uniform(0, 1))
        sW, sb = rng.normal(size=W.shape), rng.normal(size=b.shape)
        L = Learner(f, mse(n_out), constant_rate(alpha), nesterov(f.param, gamma))
        st = update_step(L, TrainState(_T(W, b), _T(sW, sb)), _T(x), _T(yt))
        Wl, bl = W + gamma * sW, b + gamma * sb
        _, dW, db = tanh_model_rev(x, Wl, bl, alpha * (tanh_model_fwd(x, Wl, bl) - yt))
        sW2, sb2 = -gamma * sW + dW, -gamma * sb + db
        ok = _close(st.opt_state, (sW2, sb2), tol) and _close(st.params, (W + sW2, b + sb2), tol)
        if not t.check(ok, f"mse+nesterov {i}"):
            break

    # deep dreaming: dot loss, gradient ascent on the input
    for i in range(instances):
        x, W, b, yi, alpha = draw()
        L = Learner(f, dot_loss(n_out), constant_rate(alpha), gradient_ascent(f.input), Phase.DREAM)
        st = dream_step(L, TrainState(_T(x), ()), _T(W, b), _T(yi))
        dx, _, _ = tanh_model_rev(x, W, b, yi)
        if not t.check(_close(st.params, (x + alpha * dx,), tol), f"deep dreaming {i}"):
            break

    # GAN, dot loss, descent-ascent, extracted form
    zd, xd = 2, 3
    g = parse_para(f"(seq (prim linear {zd} {xd}) (prim bias {xd}))")
    d = parse_para(f"(seq (prim linear {xd} 1) (prim bias 1) (prim reduce_sum 1))")
    for i in range(instances):
        alpha = float(rng.uniform(0.001, 0.5))
        z, xr = rng.normal(size=zd), rng.normal(size=xd)
        A, c = rng.normal(size=(zd, xd)), rng.normal(size=xd)
        w, e = rng.normal(size=(xd, 1)), rng.normal(size=1)
        ytg, ytr = 1.0, -1.0
        L = gan_learner(g, d, alpha)
        st = update_step(L, TrainState(_T(A, c, w, e), ()), _T(z, xr), _T(np.array(ytg), np.array(ytr)))
        xg = A.T @ z + c
        # R[d](x, q, 1) = (w, (x, 1)); R[g](z, p, x') = (A x', (outer(z, x'), x'))
        xg_grad, wg, eg = w[:, 0], np.outer(xg, 1.0), np.ones(1)
        Ag, cg = np.outer(z, xg_grad), xg_grad
        wr, er = np.outer(xr, 1.0), np.ones(1)
        want = (A - alpha * ytg * Ag, c - alpha * ytg * cg,
                w + alpha * (ytg * wg + ytr * wr), e + alpha * (ytg * eg + ytr * er))
        if not t.check(_close(st.params, want, tol), f"gan+gda {i}"):
            break

    # Boolean circuits: exhaustive over every bit assignment
    xor_model = parse_para("(prim bias 1)", Z2)
    L = Learner(xor_model, xor_loss(1), identity_rate(), gradient_ascent(xor_model.param))
    for x in (0, 1):
        for p in (0, 1):
            for y in (0, 1):
                bit = lambda v: (Tensor(Z2, np.array([v])),)
                st = update_step(L, TrainState(bit(p), ()), bit(x), bit(y))
                want = p ^ (((x ^ p) ^ y))   # p + R[f](x, p, f + y_t) ; π₂
                t.check(int(st.params[0].data[0]) == want, f"boolean xor x={x} p={p} y={y}")
    gated = parse_para("(seq (par (prim bias 1) (prim bias 1)) (prim mul 1))", Z2)
    L = Learner(gated, xor_loss(1), identity_rate(), gradient_ascent(gated.param))
    for bits in range(32):
        x1, x2, p1, p2, y = ((bits >> k) & 1 for k in range(5))
        b = lambda v: Tensor(Z2, np.array([v]))
        st = update_step(L, TrainState((b(p1), b(p2)), ()), (b(x1), b(x2)), (b(y),))
        dy = ((x1 ^ p1) & (x2 ^ p2)) ^ y
        want = (p1 ^ (dy & (x2 ^ p2)), p2 ^ (dy & (x1 ^ p1)))
        got = (int(st.params[0].data[0]), int(st.params[1].data[0]))
        t.check(got == want, f"boolean gated circuit case {bits}")
    return t.result()


# --- Z2 exhaustive oracle ------------------------------------------------------------

def _z(a):
    return np.asarray(a, dtype=np.int64) & 1


def _jvp_prim(name, args, xs, dxs):
    """Forward-mode rule for each Z2 primitive, over Z2[ε]/ε²."""
    x = [_z(t) for t in xs]
    d = [_z(t) for t in dxs]
    if name == "neg":
        return [d[0]]
    if name == "linear":
        return [_z(d[1].T @ x[0] + x[1].T @ d[0])]
    if name == "matmul":
        return [_z(d[0] @ x[1] + x[0] @ d[1])]
    if name == "matvec":
        return [_z(d[0] @ x[1] + x[0] @ d[1])]
    if name == "transpose":
        return [d[0].T]
    if name == "bias":
        return [_z(d[0] + d[1])]
    if name == "mul":
        return [_z(d[0] * x[1] + x[0] * d[1])]
    if name == "bias_rows":
        return [_z(d[0] + d[1][None, :])]
    if name == "bias_cols":
        return [_z(d[0] + d[1][:, None])]
    if name == "reduce_sum":
        return [_z(np.sum(d[0]))]
    if name == "stack":
        return [np.stack(d)]
    if name == "unstack":
        return list(d[0])
    raise KeyError(name)


def z2_jvp(e: MorphExpr, x: list, dx: list):
    """Return (value, tangent) of ``e`` at ``x`` along ``dx``; lists of int arrays."""
    if isinstance(e, Seq):
        y, dy = z2_jvp(e.left, x, dx)
        return z2_jvp(e.right, y, dy)
    if isinstance(e, Par):
        k = len(e.left.dom)
        a, da = z2_jvp(e.left, x[:k], dx[:k])
        c, dc = z2_jvp(e.right, x[k:], dx[k:])
        return a + c, da + dc
    if isinstance(e, Prim):
        fwd = [_z(t.data) for t in primitives.lookup(e.name).fwd(e.args, tuple(Tensor(Z2, v) for v in x))]
        return fwd, _jvp_prim(e.name, e.args, x, dx)
    if isinstance(e, Id):
        return x, dx
    if isinstance(e, Copy):
        return x + x, dx + dx
    if isinstance(e, Sum):
        k = len(e.port)
        return ([_z(a + b) for a, b in zip(x[:k], x[k:])], [_z(a + b) for a, b in zip(dx[:k], dx[k:])])
    if isinstance(e, Delete):
        return [], []
    if isinstance(e, Const):
        return [_z(t.data) for t in e.value], [np.zeros(t.shape, dtype=np.int64) for t in e.value]
    if isinstance(e, Proj):
        start = sum(len(q) for q in e.ports[:e.index])
        stop = start + len(e.ports[e.index])
        return x[start:stop], dx[start:stop]
    if isinstance(e, Perm):
        return [x[i] for i in e.order], [dx[i] for i in e.order]
    raise TypeError(e)


def _bit_vectors(port: Port):
    """Every assignment of bits to the wires of ``port``, as lists of arrays."""
    sizes = [int(np.prod(s, dtype=int)) for s in port.shapes]
    total = sum(sizes)
    for code in range(2 ** total):
        bits = [(code >> k) & 1 for k in range(total)]
        yield _unflatten(bits, port)


def _unflatten(bits, port: Port):
    out, pos = [], 0
    for s in port.shapes:
        n = int(np.prod(s, dtype=int))
        out.append(np.array(bits[pos:pos + n], dtype=np.int64).reshape(s))
        pos += n
    return out


def _basis(port: Port):
    total = sum(int(np.prod(s, dtype=int)) for s in port.shapes)
    for j in range(total):
        yield _unflatten([int(k == j) for k in range(total)], port)


def _z2_pair(a, b) -> int:
    return int(sum(int(np.sum(_z(s) * _z(t))) for s, t in zip(a, b))) & 1


def z2_exhaustive(e: MorphExpr, max_bits: int = 10) -> list:
    """Compare R[e] with the dual-number oracle on every input; returns mismatch strings."""
    bits = sum(int(np.prod(s, dtype=int)) for s in e.dom.shapes)
    if bits > max_bits:
        raise ValueError(f"{bits} input bits exceeds the exhaustive limit {max_bits}")
    lens = differentiate(e)
    dom_basis, cod_basis = list(_basis(e.dom)), list(_basis(e.cod))
    bad = []
    for x in _bit_vectors(e.dom):
        xt = tuple(Tensor(Z2, v) for v in x)
        jus = [z2_jvp(e, x, u)[1] for u in dom_basis]
        for v in cod_basis:
            r = [t.data for t in lens.bwd(xt, tuple(Tensor(Z2, w) for w in v))]
            for u, ju in zip(dom_basis, jus):
                if _z2_pair(r, u) != _z2_pair(v, ju):
                    bad.append(f"x={[a.tolist() for a in x]}")
                    return bad
    return bad


def suite_z2_exhaustive(seed: int = 0, circuits: int = 25, stop_on_fail=False) -> SuiteResult:
    t = _Tally("Z2 exhaustive", stop_on_fail)
    for name in z2_primitives():
        if t.done:
            break
        if not t.check(name in Z2_CASES, f"no exhaustive case for Z2 primitive {name}"):
            continue
        e = Prim(name, Z2_CASES[name], Z2)
        bad = z2_exhaustive(e)
        t.check(not bad, f"{name}: {bad[:1]}")
    for i, (e, _) in enumerate(z2_corpus(seed, circuits)):
        if t.done:
            break
        bad = z2_exhaustive(e)
        t.check(not bad, f"circuit {i}: {bad[:1]}")
    return t.result()


# --- compose-mode counters ---------------------------------------------------------------

_CHAIN = ("tanh", "sigmoid", "gelu", "identity")


def chain_expr(n: int, width: int = 3) -> MorphExpr:
    return seq(*[Prim(_CHAIN[i % len(_CHAIN)], ((width,),)) for i in range(n)])


def chain_counts(n: int, mode: Mode, seed: int = 0):
    """fwd counts (in chain order) and outputs for one forward+backward pass."""
    rng = np.random.default_rng(seed)
    e = chain_expr(n)
    lens = differentiate(e, mode)
    x, v = rand_value(rng, e.dom), rand_value(rng, e.cod)
    with instrument() as report:
        y, res = lens.fwd_res(x)
        dx = lens.bwd_res(res, v)
    keys = sorted(report.fwd_calls, key=lambda k: k.split("@")[1])
    return [report.fwd_calls[k] for k in keys], y, dx


def suite_counters(depths=range(2, 9), stop_on_fail=False) -> SuiteResult:
    t = _Tally("compose-mode counters", stop_on_fail)
    for n in depths:
        mem, y1, d1 = chain_counts(n, Mode.MEMOISED)
        ck, y2, d2 = chain_counts(n, Mode.CHECKPOINTED)
        t.check(mem == [1] * n, f"n={n}: memoised counts {mem}")
        t.check(ck == [2] * (n - 1) + [1], f"n={n}: checkpointed counts {ck}")
        t.check(max_diff(y1 + d1, y2 + d2) <= 1e-12, f"n={n}: outputs differ")
    return t.result()


# --- mutation sensitivity -----------------------------------------------------------------

DESIGNATED_MUTATIONS = ("mul", "linear", "sigmoid", "softargmax", "tanh")
CORE_SUITES = {
    "fd": lambda: suite_fd(stop_on_fail=True),
    "functoriality": lambda: suite_functoriality(stop_on_fail=True),
    "rdc": lambda: suite_rdc_axioms(stop_on_fail=True),
    "worked": lambda: suite_worked_examples(stop_on_fail=True),
}


def detect_mutation(name: str) -> list:
    """Names of the core suites that fail while ``name``'s backward is sign-flipped."""
    caught = []
    with primitives.mutated(name):
        for key, run in CORE_SUITES.items():
            if not run().passed:
                caught.append(key)
                break
    return caught


def suite_mutation(names=DESIGNATED_MUTATIONS) -> SuiteResult:
    t = _Tally("mutation sensitivity")
    for name in names:
        t.check(bool(detect_mutation(name)), f"sign flip in {name} went unnoticed")
    return t.result()


SUITES = {
    "fd": suite_fd,
    "functoriality": suite_functoriality,
    "rdc": suite_rdc_axioms,
    "worked": suite_worked_examples,
    "z2": suite_z2_exhaustive,
    "counters": suite_counters,
    "mutation": suite_mutation,
}


def run_all(names=None, echo: Callable[[str], None] | None = print) -> list:
    results = []
    for key in names or SUITES:
        res = SUITES[key]()
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results


__all__ = ["SuiteResult", "SUITES", "run_all", "suite_fd", "suite_functoriality",
           "suite_rdc_axioms", "suite_worked_examples", "suite_z2_exhaustive", "suite_counters",
           "suite_mutation", "detect_mutation", "z2_exhaustive", "z2_jvp", "fd_pairing",
           "random_real_expr", "random_z2_expr", "real_corpus", "z2_corpus", "chain_counts",
           "tanh_model", "tanh_model_fwd", "tanh_model_rev", "DESIGNATED_MUTATIONS",
           "REAL_CASES", "Z2_CASES"]
