"""Small end-to-end scenarios used by the CLI and the acceptance tests."""
from __future__ import annotations

import itertools

import numpy as np

from .arch import bias, linear, masked_and
from .lens import Mode
from .learner import Learner, TrainState, gan_learner, update_step
from .loss import constant_rate, identity_rate, mse, xor_loss
from .optim import gradient_ascent, gradient_descent
from .para import ParaMorph, para_seq, parse_para
from .rig import Z2
from .tensor import Tensor


# --- linear regression -----------------------------------------------------------

def regression_data(seed: int = 0, n: int = 50, d: int = 3, noise: float = 0.1):
    """Rows of ``x`` with targets ``x A + b`` plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    a, b = rng.normal(size=(d, 1)), rng.normal(size=1)
    y = x @ a + b + noise * rng.normal(size=(n, 1))
    return x, y


def regression_model(n: int, d: int) -> ParaMorph:
    """Full-batch affine model: rows of an ``n x d`` matrix mapped to an ``n x 1`` column."""
    return para_seq(linear(d, 1, batch=n), bias(1, batch=n))


def fit_regression(x, y, alpha: float = 0.05, steps: int = 5000, mode: Mode = Mode.MEMOISED):
    """Full-batch gradient descent on the mean squared error.

    Returns ``(weights [d,1], bias [1], losses)`` where ``losses[k]`` is the
    loss before step ``k``.
    """
    n, d = x.shape
    model = regression_model(n, d)
    learner = Learner(model, mse((n, 1), mean=True), constant_rate(alpha),
                      gradient_descent(model.param), compose_mode=mode)
    st = TrainState((Tensor(model.rig, np.zeros((d, 1))), Tensor(model.rig, np.zeros(1))), ())
    xs, ys = (Tensor(model.rig, x),), (Tensor(model.rig, y),)
    for _ in range(steps):
        st = update_step(learner, st, xs, ys)
    return st.params[0].data, st.params[1].data, st.losses


# --- Boolean truth tables ----------------------------------------------------------

INPUTS_2 = list(itertools.product((0, 1), repeat=2))


def _bit(v):
    return Tensor(Z2, np.array([v], dtype=np.uint8))


def circuit_table(model: ParaMorph, params: tuple) -> tuple:
    return tuple(int(model.fwd((_bit(a), _bit(b)), params)[0].data[0]) for a, b in INPUTS_2)


def fit_truth_table(table, p0=(0, 0), sweeps: int = 64, model: ParaMorph | None = None):
    """Learn the parameter bits of a two-input circuit to match ``table``.

    ``table[i]`` is the target output for the i-th pair in :data:`INPUTS_2`.
    Each sweep performs one update per row.  Returns ``(params, sweeps used)``
    with ``sweeps used = None`` when the table was never matched.
    """
    model = model or masked_and()
    learner = Learner(model, xor_loss(1), identity_rate(), gradient_ascent(model.param))
    st = TrainState(tuple(_bit(v) for v in p0), ())
    for sweep in range(sweeps + 1):
        if circuit_table(model, st.params) == tuple(table):
            return tuple(int(t.data[0]) for t in st.params), sweep
        if sweep == sweeps:
            break
        for (a, b), y in zip(INPUTS_2, table):
            st = update_step(learner, st, (_bit(a), _bit(b)), (_bit(y),))
    return tuple(int(t.data[0]) for t in st.params), None


def xor_circuit() -> ParaMorph:
    """f(x, p) = x ⊕ p on one bit."""
    return parse_para("(prim bias 1)", Z2)


# --- GAN toy -------------------------------------------------------------------------

def gan_parts():
    g = para_seq(linear(1, 1), bias(1))
    d = parse_para("(seq (prim linear 1 1) (prim bias 1) (prim reduce_sum 1))")
    return g, d


def gan_toy(seed: int = 0, steps: int = 200, alpha: float = 0.005, real_mean: float = 1.0,
            real_std: float = 0.5, eval_size: int = 256, mode: Mode = Mode.MEMOISED):
    """One-dimensional GAN trained with descent-ascent and labels (1, -1).

    The generator is ``a z + c`` on uniform noise, the discriminator the
    linear score ``w x + e``.  Returns the score gap
    ``|mean d(real) - mean d(fake)|`` on a fixed evaluation batch, measured
    before every step and after the last.
    """
    rng = np.random.default_rng(seed)
    g, d = gan_parts()
    learner = gan_learner(g, d, alpha, mode)
    z_eval = rng.uniform(-1, 1, size=eval_size)
    x_eval = rng.normal(real_mean, real_std, size=eval_size)
    R = lambda v: Tensor(g.rig, np.asarray(v, dtype=float))
    st = TrainState((R([[0.1]]), R([0.0]), R([[1.0]]), R([0.0])), ())
    labels = (R(1.0), R(-1.0))

    def gap(params):
        a, c, w, e = (float(t.data.reshape(-1)[0]) for t in params)
        fake = w * (a * z_eval + c) + e
        real = w * x_eval + e
        return abs(real.mean() - fake.mean())

    gaps = [gap(st.params)]
    for _ in range(steps):
        z, xr = rng.uniform(-1, 1), rng.normal(real_mean, real_std)
        st = update_step(learner, st, (R([z]), R([xr])), labels)
        gaps.append(gap(st.params))
    return gaps, st


__all__ = ["regression_data", "regression_model", "fit_regression", "fit_truth_table",
           "circuit_table", "INPUTS_2", "gan_toy", "gan_parts", "xor_circuit"]
