"""The closed supervised-learning update, assembled by lens composition.

For parameter learning the update is the backward pass of the closed lens

    (id_X ⊗ U ⊗ id_Yt) ; (R[f] ⊗ id_Yt) ; R[loss] ; α

with domain ``X ⊗ S ⊗ P ⊗ Yt`` and codomain the unit.  Running it forward
and then backward from the empty cotangent yields ``(x', s_new, p_new,
y_t')``; the input and label gradients are dropped.  Deep dreaming moves the
optimiser onto the input port instead, with domain ``S ⊗ X ⊗ P ⊗ Y``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .autodiff.expr import Id
from .autodiff.functor import differentiate
from .errors import CompositionError
from .lens import Lens, Mode, chain, identity_lens, par_all, par_lens
from .loss import LearningRate, LossFn, constant_rate, dot_loss
from .optim import Optimiser, gda
from .para import ParaMorph, para_differentiate, para_par, para_seq, trivial, weight_tying


class Phase(str, Enum):
    PARAMS = "params"
    DREAM = "dream"


@dataclass(frozen=True, eq=False)
class Learner:
    model: ParaMorph
    loss: LossFn
    rate: LearningRate
    optimiser: Optimiser
    phase: Phase = Phase.PARAMS
    compose_mode: Mode = Mode.MEMOISED
    closed: Lens = field(init=False, repr=False)

    def __post_init__(self):
        f, o = self.model, self.optimiser
        if f.output != self.loss.output:
            raise CompositionError(f"model output {f.output!r} does not match loss input "
                                   f"{self.loss.output!r}")
        target = f.param if self.phase is Phase.PARAMS else f.input
        if o.param != target:
            raise CompositionError(f"optimiser acts on {o.param!r} but the learnt port is {target!r}")
        mode = Mode(self.compose_mode)
        object.__setattr__(self, "compose_mode", mode)
        yt = self.loss.labels
        if self.phase is Phase.PARAMS:
            head = par_all([identity_lens(f.input), o.lens, identity_lens(yt)])
        else:
            head = par_all([o.lens, identity_lens(f.param), identity_lens(yt)])
        model = par_lens(para_differentiate(f, mode).lens, identity_lens(yt))
        loss = differentiate(self.loss.para.body, mode)
        closed = chain([head, model, loss, self.rate.lens(self.loss.payoff)], mode)
        object.__setattr__(self, "closed", closed)

    def run_closed(self, dom_value: tuple) -> tuple:
        """One forward pass and one backward pass of the closed lens."""
        _, res = self.closed.fwd_res(dom_value)
        return self.closed.bwd_res(res, ())


@dataclass
class TrainState:
    params: tuple
    opt_state: tuple
    step: int = 0
    losses: list = field(default_factory=list)


def init_state(learner: Learner, rng: np.random.Generator | None = None, params=None) -> TrainState:
    if params is None:
        params = learner.model.init_params(rng if rng is not None else np.random.default_rng(0))
    return TrainState(tuple(params), learner.optimiser.init_state())


def _split(value: tuple, *ports):
    out = []
    for p in ports:
        head, value = p.take(value)
        out.append(head)
    return out


def update_step(learner: Learner, st: TrainState, x: tuple, y_t: tuple,
                inspect: dict | None = None) -> TrainState:
    """One parameter-learning step.  ``inspect`` receives the discarded gradients."""
    if learner.phase is not Phase.PARAMS:
        raise ValueError("update_step needs a parameter-learning learner; use dream_step")
    f, o = learner.model, learner.optimiser
    x, y_t = tuple(x), tuple(y_t)
    out = learner.run_closed(x + tuple(st.opt_state) + tuple(st.params) + y_t)
    dx, s_new, p_new, dyt = _split(out, f.input, o.state, o.param, learner.loss.labels)
    loss = _loss_at(learner, x, o.lookahead(st.opt_state, st.params), y_t)
    if inspect is not None:
        inspect.update(input_grad=dx, label_grad=dyt, loss=loss)
    return TrainState(p_new, s_new, st.step + 1, st.losses + [loss])


def dream_step(learner: Learner, st: TrainState, p: tuple, y_i: tuple,
               inspect: dict | None = None) -> TrainState:
    """One deep-dreaming step: ``st.params`` holds the input being learnt, ``p`` is frozen."""
    if learner.phase is not Phase.DREAM:
        raise ValueError("dream_step needs a deep-dreaming learner")
    f, o = learner.model, learner.optimiser
    p, y_i = tuple(p), tuple(y_i)
    out = learner.run_closed(tuple(st.opt_state) + tuple(st.params) + p + y_i)
    s_new, x_new, dp, dyi = _split(out, o.state, o.param, f.param, learner.loss.labels)
    loss = _loss_at(learner, o.lookahead(st.opt_state, st.params), p, y_i)
    if inspect is not None:
        inspect.update(param_grad=dp, label_grad=dyi, loss=loss)
    return TrainState(x_new, s_new, st.step + 1, st.losses + [loss])


def _loss_at(learner: Learner, x, p, y_t) -> float:
    y_p = learner.model.fwd(x, p)
    return float(learner.loss(y_p, y_t))


def train(learner: Learner, dataset, epochs: int, seed: int = 0, shuffle: bool = False,
          state: TrainState | None = None, on_step=None):
    """Fold ``update_step`` over the dataset; returns (state, per-epoch metrics).

    ``dataset`` is a sequence of ``(x, y_t)`` pairs of wire tuples.  Order is
    fixed unless ``shuffle`` is set, in which case it is drawn from ``seed``.
    """
    data = list(dataset)
    if not data:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(seed)
    st = state if state is not None else init_state(learner, rng)
    metrics = []
    for epoch in range(epochs):
        order = rng.permutation(len(data)) if shuffle else range(len(data))
        start = len(st.losses)
        for i in order:
            x, y_t = data[i]
            st = update_step(learner, st, x, y_t)
            if on_step is not None:
                on_step(epoch, st)
        epoch_losses = st.losses[start:]
        metrics.append({"epoch": epoch, "step": st.step,
                        "mean_loss": float(np.mean(epoch_losses))})
    return st, metrics


# --- adversarial wiring ------------------------------------------------------

def gan_assemble(g: ParaMorph, d: ParaMorph) -> ParaMorph:
    """(g ⊗ id) ; (d ⊗ d) with the two discriminator copies tied.

    Input ``Z ⊗ X``, parameter ``P ⊗ Q``, output ``L ⊗ L`` (fake score, real score).
    """
    if g.output != d.input:
        raise CompositionError(f"generator output {g.output!r} does not match discriminator "
                               f"input {d.input!r}")
    left = para_par(g, trivial(Id(d.input)))
    return para_seq(left, weight_tying(para_par(d, d)))


def gan_learner(g: ParaMorph, d: ParaMorph, alpha: float,
                compose_mode: Mode = Mode.MEMOISED) -> Learner:
    """GAN with dot-product loss, constant rate and descent-ascent on (P, Q)."""
    gan = gan_assemble(g, d)
    return Learner(gan, dot_loss(gan.output), constant_rate(alpha), gda(g.param, d.param),
                   Phase.PARAMS, compose_mode)


__all__ = ["Learner", "Phase", "TrainState", "init_state", "update_step", "dream_step", "train",
           "gan_assemble", "gan_learner"]
