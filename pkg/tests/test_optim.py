import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lenslearn.errors import CatalogueError, RigSupportError
from lenslearn.lens import Port, add_values
from lenslearn.optim import (adagrad, adam, from_config, gda, gradient_ascent, gradient_descent,
                             momentum, nesterov, par_optimisers)
from lenslearn.rig import REAL, Z2
from lenslearn.tensor import Tensor


def T(*v):
    return Tensor(REAL, np.array(v, dtype=float))


def B(*v):
    return Tensor(Z2, np.array(v, dtype=np.uint8))


def approx(a, b, tol=1e-12):
    return all(np.max(np.abs(x.data - y.data)) <= tol for x, y in zip(a, b, strict=True))


def test_ascent():
    o = gradient_ascent(2)
    assert o.state == Port((), REAL)
    assert approx(o.update((), (T(1, 2),), (T(0.1, 0.2),))[1], (T(1.1, 2.2),))
    assert o.update((), (T(1, 2),), (T(0, 0),))[1] == (T(1, 2),)
    z = gradient_ascent(Port(((2,),), Z2))
    assert z.update((), (B(1, 0),), (B(1, 1),))[1] == (B(0, 1),)
    assert o.lookahead((), (T(3, 4),)) == (T(3, 4),)


def test_descent():
    o = gradient_descent(2)
    assert approx(o.update((), (T(1, 2),), (T(0.1, 0.2),))[1], (T(0.9, 1.8),))
    assert o.update((), (T(1, 2),), (T(0, 0),))[1] == (T(1, 2),)


@pytest.mark.parametrize("p,g", list(itertools.product((0, 1), repeat=2)))
def test_z2_descent_is_ascent(p, g):
    port = Port(((1,),), Z2)
    a = gradient_ascent(port).update((), (B(p),), (B(g),))
    d = gradient_descent(port).update((), (B(p),), (B(g),))
    assert a == d


def test_momentum():
    o = momentum(1, 0.0)
    s, p = o.update((T(3),), (T(1),), (T(2),))
    assert s == (T(2),) and p == (T(3),)
    o = momentum(1, 0.5)
    s, p = o.update((T(1),), (T(0),), (T(1),))
    assert s == (T(0.5),) and p == (T(0.5),)
    for st_ in (T(0), T(5), T(-2)):
        assert o.lookahead((st_,), (T(7),)) == (T(7),)


def test_nesterov():
    o = nesterov(1, 0.5)
    assert o.lookahead((T(2),), (T(1),)) == (T(2),)
    n0, m0 = nesterov(1, 0.0), momentum(1, 0.0)
    for s, p, g in [(T(1), T(2), T(3)), (T(-1), T(0.5), T(0.25))]:
        assert n0.lookahead((s,), (p,)) == m0.lookahead((s,), (p,))
        assert n0.update((s,), (p,), (g,)) == m0.update((s,), (p,), (g,))
    s, p = o.update((T(2),), (T(1),), (T(1),))
    assert s == (T(0),) and p == (T(1),)


def test_real_only():
    z = Port(((1,),), Z2)
    for make in (lambda: momentum(z, 0.9), lambda: nesterov(z, 0.9), lambda: adagrad(z, 0.1),
                 lambda: adam(z)):
        with pytest.raises(RigSupportError):
            make()


def test_adagrad():
    eps = 0.1
    o = adagrad(1, eps)
    assert not o.additive
    g, p = o.update((T(0),), (T(0),), (T(1),))
    assert g == (T(1),)
    assert abs(p[0].item() - eps / (1e-7 + 1.0)) < 1e-15
    g2, p2 = o.update((T(4),), (T(3),), (T(0),))
    assert g2 == (T(4),) and p2 == (T(3),)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=20))
def test_adagrad_accumulator_nondecreasing(grads):
    o = adagrad(1, 0.01)
    s, p = (T(0),), (T(0),)
    for gr in grads:
        s_new, p = o.update(s, p, (T(gr),))
        assert s_new[0].item() >= s[0].item()
        s = s_new


def _adam_ref(gs, b1, b2, eps, delta):
    m = v = 0.0
    p = 0.0
    for t, g in enumerate(gs, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p + eps / (delta + np.sqrt(v / (1 - b2 ** t))) * (m / (1 - b1 ** t))
    return p, m, v


def test_adam_first_step():
    b1, b2, eps, delta = 0.9, 0.999, 0.01, 1e-8
    o = adam(1, b1, b2, eps, delta)
    assert not o.additive
    assert o.state.shapes == ((1,), (1,), ())
    g = 0.7
    st_, p = o.update(o.init_state(), (T(0),), (T(g),))
    assert abs(st_[0].item() - (1 - b1) * g) < 1e-15
    assert abs(p[0].item() - eps * g / (delta + abs(g))) < 1e-12
    assert st_[2].item() == 1.0
    st0, p0 = o.update(o.init_state(), (T(3),), (T(0),))
    assert p0 == (T(3),)


def test_adam_matches_reference(rng):
    gs = rng.normal(size=25)
    o = adam(1, 0.8, 0.99, 0.05, 1e-8)
    s, p = o.init_state(), (T(0),)
    for g in gs:
        s, p = o.update(s, p, (T(g),))
    want, m, v = _adam_ref(gs, 0.8, 0.99, 0.05, 1e-8)
    assert abs(p[0].item() - want) < 1e-12
    assert abs(s[0].item() - m) < 1e-12 and abs(s[1].item() - v) < 1e-12


def test_gda():
    o = gda(1, 1)
    s, (p, q) = o.update((), (T(1), T(1)), (T(0.5), T(0.5)))
    assert p == T(0.5) and q == T(1.5)
    z = gda(Port(((1,),), Z2), Port(((1,),), Z2))
    for a, b in itertools.product((0, 1), repeat=2):
        _, (p, q) = z.update((), (B(a), B(a)), (B(b), B(b)))
        assert p == q
    direct = par_optimisers(gradient_descent(1), gradient_ascent(1))
    assert direct.update((), (T(1), T(1)), (T(0.5), T(0.5))) == o.update((), (T(1), T(1)), (T(0.5), T(0.5)))


def test_par_optimisers_routes_state():
    o = par_optimisers(momentum(1, 0.5), nesterov(2, 0.25))
    assert o.state.shapes == ((1,), (2,)) and o.param.shapes == ((1,), (2,))
    s = (T(2), T(4, 8))
    p = (T(1), T(1, 1))
    assert o.lookahead(s, p) == (T(1),) + nesterov(2, 0.25).lookahead((T(4, 8),), (T(1, 1),))
    g = (T(1), T(1, 2))
    s_new, p_new = o.update(s, p, g)
    sa, pa = momentum(1, 0.5).update((T(2),), (T(1),), (T(1),))
    sb, pb = nesterov(2, 0.25).update((T(4, 8),), (T(1, 1),), (T(1, 2),))
    assert s_new == sa + sb and p_new == pa + pb


@pytest.mark.parametrize("make", [lambda: gradient_ascent(3), lambda: gradient_descent(3),
                                  lambda: momentum(3, 0.9), lambda: nesterov(3, 0.9),
                                  lambda: gda(3, 3)])
def test_linear_optimisers_are_additive(make, rng):
    o = make()
    assert o.additive
    for _ in range(20):
        x = tuple(Tensor(REAL, rng.normal(size=s)) for s in (o.state + o.param).shapes)
        a = tuple(Tensor(REAL, rng.normal(size=s)) for s in o.param.shapes)
        b = tuple(Tensor(REAL, rng.normal(size=s)) for s in o.param.shapes)
        # the update is affine in p'; its linear part is additive
        zero = o.param.zeros()
        base = o.lens.bwd(x, zero)
        lin = lambda d: tuple(u - v for u, v in zip(o.lens.bwd(x, d), base))
        assert approx(lin(add_values(a, b)), add_values(lin(a), lin(b)), 1e-12)


def test_adaptive_are_flagged_non_additive():
    assert not adagrad(2, 0.1).additive and not adam(2).additive


def test_from_config():
    p = Port(((2,),), REAL)
    assert from_config({"kind": "gd"}, p).name == "descent"
    assert from_config({"kind": "ascent"}, p).name == "ascent"
    assert from_config({"kind": "momentum", "gamma": 0.9}, p).name == "momentum"
    assert from_config({"kind": "nesterov", "gamma": 0.9}, p).name == "nesterov"
    assert from_config({"kind": "adagrad", "eps": 0.1}, p).name == "adagrad"
    a = from_config({"kind": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 0.01, "delta": 1e-8}, p)
    assert a.name == "adam" and not a.additive
    with pytest.raises(CatalogueError):
        from_config({"kind": "lion"}, p)


def test_stateless_forward_is_identity(rng):
    for o in (gradient_ascent(2), gradient_descent(2), gda(2, 1)):
        p = tuple(Tensor(REAL, rng.normal(size=s)) for s in o.param.shapes)
        assert o.lookahead((), p) == p
