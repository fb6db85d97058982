import numpy as np
import pytest
from hypothesis import given, strategies as st

from lenslearn.errors import CompositionError, ContractError, ShapeError
from lenslearn.lens import (Mode, Port, add_values, chain, compose_lens, constant_lens, copy_lens,
                            delete_lens, forget_backward, identity_lens, lens, mul_lens,
                            par_lens, perm_lens, port, proj_lens, run, sum_lens, unit)
from lenslearn.rig import REAL, Z2
from lenslearn.tensor import Tensor, hadamard, scale, tensor

S = port(REAL, (1,))
MODES = list(Mode)


def T(*v):
    return Tensor(REAL, np.array(v, dtype=float))


def double(key="double"):
    return lens(S, S, lambda x: (scale(2.0, x[0]),), lambda x, d: (scale(2.0, d[0]),), key=key)


def square(key="square"):
    return lens(S, S, lambda x: (hadamard(x[0], x[0]),),
                lambda x, d: (scale(2.0, hadamard(x[0], d[0])),), key=key)


def sine(key="sin"):
    return lens(S, S, lambda x: (Tensor(REAL, np.sin(x[0].data)),),
                lambda x, d: (Tensor(REAL, np.cos(x[0].data) * d[0].data),), key=key)


def test_identity_examples():
    i = identity_lens(port(REAL, (2,)))
    assert i.fwd((T(1, 2),)) == (T(1, 2),)
    assert i.bwd((T(1, 2),), (T(5, 7),)) == (T(5, 7),)
    assert i.bwd((T(1, 2),), (T(0, 0),)) == (T(0, 0),)


@pytest.mark.parametrize("mode", MODES)
def test_compose_double_square(mode):
    c = compose_lens(double(), square(), mode)
    assert c.bwd((T(3),), (T(1),))[0].item() == 24.0
    h = 1e-5
    fd = ((2 * (3 + h)) ** 2 - (2 * (3 - h)) ** 2) / (2 * h)
    assert abs(fd - 24.0) < 1e-6
    y, dx, _ = run(c, (T(3),), (T(1),))
    assert y[0].item() == 36.0 and dx[0].item() == 24.0


@pytest.mark.parametrize("mode", MODES)
def test_identity_unit_law(mode, rng):
    f = sine()
    for _ in range(10):
        x, d = (T(rng.normal()),), (T(rng.normal()),)
        for c in (compose_lens(identity_lens(S), f, mode), compose_lens(f, identity_lens(S), mode)):
            assert c.fwd(x) == f.fwd(x)
            assert c.bwd(x, d) == f.bwd(x, d)


def test_compose_port_mismatch():
    with pytest.raises(CompositionError) as exc:
        compose_lens(identity_lens(S), identity_lens(port(REAL, (2,))))
    assert "[1]" in str(exc.value) and "[2]" in str(exc.value)


def test_three_chain_counters():
    fs = [double("a"), square("b"), sine("c")]
    _, _, rep = run(chain(fs, Mode.CHECKPOINTED), (T(0.3),), (T(1.0),))
    assert [rep.fwd_calls[k] for k in "abc"] == [2, 2, 1]
    _, _, rep = run(chain(fs, Mode.MEMOISED), (T(0.3),), (T(1.0),))
    assert [rep.fwd_calls[k] for k in "abc"] == [1, 1, 1]
    assert [rep.bwd_calls[k] for k in "abc"] == [1, 1, 1]


@pytest.mark.parametrize("n", range(2, 9))
def test_counter_law(n):
    fs = [sine(f"p{i}") for i in range(n)]
    for mode, want in ((Mode.MEMOISED, [1] * n), (Mode.CHECKPOINTED, [2] * (n - 1) + [1])):
        _, _, rep = run(chain(fs, mode), (T(0.7),), (T(1.0),))
        assert [rep.fwd_calls[f"p{i}"] for i in range(n)] == want


def test_report_is_per_evaluation():
    c = chain([double("a"), sine("b")])
    _, _, r1 = run(c, (T(1.0),), (T(1.0),))
    _, _, r2 = run(c, (T(1.0),), (T(1.0),))
    assert r1.fwd_calls == r2.fwd_calls and r1 is not r2
    assert r1.live_residuals == 0 and r1.peak_residuals >= 1
    c.fwd((T(1.0),))
    assert r2.fwd_calls["a"] == 1


def test_par_examples():
    p = par_lens(double(), square())
    assert p.bwd((T(1), T(2)), (T(1), T(1))) == (T(2), T(4))
    assert p.fwd((T(1), T(2))) == (T(2), T(4))
    ii = par_lens(identity_lens(S), identity_lens(S))
    x = (T(1), T(2))
    assert ii.fwd(x) == x and ii.bwd(x, x) == x


def test_par_rig_mismatch():
    with pytest.raises(ContractError):
        par_lens(identity_lens(S), identity_lens(port(Z2, (1,))))


def test_forget_backward():
    f, g = sine(), double()
    x = (T(0.4),)
    assert forget_backward(identity_lens(S))(x) == x
    assert forget_backward(compose_lens(f, g))(x) == forget_backward(g)(forget_backward(f)(x))
    assert forget_backward(par_lens(f, g))(x + x) == f.fwd(x) + g.fwd(x)


def test_structural_lenses():
    p2 = port(REAL, (2,))
    assert copy_lens(p2).bwd((T(0, 0),), (T(1, 2), T(3, 4))) == (T(4, 6),)
    assert copy_lens(p2).fwd((T(1, 2),)) == (T(1, 2), T(1, 2))
    assert mul_lens(REAL, (1,)).bwd((T(2), T(5)), (T(1),)) == (T(5), T(2))
    assert delete_lens(p2).bwd((T(3, 4),), ()) == (T(0, 0),)
    assert delete_lens(p2).fwd((T(3, 4),)) == ()
    assert sum_lens(p2).fwd((T(1, 2), T(3, 4))) == (T(4, 6),)
    assert sum_lens(p2).bwd((T(1, 2), T(3, 4)), (T(1, 1),)) == (T(1, 1), T(1, 1))
    c = constant_lens(T(9))
    assert c.dom == unit(REAL) and c.fwd(()) == (T(9),) and c.bwd((), (T(1),)) == ()
    pr = proj_lens([S, p2], 0)
    assert pr.bwd((T(1), T(2, 3)), (T(5),)) == (T(5), T(0, 0))


def test_perm_lens():
    p = Port(((1,), (2,), (3,)), REAL)
    f = perm_lens(p, (2, 0, 1))
    x = (T(1), T(2, 3), T(4, 5, 6))
    y = f.fwd(x)
    assert y == (x[2], x[0], x[1])
    assert f.bwd(x, y) == x
    with pytest.raises(ShapeError):
        perm_lens(p, (0, 0, 1))


def test_port_check():
    p = port(REAL, (2,))
    p.check((T(1, 2),))
    with pytest.raises(ShapeError):
        p.check((T(1),))
    with pytest.raises(ContractError):
        p.check((tensor([1, 0], Z2),))


def _random_chain(rng, depth, n=3):
    """A chain of random smooth lenses on R^n, each ``x -> tanh(Ax) * c``."""
    p = port(REAL, (n,))
    out = []
    for i in range(depth):
        A = rng.normal(size=(n, n))
        c = rng.normal(size=n)

        def fwd(x, A=A, c=c):
            return (Tensor(REAL, np.tanh(A @ x[0].data) * c),)

        def bwd(x, d, A=A, c=c):
            z = np.tanh(A @ x[0].data)
            return (Tensor(REAL, A.T @ ((1 - z * z) * c * d[0].data)),)
        out.append(lens(p, p, fwd, bwd, key=f"r{i}"))
    return out


def test_modes_agree_on_random_chains(rng):
    for _ in range(100):
        depth = int(rng.integers(1, 7))
        fs = _random_chain(rng, depth)
        x, d = (T(*rng.normal(size=3)),), (T(*rng.normal(size=3)),)
        a = chain(fs, Mode.CHECKPOINTED).bwd(x, d)[0].data
        b = chain(fs, Mode.MEMOISED).bwd(x, d)[0].data
        assert np.max(np.abs(a - b)) <= 1e-12


@pytest.mark.parametrize("mode", MODES)
def test_associativity(mode, rng):
    for _ in range(20):
        f, g, h = _random_chain(rng, 3)
        x, d = (T(*rng.normal(size=3)),), (T(*rng.normal(size=3)),)
        left = compose_lens(compose_lens(f, g, mode), h, mode)
        right = compose_lens(f, compose_lens(g, h, mode), mode)
        assert np.max(np.abs(left.fwd(x)[0].data - right.fwd(x)[0].data)) <= 1e-12
        assert np.max(np.abs(left.bwd(x, d)[0].data - right.bwd(x, d)[0].data)) <= 1e-12


vec3 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3)


@given(vec3, vec3, vec3, st.integers(0, 2**31 - 1), st.sampled_from(MODES))
def test_bwd_additive(x, a, b, seed, mode):
    f = chain(_random_chain(np.random.default_rng(seed), 3), mode)
    X, A, B = (T(*x),), (T(*a),), (T(*b),)
    lhs = f.bwd(X, add_values(A, B))[0].data
    rhs = (f.bwd(X, A)[0] + f.bwd(X, B)[0]).data
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
    assert np.all(f.bwd(X, (T(0, 0, 0),))[0].data == 0)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=4),
       st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_structural_z2_additive(a, b):
    p = port(Z2, (2,))
    A = (tensor(a[:2], Z2), tensor(a[2:], Z2))
    B = (tensor(b[:2], Z2), tensor(b[2:], Z2))
    x = (tensor([1, 0], Z2), tensor([1, 1], Z2))
    for f in (copy_lens(p), sum_lens(p), mul_lens(Z2, (2,))):
        da, db = A[:len(f.cod)], B[:len(f.cod)]
        assert f.bwd(x[:len(f.dom)], add_values(da, db)) == add_values(
            f.bwd(x[:len(f.dom)], da), f.bwd(x[:len(f.dom)], db))
