import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lenslearn.autodiff import (ACTIVATIONS, CATALOGUE, Const, Copy, Delete, Id, Par, Perm, Prim, Proj,
                                Seq, Sum, copy_n, differentiate, evaluate, mutated, par, parse, prim,
                                seq, swap, to_text)
from lenslearn.checks import (REAL_CASES, rand_value, random_real_expr, random_z2_expr, z2_exhaustive,
                              z2_jvp)
from lenslearn.errors import CatalogueError, ExprTypeError, RigSupportError
from lenslearn.lens import Mode, compose_lens, forget_backward, port
from lenslearn.rig import REAL, Z2
from lenslearn.tensor import Tensor

P = lambda *s: port(REAL, *s)


def T(v):
    return Tensor(REAL, np.asarray(v, dtype=float))


def B(v):
    return Tensor(Z2, np.asarray(v, dtype=np.uint8))


def central_jacobian_t(e, x, v, h=1e-5):
    """Independent oracle: Jᵀv by central differences, wire by wire."""
    out = []
    for i, xi in enumerate(x):
        g = np.zeros(xi.shape)
        for idx in np.ndindex(xi.shape):
            def at(s):
                d = xi.data.copy()
                d[idx] += s
                y = evaluate(e, x[:i] + (T(d),) + x[i + 1:])
                return sum(float(np.sum(a.data * b.data)) for a, b in zip(y, v))
            g[idx] = (at(h) - at(-h)) / (2 * h)
        out.append(g)
    return out


def test_identity_is_identity_lens():
    d = differentiate(Id(P((2,))))
    assert d.fwd((T([1, 2]),)) == (T([1, 2]),)
    assert d.bwd((T([1, 2]),), (T([3, 4]),)) == (T([3, 4]),)


def test_square_derivative():
    sq = seq(Copy(P((1,))), Prim("mul", ((1,),)))
    assert differentiate(sq).bwd((T([3.0]),), (T([1.0]),))[0].item() == 6.0
    fd = central_jacobian_t(sq, (T([3.0]),), (T([1.0]),))[0]
    assert abs(fd[0] - 6.0) / 6.0 <= 1e-6


@pytest.mark.parametrize("mode", list(Mode))
def test_seq_is_compose(mode, rng):
    for _ in range(20):
        f = random_real_expr(rng, 3, 2, 2)
        g = random_real_expr(rng, 2, 2, 2)
        x, v = rand_value(rng, f.dom), rand_value(rng, g.cod)
        a = differentiate(Seq(f, g), mode).bwd(x, v)
        b = compose_lens(differentiate(f, mode), differentiate(g, mode), mode).bwd(x, v)
        assert a == b


def test_evaluate_examples():
    c = T([1.0, 2.0])
    assert evaluate(Const(c), ()) == (c,)
    assert evaluate(Sum(P((2,))), (T([1, 2]), T([3, 4]))) == (T([4, 6]),)


def test_projection_law_random(rng):
    for i in range(100):
        e = random_real_expr(rng, 3, 3, 4) if i % 2 else random_z2_expr(rng, 3, 2, 3)
        x = rand_value(rng, e.dom)
        assert evaluate(e, x) == forget_backward(differentiate(e))(x)


def test_linear_layout():
    e = Prim("linear", (2, 2))
    x, W = T([1, 2]), T(np.eye(2))
    lens = differentiate(e)
    assert lens.fwd((x, W)) == (T([1, 2]),)
    dx, dW = lens.bwd((x, W), (T([1, 0]),))
    assert dx == T([1, 0])
    assert dW == T(np.outer([1, 2], [1, 0])) and dW.shape == W.shape


def test_linear_matches_paper_formula(rng):
    W, x, dy = rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=2)
    dx, dW = differentiate(Prim("linear", (3, 2))).bwd((T(x), T(W)), (T(dy),))
    assert np.allclose(dx.data, W @ dy) and np.allclose(dW.data, np.outer(x, dy))
    fd = central_jacobian_t(Prim("linear", (3, 2)), (T(x), T(W)), (T(dy),))
    assert np.allclose(fd[0], dx.data, atol=1e-8) and np.allclose(fd[1], dW.data, atol=1e-8)


def test_sigmoid_softargmax_examples():
    assert evaluate(Prim("sigmoid", ((1,),)), (T([0.0]),))[0].item() == 0.5
    sm = Prim("softargmax", (2,))
    assert evaluate(sm, (T([0, 0]),)) == (T([0.5, 0.5]),)
    g = differentiate(sm).bwd((T([0, 0]),), (T([1, 0]),))[0].data
    assert np.allclose(g, [0.25, -0.25])
    assert np.allclose(central_jacobian_t(sm, (T([0, 0]),), (T([1, 0]),))[0], g, atol=1e-9)


def test_activation_derivatives():
    x = np.array([-1.5, -0.2, 0.0, 0.3, 2.0])
    s = 1 / (1 + np.exp(-x))
    g = {n: differentiate(Prim(n, ((5,),))).bwd((T(x),), (T(np.ones(5)),))[0].data
         for n in ("sigmoid", "tanh", "relu", "gelu")}
    assert np.allclose(g["sigmoid"], s * (1 - s))
    assert np.allclose(g["tanh"], 1 - np.tanh(x) ** 2)
    assert g["relu"].tolist() == [0, 0, 0, 1, 1]
    s17 = 1 / (1 + np.exp(-1.702 * x))
    assert np.allclose(g["gelu"], s17 + 1.702 * x * s17 * (1 - s17))
    leaky = differentiate(Prim("leaky_relu", ((5,), 0.1))).bwd((T(x),), (T(np.ones(5)),))[0].data
    assert np.allclose(leaky, [0.1, 0.1, 0.1, 1, 1])


@pytest.mark.parametrize("name", sorted(REAL_CASES))
def test_every_real_primitive_against_fd(name, rng):
    args, positive = REAL_CASES[name]
    e = Prim(name, args)
    for _ in range(3):
        x = rand_value(rng, e.dom, positive=positive)
        v = rand_value(rng, e.cod)
        got = differentiate(e).bwd(x, v)
        for a, b in zip(got, central_jacobian_t(e, x, v)):
            assert np.allclose(a.data, b, rtol=1e-4, atol=1e-6), name


def test_softargmax_rejected_over_z2():
    with pytest.raises(RigSupportError):
        Prim("softargmax", (2,), Z2)
    with pytest.raises(RigSupportError):
        Prim("tanh", ((2,),), Z2)


def test_unknown_primitive():
    with pytest.raises(CatalogueError):
        Prim("cosh", ((2,),))


def test_ill_typed_seq_reports_path():
    with pytest.raises(ExprTypeError) as exc:
        seq(Prim("tanh", ((2,),)), Prim("tanh", ((2,),)), Prim("tanh", ((3,),)))
    assert "seq[1]" in str(exc.value)
    with pytest.raises(ExprTypeError):
        Perm(P((1,), (2,)), (0, 0))


def test_evaluate_shape_error():
    from lenslearn.errors import ShapeError
    with pytest.raises(ShapeError):
        evaluate(Prim("tanh", ((2,),)), (T([1.0]),))


def test_structural_nodes():
    p = P((2,))
    x = (T([1, 2]), T([3, 4]))
    assert differentiate(Proj(0, (p, p))).bwd(x, (T([5, 6]),)) == (T([5, 6]), T([0, 0]))
    assert differentiate(Delete(p)).bwd((T([1, 2]),), ()) == (T([0, 0]),)
    assert evaluate(swap(p, P((1,))), (T([1, 2]), T([9]))) == (T([9]), T([1, 2]))
    assert evaluate(copy_n(p, 3), (T([1, 2]),)) == (T([1, 2]),) * 3
    assert differentiate(copy_n(p, 3)).bwd((T([1, 2]),), (T([1, 1]),) * 3) == (T([3, 3]),)


def test_z2_gates():
    xor, and_ = Sum(port(Z2, (1,))), Prim("mul", ((1,),), Z2)
    for a, b in itertools.product((0, 1), repeat=2):
        assert evaluate(xor, (B([a]), B([b])))[0].item() == a ^ b
        assert evaluate(and_, (B([a]), B([b])))[0].item() == a & b
        # R[and]((a, b), 1) = (b, a): the formal derivative of ab
        assert differentiate(and_).bwd((B([a]), B([b])), (B([1]),)) == (B([b]), B([a]))
        assert differentiate(xor).bwd((B([a]), B([b])), (B([1]),)) == (B([1]), B([1]))


def test_z2_exhaustive_oracle(rng):
    for _ in range(15):
        e = random_z2_expr(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)), 3)
        assert z2_exhaustive(e) == []


def test_z2_jvp_of_product():
    e = seq(Copy(port(Z2, (1,))), Prim("mul", ((1,),), Z2))
    # d(x·x) = 2x dx = 0 over Z2
    for a in (0, 1):
        assert int(z2_jvp(e, [np.array([a])], [np.array([1])])[1][0][0]) == 0
        assert differentiate(e).bwd((B([a]),), (B([1]),)) == (B([0]),)


def test_mutation_changes_derivative():
    e = Prim("tanh", ((2,),))
    x, v = (T([0.1, 0.2]),), (T([1.0, 1.0]),)
    good = differentiate(e).bwd(x, v)
    with mutated("tanh"):
        bad = differentiate(e).bwd(x, v)
    assert bad == tuple(-t for t in good)
    assert differentiate(e).bwd(x, v) == good
    assert CATALOGUE["tanh"].name == "tanh"


def test_text_roundtrip():
    text = "(seq (prim linear 2 3) (prim tanh 3))"
    e = parse(text)
    assert parse(to_text(e)).dom == e.dom
    x = (T([1, 2]), T(np.arange(6).reshape(2, 3) / 10))
    assert evaluate(parse(to_text(e)), x) == evaluate(e, x)
    with pytest.raises(ExprTypeError):
        parse("(seq (prim tanh 2)")


def test_activation_list_is_registered():
    assert all(a in CATALOGUE for a in ACTIVATIONS)


def test_prim_helper_and_operators():
    e = prim("tanh", (2,)) >> prim("sigmoid", (2,))
    assert isinstance(e, Seq)
    assert isinstance(prim("tanh", (1,)) | prim("tanh", (1,)), Par)
    assert len(par(prim("tanh", (1,)), prim("tanh", (1,)), prim("tanh", (1,))).dom) == 3


@given(st.integers(0, 2**31 - 1))
def test_fd_random_composites(seed):
    rng = np.random.default_rng(seed)
    e = random_real_expr(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)), 3, width=4)
    x, v = rand_value(rng, e.dom), rand_value(rng, e.cod)
    got = differentiate(e).bwd(x, v)
    for a, b in zip(got, central_jacobian_t(e, x, v)):
        assert np.allclose(a.data, b, rtol=1e-4, atol=1e-5)
