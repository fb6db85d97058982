import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lenslearn.errors import ContractError
from lenslearn.rig import REAL, Z2, rig_add, rig_by_name, rig_mul, rig_neg, value

finite = st.floats(-1e3, 1e3, allow_nan=False)


def R(x):
    return value(REAL, x)


def B(x):
    return value(Z2, x)


def test_add_examples():
    assert float(rig_add(REAL, R(2.0), R(3.0))) == 5.0
    assert int(rig_add(Z2, B(1), B(1))) == 0
    assert float(rig_add(REAL, R(7.5), REAL.zero)) == 7.5


def test_mul_examples():
    assert int(rig_mul(Z2, B(1), B(1))) == 1
    assert int(rig_mul(Z2, B(1), B(0))) == 0
    assert float(rig_mul(REAL, R(2.0), R(4.0))) == 8.0


def test_neg_examples():
    assert float(rig_neg(REAL, R(3.0))) == -3.0
    assert int(rig_neg(Z2, B(1))) == 1
    assert float(rig_neg(REAL, R(0.0))) == 0.0


def test_mixed_rig_is_contract_violation():
    with pytest.raises(ContractError):
        rig_add(REAL, R(1.0), B(1))
    with pytest.raises(ContractError):
        rig_mul(Z2, R(1.0), B(1))


def test_z2_rejects_non_bits():
    with pytest.raises(ContractError):
        value(Z2, 2)


def test_rig_by_name():
    assert rig_by_name("Real") is REAL and rig_by_name("z2") is Z2
    with pytest.raises(ContractError):
        rig_by_name("tropical")


@pytest.mark.parametrize("a,b,c", list(itertools.product((0, 1), repeat=3)))
def test_z2_laws_exhaustive(a, b, c):
    A, Bv, C = B(a), B(b), B(c)
    add = lambda x, y: int(rig_add(Z2, x, y))
    mul = lambda x, y: int(rig_mul(Z2, x, y))
    assert add(A, Bv) == add(Bv, A) == (a ^ b)
    assert mul(A, Bv) == mul(Bv, A) == (a & b)
    assert int(rig_add(Z2, rig_add(Z2, A, Bv), C)) == int(rig_add(Z2, A, rig_add(Z2, Bv, C)))
    assert int(rig_mul(Z2, rig_mul(Z2, A, Bv), C)) == int(rig_mul(Z2, A, rig_mul(Z2, Bv, C)))
    assert int(rig_mul(Z2, A, rig_add(Z2, Bv, C))) == int(
        rig_add(Z2, rig_mul(Z2, A, Bv), rig_mul(Z2, A, C)))
    assert add(A, Z2.zero) == a and mul(A, Z2.one) == a
    assert add(A, rig_neg(Z2, A)) == 0


def _close(x, y):
    return abs(x - y) <= 1e-12 * max(1.0, abs(x), abs(y))


@given(finite, finite, finite)
def test_real_laws(a, b, c):
    A, Bv, C = R(a), R(b), R(c)
    f = float
    assert f(rig_add(REAL, A, Bv)) == f(rig_add(REAL, Bv, A))
    assert f(rig_mul(REAL, A, Bv)) == f(rig_mul(REAL, Bv, A))
    assert _close(f(rig_add(REAL, rig_add(REAL, A, Bv), C)), f(rig_add(REAL, A, rig_add(REAL, Bv, C))))
    assert _close(f(rig_mul(REAL, rig_mul(REAL, A, Bv), C)), f(rig_mul(REAL, A, rig_mul(REAL, Bv, C))))
    lhs = f(rig_mul(REAL, A, rig_add(REAL, Bv, C)))
    rhs = f(rig_add(REAL, rig_mul(REAL, A, Bv), rig_mul(REAL, A, C)))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(a) * (abs(b) + abs(c)))
    assert f(rig_add(REAL, A, rig_neg(REAL, A))) == 0.0
    assert f(rig_mul(REAL, A, REAL.one)) == a


def test_real_laws_random_triples():
    rng = np.random.default_rng(0)
    for a, b, c in rng.normal(size=(1000, 3)) * 10:
        assert _close(float(rig_add(REAL, rig_add(REAL, R(a), R(b)), R(c))),
                      float(rig_add(REAL, R(a), rig_add(REAL, R(b), R(c)))))
        assert _close(float(rig_mul(REAL, R(a), rig_add(REAL, R(b), R(c)))),
                      float(rig_add(REAL, rig_mul(REAL, R(a), R(b)), rig_mul(REAL, R(a), R(c)))))
