"""Reference computations shared by the test modules."""
import numpy as np

from lenslearn.rig import REAL
from lenslearn.tensor import Tensor


def fd_vjp(fn, x, v, h=1e-5):
    """Central-difference Jᵀv for ``fn`` mapping a tuple of real tensors to a tuple."""
    arrays = [t.data.astype(float) for t in x]
    out = []
    for i, xi in enumerate(arrays):
        g = np.zeros(xi.shape)
        for idx in np.ndindex(xi.shape):
            def at(s):
                z = [a.copy() for a in arrays]
                z[i][idx] += s
                y = fn(tuple(Tensor(REAL, a) for a in z))
                return sum(float(np.sum(a.data * b.data)) for a, b in zip(y, v))
            g[idx] = (at(h) - at(-h)) / (2 * h)
        out.append(g)
    return out


def assert_matches_fd(lens, x, v, rtol=1e-4, atol=1e-6):
    got = lens.bwd(x, v)
    for a, b in zip(got, fd_vjp(lens.fwd, x, v), strict=True):
        np.testing.assert_allclose(a.data, b, rtol=rtol, atol=atol)
