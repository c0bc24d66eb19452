import os
import subprocess
import sys

import numpy as np
import pytest

from labelbridge.substrate import _pykernels, kernels
from labelbridge.substrate.layers import GruParams, gru_sequence
from labelbridge.substrate.rng import Rng
from labelbridge.substrate.tensor import Tensor

needs_ext = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")


def _gru_case(g, b=3, t=7, h=5):
    xp = g.normal(size=(b, t, 3 * h))
    us = [g.normal(scale=0.4, size=(h, h)) for _ in range(3)]
    return xp, us, g.normal(size=(b, h))


@needs_ext
@pytest.mark.parametrize("shape", [(1, 1, 1), (3, 7, 5), (16, 10, 32), (2, 0, 4)])
def test_gru_backends_agree(shape):
    g = np.random.default_rng(sum(shape))
    xp, us, h0 = _gru_case(g, *shape)
    c = kernels.compiled_backend
    hs_p, cache_p = _pykernels.gru_forward(xp, *us, h0)
    hs_c, cache_c = c.gru_forward(xp, *us, h0)
    np.testing.assert_allclose(hs_c, hs_p, rtol=0, atol=1e-13)
    for a, b in zip(cache_c, cache_p):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
    dhs = g.normal(size=hs_p.shape)
    for a, b in zip(c.gru_backward(dhs, cache_c, *us), _pykernels.gru_backward(dhs, cache_p, *us)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_ext
def test_hmm_backends_agree():
    g = np.random.default_rng(5)
    lik = g.random((40, 9, 4)) + 0.01
    start = g.dirichlet(np.ones(4))
    trans = g.dirichlet(np.ones(4), size=4)
    pp, lp = _pykernels.hmm_posteriors(lik, start, trans)
    pc, lc = kernels.compiled_backend.hmm_posteriors(lik, start, trans)
    np.testing.assert_allclose(pc, pp, rtol=0, atol=1e-13)
    np.testing.assert_allclose(lc, lp, rtol=1e-13)


def test_hmm_posteriors_against_enumeration(backend):
    g = np.random.default_rng(8)
    L, T = 3, 4
    lik = g.random((1, T, L)) + 0.05
    start = g.dirichlet(np.ones(L))
    trans = g.dirichlet(np.ones(L), size=L)
    post, ll = kernels.hmm_posteriors(lik, start, trans)
    joint = np.zeros((L,) * T)
    for path in np.ndindex(*joint.shape):
        p = start[path[0]] * lik[0, 0, path[0]]
        for t in range(1, T):
            p *= trans[path[t - 1], path[t]] * lik[0, t, path[t]]
        joint[path] = p
    assert abs(ll[0] - np.log(joint.sum())) < 1e-12
    for t in range(T):
        marg = joint.sum(axis=tuple(a for a in range(T) if a != t)) / joint.sum()
        np.testing.assert_allclose(post[0, t], marg, atol=1e-13)


def test_gru_sequence_gradient_same_on_both_backends(backend):
    g = np.random.default_rng(2)
    p = GruParams(Rng(1), 3, 4)
    xs = Tensor(g.normal(size=(2, 5, 3)), requires_grad=True)
    w = Tensor(g.normal(size=(2, 5, 4)))
    (gru_sequence(p, xs) * w).sum().backward()
    assert xs.grad.shape == xs.shape
    grads = {k: v.grad.copy() for k, v in p.parameters().items()}
    prev = kernels.use_backend("python")
    try:
        p.zero_grad()
        xs.grad = None
        (gru_sequence(p, xs) * w).sum().backward()
    finally:
        kernels.use_backend(prev)
    for k, v in p.parameters().items():
        np.testing.assert_allclose(grads[k], v.grad, rtol=0, atol=1e-13)


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, LABELBRIDGE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from labelbridge.substrate import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_use_backend_validation():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
