import os
import subprocess
import sys

import numpy as np
import pytest

from dcbandit import _kernels_py as py
from dcbandit import kernels

ck = pytest.importorskip("dcbandit._ckernels", reason="compiled kernels not built")


@pytest.mark.parametrize("temperature", [0.1, 0.25, 1.0, 0.3, 0.0731])
@pytest.mark.parametrize("p_logit", [-2.2, 0.0, 1.5, -35.0, 31.0])
@pytest.mark.parametrize("u_rows", [1, 7])
def test_forward_backward_agree(temperature, p_logit, u_rows):
    rng = np.random.default_rng(17)
    x = rng.normal(size=(7, 33))
    u = rng.random((u_rows, 33))
    u[0, :3] = (0.0, 1.0, 1e-9)
    out_py, drop_py = py.concrete_forward(x, u, p_logit, temperature)
    out_c, drop_c = ck.concrete_forward(x, u, p_logit, temperature)
    np.testing.assert_allclose(out_c, out_py, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(drop_c, drop_py, rtol=1e-9, atol=1e-12)

    g = rng.normal(size=x.shape)
    gx_py, gl_py = py.concrete_backward(g, x, drop_py, p_logit, temperature)
    gx_c, gl_c = ck.concrete_backward(g, x, np.ascontiguousarray(drop_c), p_logit, temperature)
    np.testing.assert_allclose(gx_c, gx_py, rtol=1e-9, atol=1e-12)
    assert gl_c == pytest.approx(gl_py, rel=1e-8, abs=1e-12)


def test_adam_agrees():
    rng = np.random.default_rng(5)
    shapes = [(256, 256), (256,), (1,)]
    for shape in shapes:
        p1 = rng.normal(size=shape)
        p2 = p1.copy()
        m1, v1 = np.zeros(shape), np.zeros(shape)
        m2, v2 = np.zeros(shape), np.zeros(shape)
        for t in range(1, 6):
            g = rng.normal(size=shape)
            step = 1e-3 * np.sqrt(1 - 0.999**t) / (1 - 0.9**t)
            eps_hat = 1e-8 * np.sqrt(1 - 0.999**t)
            py.adam_step(p1, g, m1, v1, step, 0.9, 0.999, eps_hat)
            ck.adam_step(p2, g, m2, v2, step, 0.9, 0.999, eps_hat)
        np.testing.assert_allclose(p2, p1, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(v2, v1, rtol=1e-12)


def test_compiled_adam_rejects_bad_arrays():
    p = np.zeros(4)
    with pytest.raises((ValueError, TypeError)):
        ck.adam_step(p.astype(np.float32), np.zeros(4), np.zeros(4), np.zeros(4), 1e-3, 0.9, 0.999, 1e-8)
    with pytest.raises((ValueError, TypeError)):
        ck.adam_step(p, np.zeros(3), np.zeros(4), np.zeros(4), 1e-3, 0.9, 0.999, 1e-8)


@pytest.mark.skipif(bool(os.environ.get("DCBANDIT_PURE_PYTHON")), reason="fallback forced")
def test_compiled_backend_is_default():
    assert kernels.BACKEND == "cython"


def test_environment_variable_forces_fallback():
    env = dict(os.environ, DCBANDIT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from dcbandit import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_training_trajectory_matches_across_backends():
    """A few hundred steps of concrete-dropout training agree between backends."""
    script = """
import numpy as np
from dcbandit.nn import Network, AdamState, adam_update
rng = np.random.default_rng(0)
net = Network.mlp(6, (32, 32), rng=rng)
x = rng.random((64, 6)); y = (rng.random(64) < 0.5).astype(float)
state = AdamState.for_params(net.parameters())
for _ in range(200):
    _, g = net.loss_and_gradients(x, y, 64, net.sample_noise(rng, 64))
    adam_update(net.parameters(), g, state)
print(repr(float(net.forward(x, deterministic=True).sum())), repr(net.dropout_rates()))
"""
    runs = []
    for flag in ("", "1"):
        env = dict(os.environ, DCBANDIT_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True, check=True)
        runs.append(out.stdout.split(" ", 1))
    assert float(runs[0][0]) == pytest.approx(float(runs[1][0]), rel=1e-6)
    assert eval(runs[0][1]) == pytest.approx(eval(runs[1][1]), rel=1e-6)
