"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 7]

Kernel timings call both modules directly. The end-to-end rows time one
concrete-dropout retrain (64 epochs on 512 casino-sized examples) in a
subprocess per backend, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dcbandit import _kernels_py as py

try:
    from dcbandit import _ckernels as ck
except ImportError:
    ck = None

RETRAIN = """
import time, numpy as np
from dcbandit.agents import AgentConfig, AgentStreams, ConcreteDropoutAgent
rng = np.random.default_rng(0)
agent = ConcreteDropoutAgent(AgentConfig(), 2, 5, AgentStreams.from_seed(0))
for _ in range(512):
    agent.observe(rng.integers(0, 2, 5).astype(float), int(rng.integers(2)), int(rng.integers(2)))
t = time.perf_counter(); agent.retrain(); print(time.perf_counter() - t)
"""


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(rng):
    x = rng.normal(size=(64, 256))
    u = rng.random((64, 256))
    g = rng.normal(size=(64, 256))
    _, drop = py.concrete_forward(x, u, -2.2, 0.1)
    p = rng.normal(size=(256, 256))
    grad = rng.normal(size=p.shape)
    m, v = np.zeros_like(p), np.zeros_like(p)

    def cases(mod):
        return {
            "concrete forward 64x256": lambda: mod.concrete_forward(x, u, -2.2, 0.1),
            "concrete backward 64x256": lambda: mod.concrete_backward(g, x, drop, -2.2, 0.1),
            "adam step 256x256": lambda: mod.adam_step(p, grad, m, v, 1e-3, 0.9, 0.999, 1e-8),
        }
    return cases


def retrain_seconds(pure):
    env = dict(os.environ, DCBANDIT_PURE_PYTHON="1" if pure else "")
    out = subprocess.run([sys.executable, "-c", RETRAIN], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--number", type=int, default=200)
    args = parser.parse_args()

    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'case':32s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, fn in cases(py).items():
        t_py = best(fn, args.repeat, args.number)
        if ck is None:
            print(f"{name:32s} {t_py * 1e6:10.1f}us {'n/a':>12s}")
            continue
        t_c = best(cases(ck)[name], args.repeat, args.number)
        print(f"{name:32s} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us {t_py / t_c:7.2f}x")

    t_py = min(retrain_seconds(True) for _ in range(2))
    if ck is None:
        print(f"{'retrain 512 examples':32s} {t_py:11.2f}s {'n/a':>12s}")
        return
    t_c = min(retrain_seconds(False) for _ in range(2))
    print(f"{'retrain 512 examples':32s} {t_py:11.2f}s {t_c:11.2f}s {t_py / t_c:7.2f}x")


if __name__ == "__main__":
    main()
