"""Backend selection for the hot kernels (concrete dropout mask, Adam step).

The compiled extension is preferred. Set ``DCBANDIT_PURE_PYTHON=1`` to force
the numpy fallback (useful for benchmarking and for checking that both
backends agree).
"""
import os

BACKEND = "python"

if not os.environ.get("DCBANDIT_PURE_PYTHON"):
    try:
        from ._ckernels import adam_step, concrete_backward, concrete_forward

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import adam_step, concrete_backward, concrete_forward

__all__ = ["BACKEND", "adam_step", "concrete_forward", "concrete_backward"]
