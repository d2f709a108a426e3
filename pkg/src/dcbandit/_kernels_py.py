"""Pure numpy implementation of the concrete dropout kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``DCBANDIT_PURE_PYTHON`` is set. Both backends share these signatures.
"""
import numpy as np

U_EPS = 1e-7


def concrete_forward(x, u, p_logit, temperature):
    """Apply a relaxed dropout mask to ``x``.

    ``u`` holds one uniform variate per unit and broadcasts over rows when it
    has a single row. Returns ``(out, drop)`` where ``drop`` is the relaxed
    drop indicator needed by :func:`concrete_backward`.
    """
    u = np.clip(u, U_EPS, 1.0 - U_EPS)
    s = (p_logit + np.log(u) - np.log1p(-u)) / temperature
    drop = 1.0 / (1.0 + np.exp(-s))
    p = 1.0 / (1.0 + np.exp(-p_logit))
    out = x * ((1.0 - drop) / (1.0 - p))
    return out, np.broadcast_to(drop, x.shape)


def concrete_backward(grad_out, x, drop, p_logit, temperature):
    """Gradients of the masked output w.r.t. ``x`` and the dropout logit."""
    p = 1.0 / (1.0 + np.exp(-p_logit))
    scale = 1.0 / (1.0 - p)
    keep = 1.0 - drop
    grad_x = grad_out * (keep * scale)
    dmask = keep * p - drop * keep / temperature
    grad_logit = scale * float(np.sum(grad_out * x * dmask))
    return grad_x, grad_logit


def adam_step(param, grad, m, v, step, beta1, beta2, eps_hat):
    """In-place Adam update of one array; bias correction is folded into
    ``step`` and ``eps_hat``."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    param -= step * m / (np.sqrt(v) + eps_hat)
