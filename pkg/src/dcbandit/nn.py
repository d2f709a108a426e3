"""Small dense networks with reverse-mode gradients and learnable dropout.

The network is a stack of :class:`DenseLayer` objects ending in a sigmoid
unit. Dropout is attached to a layer's *input*, so a 2x256 net has dropout on
the outputs of both hidden layers and none on the raw features. Training
minimises mean binary cross-entropy plus the concrete dropout regulariser::

    sum_layers  l^2 / (N (1 - p)) * ||W||^2  +  2 / N * fan_in * (p log p + (1 - p) log(1 - p))

where ``N`` is the number of examples in the training set, so both terms fade
as data accumulates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import adam_step, concrete_backward, concrete_forward

ACTIVATIONS = ("relu", "sigmoid", "identity")
DROPOUT_MODES = ("none", "bernoulli", "concrete")
U_EPS = 1e-7


class NumericalError(FloatingPointError):
    """Raised when an activation, loss or gradient stops being finite."""


def logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    return math.log(p) - math.log1p(-p)


def concrete_mask(p, u, temperature):
    """Retained fraction ``1 - z`` of a relaxed Bernoulli(p) drop indicator.

    ``z = logistic((logit p + logit u) / temperature)``; as the temperature
    goes to zero this becomes a hard ``u < p`` drop. ``u`` is clamped to
    ``[1e-7, 1 - 1e-7]``.
    """
    u = np.clip(u, U_EPS, 1.0 - U_EPS)
    s = (np.log(p) - np.log1p(-p) + np.log(u) - np.log1p(-u)) / temperature
    return 1.0 - logistic(s)


@dataclass
class DropoutSpec:
    """Dropout applied to the input of a layer.

    ``rate`` is used by the ``bernoulli`` mode. The ``concrete`` mode keeps
    its rate as an unconstrained logit (a one-element array so optimisers can
    update it in place).
    """

    mode: str = "none"
    rate: float = 0.0
    temperature: float = 0.1
    p_logit: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in DROPOUT_MODES:
            raise ValueError(f"unknown dropout mode {self.mode!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.mode == "bernoulli" and not 0.0 < self.rate < 1.0:
            raise ValueError("bernoulli dropout rate must lie in (0, 1)")
        if self.mode == "concrete" and self.p_logit is None:
            if not 0.0 < self.rate < 1.0:
                raise ValueError("initial concrete dropout rate must lie in (0, 1)")
            self.p_logit = np.array([logit(self.rate)])

    @classmethod
    def concrete(cls, p=0.1, temperature=0.1):
        return cls(mode="concrete", rate=p, temperature=temperature)

    @classmethod
    def bernoulli(cls, p):
        return cls(mode="bernoulli", rate=p)

    @property
    def p(self):
        if self.mode == "concrete":
            return float(logistic(self.p_logit[0]))
        if self.mode == "bernoulli":
            return self.rate
        return 0.0


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"
    dropout: DropoutSpec = field(default_factory=DropoutSpec)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.bias.shape[0] != self.weights.shape[1]:
            raise ValueError(
                f"bias of length {self.bias.shape[0]} does not match weights {self.weights.shape}"
            )

    @property
    def fan_in(self):
        return self.weights.shape[0]

    @property
    def fan_out(self):
        return self.weights.shape[1]


def init_layer(rng, fan_in, fan_out, activation="relu", dropout=None):
    """Uniform fan-in scaled initialisation (He for relu, LeCun otherwise)."""
    gain = 6.0 if activation == "relu" else 3.0
    limit = math.sqrt(gain / fan_in)
    return DenseLayer(
        weights=rng.uniform(-limit, limit, size=(fan_in, fan_out)),
        bias=np.zeros(fan_out),
        activation=activation,
        dropout=dropout if dropout is not None else DropoutSpec(),
    )


class Network:
    """Feed-forward net whose last layer is a single sigmoid unit."""

    def __init__(self, layers):
        if not layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ValueError(
                    f"layer widths do not chain: {prev.weights.shape} -> {nxt.weights.shape}"
                )
        if layers[-1].fan_out != 1 or layers[-1].activation != "sigmoid":
            raise ValueError("the last layer must be a single sigmoid unit")
        self.layers = list(layers)

    @classmethod
    def mlp(cls, in_dim, hidden=(256, 256), dropout="concrete", p=0.1,
            temperature=0.1, activation="relu", rng=None):
        """Build ``in_dim -> hidden... -> 1`` with dropout after every hidden layer."""
        rng = np.random.default_rng() if rng is None else rng
        widths = [in_dim, *hidden]
        layers = []
        for i, (fi, fo) in enumerate(zip(widths, widths[1:] + [1])):
            last = i == len(widths) - 1
            if i == 0 or dropout == "none":
                spec = DropoutSpec()
            elif dropout == "concrete":
                spec = DropoutSpec.concrete(p, temperature)
            elif dropout == "bernoulli":
                spec = DropoutSpec.bernoulli(p)
            else:
                raise ValueError(f"unknown dropout mode {dropout!r}")
            layers.append(init_layer(rng, fi, fo, "sigmoid" if last else activation, spec))
        return cls(layers)

    @property
    def in_dim(self):
        return self.layers[0].fan_in

    @property
    def stochastic(self):
        return any(layer.dropout.mode != "none" for layer in self.layers)

    def parameters(self):
        """Trainable arrays, in the same order as the gradients returned by
        :meth:`loss_and_gradients`."""
        params = []
        for layer in self.layers:
            params += [layer.weights, layer.bias]
            if layer.dropout.mode == "concrete":
                params.append(layer.dropout.p_logit)
        return params

    def dropout_rates(self):
        return [layer.dropout.p for layer in self.layers if layer.dropout.mode != "none"]

    def sample_noise(self, rng, rows=1):
        """One uniform variate per droppable unit (per row when ``rows > 1``).

        Layers without dropout get ``None``.
        """
        return [
            rng.random((rows, layer.fan_in)) if layer.dropout.mode != "none" else None
            for layer in self.layers
        ]

    def forward(self, inputs, noise=None, deterministic=False):
        """Predicted reward probability for every row of ``inputs``."""
        logits, _ = self._forward(inputs, noise, deterministic)
        return logistic(logits)

    __call__ = forward

    def _forward(self, inputs, noise, deterministic, keep=False):
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input has {x.shape[1]} columns, network expects {self.in_dim}")
        if noise is None and self.stochastic and not deterministic:
            raise ValueError("a stochastic forward pass needs a noise draw")
        cache = []
        h = x
        for i, layer in enumerate(self.layers):
            spec = layer.dropout
            drop = None
            if spec.mode != "none" and not deterministic:
                u = noise[i]
                if u is None or u.shape[-1] != layer.fan_in or u.shape[0] not in (1, h.shape[0]):
                    raise ValueError(f"noise draw does not cover layer {i}")
                if spec.mode == "concrete":
                    inp, drop = concrete_forward(h, u, float(spec.p_logit[0]), spec.temperature)
                else:
                    drop = u < spec.rate
                    inp = h * (~drop / (1.0 - spec.rate))
            else:
                inp = h
            a = inp @ layer.weights + layer.bias
            if keep:
                cache.append((h, inp, drop, a))
            if layer.activation == "relu":
                h = np.maximum(a, 0.0)
            elif layer.activation == "sigmoid" and i < len(self.layers) - 1:
                h = logistic(a)
            else:
                h = a
        logits = h[:, 0]
        if not np.all(np.isfinite(logits)):
            raise NumericalError("non-finite activation in forward pass")
        return logits, cache

    def regularizer(self, dataset_size, length_scale=0.01):
        """Value of the weight and dropout-entropy penalty."""
        weight_coef = length_scale**2 / dataset_size
        entropy_coef = 2.0 / dataset_size
        total = 0.0
        for layer in self.layers:
            p = layer.dropout.p
            total += weight_coef / (1.0 - p) * float(np.sum(layer.weights**2))
            if layer.dropout.mode == "concrete":
                total += entropy_coef * layer.fan_in * (p * math.log(p) + (1 - p) * math.log1p(-p))
        return total

    def loss_and_gradients(self, inputs, targets, dataset_size, noise=None,
                           length_scale=0.01, deterministic=False):
        """Regularised mean BCE and its gradient for every parameter.

        Gradients come back as a list aligned with :meth:`parameters`.
        """
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        n = y.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        if dataset_size <= 0:
            raise ValueError("dataset_size must be positive")
        logits, cache = self._forward(inputs, noise, deterministic, keep=True)
        if logits.shape[0] != n:
            raise ValueError("inputs and targets disagree on batch size")
        # softplus(z) - y z, written to stay finite for large |z|
        bce = np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
        loss = float(np.mean(bce)) + self.regularizer(dataset_size, length_scale)
        if not math.isfinite(loss):
            raise NumericalError("non-finite loss")

        weight_coef = length_scale**2 / dataset_size
        entropy_coef = 2.0 / dataset_size
        grads = []
        delta = ((logistic(logits) - y) / n)[:, None]
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            spec = layer.dropout
            h, inp, drop, _ = cache[i]
            p = spec.p
            grad_w = inp.T @ delta + (2.0 * weight_coef / (1.0 - p)) * layer.weights
            grad_b = delta.sum(axis=0)
            layer_grads = [grad_w, grad_b]
            need_input_grad = i > 0
            if spec.mode == "concrete" and not deterministic:
                d_inp = delta @ layer.weights.T
                d_h, g_logit = concrete_backward(
                    d_inp, h, drop, float(spec.p_logit[0]), spec.temperature
                )
            elif spec.mode == "bernoulli" and not deterministic and need_input_grad:
                d_h = (delta @ layer.weights.T) * (~drop / (1.0 - p))
            elif need_input_grad:
                d_h = delta @ layer.weights.T
            if spec.mode == "concrete":
                if deterministic:
                    g_logit = 0.0
                wsq = float(np.sum(layer.weights**2))
                g_logit += weight_coef * wsq * p / (1.0 - p)
                g_logit += entropy_coef * layer.fan_in * float(spec.p_logit[0]) * p * (1.0 - p)
                layer_grads.append(np.array([g_logit]))
            grads = layer_grads + grads
            if need_input_grad:
                prev = self.layers[i - 1]
                a_prev = cache[i - 1][3]
                if prev.activation == "relu":
                    delta = d_h * (a_prev > 0.0)
                elif prev.activation == "sigmoid":
                    s = logistic(a_prev)
                    delta = d_h * s * (1.0 - s)
                else:
                    delta = d_h
        return loss, grads

    def copy(self):
        return Network([
            DenseLayer(
                layer.weights.copy(), layer.bias.copy(), layer.activation,
                DropoutSpec(
                    layer.dropout.mode, layer.dropout.rate, layer.dropout.temperature,
                    None if layer.dropout.p_logit is None else layer.dropout.p_logit.copy(),
                ),
            )
            for layer in self.layers
        ])


def forward(net, inputs, noise=None, deterministic=False):
    return net.forward(inputs, noise=noise, deterministic=deterministic)


def loss_and_gradients(net, inputs, targets, dataset_size, noise=None, length_scale=0.01):
    return net.loss_and_gradients(inputs, targets, dataset_size, noise, length_scale)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper):
        state = cls(**hyper)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_update(params, grads, state):
    """One bias-corrected Adam step, applied to ``params`` in place.

    A step with any non-finite gradient is rejected before anything is
    modified.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimiser state are misaligned")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient; Adam step rejected")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    step = state.lr * math.sqrt(1.0 - b2**state.t) / (1.0 - b1**state.t)
    eps_hat = state.eps * math.sqrt(1.0 - b2**state.t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        adam_step(p, g, m, v, step, b1, b2, eps_hat)
    return params, state
