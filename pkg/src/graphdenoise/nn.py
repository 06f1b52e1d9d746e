"""Dense numerical core: bias-free ReLU stacks, output heads, Adam, checkpoints.

All math runs in float64 numpy. A perceptron here is a list of weight
matrices applied as ``x -> W0 x -> relu -> W1 x -> ... -> Wlast x -> head``
with no bias terms anywhere. Forward passes return a cache of the layer
inputs and pre-activations so the matching backward pass can run without a
tape.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

HEADS = ("linear", "sigmoid", "softmax")

# Keeps sigmoid outputs strictly inside (0, 1) in float64 even for huge logits.
_SIGMOID_FLOOR = 1e-15


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(z):
    """Numerically stable logistic function, strictly inside (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _SIGMOID_FLOOR, 1.0 - _SIGMOID_FLOOR)


def softmax(logits, axis=-1):
    """Max-shifted softmax; rows sum to 1 and stay strictly positive."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    # exp(-700) is still a normal float64; prevents hard underflow to 0.
    e = np.exp(np.clip(z, -700.0, 0.0))
    return e / e.sum(axis=axis, keepdims=True)


def glorot(rows, cols, rng):
    """Uniform init in [-sqrt(6/(fan_in+fan_out)), +...], seeded."""
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class MlpParams:
    """Bias-free feedforward stack.

    ``weights[k]`` has shape (out_k, in_k); consecutive shapes must chain.
    ReLU sits between layers, never after the last matrix (the output head
    is chosen per call).
    """

    weights: list

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        if not self.weights:
            raise ValueError("MlpParams needs at least one weight matrix")
        for a, b in zip(self.weights, self.weights[1:]):
            if b.shape[1] != a.shape[0]:
                raise ValueError(f"incompatible layer shapes {a.shape} -> {b.shape}")

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    def copy(self):
        return MlpParams([w.copy() for w in self.weights])


def init_mlp(layer_sizes, rng):
    """Glorot-initialized stack for sizes [in, h1, ..., out]."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output size")
    weights = [glorot(layer_sizes[k + 1], layer_sizes[k], rng) for k in range(len(layer_sizes) - 1)]
    return MlpParams(weights)


@dataclass
class MlpCache:
    inputs: list  # activation entering each layer, inputs[0] is x
    pre: list  # pre-activation per layer
    head: str
    output: np.ndarray


def _check_head(head):
    if head not in HEADS:
        raise ValueError(f"unknown head {head!r}, expected one of {HEADS}")


def mlp_forward_batch(params, x, head="linear"):
    """Forward a batch of rows through the stack.

    x has shape (m, in_dim); returns (output (m, out_dim), cache).
    """
    _check_head(head)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with in_dim {params.in_dim}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    inputs, pre = [], []
    a = x
    last = len(params.weights) - 1
    for k, w in enumerate(params.weights):
        inputs.append(a)
        z = a @ w.T
        pre.append(z)
        a = relu(z) if k < last else z
    if head == "sigmoid":
        out = sigmoid(a)
    elif head == "softmax":
        out = softmax(a, axis=1)
    else:
        out = a
    return out, MlpCache(inputs, pre, head, out)


def mlp_backward_batch(params, cache, upstream):
    """Backward pass; returns per-matrix gradients summed over the batch.

    upstream is d(loss)/d(output), shape (m, out_dim), for the forward call
    that produced cache.
    """
    if len(cache.inputs) != len(params.weights):
        raise ValueError("cache does not match parameter stack")
    for w, a in zip(params.weights, cache.inputs):
        if a.shape[1] != w.shape[1]:
            raise ValueError("cache does not match parameter stack")
    upstream = np.asarray(upstream, dtype=np.float64)
    y = cache.output
    if upstream.shape != y.shape:
        raise ValueError(f"upstream shape {upstream.shape} != output shape {y.shape}")
    if cache.head == "sigmoid":
        g = upstream * y * (1.0 - y)
    elif cache.head == "softmax":
        g = y * (upstream - (upstream * y).sum(axis=1, keepdims=True))
    else:
        g = upstream
    grads = [None] * len(params.weights)
    for k in reversed(range(len(params.weights))):
        grads[k] = g.T @ cache.inputs[k]
        if k > 0:
            g = (g @ params.weights[k]) * (cache.pre[k - 1] > 0)
    return grads


def mlp_forward(params, x, head="linear"):
    """Single-vector forward. Returns (output vector, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("mlp_forward expects a 1-d input vector")
    out, cache = mlp_forward_batch(params, x[None, :], head=head)
    return out[0], cache


def mlp_backward(params, cache, upstream):
    """Single-vector backward matching a mlp_forward call."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim != 1:
        raise ValueError("mlp_backward expects a 1-d upstream gradient")
    return mlp_backward_batch(params, cache, upstream[None, :])


@dataclass
class AdamState:
    """Adaptive-moment accumulators for a list of parameter matrices."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def copy(self):
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         [a.copy() for a in self.m], [a.copy() for a in self.v])


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(state, params, grads, direction="minimize"):
    """One adaptive-moment update; returns the new parameter list.

    direction="maximize" negates the gradients (gradient ascent).
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"unknown direction {direction!r}")
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("parameter/gradient/state length mismatch")
    sign = -1.0 if direction == "maximize" else 1.0
    state.step += 1
    t = state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ValueError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        g = sign * g
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        mhat = state.m[i] / (1.0 - state.beta1 ** t)
        vhat = state.v[i] / (1.0 - state.beta2 ** t)
        out.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


CHECKPOINT_VERSION = 1


def save_arrays(path, named_arrays, extra=None):
    """Write named float64 matrices (plus optional metadata) as JSON.

    Floats are serialized with Python's shortest round-trip repr (at most 17
    significant digits), so load() reproduces them bit for bit.
    """
    blob = {"version": CHECKPOINT_VERSION, "extra": extra or {}}
    arrays = {}
    for name in sorted(named_arrays):
        arr = np.asarray(named_arrays[name], dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError(f"array {name!r} contains non-finite values")
        arrays[name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    blob["arrays"] = arrays
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, separators=(",", ":"))
        fh.write("\n")


def load_arrays(path):
    """Inverse of save_arrays. Returns (dict name -> array, extra dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')!r}")
    out = {}
    for name, entry in blob["arrays"].items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if not np.isfinite(arr).all():
            raise ValueError(f"array {name!r} contains non-finite values")
        out[name] = arr
    return out, blob.get("extra", {})
