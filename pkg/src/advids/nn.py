"""Dense ReLU network with log-softmax output, exact backprop and Adam.

Weights are stored as ``(out, in)`` matrices so a layer computes
``z = a @ W.T + b`` on a row-major batch.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArchitectureError, LabelError, NumericInputError, ShapeError, TraceError


@dataclass(eq=False)
class DenseNet:
    layer_sizes: list
    weights: list
    biases: list
    seed: int = 0
    # bumped on every parameter update so stale traces can be detected
    version: int = field(default=0, compare=False)

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    def params(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self):
        return DenseNet(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.seed,
        )

    def same_parameters(self, other):
        if list(self.layer_sizes) != list(other.layer_sizes):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.params(), other.params()))


@dataclass(eq=False)
class ForwardTrace:
    inputs: np.ndarray
    pre: list  # pre-activations per layer
    post: list  # post-activations per hidden layer
    log_probs: np.ndarray
    net_id: int
    net_version: int


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kwargs):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)

    @classmethod
    def for_net(cls, net, **kwargs):
        return cls.zeros_like(net.params(), **kwargs)


def init_network(layer_sizes, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    sizes = [int(s) for s in layer_sizes] if layer_sizes is not None else []
    if len(sizes) < 2:
        raise ArchitectureError(f"need at least an input and an output layer, got {layer_sizes!r}")
    if any(s < 1 for s in sizes):
        raise ArchitectureError(f"layer sizes must be positive, got {layer_sizes!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(sizes, weights, biases, int(seed))


def log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_input(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(f"expected input of shape (batch, {net.input_dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericInputError("input contains non-finite values")
    return X


def forward(net, X):
    X = _check_input(net, X)
    pre, post = [], []
    a = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            post.append(a)
    log_probs = log_softmax(pre[-1])
    return log_probs, ForwardTrace(X, pre, post, log_probs, id(net), net.version)


def predict(net, X):
    log_probs, _ = forward(net, X)
    return np.argmax(log_probs, axis=1)


def _check_labels(labels, n):
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise LabelError("labels must be 0 (benign) or 1 (attack)")
    return y.astype(np.int64)


def row_nll(log_probs, labels):
    y = _check_labels(labels, log_probs.shape[0])
    return -log_probs[np.arange(len(y)), y]


def loss_nll(log_probs, labels):
    """Mean negative log-likelihood of the true class."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    # -log p is >= 0 mathematically; rounding in log-softmax can leave -0.0 or -1e-17
    return max(float(np.mean(row_nll(log_probs, labels))), 0.0)


def _backprop(net, trace, labels, scale, want_params):
    if trace.net_id != id(net) or trace.net_version != net.version:
        raise TraceError("trace was produced by a different network or before a parameter update")
    if len(trace.pre) != len(net.weights):
        raise TraceError("trace depth does not match the network")
    n = trace.inputs.shape[0]
    y = _check_labels(labels, n)
    delta = np.exp(trace.log_probs)
    delta[np.arange(n), y] -= 1.0
    delta *= scale
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        a_prev = trace.post[i - 1] if i > 0 else trace.inputs
        if want_params:
            grads_w[i] = delta.T @ a_prev
            grads_b[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
        if i > 0:
            delta = delta * (trace.pre[i - 1] > 0)
    param_grads = None
    if want_params:
        param_grads = []
        for gw, gb in zip(grads_w, grads_b):
            param_grads.extend((gw, gb))
    return param_grads, delta


def backward(net, trace, labels):
    """Gradients of the mean NLL w.r.t. parameters (``[dW0, db0, ...]``) and inputs."""
    return _backprop(net, trace, labels, 1.0 / trace.inputs.shape[0], True)


def input_gradient(net, X, labels):
    """Per-row NLL and its gradient w.r.t. each row of ``X``.

    Each row's gradient is that of its own loss (not divided by the batch size),
    which is what the row-wise attacks need.
    """
    log_probs, trace = forward(net, X)
    _, grad = _backprop(net, trace, labels, 1.0, False)
    return row_nll(log_probs, labels), grad


def adam_update(params, grads, state, lr):
    """Apply one bias-corrected Adam step to ``params`` in place."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ShapeError("parameter, gradient and optimizer-state lists differ in length")
    for p, g, m in zip(params, grads, state.m):
        if np.shape(g) != p.shape or m.shape != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter shape {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericInputError("non-finite gradient; parameters left unchanged")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def adam_step(net, param_grads, state, lr):
    adam_update(net.params(), param_grads, state, lr)
    net.version += 1
    return net, state


def save_checkpoint(net, path):
    path = Path(path)
    arrays = {"layer_sizes": np.asarray(net.layer_sizes, dtype=np.int64), "seed": np.int64(net.seed)}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{i}"] = np.ascontiguousarray(w)
        arrays[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    with np.load(path) as data:
        sizes = [int(s) for s in data["layer_sizes"]]
        n = len(sizes) - 1
        weights = [data[f"W{i}"].copy() for i in range(n)]
        biases = [data[f"b{i}"].copy() for i in range(n)]
        seed = int(data["seed"])
    for i, w in enumerate(weights):
        if w.shape != (sizes[i + 1], sizes[i]) or biases[i].shape != (sizes[i + 1],):
            raise ShapeError(f"checkpoint layer {i} does not match layer_sizes {sizes}")
    return DenseNet(sizes, weights, biases, seed)
