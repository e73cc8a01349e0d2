"""Dense feed-forward networks with hand-written backpropagation.

Inputs may be a single vector of shape (d_0,) or a batch of shape (n, d_0);
features and gradients keep the same layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, softmax

from .errors import DimensionError, ConfigurationError

ACTIVATIONS = ("relu", "sigmoid", "softplus", "softmax", "identity")


@dataclass(frozen=True)
class NetworkSpec:
    widths: tuple
    activations: tuple
    weight_bound: float = 1.0
    input_bound: float = 1.0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        acts = tuple(str(a) for a in self.activations)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "activations", acts)
        if len(widths) < 2:
            raise ConfigurationError("need at least an input and an output width")
        if any(w < 1 for w in widths):
            raise ConfigurationError(f"widths must be positive, got {widths}")
        if len(acts) != len(widths) - 1:
            raise ConfigurationError(
                f"{len(widths) - 1} layers but {len(acts)} activations")
        for i, a in enumerate(acts):
            if a not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {a!r}")
            if a == "softmax" and i != len(acts) - 1:
                raise ConfigurationError("softmax is only allowed on the output layer")
        for name in ("weight_bound", "input_bound"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ConfigurationError(f"{name} must be finite and positive")
            object.__setattr__(self, name, v)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "activations": list(self.activations),
            "weight_bound": self.weight_bound,
            "input_bound": self.input_bound,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "NetworkSpec":
        return cls(
            widths=tuple(record["widths"]),
            activations=tuple(record["activations"]),
            weight_bound=record.get("weight_bound", 1.0),
            input_bound=record.get("input_bound", 1.0),
        )


@dataclass
class NetworkParams:
    """Per-layer (W, b) pairs, W of shape (d_l, d_{l-1})."""

    layers: list

    def copy(self) -> "NetworkParams":
        return NetworkParams([(W.copy(), b.copy()) for W, b in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    def with_flat(self, vec) -> "NetworkParams":
        vec = np.asarray(vec, dtype=float)
        out, pos = [], 0
        for W, b in self.layers:
            nw = W.size
            W2 = vec[pos:pos + nw].reshape(W.shape)
            pos += nw
            b2 = vec[pos:pos + b.size].copy()
            pos += b.size
            out.append((W2.copy(), b2))
        if pos != vec.size:
            raise DimensionError("flat vector length does not match parameters")
        return NetworkParams(out)

    def max_abs(self) -> float:
        return max(max(np.abs(W).max(initial=0.0), np.abs(b).max(initial=0.0))
                   for W, b in self.layers)

    def __len__(self):
        return len(self.layers)


@dataclass
class LayerFeatures:
    """Activations xi^0..xi^L plus the pre-activations z^1..z^L."""

    activations: list
    pre: list = field(default_factory=list)

    def __getitem__(self, l):
        return self.activations[l]

    def __len__(self):
        return len(self.activations)

    @property
    def output(self):
        return self.activations[-1]


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return expit(z)
    if kind == "softplus":
        return np.logaddexp(0.0, z)
    if kind == "softmax":
        return softmax(z, axis=-1)
    return z.copy()


def _activation_vjp(kind, z, a, g):
    """Vector-Jacobian product of the activation at pre-activation z."""
    if kind == "relu":
        return g * (z > 0)
    if kind == "sigmoid":
        return g * a * (1.0 - a)
    if kind == "softplus":
        return g * expit(z)
    if kind == "softmax":
        return a * (g - np.sum(a * g, axis=-1, keepdims=True))
    return g


def check_params(spec: NetworkSpec, params: NetworkParams):
    if len(params.layers) != spec.depth:
        raise DimensionError(f"spec has {spec.depth} layers, params {len(params.layers)}")
    for l, (W, b) in enumerate(params.layers, start=1):
        want = (spec.widths[l], spec.widths[l - 1])
        if W.shape != want or b.shape != (spec.widths[l],):
            raise DimensionError(f"layer {l}: expected W{want}, b({want[0]},), "
                                 f"got W{W.shape}, b{b.shape}")


def forward(spec: NetworkSpec, params: NetworkParams, x) -> LayerFeatures:
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != spec.widths[0]:
        raise DimensionError(f"input of shape {x.shape} does not match d_0={spec.widths[0]}")
    check_params(spec, params)
    acts, pre = [x], []
    a = x
    for (W, b), kind in zip(params.layers, spec.activations):
        z = a @ W.T + b
        a = _activate(kind, z)
        pre.append(z)
        acts.append(a)
    return LayerFeatures(acts, pre)


def backward(spec: NetworkSpec, params: NetworkParams, x, upstream_grad,
             features: LayerFeatures | None = None, feature_grads: dict | None = None):
    """Reverse-mode gradients of a scalar loss.

    upstream_grad is dLoss/dxi^L. feature_grads optionally maps a layer index
    l in 0..L to an extra dLoss/dxi^l, for losses that read hidden features.
    Returns (parameter gradients as NetworkParams, gradient w.r.t. the input).
    """
    if features is None:
        features = forward(spec, params, x)
    L = spec.depth
    single = features[0].ndim == 1
    g = np.asarray(upstream_grad, dtype=float)
    if g.shape != features.output.shape:
        raise DimensionError(f"upstream gradient shape {g.shape} != output {features.output.shape}")
    extra = feature_grads or {}
    grads = [None] * L
    for l in range(L, 0, -1):
        if l in extra:
            g = g + extra[l]
        W, _ = params.layers[l - 1]
        delta = _activation_vjp(spec.activations[l - 1], features.pre[l - 1],
                                features[l], g)
        prev = features[l - 1]
        if single:
            dW = np.outer(delta, prev)
            db = delta.copy()
        else:
            dW = delta.T @ prev
            db = delta.sum(axis=0)
        grads[l - 1] = (dW, db)
        g = delta @ W
    if 0 in extra:
        g = g + extra[0]
    return NetworkParams(grads), g


def clip_params(spec: NetworkSpec, params: NetworkParams) -> NetworkParams:
    B = spec.weight_bound
    return NetworkParams([(np.clip(W, -B, B), np.clip(b, -B, B)) for W, b in params.layers])


def init_params(spec: NetworkSpec, seed) -> NetworkParams:
    """Uniform on [-B/sqrt(d_in), B/sqrt(d_in)] per layer."""
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out in zip(spec.widths[:-1], spec.widths[1:]):
        s = spec.weight_bound / np.sqrt(d_in)
        W = rng.uniform(-s, s, size=(d_out, d_in))
        b = rng.uniform(-s, s, size=d_out)
        layers.append((W, b))
    return NetworkParams(layers)
