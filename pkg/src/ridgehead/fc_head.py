"""Fully-connected head: forward evaluation and non-iterative recomputation.

A head is an immutable stack of dense layers with ReLU after every layer
except the last; the final layer emits logits. One recomputation pass runs
top-down on a single frozen forward trace:

    1. forward once, keeping every post-ReLU activation
    2. update the output layer toward the targets with a ridge right-solve
    3. pull the remaining residual back through the updated weights,
       ReLU-projected, to obtain a desired activation change for the layer
       below
    4. update that layer the same way, and recurse

Every update is damped by a learning rate ``mu`` in (0, 1] and may be applied
to only a random subset of neurons (rows): a configurable fraction keeps its
old parameters, the rest take the recomputed ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, ShapeError
from .linalg import as_matrix, ridge_pullback, ridge_right_solve

__all__ = [
    "FcHead",
    "FcLayer",
    "ForwardTrace",
    "RecomputeConfig",
    "dropout_mix",
    "forward",
    "init_head",
    "make_rng",
    "predict",
    "pullback_target",
    "recompute_hidden_layer",
    "recompute_output_layer",
    "recompute_pass",
]


@dataclass(frozen=True)
class FcLayer:
    """One dense layer, weights of shape (out_dim, in_dim)."""

    weights: np.ndarray

    def __post_init__(self):
        w = as_matrix(self.weights, "weights")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise ShapeError(f"layer dimensions must be >= 1, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class FcHead:
    """Ordered dense layers; ReLU between layers, identity after the last.

    With ``augment_bias`` set, a constant-1 row is appended to the input
    features before the first layer, so that layer's in_dim must be one more
    than the raw feature dimension. Off by default: the recomputation math is
    bias-free.
    """

    layers: tuple[FcLayer, ...]
    augment_bias: bool = False

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("head needs at least one layer")
        for lo, hi in zip(layers[:-1], layers[1:]):
            if hi.in_dim != lo.out_dim:
                raise ShapeError(
                    f"layer chain mismatch: out_dim {lo.out_dim} feeds in_dim {hi.in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def n_classes(self) -> int:
        return self.layers[-1].out_dim

    @property
    def in_dim(self) -> int:
        """Expected raw feature dimension (before any bias augmentation)."""
        return self.layers[0].in_dim - (1 if self.augment_bias else 0)

    @property
    def widths(self) -> tuple[int, ...]:
        """Dimension chain including input and output."""
        return (self.layers[0].in_dim,) + tuple(l.out_dim for l in self.layers)


@dataclass(frozen=True)
class ForwardTrace:
    """Frozen activations from one forward pass.

    ``activations[0]`` is the (possibly bias-augmented) input feature matrix,
    ``activations[i]`` for i >= 1 the post-ReLU output of layer i, and
    ``logits`` the pre-activation output of the final layer. All share the
    sample (column) count.
    """

    activations: tuple[np.ndarray, ...]
    logits: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.logits.shape[1]


@dataclass(frozen=True)
class RecomputeConfig:
    """Hyperparameters of one recomputation pass.

    C: ridge regularization coefficient (> 0, larger = weaker).
    mu: learning rate in (0, 1] scaling the additive update.
    dropout_rate: fraction of neurons (weight rows) keeping their old
        parameters in each update, in [0, 1). 0 means full update.
    rng_seed: seed for the row-selection generator (see make_rng).
    """

    C: float = 100.0
    mu: float = 1.0
    dropout_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.C) or self.C <= 0.0:
            raise ParameterError(f"C must be positive, got {self.C}")
        if not np.isfinite(self.mu) or not 0.0 < self.mu <= 1.0:
            raise ParameterError(f"mu must be in (0, 1], got {self.mu}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )


def make_rng(cfg: RecomputeConfig) -> np.random.Generator:
    """Fresh generator for the config's dropout row selection."""
    return np.random.default_rng(cfg.rng_seed)


def init_head(
    dims, rng: np.random.Generator, augment_bias: bool = False
) -> FcHead:
    """Random head over the dimension chain ``dims`` (input, hidden..., classes).

    He-scaled normal initialization, appropriate for the ReLU stack.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ShapeError("dims must list at least input and output widths")
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append(FcLayer(w))
    return FcHead(tuple(layers), augment_bias=augment_bias)


def forward(head: FcHead, H0) -> ForwardTrace:
    """Evaluate the head on features ``H0`` (features x samples).

    Keeps every intermediate activation; the recomputation pass reads them
    from this trace and never recomputes them mid-pass.
    """
    H = as_matrix(H0, "H0")
    if head.augment_bias:
        H = np.vstack([H, np.ones((1, H.shape[1]))])
    if H.shape[0] != head.layers[0].in_dim:
        raise ShapeError(
            f"features have {H.shape[0]} rows, first layer expects {head.layers[0].in_dim}"
        )
    activations = [H]
    for layer in head.layers[:-1]:
        activations.append(np.maximum(layer.weights @ activations[-1], 0.0))
    logits = head.layers[-1].weights @ activations[-1]
    return ForwardTrace(activations=tuple(activations), logits=logits)


def predict(head: FcHead, H0) -> np.ndarray:
    """Class index per sample: argmax over logits, ties to the lowest index."""
    return np.argmax(forward(head, H0).logits, axis=0)


def dropout_mix(
    old: np.ndarray, new: np.ndarray, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Row-wise mix: a random ``rate`` fraction of rows keeps ``old`` values.

    Exactly round(rate * rows) distinct rows (round half up), drawn uniformly
    without replacement, are copied from ``old``; every other row comes from
    ``new``. rate = 0 returns ``new`` unchanged in value.
    """
    old = as_matrix(old, "old")
    new = as_matrix(new, "new")
    if old.shape != new.shape:
        raise ShapeError(f"shape mismatch: old {old.shape} vs new {new.shape}")
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    u = old.shape[0]
    n_keep = int(math.floor(rate * u + 0.5))
    out = new.copy()
    if n_keep > 0:
        keep = rng.choice(u, size=n_keep, replace=False)
        out[keep] = old[keep]
    return out


def recompute_output_layer(
    head: FcHead,
    trace: ForwardTrace,
    O,
    cfg: RecomputeConfig,
    rng: np.random.Generator,
) -> FcHead:
    """Update the final layer toward targets ``O`` by a damped ridge fit.

    The candidate weights are ``old + mu * ridge_right_solve(O - logits, H, C)``
    with H the last hidden activation (or the features for a single-layer
    head); the dropout mix then decides which rows adopt them. All other
    layers are untouched.
    """
    O = as_matrix(O, "O")
    if O.shape != trace.logits.shape:
        raise ShapeError(
            f"targets {O.shape} do not match logits {trace.logits.shape}"
        )
    H = trace.activations[-1]
    old = head.layers[-1].weights
    candidate = old + cfg.mu * ridge_right_solve(O - trace.logits, H, cfg.C)
    new_w = dropout_mix(old, candidate, cfg.dropout_rate, rng)
    layers = head.layers[:-1] + (FcLayer(new_w),)
    return replace(head, layers=layers)


def pullback_target(
    W_updated: np.ndarray, residual, C: float, apply_relu: bool = True
) -> np.ndarray:
    """Desired activation change below a layer, from its output residual.

    Ridge pull-back of ``residual`` through ``W_updated``; with ``apply_relu``
    the result is projected onto the nonnegative orthant, matching the ReLU
    that produced the activation being corrected. The caller computes the
    residual as desired-minus-actual.
    """
    P = ridge_pullback(W_updated, residual, C)
    return np.maximum(P, 0.0) if apply_relu else P


def recompute_hidden_layer(
    layer: FcLayer,
    P,
    H_in,
    cfg: RecomputeConfig,
    rng: np.random.Generator,
) -> FcLayer:
    """Update one hidden layer toward a desired activation change ``P``.

    Candidate weights are ``old + mu * ridge_right_solve(P, H_in, C)``; the
    dropout mix selects rows as in the output-layer update.
    """
    P = as_matrix(P, "P")
    H_in = as_matrix(H_in, "H_in")
    if P.shape[0] != layer.out_dim:
        raise ShapeError(f"P has {P.shape[0]} rows, layer emits {layer.out_dim}")
    if H_in.shape[0] != layer.in_dim:
        raise ShapeError(f"H_in has {H_in.shape[0]} rows, layer expects {layer.in_dim}")
    if P.shape[1] != H_in.shape[1]:
        raise ShapeError(
            f"P has {P.shape[1]} columns but H_in has {H_in.shape[1]}"
        )
    candidate = layer.weights + cfg.mu * ridge_right_solve(P, H_in, cfg.C)
    return FcLayer(dropout_mix(layer.weights, candidate, cfg.dropout_rate, rng))


def recompute_pass(
    head: FcHead,
    H0,
    O,
    cfg: RecomputeConfig,
    rng: np.random.Generator,
) -> FcHead:
    """One full top-down recomputation sweep on frozen activations.

    Runs forward once, updates the output layer, then walks the hidden layers
    from top to bottom. For each hidden layer i the desired output is its
    frozen activation plus the ReLU-projected pull-back target; the residual
    of the freshly updated layer against that desired output is pulled back
    one level further. Activations are never refreshed mid-pass.
    """
    trace = forward(head, H0)
    head = recompute_output_layer(head, trace, O, cfg, rng)
    n_hidden = len(head.layers) - 1
    if n_hidden == 0:
        return head

    O = as_matrix(O, "O")
    layers = list(head.layers)
    a_out = layers[-1].weights
    residual = O - a_out @ trace.activations[n_hidden]
    target = pullback_target(a_out, residual, cfg.C, apply_relu=True)
    for i in range(n_hidden, 0, -1):
        H_in = trace.activations[i - 1]
        layers[i - 1] = recompute_hidden_layer(layers[i - 1], target, H_in, cfg, rng)
        if i > 1:
            a_i = layers[i - 1].weights
            residual = (trace.activations[i] + target) - a_i @ H_in
            target = pullback_target(a_i, residual, cfg.C, apply_relu=True)
    return replace(head, layers=tuple(layers))
