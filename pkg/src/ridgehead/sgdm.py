"""Iterative baseline: softmax cross-entropy and SGD with momentum.

Trains the identical head by exact backpropagated gradients, serving both as
the reference optimizer and as the per-epoch partner of the recomputation
pass in the alternating schedule. Velocity update per batch:

    v <- m * v - lr * grad
    a <- a + v
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, ParameterError, ShapeError
from .fc_head import FcHead, FcLayer, forward
from .linalg import as_matrix

__all__ = [
    "SgdmState",
    "head_gradients",
    "sgdm_epoch",
    "softmax_cross_entropy",
]


@dataclass
class SgdmState:
    """Optimizer state: one velocity matrix per layer plus hyperparameters."""

    velocities: list[np.ndarray]
    lr: float
    momentum: float = 0.9
    batch_size: int = 128
    rng: np.random.Generator = None

    def __post_init__(self):
        if not np.isfinite(self.lr) or self.lr < 0.0:
            raise ParameterError(f"learning rate must be >= 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.batch_size}")
        if self.rng is None:
            self.rng = np.random.default_rng(0)

    @classmethod
    def for_head(
        cls,
        head: FcHead,
        lr: float,
        momentum: float = 0.9,
        batch_size: int = 128,
        seed=0,
    ) -> "SgdmState":
        """Zero velocities shaped like the head, shuffle generator from seed."""
        return cls(
            velocities=[np.zeros_like(l.weights) for l in head.layers],
            lr=lr,
            momentum=momentum,
            batch_size=batch_size,
            rng=np.random.default_rng(seed),
        )


def _check_one_hot(O: np.ndarray):
    if O.size and not np.isin(O, (0.0, 1.0)).all():
        raise DataError("target entries must be 0 or 1")
    if not (O.sum(axis=0) == 1.0).all():
        raise DataError("every target column must contain exactly one 1")


def softmax_cross_entropy(logits, O):
    """Mean categorical cross-entropy and its gradient w.r.t. the logits.

    Returns ``(loss, grad)`` with ``loss = -(1/N) sum log softmax(logits)[true]``
    and ``grad = (softmax(logits) - O) / N``. Stable under saturated logits.
    """
    logits = as_matrix(logits, "logits")
    O = as_matrix(O, "O")
    if logits.shape != O.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {O.shape}")
    N = logits.shape[1]
    if N == 0:
        raise ShapeError("cross-entropy needs at least one sample")
    _check_one_hot(O)
    log_p = logits - logsumexp(logits, axis=0, keepdims=True)
    loss = -float((log_p * O).sum()) / N
    grad = (np.exp(log_p) - O) / N
    return loss, grad


def _loss_and_gradients(head: FcHead, H0, O):
    """Loss plus exact per-layer gradients via backprop with ReLU subgradient."""
    trace = forward(head, H0)
    loss, g = softmax_cross_entropy(trace.logits, O)
    acts = trace.activations
    n_hidden = len(head.layers) - 1
    grads = [None] * len(head.layers)
    grads[-1] = g @ acts[n_hidden].T
    back = head.layers[-1].weights.T @ g
    for i in range(n_hidden, 0, -1):
        back = back * (acts[i] > 0.0)
        grads[i - 1] = back @ acts[i - 1].T
        if i > 1:
            back = head.layers[i - 1].weights.T @ back
    return loss, grads


def head_gradients(head: FcHead, H0, O) -> list[np.ndarray]:
    """Per-layer gradients of mean cross-entropy over the given samples."""
    return _loss_and_gradients(head, H0, O)[1]


def sgdm_epoch(head: FcHead, state: SgdmState, H0, O):
    """One epoch of momentum SGD over shuffled mini-batches.

    Samples are permuted by the state's generator and split into consecutive
    batches (the final short batch is kept). Returns ``(head, state, loss)``
    with a new head, the advanced state, and the sample-weighted mean of the
    per-batch losses measured before each update.
    """
    H0 = as_matrix(H0, "H0")
    O = as_matrix(O, "O")
    N = H0.shape[1]
    if O.shape[1] != N:
        raise ShapeError(f"features have {N} columns, targets {O.shape[1]}")
    if state.batch_size > N:
        raise ParameterError(f"batch size {state.batch_size} exceeds sample count {N}")

    perm = state.rng.permutation(N)
    weights = [l.weights for l in head.layers]
    total = 0.0
    for start in range(0, N, state.batch_size):
        idx = perm[start : start + state.batch_size]
        batch_head = FcHead(
            tuple(FcLayer(w) for w in weights), augment_bias=head.augment_bias
        )
        loss, grads = _loss_and_gradients(batch_head, H0[:, idx], O[:, idx])
        total += loss * len(idx)
        for j, g in enumerate(grads):
            state.velocities[j] = state.momentum * state.velocities[j] - state.lr * g
            weights[j] = weights[j] + state.velocities[j]
    new_head = FcHead(
        tuple(FcLayer(w) for w in weights), augment_bias=head.augment_bias
    )
    return new_head, state, total / N
