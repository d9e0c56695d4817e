"""Dense ridge-regularized solve kernels.

All matrices are dense, row-major, 64-bit float numpy arrays with samples as
columns. The three solve operations share one building block: a Cholesky
factorization of the ridge-shifted Gram matrix

    G = (1/C) I + M @ M.T

which is symmetric positive definite for every finite M and C > 0, so the
factorization has no legitimate failure path. Larger C means weaker
regularization; in the full-rank large-C limit the solves approach exact
least-squares solutions. Gram matrices are always formed in the small
dimension (features or classes), never in the sample dimension.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DataError, NumericError, ParameterError, ShapeError

__all__ = [
    "SpdFactor",
    "as_matrix",
    "gram_ridge_factor",
    "relu",
    "ridge_pullback",
    "ridge_right_solve",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array in C order.

    Raises
    ------
    ShapeError
        If ``a`` is not two-dimensional.
    DataError
        If any entry is NaN or infinite.
    """
    m = np.asarray(a, dtype=np.float64, order="C")
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {m.ndim}-D")
    if not np.isfinite(m).all():
        raise DataError(f"{name} contains non-finite entries")
    return m


def _check_ridge(C: float) -> float:
    C = float(C)
    if not np.isfinite(C) or C <= 0.0:
        raise ParameterError(f"regularization coefficient C must be positive, got {C}")
    return C


class SpdFactor:
    """Cholesky factorization of a ridge-shifted Gram matrix.

    Wraps the lower-triangular factor of ``G = (1/C) I + M @ M.T`` and solves
    ``G @ X = B`` for conformable right-hand sides. Instances are immutable
    and safe to share between threads.
    """

    def __init__(self, chol_and_lower):
        self._chol = chol_and_lower

    @property
    def dim(self) -> int:
        return self._chol[0].shape[0]

    def solve(self, B) -> np.ndarray:
        """Solve ``G @ X = B``; ``B`` may be a vector or a dim-by-k matrix."""
        B = np.asarray(B, dtype=np.float64)
        if B.shape[0] != self.dim:
            raise ShapeError(
                f"right-hand side has {B.shape[0]} rows, factor dimension is {self.dim}"
            )
        if not np.isfinite(B).all():
            raise DataError("right-hand side contains non-finite entries")
        return scipy.linalg.cho_solve(self._chol, B)


def gram_ridge_factor(M, C: float) -> SpdFactor:
    """Factor ``G = (1/C) I + M @ M.T`` for later solves.

    Parameters
    ----------
    M : array, shape (d, N)
        Data matrix with samples as columns. N may be zero, d may not.
    C : float
        Positive regularization coefficient; ``1/C`` is added to the Gram
        diagonal, bounding the smallest eigenvalue away from zero.
    """
    M = as_matrix(M, "M")
    C = _check_ridge(C)
    d = M.shape[0]
    if d == 0:
        raise ShapeError("cannot factor a Gram matrix with zero rows")
    G = M @ M.T
    G[np.diag_indices_from(G)] += 1.0 / C
    try:
        chol = scipy.linalg.cho_factor(G, lower=True)
    except scipy.linalg.LinAlgError as exc:  # unreachable for finite inputs, C > 0
        raise NumericError(f"ridge Gram factorization failed: {exc}") from exc
    return SpdFactor(chol)


def ridge_right_solve(E, H, C: float) -> np.ndarray:
    """Ridge-regularized right solve: ``E @ H.T @ ((1/C) I + H @ H.T)^-1``.

    Returns the unique minimizer D of ``||D @ H - E||_F^2 + (1/C) ||D||_F^2``,
    the additive weight update that best maps activations ``H`` (d x N) onto a
    residual ``E`` (c x N). Result has shape (c, d).
    """
    E = as_matrix(E, "E")
    H = as_matrix(H, "H")
    if E.shape[1] != H.shape[1]:
        raise ShapeError(
            f"E has {E.shape[1]} columns but H has {H.shape[1]}; "
            "sample counts must agree"
        )
    factor = gram_ridge_factor(H, C)
    # D.T = G^-1 H E.T, using symmetry of G.
    return factor.solve(H @ E.T).T


def ridge_pullback(W, E, C: float) -> np.ndarray:
    """Pull a residual back through fixed weights: ``W.T @ ((1/C) I + W @ W.T)^-1 @ E``.

    Returns the unique minimizer P of ``||W @ P - E||_F^2 + (1/C) ||P||_F^2``,
    the input-side change that best explains an output-side residual ``E``
    (c x N) through ``W`` (c x d). Result has shape (d, N). By the push-through
    identity this equals ``(W.T @ W + (1/C) I)^-1 @ W.T @ E``; the factored
    form works in the smaller c x c space.
    """
    W = as_matrix(W, "W")
    E = as_matrix(E, "E")
    if W.shape[0] != E.shape[0]:
        raise ShapeError(
            f"W has {W.shape[0]} rows but E has {E.shape[0]}; row counts must agree"
        )
    factor = gram_ridge_factor(W, C)
    return W.T @ factor.solve(E)


def relu(M) -> np.ndarray:
    """Elementwise ``max(0, x)``."""
    M = as_matrix(M, "M")
    return np.maximum(M, 0.0)
