"""Dense quadratic-form oracles for small-scale verification.

These build the full augmented (d+1) x (d+1) matrix behind an expanded weight
vector and evaluate the model as one half of x-hat' C x-hat, independently of
the sparse expansion path. They exist to cross-check correctness and refuse
to run beyond a small dimension; nothing here is used in training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expansion import PqrIndexMap

DENSE_DIMENSION_LIMIT = 2000


@dataclass
class PqrMatrix:
    """Augmented symmetric matrix C = [[A, w], [w', b]] with the shared-parameter
    interaction block: free values on high-high pairs, one shared value per high
    feature across all its low columns, zeros on the diagonal and the low-low block.
    """

    C: np.ndarray
    index_map: PqrIndexMap

    @property
    def interaction(self) -> np.ndarray:
        return self.C[:-1, :-1]

    @property
    def linear(self) -> np.ndarray:
        return self.C[:-1, -1]

    @property
    def bias(self) -> float:
        return float(self.C[-1, -1])


def _check_dense_ok(d: int, allow_large: bool) -> None:
    if d > DENSE_DIMENSION_LIMIT and not allow_large:
        raise ValueError(
            f"dense oracle refuses d = {d} > {DENSE_DIMENSION_LIMIT}; "
            "pass allow_large=True to override"
        )


def assemble_matrix(weights, index_map: PqrIndexMap, allow_large: bool = False) -> PqrMatrix:
    """Lay an expanded weight vector out as the dense augmented matrix."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (index_map.D,):
        raise ValueError(f"weights shape {weights.shape} != ({index_map.D},)")
    d = index_map.d
    _check_dense_ok(d, allow_large)
    high = index_map.separation.high
    C = np.zeros((d + 1, d + 1))
    C[:d, d] = weights[:d]
    C[d, :d] = weights[:d]
    C[d, d] = 2.0 * weights[index_map.bias_slot]

    shared_base = index_map.shared_base
    low = [i - 1 for i in range(1, d + 1) if i not in index_map.rank]
    for r, i in enumerate(high):
        q = weights[shared_base + r]
        C[i - 1, low] = q
        C[low, i - 1] = q
    for a in range(len(high)):
        for b in range(a + 1, len(high)):
            p = weights[index_map.pair_slot(high[a], high[b])]
            C[high[a] - 1, high[b] - 1] = p
            C[high[b] - 1, high[a] - 1] = p
    return PqrMatrix(C=C, index_map=index_map)


def predict_quadratic_form(matrix: PqrMatrix, features: list[tuple[int, float]]) -> float:
    """Evaluate one half of x-hat' C x-hat densely, x-hat = (x', 1)'."""
    d = matrix.index_map.d
    x_hat = np.zeros(d + 1)
    for index, value in features:
        if not 1 <= index <= d:
            raise ValueError(f"feature index {index} outside [1, {d}]")
        x_hat[index - 1] = value
    x_hat[d] = 1.0
    return 0.5 * float(x_hat @ matrix.C @ x_hat)


def decompose_projection(weights, index_map: PqrIndexMap, allow_large: bool = False):
    """Split the interaction block into a fixed projection and a small core.

    Returns ``(P, M)`` where ``P`` is the (k+1) x d selector whose first k rows
    pick the high features in rank order and whose last row indicates the low
    set, and ``M`` is the (k+1) x (k+1) symmetric zero-diagonal core holding the
    pair values and, in its last column/row, the shared values. ``P.T @ M @ P``
    reproduces the interaction block of :func:`assemble_matrix` exactly.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (index_map.D,):
        raise ValueError(f"weights shape {weights.shape} != ({index_map.D},)")
    d = index_map.d
    k = index_map.k
    _check_dense_ok(d, allow_large)
    high = index_map.separation.high

    P = np.zeros((k + 1, d))
    P[k, :] = 1.0
    for r, i in enumerate(high):
        P[r, i - 1] = 1.0
        P[k, i - 1] = 0.0

    M = np.zeros((k + 1, k + 1))
    shared_base = index_map.shared_base
    for a in range(k):
        M[a, k] = weights[shared_base + a]
        M[k, a] = weights[shared_base + a]
        for b in range(a + 1, k):
            p = weights[index_map.pair_slot(high[a], high[b])]
            M[a, b] = p
            M[b, a] = p
    return P, M
