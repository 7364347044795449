"""Scikit-learn style estimators wrapping the sparse online pipeline.

These accept ordinary ``(n_samples, n_features)`` matrices (dense or CSR) so
the model composes with sklearn pipelines and model selection. Column ``j``
corresponds to wire feature index ``j + 1``. All of them learn the frequency
separation from the training data, freeze it, and then run the single-pass
(or multi-epoch) online loop.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .expansion import build_index_map, expand
from .ftrl import CLASSIFICATION, REGRESSION, FtrlParams, FtrlState, sigmoid
from .separation import FeatureCounts, FeatureSeparation, select_top_k


def _as_csr(X, expected_features=None):
    X = check_array(X, accept_sparse="csr", dtype=np.float64, ensure_2d=True)
    if not sp.issparse(X):
        X = sp.csr_matrix(X)
    else:
        X = X.tocsr(copy=True)
    X.sum_duplicates()
    X.eliminate_zeros()
    X.sort_indices()
    if expected_features is not None and X.shape[1] != expected_features:
        raise ValueError(
            f"X has {X.shape[1]} features, but this model was fitted with {expected_features}"
        )
    return X


def _row_features(X, row: int) -> list[tuple[int, float]]:
    start, stop = X.indptr[row], X.indptr[row + 1]
    return [(int(j) + 1, float(v)) for j, v in zip(X.indices[start:stop], X.data[start:stop])]


def _counts_from_matrix(X) -> FeatureCounts:
    column_nnz = X.getnnz(axis=0)
    counts = {int(j) + 1: int(c) for j, c in enumerate(column_nnz) if c > 0}
    max_index = max(counts) if counts else 0
    return FeatureCounts(counts=counts, total_instances=X.shape[0], max_index=max_index)


def _resolve_k(k, d: int) -> int:
    if k is None:
        return min(d, int(np.ceil(np.sqrt(d))))
    k = int(k)
    if not 0 <= k <= d:
        raise ValueError(f"k = {k} outside [0, {d}]")
    return k


class PQRExpander(TransformerMixin, BaseEstimator):
    """Expand sparse features with frequency-separated quadratic interactions.

    Parameters
    ----------
    k : int or None, default=None
        Number of high-frequency features. ``None`` picks ``ceil(sqrt(d))``.
    separation : FeatureSeparation or None, default=None
        Use a precomputed partition instead of counting on ``fit``.

    Attributes
    ----------
    separation_ : FeatureSeparation
    index_map_ : PqrIndexMap
    n_features_in_ : int
    """

    def __init__(self, k=None, separation=None):
        self.k = k
        self.separation = separation

    def fit(self, X, y=None):
        X = _as_csr(X)
        self.n_features_in_ = X.shape[1]
        if self.separation is not None:
            if self.separation.d != X.shape[1]:
                raise ValueError(
                    f"separation dimension {self.separation.d} != n_features {X.shape[1]}"
                )
            self.separation_ = self.separation
        else:
            counts = _counts_from_matrix(X)
            self.separation_ = select_top_k(counts, _resolve_k(self.k, X.shape[1]), X.shape[1])
        self.index_map_ = build_index_map(self.separation_)
        return self

    def transform(self, X):
        check_is_fitted(self, "index_map_")
        X = _as_csr(X, expected_features=self.n_features_in_)
        data: list[float] = []
        indices: list[int] = []
        indptr = [0]
        for row in range(X.shape[0]):
            for slot, value in expand(_row_features(X, row), self.index_map_):
                indices.append(slot)
                data.append(value)
            indptr.append(len(data))
        return sp.csr_matrix(
            (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
            shape=(X.shape[0], self.index_map_.D),
        )

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "index_map_")
        m = self.index_map_
        names = [f"x{i}" for i in range(1, m.d + 1)]
        high = m.separation.high
        for a in range(m.k):
            for b in range(a + 1, m.k):
                names.append(f"x{high[a]}*x{high[b]}")
        names.extend(f"x{i}*low_sum" for i in high)
        names.append("bias")
        return np.asarray(names, dtype=object)


class _BasePQR(BaseEstimator):
    def __init__(self, k=None, alpha=0.1, beta=1.0, l1=1.0, l2=1.0, n_epochs=1, free_bias=False):
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.l1 = l1
        self.l2 = l2
        self.n_epochs = n_epochs
        self.free_bias = free_bias

    _task = REGRESSION

    def _fit_online(self, X, targets):
        counts = _counts_from_matrix(X)
        self.separation_ = select_top_k(counts, _resolve_k(self.k, X.shape[1]), X.shape[1])
        self.index_map_ = build_index_map(self.separation_)
        params = FtrlParams(
            alpha=self.alpha,
            beta=self.beta,
            l1=self.l1,
            l2=self.l2,
            task=self._task,
            free_bias=self.free_bias,
        )
        state = FtrlState(self.index_map_.D, params)
        if int(self.n_epochs) < 1:
            raise ValueError(f"n_epochs must be at least 1, got {self.n_epochs}")
        for _ in range(int(self.n_epochs)):
            for row in range(X.shape[0]):
                expanded = expand(_row_features(X, row), self.index_map_)
                state.update(expanded, targets[row])
        self.state_ = state
        self.n_rounds_ = state.rounds_seen
        return self

    def _margins(self, X) -> np.ndarray:
        check_is_fitted(self, "state_")
        X = _as_csr(X, expected_features=self.n_features_in_)
        out = np.empty(X.shape[0])
        for row in range(X.shape[0]):
            expanded = expand(_row_features(X, row), self.index_map_)
            out[row] = self.state_.raw_margin(expanded)
        return out


class PQRRegressor(RegressorMixin, _BasePQR):
    """Online quadratic regressor with frequency-shared interactions.

    Trained with single-pass per-coordinate FTRL-Proximal over the expanded
    coordinates; interactions are kept for the ``k`` most frequent features
    only, with one shared parameter per frequent feature covering everything
    else, so the parameter count stays ``d + k(k+1)/2 + 1``.

    Parameters
    ----------
    k : int or None, default=None
        Interaction order (size of the high-frequency set). ``None`` picks
        ``ceil(sqrt(d))``, which keeps the cost within a constant factor of
        the plain linear model.
    alpha, beta : float
        Per-coordinate adaptive learning-rate scale and offset.
    l1, l2 : float
        Regularization strengths; ``l1`` induces exact zeros.
    n_epochs : int, default=1
        Passes over the data; 1 is the pure online setting.
    free_bias : bool, default=False
        Exempt the bias coordinate from regularization.

    Attributes
    ----------
    separation_ : FeatureSeparation
        The frozen high/low frequency partition learned from ``fit`` data.
    index_map_ : PqrIndexMap
    state_ : FtrlState
    """

    def fit(self, X, y):
        X = _as_csr(X)
        y = check_array(y, ensure_2d=False, dtype=np.float64)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y shape {y.shape} does not match X rows {X.shape[0]}")
        self.n_features_in_ = X.shape[1]
        return self._fit_online(X, y)

    def predict(self, X):
        return self._margins(X)


class PQRClassifier(ClassifierMixin, _BasePQR):
    """Online binary classifier over frequency-shared quadratic interactions.

    Same training path as :class:`PQRRegressor` but with a logistic link;
    ``predict_proba`` exposes the per-round probability the online loop uses.

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
    separation_ : FeatureSeparation
    index_map_ : PqrIndexMap
    state_ : FtrlState
    """

    _task = CLASSIFICATION

    def fit(self, X, y):
        X = _as_csr(X)
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y shape {y.shape} does not match X rows {X.shape[0]}")
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(f"binary classification requires 2 classes, got {len(self.classes_)}")
        targets = (y == self.classes_[1]).astype(np.float64)
        self.n_features_in_ = X.shape[1]
        return self._fit_online(X, targets)

    def decision_function(self, X):
        return self._margins(X)

    def predict_proba(self, X):
        p = np.array([sigmoid(m) for m in self._margins(X)])
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self._margins(X) >= 0.0).astype(int)]
