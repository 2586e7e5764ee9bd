from __future__ import annotations

import numpy as np
from scipy.special import log_softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .linalg import glorot_init, make_rng
from .trainer import AdamState, adam_step


class LinearProbe(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained full-batch with Adam.

    When validation data is passed to :meth:`fit`, the weights from the epoch
    with the highest validation accuracy are kept (earliest epoch on ties).

    Parameters
    ----------
    lr : float
        Adam step size.
    weight_decay : float
        Decoupled weight decay applied to the weight matrix and bias.
    epochs : int
        Number of full-batch steps.
    random_state : int
        Seed for the weight initialization.
    """

    def __init__(self, lr=1e-2, weight_decay=1e-4, epochs=300, random_state=0):
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.random_state = random_state

    def _logits(self, X, W, b):
        return X @ W + b

    def fit(self, X, y, X_val=None, y_val=None, n_classes=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        if n_classes is None:
            self.classes_ = np.unique(y)
        else:
            self.classes_ = np.arange(n_classes)
        yi = np.searchsorted(self.classes_, y)
        if np.any(self.classes_[np.clip(yi, 0, len(self.classes_) - 1)] != y):
            raise ValueError("labels outside the declared classes")
        n, d = X.shape
        c = len(self.classes_)
        self.n_features_in_ = d
        W = glorot_init(d, c, make_rng(int(self.random_state), stream=11))
        b = np.zeros((1, c))
        onehot = np.zeros((n, c))
        onehot[np.arange(n), yi] = 1.0

        have_val = X_val is not None and len(X_val) > 0
        if have_val:
            X_val = check_array(X_val, dtype=np.float64)
            yv = np.searchsorted(self.classes_, np.asarray(y_val))
        best = (-1.0, W.copy(), b.copy(), 0)
        state = AdamState()
        self.loss_curve_ = []
        for epoch in range(self.epochs):
            logp = log_softmax(self._logits(X, W, b), axis=1)
            self.loss_curve_.append(float(-(logp * onehot).sum() / n))
            delta = (np.exp(logp) - onehot) / n
            adam_step([W, b], [X.T @ delta, delta.sum(axis=0, keepdims=True)],
                      state, self.lr, self.weight_decay)
            if have_val:
                acc = float(np.mean(np.argmax(self._logits(X_val, W, b), axis=1) == yv))
                if acc > best[0]:
                    best = (acc, W.copy(), b.copy(), epoch)
        if have_val:
            self.best_val_accuracy_, W, b, self.best_epoch_ = best
        self.coef_, self.intercept_ = W, b[0]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return np.exp(log_softmax(self.decision_function(X), axis=1))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
