"""Scikit-learn estimator wrapper around the classifier training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from maxentreg import losses
from maxentreg.classifier import TrainConfig, forward, train
from maxentreg.data import LabeledDataset


class MaxEntClassifier(ClassifierMixin, BaseEstimator):
    """Softmax classifier trained with an entropy-regularized loss.

    A linear or one-hidden-layer (ReLU) network fit by momentum SGD with
    plateau learning-rate decay. ``loss`` selects plain cross-entropy
    ("ce"), cross-entropy minus ``lam`` times the prediction entropy
    ("mer"), or label smoothing with weight ``lam`` ("ls").

    Parameters
    ----------
    loss : {"mer", "ce", "ls"}, default="mer"
    lam : float, default=0.5
        Regularization weight; ignored when ``lambda_schedule`` is given.
    lambda_schedule : list of (epoch, weight) pairs or None
        Piecewise-constant schedule; the weight of the last pair whose
        epoch threshold is <= the current epoch applies.
    hidden_dim : int or None, default=None
        None trains a linear model.
    epochs, batch_size, learning_rate, momentum, weight_decay : SGD setup.
    lr_decay_factor, plateau_patience, min_improvement, min_learning_rate :
        plateau decay: multiply the rate by ``lr_decay_factor`` (down to
        ``min_learning_rate``) after ``plateau_patience`` epochs without
        the mean training loss improving by more than ``min_improvement``.
    random_state : int, default=0
        Seeds initialization and batch shuffling; runs are deterministic.

    Attributes
    ----------
    classes_ : ndarray of the original class labels.
    params_ : fitted ModelParams.
    history_ : TrainResult with per-epoch metrics.
    n_features_in_ : int
    """

    def __init__(
        self,
        loss="mer",
        lam=0.5,
        lambda_schedule=None,
        hidden_dim=None,
        epochs=100,
        batch_size=32,
        learning_rate=1e-2,
        momentum=0.9,
        weight_decay=1e-4,
        lr_decay_factor=0.1,
        plateau_patience=5,
        min_improvement=1e-4,
        min_learning_rate=1e-5,
        random_state=0,
    ):
        self.loss = loss
        self.lam = lam
        self.lambda_schedule = lambda_schedule
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_decay_factor = lr_decay_factor
        self.plateau_patience = plateau_patience
        self.min_improvement = min_improvement
        self.min_learning_rate = min_learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("need at least 2 classes in y")
        config = TrainConfig(
            loss_kind=self.loss,
            lam=self.lam,
            lambda_schedule=self.lambda_schedule,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            lr_decay_factor=self.lr_decay_factor,
            plateau_patience=self.plateau_patience,
            min_improvement=self.min_improvement,
            min_learning_rate=self.min_learning_rate,
            hidden_dim=self.hidden_dim,
            seed=self.random_state,
        )
        dataset = LabeledDataset(
            features=X,
            labels=encoded.astype(np.int64),
            class_count=self.classes_.shape[0],
            provenance="memory",
        )
        result = train(config, dataset)
        self.params_ = result.params
        self.history_ = result
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.params_, X)

    def predict_proba(self, X):
        return losses.softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
