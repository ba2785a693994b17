"""Scikit-learn style front end over the path-statistics pipeline.

Two estimators:

- :class:`ClassPathAnalyzer` fits per-class Bernoulli path models from a
  weight matrix plus labelled input activations and exposes the divergence
  summaries; ``transform`` maps samples to flattened significance masks.
- :class:`DenseClassifier` wraps the SGD trainer as an ordinary classifier
  so the desk-scale networks compose with the wider ecosystem
  (``clone``, ``cross_val_score`` and friends all work).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from . import divergences, mlp, validation
from .class_stats import OVERALL_ID, BernoulliClassModel
from .interactions import parse_threshold_mode, significance_mask
from .tensorio import ActivationDump


class ClassPathAnalyzer(BaseEstimator, TransformerMixin):
    """Per-class Bernoulli path models for one dense layer.

    Parameters
    ----------
    weights : array (m, n)
        The layer's weight matrix.
    threshold_mode : str
        Significance threshold rule (see :mod:`pathsig.interactions`).
    alpha : float
        Smoothing used when the count models are turned into probabilities.
    """

    def __init__(self, weights=None, threshold_mode: str = "literal", alpha: float = 0.5):
        self.weights = weights
        self.threshold_mode = threshold_mode
        self.alpha = alpha

    def _weights(self) -> np.ndarray:
        if self.weights is None:
            raise ValueError("weights must be set before fitting")
        return validation.as_float_matrix(self.weights, "weights")

    def fit(self, X, y):
        """Accumulate class models from labelled layer-input activations."""
        w = self._weights()
        parse_threshold_mode(self.threshold_mode)
        X = validation.as_float_matrix(X, "X")
        if X.shape[1] != w.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} features but weights expect {w.shape[1]}"
            )
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on the sample count")

        self.classes_ = np.unique(y)
        models = {c: BernoulliClassModel(w.shape, c) for c in self.classes_}
        overall = BernoulliClassModel(w.shape, OVERALL_ID)
        for label, activation in zip(y, X):
            mask = significance_mask(w * activation[None, :], self.threshold_mode)
            models[label].add(mask)
            overall.add(mask)
        self.class_models_ = [models[c] for c in self.classes_]
        self.overall_model_ = overall
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        """Per-sample significance masks, flattened to (S, m*n) uint8."""
        w = self._weights()
        X = validation.as_float_matrix(X, "X")
        if X.shape[1] != w.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} features but weights expect {w.shape[1]}"
            )
        out = np.empty((X.shape[0], w.size), dtype=np.uint8)
        for i, activation in enumerate(X):
            out[i] = significance_mask(w * activation[None, :], self.threshold_mode).ravel()
        return out

    def divergence_matrix(self) -> divergences.DivergenceMatrix:
        self._check_fitted()
        return divergences.pairwise_matrix(
            self.class_models_, self.overall_model_, self.alpha
        )

    def summary(self) -> dict:
        """The two headline scalars plus per-class entropies."""
        self._check_fitted()
        dm = self.divergence_matrix()
        out = {
            "mean_class_entropy": divergences.mean_class_entropy(
                self.class_models_, self.alpha
            ),
            "class_entropies": {
                str(m.class_id): float(dm.kl[i, i])
                for i, m in enumerate(self.class_models_)
            },
        }
        out["mean_inter_class_kl"] = (
            divergences.mean_inter_class(dm) if len(self.class_models_) >= 2 else None
        )
        return out

    def _check_fitted(self):
        if not hasattr(self, "class_models_"):
            raise ValueError("this analyzer is not fitted yet")

    @classmethod
    def from_dump(cls, dump: ActivationDump, threshold_mode="literal", alpha=0.5):
        """Fit directly from a loaded activation dump (labels stay indices)."""
        est = cls(weights=dump.weights, threshold_mode=threshold_mode, alpha=alpha)
        return est.fit(dump.activations, dump.labels)


class DenseClassifier(BaseEstimator, ClassifierMixin):
    """Tiny fully-connected softmax classifier trained with plain SGD.

    ``epochs=0`` yields the untrained (init-only) network, which is exactly
    what the memorisation baseline needs. ``init_seed`` defaults to ``seed``
    so two instances can share an init while shuffling batches differently.
    """

    def __init__(
        self,
        hidden_layer_sizes=(32,),
        epochs: int = 200,
        batch_size: int = 32,
        lr0: float = 0.01,
        lr_decay: float = 0.95,
        seed: int = 0,
        init_seed: int | None = None,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr0 = lr0
        self.lr_decay = lr_decay
        self.seed = seed
        self.init_seed = init_seed

    def fit(self, X, y):
        X = validation.as_float_matrix(X, "X")
        y = np.asarray(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        dataset = mlp.LabeledDataset(
            inputs=X, labels=encoded, num_classes=len(self.classes_)
        )
        sizes = [X.shape[1], *self.hidden_layer_sizes, len(self.classes_)]
        init_seed = self.seed if self.init_seed is None else self.init_seed
        layers = mlp.init_network(sizes, seed=init_seed)
        cfg = mlp.TrainConfig(
            epochs=self.epochs,
            batch_size=min(self.batch_size, X.shape[0]),
            lr0=self.lr0,
            lr_decay_per_epoch=self.lr_decay,
            seed=self.seed,
        )
        self.layers_, trace = mlp.train_sgd(layers, dataset, cfg)
        self.loss_curve_ = trace["loss"]
        self.train_accuracy_ = trace["accuracy"]
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return mlp.predict_proba(self.layers_, X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def _check_fitted(self):
        if not hasattr(self, "layers_"):
            raise ValueError("this classifier is not fitted yet")
