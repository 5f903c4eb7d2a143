"""scikit-learn style wrapper: smooth any fitted classifier and certify its top-k."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_alpha, check_count, check_k, check_method, check_positive
from .evaluation import example_seed
from .predict import predict_topk
from .radius import certify
from .smoothing import BaseClassifier, NoiseModel


class EstimatorClassifier(BaseClassifier):
    """Expose a fitted scikit-learn classifier as a :class:`BaseClassifier`.

    Labels are positions in ``estimator.classes_``.
    """

    def __init__(self, estimator):
        check_is_fitted(estimator)
        self.estimator = estimator
        self.classes_ = np.asarray(estimator.classes_)
        self.label_count = self.classes_.size
        if self.label_count < 2:
            raise ValueError("estimator must know at least two classes")

    def classify(self, points):
        predicted = self.estimator.predict(points)
        return np.searchsorted(self.classes_, predicted)


class SmoothedTopKClassifier(ClassifierMixin, BaseEstimator):
    """Gaussian-smoothed top-k classifier around a base estimator.

    ``fit`` trains a clone of ``base_estimator`` (a :class:`BaseClassifier` is
    used as is).  ``predict`` returns the certified-correct top-``k`` set per
    row, or a row of ``abstain_label`` when the tests cannot separate the
    labels.  ``certify`` returns a radius certificate for given labels.

    Parameters
    ----------
    base_estimator : classifier
    sigma : float
        Noise standard deviation, in feature units.
    k : int
    n : int
        Noise samples per row.
    alpha : float
        Failure probability per row.
    mu : float
        Bisection width for the radius.
    bound_method : {"simuem", "binocp"}
    random_state : int
    abstain_label : int
    """

    def __init__(self, base_estimator=None, sigma=0.5, k=3, n=100_000, alpha=0.001,
                 mu=1e-5, bound_method="simuem", random_state=0, abstain_label=-1):
        self.base_estimator = base_estimator
        self.sigma = sigma
        self.k = k
        self.n = n
        self.alpha = alpha
        self.mu = mu
        self.bound_method = bound_method
        self.random_state = random_state
        self.abstain_label = abstain_label

    def _check_params(self):
        check_positive(self.sigma, "sigma")
        check_count(self.n, "n")
        check_alpha(self.alpha)
        check_positive(self.mu, "mu")
        check_method(self.bound_method)
        check_count(self.random_state, "random_state", minimum=0)
        check_k(self.k, self.base_.label_count)

    def fit(self, X, y=None):
        if self.base_estimator is None:
            raise ValueError("base_estimator is required")
        if isinstance(self.base_estimator, BaseClassifier):
            self.base_ = self.base_estimator
            self.classes_ = np.arange(self.base_.label_count)
        else:
            X = check_array(X)
            model = clone(self.base_estimator).fit(X, y)
            self.base_ = EstimatorClassifier(model)
            self.classes_ = self.base_.classes_
        self._check_params()
        self.n_features_in_ = None if X is None else check_array(X).shape[1]
        return self

    def _rows(self, X):
        check_is_fitted(self, "base_")
        X = check_array(X)
        if self.n_features_in_ is not None and X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def _label_index(self, y):
        y = np.asarray(y)
        index = np.searchsorted(self.classes_, y)
        index = np.clip(index, 0, self.classes_.size - 1)
        if not np.all(self.classes_[index] == y):
            raise ValueError("y contains labels unseen during fit")
        return index

    def predict(self, X):
        """Top-``k`` class labels per row, strongest first; abstentions are filled."""
        X = self._rows(X)
        noise = NoiseModel(self.sigma)
        out = np.full((X.shape[0], self.k), self.abstain_label, dtype=self.classes_.dtype
                      if self.classes_.dtype.kind in "iu" else object)
        for i, x in enumerate(X):
            result = predict_topk(self.base_, x, self.k, noise, self.n, self.alpha,
                                  example_seed(self.random_state, i))
            if not result.abstained:
                out[i] = self.classes_[list(result.labels)]
        return out

    def certify(self, X, y):
        """One :class:`RadiusCertificate` per row for label ``y[i]``."""
        X = self._rows(X)
        labels = self._label_index(y)
        if labels.shape != (X.shape[0],):
            raise ValueError("y must have one label per row of X")
        noise = NoiseModel(self.sigma)
        return [
            certify(self.base_, x, int(label), self.k, noise, self.n, self.alpha, self.mu,
                    self.bound_method, example_seed(self.random_state, i))
            for i, (x, label) in enumerate(zip(X, labels))
        ]

    def certified_radius(self, X, y):
        """Certified radii, with 0 for abstentions."""
        return np.array([0.0 if c.abstained else c.radius for c in self.certify(X, y)])

    def score(self, X, y, sample_weight=None):
        """Fraction of rows whose true label is in the predicted top-``k`` set."""
        predicted = self.predict(X)
        hits = np.array([label in row for label, row in zip(np.asarray(y), predicted)], dtype=float)
        return float(np.average(hits, weights=sample_weight))
