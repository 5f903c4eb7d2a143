"""Base classifiers, Gaussian noise sampling and label counting."""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from ._validation import check_count, check_positive

#: Bit generator used for every draw; recorded in output metadata.
GENERATOR_NAME = "numpy.PCG64"
#: Samples drawn per chunk. Chunk seeds depend only on (seed, chunk index).
CHUNK_SIZE = 10_000


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian noise with standard deviation ``sigma``."""

    sigma: float

    def __post_init__(self):
        check_positive(self.sigma, "sigma")


@dataclass(frozen=True)
class CountVector:
    """Per-label hit counts from ``n`` noisy evaluations."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 2:
            raise ValueError("counts must be a 1-d array over at least two labels")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def label_count(self) -> int:
        return self.counts.size

    def __getitem__(self, label):
        return int(self.counts[label])


class BaseClassifier(ABC):
    """A deterministic map from feature vectors to labels ``0 .. label_count - 1``.

    Subclasses implement :meth:`classify` on a batch of points.  Classifiers
    that know their label distribution under noise may override
    :meth:`sample_counts` to skip the pointwise evaluation.
    """

    label_count: int

    @abstractmethod
    def classify(self, points: np.ndarray) -> np.ndarray:
        """Labels for each row of ``points`` (shape ``(m, d)``)."""

    def sample_counts(self, x, sigma, n, rng):
        x = np.asarray(x, dtype=float)
        noise = rng.standard_normal((n, x.size)) * sigma
        labels = np.asarray(self.classify(x[None, :] + noise))
        return np.bincount(labels, minlength=self.label_count)


class ConstantClassifier(BaseClassifier):
    """Always predicts the same label."""

    def __init__(self, label, label_count):
        if not 0 <= label < label_count:
            raise ValueError(f"label {label} outside 0..{label_count - 1}")
        self.label = label
        self.label_count = label_count

    def classify(self, points):
        return np.full(len(points), self.label, dtype=np.int64)


class SyntheticTabularClassifier(BaseClassifier):
    """A classifier whose label distribution under noise is known exactly.

    Row ``j`` of ``probabilities`` is the distribution of ``f(x_j + eps)``.
    Example ``j`` lives at the 1-d point ``j * spacing``; the pointwise rule
    maps the standardised offset ``u = Phi((z - x_j) / sigma)`` to the label
    whose cumulative-probability bin contains ``u``, which reproduces row ``j``
    exactly when the noise scale equals ``sigma``.  :meth:`sample_counts`
    draws the multinomial directly, which is the same distribution.
    """

    def __init__(self, probabilities, sigma=1.0, spacing=64.0):
        probabilities = np.atleast_2d(np.asarray(probabilities, dtype=float))
        if probabilities.shape[1] < 2:
            raise ValueError("need at least two labels")
        if (probabilities < 0).any() or not np.all(np.isfinite(probabilities)):
            raise ValueError("probabilities must be finite and non-negative")
        row_sums = probabilities.sum(axis=1)
        if np.any(np.abs(row_sums - 1) > 1e-12):
            bad = int(np.argmax(np.abs(row_sums - 1)))
            raise ValueError(f"probability row {bad} sums to {row_sums[bad]!r}, not 1")
        self.probabilities = probabilities
        self.label_count = probabilities.shape[1]
        self.sigma = check_positive(sigma, "sigma")
        self.spacing = float(spacing) * self.sigma
        cumulative = np.cumsum(probabilities, axis=1)
        cumulative[:, -1] = 1.0
        self._cumulative = cumulative

    def __len__(self):
        return self.probabilities.shape[0]

    def example_point(self, index):
        return np.array([index * self.spacing])

    def _row(self, x):
        index = int(round(float(np.asarray(x).ravel()[0]) / self.spacing))
        if not 0 <= index < len(self):
            raise ValueError(f"point {x!r} does not belong to any stored example")
        return index

    def classify(self, points):
        z = np.asarray(points, dtype=float)[:, 0]
        rows = np.clip(np.rint(z / self.spacing).astype(np.int64), 0, len(self) - 1)
        u = sc.ndtr((z - rows * self.spacing) / self.sigma)
        cumulative = self._cumulative[rows]
        labels = (cumulative <= u[:, None]).sum(axis=1)
        return np.minimum(labels, self.label_count - 1)

    def sample_counts(self, x, sigma, n, rng):
        if not np.isclose(sigma, self.sigma, rtol=1e-12, atol=0):
            raise ValueError(
                f"classifier is calibrated for sigma={self.sigma}, asked to sample at {sigma}"
            )
        return rng.multinomial(n, self.probabilities[self._row(x)])


def _chunk_rng(seed, chunk):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chunk])))


def sample_under_noise(f, x, noise, n, seed):
    """Count the labels ``f`` assigns to ``n`` Gaussian perturbations of ``x``.

    Draws are split into chunks of :data:`CHUNK_SIZE`, each with its own
    generator seeded from ``(seed, chunk index)``, so the result depends only on
    the arguments and never on how chunks are scheduled.
    """
    n = check_count(n, "n")
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(noise)
    totals = np.zeros(f.label_count, dtype=np.int64)
    for chunk, start in enumerate(range(0, n, CHUNK_SIZE)):
        size = min(CHUNK_SIZE, n - start)
        totals += f.sample_counts(x, noise.sigma, size, _chunk_rng(seed, chunk))
    return CountVector(totals)


def top_indices(counts, m, seed):
    """The ``m`` labels with the largest counts, descending; ties broken at random."""
    values = counts.counts if isinstance(counts, CountVector) else np.asarray(counts)
    if not 1 <= m <= values.size:
        raise ValueError(f"m must be in 1..{values.size}, got {m}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(values.size)
    ranked = order[np.argsort(-values[order], kind="stable")]
    return [int(i) for i in ranked[:m]]
