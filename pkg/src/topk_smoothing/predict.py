"""Abstaining top-k prediction with sequential binomial tests."""

from dataclasses import dataclass

from ._validation import check_alpha, check_k
from .smoothing import NoiseModel, sample_under_noise, top_indices
from .special import binom_two_sided_pvalue


@dataclass(frozen=True)
class PredictionResult:
    """Predicted top-k labels in descending-count order, or an abstention.

    ``pvalues`` holds the tests that were run; on abstention the last one is
    the test that failed.
    """

    labels: tuple
    pvalues: tuple
    abstained: bool = False

    def __iter__(self):
        return iter(self.labels)


def predict_counts(counts, k, alpha, seed=0):
    """Run the sequential tests on an existing count vector."""
    k = check_k(k, counts.label_count)
    alpha = check_alpha(alpha)
    ranked = top_indices(counts, k + 1, seed)
    labels, pvalues = [], []
    for t in range(k):
        upper, lower = counts[ranked[t]], counts[ranked[t + 1]]
        if upper + lower == 0:
            pvalue = 1.0
        else:
            pvalue = binom_two_sided_pvalue(upper, upper + lower, 0.5)
        pvalues.append(pvalue)
        if pvalue > alpha:
            return PredictionResult((), tuple(pvalues), abstained=True)
        labels.append(ranked[t])
    return PredictionResult(tuple(labels), tuple(pvalues))


def predict_topk(f, x, k, noise, n, alpha, seed=0):
    """Top-``k`` labels of the smoothed classifier, or abstain.

    With probability at least ``1 - alpha`` a returned set equals the true
    smoothed top-``k``.  One count vector serves all ``k`` tests.
    """
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(noise)
    k = check_k(k, f.label_count)
    counts = sample_under_noise(f, x, noise, n, seed)
    return predict_counts(counts, k, alpha, seed)
