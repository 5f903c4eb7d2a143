"""Clopper-Pearson label-probability bounds and the prefix-sum combination."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_alpha, check_k, check_label, check_method
from .smoothing import CountVector
from .special import beta_quantile, check_probability


@dataclass(frozen=True)
class ProbabilityBounds:
    """Lower bound for ``target_label`` and upper bounds for every other label.

    ``upper`` has one entry per label; the entry at ``target_label`` is not a
    bound and is stored as NaN.
    """

    target_label: int
    lower: float
    upper: np.ndarray
    alpha: float = float("nan")
    method: str = "given"

    def __post_init__(self):
        upper = np.array(self.upper, dtype=float)
        if upper.ndim != 1 or upper.size < 2:
            raise ValueError("upper must be a 1-d array with one entry per label")
        check_label(self.target_label, upper.size)
        object.__setattr__(self, "lower", check_probability(self.lower, "lower"))
        upper[self.target_label] = np.nan
        others = np.delete(upper, self.target_label)
        if np.any(~((others >= 0) & (others <= 1))):
            raise ValueError("upper bounds must be probabilities in [0, 1]")
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)

    @property
    def label_count(self):
        return self.upper.size

    @property
    def competitors(self):
        """Labels other than the target, in label order."""
        return [i for i in range(self.label_count) if i != self.target_label]

    @classmethod
    def from_mapping(cls, target_label, lower, upper, label_count=None):
        """Build from ``{label: upper}`` covering every non-target label."""
        label_count = label_count or max(max(upper), target_label) + 1
        values = np.full(label_count, np.nan)
        for label, value in upper.items():
            values[int(label)] = value
        values[target_label] = 0.0
        if np.isnan(values).any():
            raise ValueError("missing upper bound for some competitor label")
        return cls(target_label, lower, values)


@dataclass(frozen=True)
class PrefixUpperBounds:
    """``values[t-1]`` bounds the total probability of the ``t`` weakest top-k competitors.

    ``labels`` lists those competitors b_1..b_k, weakest first.
    """

    values: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.values)


def _counts(counts):
    return counts if isinstance(counts, CountVector) else CountVector(counts)


def _lower_cp(n_l, n, q):
    if n_l == 0:
        return 0.0
    return beta_quantile(q, n_l, n - n_l + 1)


def _upper_cp(n_i, n, q):
    if n_i == n:
        return 1.0
    return beta_quantile(q, n_i + 1, n - n_i)


def binocp_bounds(counts, label, alpha):
    """One-sided Clopper-Pearson lower bound on the target; ``1 - lower`` for the rest."""
    counts = _counts(counts)
    label = check_label(label, counts.label_count)
    alpha = check_alpha(alpha)
    lower = _lower_cp(counts[label], counts.n, alpha)
    upper = np.full(counts.label_count, 1.0 - lower)
    return ProbabilityBounds(label, lower, upper, alpha, "binocp")


def simuem_bounds(counts, label, alpha):
    """Per-label Clopper-Pearson bounds at level ``alpha / c``, jointly valid by Bonferroni."""
    counts = _counts(counts)
    label = check_label(label, counts.label_count)
    alpha = check_alpha(alpha)
    n, c = counts.n, counts.label_count
    each = alpha / c
    lower = _lower_cp(counts[label], n, each)
    upper = np.array([_upper_cp(counts[i], n, 1.0 - each) for i in range(c)])
    return ProbabilityBounds(label, lower, upper, alpha, "simuem")


def estimate_bounds(counts, label, alpha, method="simuem"):
    method = check_method(method)
    if method == "binocp":
        return binocp_bounds(counts, label, alpha)
    return simuem_bounds(counts, label, alpha)


def prefix_upper_bounds(bounds, k, seed=0):
    """Capped prefix sums over the ``k`` largest competitor upper bounds.

    With ``b_1..b_k`` the ``k`` largest competitors ordered weakest first,
    ``values[t-1] = min(sum_{j<=t} upper[b_j], 1 - lower)``.  Ties among equal
    upper bounds are broken by a seeded shuffle; the values do not depend on it.
    """
    k = check_k(k, bounds.label_count)
    competitors = np.array(bounds.competitors)
    rng = np.random.default_rng(seed)
    shuffled = competitors[rng.permutation(competitors.size)]
    ranked = shuffled[np.argsort(-bounds.upper[shuffled], kind="stable")]
    strongest_first = ranked[:k]
    weakest_first = strongest_first[::-1]
    sums = np.cumsum(bounds.upper[weakest_first])
    values = np.minimum(sums, 1.0 - bounds.lower)
    values = np.clip(values, 0.0, 1.0)
    return PrefixUpperBounds(values, [int(i) for i in weakest_first])
