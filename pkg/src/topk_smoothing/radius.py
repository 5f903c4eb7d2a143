"""The certified-radius equation, its bisection solver, and top-k certification."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_alpha, check_k, check_label, check_method, check_positive
from .bounds import estimate_bounds, prefix_upper_bounds
from .smoothing import NoiseModel, sample_under_noise
from .special import check_probability, std_normal_cdf, std_normal_quantile

#: Default bisection width.
DEFAULT_MU = 1e-5
#: The bracket never grows beyond this many sigmas; larger radii are reported as the cap.
RADIUS_CAP = 100.0
_MAX_ITER = 400


def equation_lhs(radius, lower, prefix_upper, t, sigma):
    """``Phi(Phi^-1(lower) - R/sigma) - Phi(Phi^-1(prefix_upper) + R/sigma) / t``.

    Strictly decreasing in ``radius``; infinite quantiles at probabilities 0 and
    1 are handled as limits.
    """
    return _lhs(radius / sigma, std_normal_quantile(lower), std_normal_quantile(prefix_upper), t)


def _lhs(shift, lower_score, upper_score, t):
    return std_normal_cdf(lower_score - shift) - std_normal_cdf(upper_score + shift) / t


def solve_radius_t(lower, prefix_upper, t, sigma, mu=DEFAULT_MU):
    """Bisection lower bound ``r`` on the root ``R*`` of :func:`equation_lhs`.

    Guarantees ``equation_lhs(r) >= 0`` and ``r <= R* <= r + mu``.  The bracket
    starts at ``[0, sigma]`` (or ``[-sigma, 0]`` for negative roots) and doubles
    outward.  Roots beyond ``RADIUS_CAP * sigma`` (and ``lower == 1``) come back
    as exactly that cap; roots below ``-RADIUS_CAP * sigma``, or no root at all,
    come back as ``-inf``.
    """
    lower = check_probability(lower, "lower")
    prefix_upper = check_probability(prefix_upper, "prefix_upper")
    sigma = check_positive(sigma, "sigma")
    mu = check_positive(mu, "mu")
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")

    if lower == 1.0:
        return RADIUS_CAP * sigma
    if lower == 0.0 or (prefix_upper == 1.0 and t == 1):
        # the left-hand side is negative for every radius
        return -math.inf

    lower_score = std_normal_quantile(lower)
    upper_score = std_normal_quantile(prefix_upper)

    def lhs(r):
        return _lhs(r / sigma, lower_score, upper_score, t)

    cap = RADIUS_CAP * sigma
    if lhs(0.0) >= 0:
        lo, hi = 0.0, sigma
        while lhs(hi) >= 0:
            if hi >= cap:
                return cap
            lo, hi = hi, min(2 * hi, cap)
    else:
        lo, hi = -sigma, 0.0
        while lhs(lo) < 0:
            if lo <= -cap:
                return -math.inf
            lo, hi = max(2 * lo, -cap), lo

    for _ in range(_MAX_ITER):
        if hi - lo < mu:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if lhs(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class RadiusCertificate:
    """Outcome of certification for one label.

    ``radius`` is the largest per-``t`` solution; the certificate abstains
    whenever it is not positive.  ``saturated`` marks radii clipped at the
    bracket cap.
    """

    radius: float
    per_t: np.ndarray
    label: int
    k: int
    mu: float
    method: str = "given"
    n: int = 0
    saturated: bool = False
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def abstained(self):
        return not self.radius > 0

    @property
    def best_t(self):
        return int(np.argmax(self.per_t)) + 1


def certify_bounds(bounds, k, sigma, mu=DEFAULT_MU, seed=0):
    """Certified radius from precomputed probability bounds."""
    k = check_k(k, bounds.label_count)
    sigma = check_positive(sigma, "sigma")
    prefix = prefix_upper_bounds(bounds, k, seed)
    per_t = np.array(
        [solve_radius_t(bounds.lower, prefix.values[t - 1], t, sigma, mu) for t in range(1, k + 1)]
    )
    radius = float(per_t.max())
    return RadiusCertificate(
        radius=radius,
        per_t=per_t,
        label=bounds.target_label,
        k=k,
        mu=mu,
        method=bounds.method,
        saturated=radius >= RADIUS_CAP * sigma,
    )


def certify_counts(counts, label, k, sigma, alpha, mu=DEFAULT_MU, method="simuem", seed=0):
    """Bounds from ``counts`` followed by :func:`certify_bounds`."""
    bounds = estimate_bounds(counts, label, alpha, method)
    return replace(certify_bounds(bounds, k, sigma, mu, seed), n=counts.n)


def certify(f, x, label, k, noise, n, alpha, mu=DEFAULT_MU, method="simuem", seed=0):
    """Sample ``f`` under noise and certify ``label`` for top-``k`` membership.

    With probability at least ``1 - alpha`` over the sampling, ``label`` stays in
    the smoothed top-``k`` for every perturbation of norm below the returned radius.
    """
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(noise)
    label = check_label(label, f.label_count)
    k = check_k(k, f.label_count)
    alpha = check_alpha(alpha)
    method = check_method(method)
    counts = sample_under_noise(f, x, noise, n, seed)
    return certify_counts(counts, label, k, noise.sigma, alpha, mu, method, seed)
