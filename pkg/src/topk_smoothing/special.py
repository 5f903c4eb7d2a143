"""Scalar special functions: standard normal CDF/quantile, Beta quantile, exact binomial test.

Everything here is a thin, validated layer over :mod:`scipy.special`, which
already provides double-precision implementations (Cephes ``ndtr``/``ndtri``
and the Boost-backed ``betaincinv``).  Quantiles of 0 and 1 are returned as
``-inf``/``+inf`` so that downstream formulas can take limits symbolically.
"""

import math

import numpy as np
from scipy import special as sc
from scipy import stats

# relative slack used when collecting "as or less likely" outcomes, as in R's binom.test
_PMF_RELERR = 1 + 1e-7


def check_probability(p, name="p"):
    """Return ``p`` as a float, raising ``ValueError`` for NaN or values outside [0, 1]."""
    p = float(p)
    if not 0.0 <= p <= 1.0:  # also rejects NaN
        raise ValueError(f"{name} must be a probability in [0, 1], got {p!r}")
    return p


def std_normal_cdf(x):
    """Standard normal CDF, total on the extended reals."""
    x = float(x)
    if math.isnan(x):
        raise ValueError("std_normal_cdf is undefined for NaN")
    return float(sc.ndtr(x))


def std_normal_quantile(p):
    """Inverse standard normal CDF; ``0 -> -inf`` and ``1 -> +inf``."""
    p = check_probability(p)
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    return float(sc.ndtri(p))


def beta_quantile(q, a, b):
    """The ``q``-quantile of Beta(a, b), i.e. ``x`` with ``I_x(a, b) = q``."""
    q = check_probability(q, "q")
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta shape parameters must be positive, got a={a!r}, b={b!r}")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    return float(sc.betaincinv(a, b, q))


def binom_two_sided_pvalue(s, n, p0=0.5):
    """Exact two-sided binomial test p-value.

    Sums the probabilities of every outcome that is at most as likely as the
    observed count ``s`` under Bin(n, p0).

    >>> binom_two_sided_pvalue(8, 10)
    0.109375
    """
    s, n = int(s), int(n)
    if n < 1 or not 0 <= s <= n:
        raise ValueError(f"need 0 <= s <= n and n >= 1, got s={s}, n={n}")
    p0 = check_probability(p0, "p0")
    if p0 == 0.5:
        # fold onto the lower half so that pvalue(s) == pvalue(n - s) bit for bit
        s = min(s, n - s)
    pmf = stats.binom.pmf(np.arange(n + 1), n, p0)
    observed = pmf[s]
    included = pmf <= observed * _PMF_RELERR
    if included.all():
        return 1.0
    return float(min(1.0, math.fsum(pmf[included])))
