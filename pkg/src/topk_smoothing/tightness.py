"""Worst-case base classifiers showing the certified radius cannot be enlarged.

All regions are described in the scalar coordinate
``v = Phi(delta^T (z - x) / (sigma * ||delta||))``.  Under the clean noise
distribution ``v`` is uniform on [0, 1]; after shifting the input by
``delta`` a region ``(a, b]`` has mass ``Phi(Phi^-1(b) - lam) - Phi(Phi^-1(a) - lam)``
with ``lam = ||delta|| / sigma``.  Large ``v`` is where the shifted
distribution gains mass, so competitors are placed near ``v = 1`` and the
target label keeps ``(0, lower]``.

The competitor regions are carved one at a time.  Internally that happens in
the mirrored coordinate ``q = 1 - v``, where ``(0, s]`` is the half-space of
clean mass ``s`` that the shifted distribution favours most.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bounds import prefix_upper_bounds
from .special import std_normal_cdf, std_normal_quantile

#: Slack allowed when checking the feasibility inequalities.
FEASIBILITY_TOL = 1e-12
#: Slack allowed when checking consistency of a classifier with its bounds.
CONSISTENCY_TOL = 1e-9


def _check_shift(lam):
    lam = float(lam)
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError(f"shift ratio must be a finite non-negative number, got {lam!r}")
    return lam


def _merge(intervals):
    merged = []
    for a, b in sorted((float(a), float(b)) for a, b in intervals if b > a):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class QuantileIntervalSet:
    """A finite union of disjoint half-open intervals ``(a, b]`` inside [0, 1].

    Stored sorted, with touching intervals merged and empty ones dropped.
    Overlapping input is rejected; use :meth:`union` to combine sets.
    """

    intervals: tuple = ()

    def __post_init__(self):
        raw = [(float(a), float(b)) for a, b in self.intervals]
        for a, b in raw:
            if not 0.0 <= a <= b <= 1.0:
                raise ValueError(f"interval ({a}, {b}] is not inside [0, 1]")
        ordered = sorted(i for i in raw if i[1] > i[0])
        for (_, b0), (a1, _) in zip(ordered, ordered[1:]):
            if a1 < b0:
                raise ValueError("intervals overlap")
        object.__setattr__(self, "intervals", _merge(ordered))

    @classmethod
    def full(cls):
        return cls(((0.0, 1.0),))

    def union(self, other):
        return QuantileIntervalSet(_merge(self.intervals + other.intervals))

    def measure_clean(self):
        return math.fsum(b - a for a, b in self.intervals)

    def measure_shifted(self, lam):
        lam = _check_shift(lam)
        if lam == 0:
            return self.measure_clean()
        return math.fsum(
            std_normal_cdf(std_normal_quantile(b) - lam) - std_normal_cdf(std_normal_quantile(a) - lam)
            for a, b in self.intervals
        )

    def __bool__(self):
        return bool(self.intervals)


def measure_clean(s):
    """Mass of ``s`` when ``v`` is uniform."""
    return s.measure_clean()


def measure_shifted(s, lam):
    """Mass of ``s`` once the input is shifted by ``lam`` noise standard deviations."""
    return s.measure_shifted(lam)


# --- carving in the mirrored coordinate q = 1 - v ----------------------------


def _q_mass_shifted(a, b, lam):
    return std_normal_cdf(std_normal_quantile(b) + lam) - std_normal_cdf(std_normal_quantile(a) + lam)


def _clip(free, a, b):
    out = []
    for lo, hi in free:
        lo, hi = max(lo, a), min(hi, b)
        if hi > lo:
            out.append((lo, hi))
    return out


def _subtract(free, taken):
    out = list(free)
    for a, b in taken:
        nxt = []
        for lo, hi in out:
            if hi <= a or lo >= b:
                nxt.append((lo, hi))
                continue
            if lo < a:
                nxt.append((lo, a))
            if hi > b:
                nxt.append((b, hi))
        out = nxt
    return out


def _clean(pieces):
    return math.fsum(b - a for a, b in pieces)


def _shifted(pieces, lam):
    return math.fsum(_q_mass_shifted(a, b, lam) for a, b in pieces)


def _left_end(free, right, mass):
    """Largest ``a`` with clean mass of ``free`` inside ``(a, right]`` equal to ``mass``."""
    need = mass
    pieces = _clip(free, -math.inf, right)
    for lo, hi in reversed(pieces):
        if hi - lo >= need:
            return hi - need
        need -= hi - lo
    return pieces[0][0] if pieces else right


def _right_end(free, left, mass):
    """Smallest ``b`` with clean mass of ``free`` inside ``(left, b]`` equal to ``mass``."""
    need = mass
    pieces = _clip(free, left, math.inf)
    for lo, hi in pieces:
        if hi - lo >= need:
            return lo + need
        need -= hi - lo
    return pieces[-1][1] if pieces else left


def _carve(free, lo, hi, mass, target, lam, allow_excess):
    """A subset of ``free`` with clean mass ``mass`` and shifted mass ``target``.

    The subset is ``free`` intersected with a window ``(a, x]``.  Sliding the
    window from the left end of ``[lo, hi]`` to the right end moves its shifted
    mass from at least ``target`` down to at most ``target``, so bisection on
    the window's right edge finds a crossing.  With ``allow_excess`` a window
    flush with ``hi`` is accepted as soon as its shifted mass already exceeds
    ``target``.
    """
    if mass <= 0:
        return []
    if allow_excess:
        a = _left_end(free, hi, mass)
        if _shifted(_clip(free, a, hi), lam) > target:
            return _clip(free, a, hi)

    def excess(x):
        return _shifted(_clip(free, _left_end(free, x, mass), x), lam) - target

    left, right = _right_end(free, lo, mass), hi
    if excess(left) <= 0:
        best = left
    elif excess(right) >= 0:
        best = right
    else:
        for _ in range(200):
            mid = 0.5 * (left + right)
            if mid in (left, right):
                break
            if excess(mid) >= 0:
                left = mid
            else:
                right = mid
        best = left
    return _clip(free, _left_end(free, best, mass), best)


def _to_v(pieces):
    return QuantileIntervalSet(tuple((1.0 - b, 1.0 - a) for a, b in pieces))


@dataclass(frozen=True)
class WorstCaseClassifier:
    """A label -> region assignment partitioning [0, 1] in the ``v`` coordinate.

    ``competitors`` are the top-``k`` rivals b_1..b_k, weakest first, and
    ``threshold`` is ``min_t Pr_shifted(B_{S_t}) / t`` at the construction shift.
    """

    assignment: dict
    target_label: int
    competitors: tuple
    threshold: float
    lam: float

    def clean_measures(self):
        return {label: s.measure_clean() for label, s in self.assignment.items()}

    def shifted_measures(self, lam):
        return {label: s.measure_shifted(lam) for label, s in self.assignment.items()}

    def is_partition(self, tol=1e-9):
        pieces = sorted(i for s in self.assignment.values() for i in s.intervals)
        for (_, b0), (a1, _) in zip(pieces, pieces[1:]):
            if a1 < b0 - tol:
                return False
        return abs(math.fsum(b - a for a, b in pieces) - 1.0) <= tol

    def classify(self, v):
        """Label of each coordinate value ``v`` in (0, 1]."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        labels = np.full(v.shape, -1, dtype=np.int64)
        for label, s in self.assignment.items():
            for a, b in s.intervals:
                labels[(v > a) & (v <= b)] = label
        return labels


def check_feasible(bounds, k, seed=0):
    """Raise ``ValueError`` naming the violated inequality, if any."""
    prefix = prefix_upper_bounds(bounds, k, seed)
    top_k = math.fsum(bounds.upper[prefix.labels])
    all_others = math.fsum(bounds.upper[bounds.competitors])
    if bounds.lower + top_k > 1 + FEASIBILITY_TOL:
        raise ValueError(
            "infeasible bounds: lower + sum of the k largest competitor upper bounds "
            f"= {bounds.lower + top_k:.12g} exceeds 1"
        )
    if bounds.lower + all_others < 1 - FEASIBILITY_TOL:
        raise ValueError(
            "infeasible bounds: lower + sum of all competitor upper bounds "
            f"= {bounds.lower + all_others:.12g} is below 1"
        )
    return prefix


def construct_worst_case(bounds, k, lam, seed=0):
    """Build a classifier consistent with ``bounds`` that ejects the target from the top-k.

    The target keeps ``(0, lower]``.  Each top-``k`` competitor gets clean mass
    equal to its upper bound and shifted mass at least
    ``min_t Pr_shifted(B_{S_t}) / t``.  Once ``lam`` exceeds the certified
    radius over sigma this pushes the target out of the shifted top-``k``.
    Leftover mass goes to the remaining labels in slices no larger than their
    upper bounds.

    Regions live in double precision near ``v = 1``, where the float spacing
    is about 1e-16.  Upper bounds below roughly 1e-8 combined with large
    ``lam`` cannot be represented accurately and the shifted-mass residuals
    degrade accordingly.
    """
    lam = _check_shift(lam)
    prefix = check_feasible(bounds, k, seed)
    weakest_first = prefix.labels
    uppers = [float(bounds.upper[b]) for b in weakest_first]
    sums = np.minimum(np.cumsum(uppers), 1.0)
    ratios = [std_normal_cdf(std_normal_quantile(s) + lam) / t for t, s in enumerate(sums, 1)]
    tau = int(np.argmin(ratios)) + 1  # first minimiser: ties go to the smaller t
    threshold = ratios[tau - 1]
    s_tau, s_k = float(sums[tau - 1]), float(sums[-1])

    regions = {}
    # B_{S_tau}: every piece gets shifted mass exactly `threshold`
    free = [(0.0, s_tau)] if s_tau > 0 else []
    for j in range(tau, 0, -1):
        piece = free if j == 1 else _carve(free, 0.0, s_tau, uppers[j - 1], threshold, lam, False)
        regions[weakest_first[j - 1]] = piece
        free = _subtract(free, piece)
    # B_{S_k} \ B_{S_tau}: shifted mass at least `threshold`
    free = [(s_tau, s_k)] if s_k > s_tau else []
    for j in range(k, tau, -1):
        piece = free if j == tau + 1 else _carve(free, s_tau, s_k, uppers[j - 1], threshold, lam, True)
        regions[weakest_first[j - 1]] = piece
        free = _subtract(free, piece)

    assignment = {label: _to_v(pieces) for label, pieces in regions.items()}

    start, end = bounds.lower, 1.0 - s_k
    rest = [i for i in np.argsort(-np.nan_to_num(bounds.upper, nan=-1), kind="stable")
            if i != bounds.target_label and i not in regions]
    for position, label in enumerate(rest):
        stop = end if position == len(rest) - 1 else min(start + float(bounds.upper[label]), end)
        assignment[int(label)] = QuantileIntervalSet(((start, max(start, stop)),))
        start = max(start, stop)
    target = [(0.0, bounds.lower)]
    if end > start:
        target.append((start, end))  # rounding residue; the target may only gain mass
    assignment[bounds.target_label] = QuantileIntervalSet(_merge(target))
    return WorstCaseClassifier(
        assignment=dict(sorted(assignment.items())),
        target_label=bounds.target_label,
        competitors=tuple(weakest_first),
        threshold=threshold,
        lam=lam,
    )


def region_residuals(wc, bounds, lam=None):
    """Worst clean-mass error and worst shifted-mass shortfall over the top-k competitors.

    Both are ``<= 0`` up to rounding for a correct construction: the first is
    ``max_j |clean(C_j) - upper_j|`` and the second ``max_j (threshold - shifted(C_j))``.
    """
    lam = wc.lam if lam is None else lam
    clean_err = max(abs(wc.assignment[b].measure_clean() - bounds.upper[b]) for b in wc.competitors)
    shortfall = max(wc.threshold - wc.assignment[b].measure_shifted(lam) for b in wc.competitors)
    return clean_err, shortfall


def is_consistent(wc, bounds):
    """True iff ``wc`` partitions [0, 1] and its clean masses respect ``bounds``."""
    clean = wc.clean_measures()
    if clean.get(bounds.target_label, 0.0) < bounds.lower - CONSISTENCY_TOL:
        return False
    for other in bounds.competitors:
        if clean.get(other, 0.0) > bounds.upper[other] + CONSISTENCY_TOL:
            return False
    return wc.is_partition()


def verify_violation(wc, bounds, k, lam, label=None):
    """True iff ``wc`` is consistent with ``bounds`` yet ``label`` is outside the shifted top-``k``."""
    lam = _check_shift(lam)
    label = bounds.target_label if label is None else label
    if not is_consistent(wc, bounds):
        return False
    shifted = wc.shifted_measures(lam)
    rivals = sorted((shifted.get(i, 0.0) for i in range(bounds.label_count) if i != label), reverse=True)
    return shifted.get(label, 0.0) < rivals[k - 1]
