"""Argument checks shared across modules."""

import math
import numbers

import numpy as np

BOUND_METHODS = ("binocp", "simuem")


def check_positive(value, name):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_alpha(alpha, name="alpha"):
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {alpha!r}")
    return alpha


def check_label(label, label_count):
    if isinstance(label, bool) or not isinstance(label, numbers.Integral):
        raise TypeError(f"label must be an integer, got {type(label).__name__}")
    if not 0 <= label < label_count:
        raise ValueError(f"label {label} outside 0..{label_count - 1}")
    return int(label)


def check_k(k, label_count):
    k = check_count(k, "k")
    if k > label_count - 1:
        raise ValueError(f"k must be at most label_count - 1 = {label_count - 1}, got {k}")
    return k


def check_method(method):
    method = str(method).lower()
    if method not in BOUND_METHODS:
        raise ValueError(f"bound method must be one of {BOUND_METHODS}, got {method!r}")
    return method


def check_point(x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 1 or not np.all(np.isfinite(x)):
        raise ValueError("example point must be a non-empty vector of finite reals")
    return x
