"""Certified top-k robustness of Gaussian-smoothed classifiers."""

from .bounds import (
    PrefixUpperBounds,
    ProbabilityBounds,
    binocp_bounds,
    estimate_bounds,
    prefix_upper_bounds,
    simuem_bounds,
)
from .estimator import EstimatorClassifier, SmoothedTopKClassifier
from .evaluation import (
    Dataset,
    EvaluationConfig,
    accuracy_lower_bound,
    certified_accuracy_curve,
    load_dataset,
    run_batch,
)
from .predict import PredictionResult, predict_counts, predict_topk
from .radius import (
    DEFAULT_MU,
    RadiusCertificate,
    certify,
    certify_bounds,
    certify_counts,
    equation_lhs,
    solve_radius_t,
)
from .smoothing import (
    BaseClassifier,
    ConstantClassifier,
    CountVector,
    NoiseModel,
    SyntheticTabularClassifier,
    sample_under_noise,
    top_indices,
)
from .tightness import (
    QuantileIntervalSet,
    WorstCaseClassifier,
    check_feasible,
    construct_worst_case,
    is_consistent,
    region_residuals,
    measure_clean,
    measure_shifted,
    verify_violation,
)

__version__ = "0.1.0"
