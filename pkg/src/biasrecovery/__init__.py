"""Exact population-level checks of when fair classifiers trained on biased data recover the Bayes-optimal one."""

from .bias import (
    BlumStanglBias,
    LabelFlipBias,
    LinearFractionalTransform,
    PriorShiftBias,
    apply_bias,
    is_order_preserving,
    to_lft,
)
from .distribution import (
    ClassifierTable,
    ConfusionRates,
    DiscreteJointDistribution,
    MassartSpec,
    bayes_optimal,
    build_stylized,
    evaluate,
    validate,
)
from .errors import InfeasibleError, LabError, ValidationError
from .solver import Constraint, GroupThresholdClassifier, LambdaSolution, solve_fair

__all__ = [
    "BlumStanglBias", "LabelFlipBias", "LinearFractionalTransform", "PriorShiftBias",
    "apply_bias", "is_order_preserving", "to_lft",
    "ClassifierTable", "ConfusionRates", "DiscreteJointDistribution", "MassartSpec",
    "bayes_optimal", "build_stylized", "evaluate", "validate",
    "InfeasibleError", "LabError", "ValidationError",
    "Constraint", "GroupThresholdClassifier", "LambdaSolution", "solve_fair",
]
