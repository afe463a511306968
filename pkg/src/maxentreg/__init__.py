"""Entropy-regularized softmax classification.

Loss kernels with analytic gradients (``losses``), the closed-form link
between the regularization weight and the converged class probabilities
plus a brute-force simplex oracle (``convergence``), a small
from-scratch classifier and trainer (``classifier``), a scikit-learn
estimator wrapper (``estimator``), synthetic fine-grained data with
label corruption (``data``), and a CLI experiment harness (``cli``).
"""

__version__ = "0.1.0"

from maxentreg.convergence import (
    ConvergedDistribution,
    CurvePoint,
    converged_distribution,
    cpp_for_lambda,
    cpp_from_ce,
    curve_points,
    lambda_for_cpp,
    ls_cpp,
    simplex_oracle,
)
from maxentreg.estimator import MaxEntClassifier
from maxentreg.exceptions import NumericalError, TrainingDiverged
from maxentreg.losses import (
    LossBreakdown,
    PROB_FLOOR,
    cell_function,
    cross_entropy,
    entropy,
    label_smoothing_gradient,
    label_smoothing_loss,
    regularized_gradient,
    regularized_loss,
    softmax,
    softmax_jacobian,
)

__all__ = [
    "ConvergedDistribution",
    "CurvePoint",
    "LossBreakdown",
    "MaxEntClassifier",
    "NumericalError",
    "PROB_FLOOR",
    "TrainingDiverged",
    "cell_function",
    "converged_distribution",
    "cpp_for_lambda",
    "cpp_from_ce",
    "cross_entropy",
    "curve_points",
    "entropy",
    "label_smoothing_gradient",
    "label_smoothing_loss",
    "lambda_for_cpp",
    "ls_cpp",
    "regularized_gradient",
    "regularized_loss",
    "simplex_oracle",
    "softmax",
    "softmax_jacobian",
]
