"""Closed-form link between the entropy-regularization weight and the
probabilities a classifier converges to, plus a brute-force simplex
minimizer used as an independent cross-check.

For one sample with true class y, minimizing

    L(p) = -log p_y + lam * sum_i p_i log p_i    s.t.  sum_i p_i = 1

over the C-simplex puts every wrong class at the same probability
``p_neg = p_y * exp(-1 / (lam * p_y))`` and ties the true-class
probability p_y to the weight through

    lam = m / log((C - 1) / (m - 1)),    m = 1 / p_y,  1 < m < C.

The right-hand side is strictly increasing in m, so ``cpp_for_lambda``
inverts it by bisection. ``simplex_oracle`` instead minimizes L(p)
directly with exponentiated-gradient updates and never touches the
closed form, so the two can validate each other.

"cpp" throughout is the converged probability of the positive (true)
class. All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from maxentreg.exceptions import NumericalError

# m = 1/p_y is bracketed just inside (1, C); 1 + 1e-15 is the tightest
# float64 can resolve next to 1.
_M_LOW_OFFSET = 1e-15
_M_HIGH_SCALE = 1.0 - 1e-12
_MAX_BISECT_ITERS = 200


class CurvePoint(NamedTuple):
    """One point of the weight-vs-converged-probability curve."""

    lam: float
    cpp: float
    class_count: int


@dataclass(frozen=True)
class ConvergedDistribution:
    """Converged probabilities: one positive class, C-1 equal negatives."""

    positive: float
    negative: float
    class_count: int


def _check_class_count(class_count) -> int:
    c = int(class_count)
    if c != class_count or c < 2:
        raise ValueError(f"class_count must be an integer >= 2, got {class_count}")
    return c


def _lambda_of_m(m: float, class_count: int) -> float:
    return m / math.log((class_count - 1) / (m - 1.0))


def lambda_for_cpp(cpp: float, class_count: int) -> float:
    """Weight lam whose converged positive-class probability equals cpp.

    Defined for cpp strictly between 1/C (the uniform limit, lam -> inf)
    and 1 (the unregularized limit, lam -> 0).
    """
    c = _check_class_count(class_count)
    if not 1.0 / c < cpp < 1.0:
        raise ValueError(f"cpp must lie in (1/{c}, 1), got {cpp}")
    return _lambda_of_m(1.0 / cpp, c)


def cpp_for_lambda(lam: float, class_count: int) -> float:
    """Converged positive-class probability for weight lam > 0.

    Inverts lambda_for_cpp by bisection on m = 1/cpp, run to float64
    interval exhaustion; strictly decreasing in lam and in class_count.
    For lam below the smallest weight the curve can represent in float64
    (cpp within one ulp of 1) the bracket endpoint is returned.
    """
    c = _check_class_count(class_count)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lam must be positive and finite, got {lam}")
    lo = 1.0 + _M_LOW_OFFSET
    hi = c * _M_HIGH_SCALE
    if _lambda_of_m(lo, c) >= lam:
        return 1.0 / lo
    if _lambda_of_m(hi, c) <= lam:
        return 1.0 / hi
    for _ in range(_MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return 1.0 / mid
        if _lambda_of_m(mid, c) < lam:
            lo = mid
        else:
            hi = mid
    raise NumericalError(
        f"bisection did not exhaust its bracket after {_MAX_BISECT_ITERS} iterations"
    )


def converged_distribution(lam: float, class_count: int) -> ConvergedDistribution:
    """Full converged distribution for weight lam: p_y and the shared p_neg."""
    p_y = cpp_for_lambda(lam, class_count)
    p_neg = p_y * math.exp(-1.0 / (lam * p_y))
    return ConvergedDistribution(positive=p_y, negative=p_neg, class_count=class_count)


def _oracle_objective(p: np.ndarray, label: int, lam: float) -> float:
    return -math.log(p[label]) + lam * float(np.sum(p * np.log(p)))


def simplex_oracle(
    label: int,
    lam: float,
    class_count: int,
    step: float = 0.05,
    max_iters: int = 200_000,
) -> np.ndarray:
    """Minimize the per-sample objective directly on the simplex.

    Exponentiated-gradient descent from the uniform start: multiplicative
    updates keep every coordinate strictly positive, away from the log
    singularity at the boundary. Stops when the update falls below 1e-12
    in max norm. Raises NumericalError if the objective rises for 100
    consecutive steps (step size too large).
    """
    c = _check_class_count(class_count)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lam must be positive and finite, got {lam}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    label = int(label)
    if not 0 <= label < c:
        raise ValueError(f"label out of range [0, {c})")

    p = np.full(c, 1.0 / c)
    prev_obj = _oracle_objective(p, label, lam)
    rises = 0
    for _ in range(max_iters):
        grad = lam * (np.log(p) + 1.0)
        grad[label] -= 1.0 / p[label]
        grad -= grad.min()  # shift-invariant update; keeps exp() <= 1
        q = p * np.exp(-step * grad)
        p_new = q / q.sum()
        # guard against underflow to exactly 0 before the next log
        p_new = np.maximum(p_new, 1e-300)
        p_new /= p_new.sum()
        delta = float(np.max(np.abs(p_new - p)))
        obj = _oracle_objective(p_new, label, lam)
        if obj > prev_obj:
            rises += 1
            if rises >= 100:
                raise NumericalError(
                    f"objective rose for {rises} consecutive steps; try a smaller step"
                )
        else:
            rises = 0
        p = p_new
        prev_obj = obj
        if delta < 1e-12:
            break
    return p


def cpp_from_ce(mean_ce_loss: float) -> float:
    """Experimental converged probability implied by a mean CE loss in nats."""
    if not (mean_ce_loss >= 0 and math.isfinite(mean_ce_loss)):
        raise ValueError(f"mean CE loss must be finite and >= 0, got {mean_ce_loss}")
    return math.exp(-mean_ce_loss)


def ls_cpp(smoothing: float, class_count: int) -> float:
    """Converged positive-class probability under label smoothing: 1 - s + s/C."""
    c = _check_class_count(class_count)
    if not 0.0 <= smoothing <= 1.0:
        raise ValueError(f"smoothing must be in [0, 1], got {smoothing}")
    return 1.0 - smoothing + smoothing / c


def curve_points(lambdas, class_count: int) -> list[CurvePoint]:
    """Evaluate the weight-vs-converged-probability curve on a lam grid."""
    c = _check_class_count(class_count)
    return [CurvePoint(float(l), cpp_for_lambda(float(l), c), c) for l in lambdas]
