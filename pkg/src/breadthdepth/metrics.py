"""Pass@K estimation, lift, average gain and diversity profiles."""
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ParameterError, ValidationError

DEFAULT_PROFILE_BUDGETS = (1, 2, 4, 6, 8)
ESTIMATORS = ("unbiased", "empirical-prefix")


def pass_at_k_unbiased(n_total, n_correct, k):
    """P(a uniform k-subset of the pool contains a correct rollout).

    Evaluated as ``(C(n, k) - C(n - c, k)) / C(n, k)`` on exact integers; the
    single true division is correctly rounded, so the result equals the
    subset-enumeration frequency bit for bit.
    """
    if not 0 <= n_correct <= n_total:
        raise ParameterError(f"need 0 <= n_correct <= n_total, got c={n_correct}, n={n_total}")
    if not 1 <= k <= n_total:
        raise ParameterError(f"need 1 <= k <= n_total, got k={k}, n={n_total}")
    total = comb(n_total, k)
    return (total - comb(n_total - n_correct, k)) / total


def _labels(records):
    out = []
    for r in records:
        if r.correct is None:
            raise ValidationError(f"rollout_id={r.rollout_id} has no correctness label")
        out.append(r.correct)
    return out


def pass_empirical(records):
    """True iff any selected record is correct. Empty selection is a miss."""
    return any(_labels(records))


def lift(method_pass, baseline_pass):
    if baseline_pass <= 0:
        raise ParameterError("lift is undefined for a zero baseline pass rate")
    return (method_pass - baseline_pass) / baseline_pass


def format_lift(value):
    return f"{100.0 * value:.2f}%"


@dataclass(frozen=True)
class PassCurve:
    budgets: tuple
    values: tuple

    def __post_init__(self):
        if len(self.budgets) != len(self.values):
            raise ParameterError("budgets and values differ in length")

    def at(self, k):
        try:
            return self.values[self.budgets.index(k)]
        except ValueError:
            raise ParameterError(f"budget {k} is not in the curve {self.budgets}") from None


def average_gain(curve, k, n_max):
    """Mean pass improvement per extra rollout going from budget ``k`` to ``n_max``."""
    if k >= n_max:
        raise ParameterError(f"need k < n_max, got k={k}, n_max={n_max}")
    return (curve.at(n_max) - curve.at(k)) / (n_max - k)


def problem_pass(pool, k, estimator="unbiased"):
    labels = _labels(pool.rollouts)
    if estimator == "unbiased":
        return pass_at_k_unbiased(len(labels), sum(labels), k)
    if estimator == "empirical-prefix":
        if k > len(labels):
            raise ParameterError(f"pool {pool.problem_id!r}: budget {k} exceeds pool size {len(labels)}")
        order = sorted(range(len(labels)), key=lambda i: pool.rollouts[i].rollout_id)
        return float(any(labels[i] for i in order[:k]))
    raise ParameterError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


def pass_curve(pools, budgets, estimator="unbiased"):
    """Unweighted mean over problems of per-problem pass@K."""
    pools = list(pools)
    if not pools:
        raise ParameterError("no problems to evaluate")
    budgets = tuple(sorted(set(budgets)))
    values = tuple(float(np.mean([problem_pass(p, k, estimator) for p in pools])) for k in budgets)
    return PassCurve(budgets, values)


def pass_curve_from_counts(n_total, counts, budgets):
    counts = np.asarray(counts)
    budgets = tuple(sorted(set(budgets)))
    values = tuple(float(np.mean([pass_at_k_unbiased(n_total, int(c), k) for c in counts])) for k in budgets)
    return PassCurve(budgets, values)


@dataclass(frozen=True)
class DiversityProfile:
    budgets: tuple
    gains: tuple
    n_max: int

    def retention(self):
        """Gain at the largest budget relative to the smallest; higher means slower decay."""
        return self.gains[-1] / self.gains[0]


def _check_budgets(budgets, n_max):
    budgets = tuple(sorted(set(budgets)))
    bad = [k for k in budgets if not 1 <= k < n_max]
    if bad:
        raise ParameterError(f"profile budgets must lie in [1, {n_max}), got {bad}")
    return budgets


def profile_from_curve(curve, budgets, n_max):
    budgets = _check_budgets(budgets, n_max)
    return DiversityProfile(budgets, tuple(average_gain(curve, k, n_max) for k in budgets), n_max)


def diversity_profile(pools, budgets=DEFAULT_PROFILE_BUDGETS, n_max=16, estimator="unbiased"):
    pools = list(pools)
    budgets = _check_budgets(budgets, n_max)
    for p in pools:
        if p.size < n_max:
            raise ParameterError(f"pool {p.problem_id!r} has {p.size} rollouts, fewer than n_max={n_max}")
    curve = pass_curve(pools, budgets + (n_max,), estimator)
    return profile_from_curve(curve, budgets, n_max)


def diversity_profile_from_counts(n_total, counts, budgets=DEFAULT_PROFILE_BUDGETS, n_max=16):
    budgets = _check_budgets(budgets, n_max)
    if n_max > n_total:
        raise ParameterError(f"n_max={n_max} exceeds pool size {n_total}")
    curve = pass_curve_from_counts(n_total, counts, budgets + (n_max,))
    return profile_from_curve(curve, budgets, n_max)
