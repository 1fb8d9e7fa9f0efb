"""Approach mixtures and the aleatoric / breadth / depth uncertainty split."""
import json
import math
from dataclasses import dataclass

import numpy as np

from .divergence import bernoulli_kl, entropy, kl_divergence
from .errors import ParameterError, ValidationError

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ApproachMixture:
    """Approach probabilities ``pi`` and per-approach success rates ``theta``.

    An approach counts as viable when its success rate is positive.
    """

    pi: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=np.float64).ravel()
        theta = np.array(self.theta, dtype=np.float64).ravel()
        if pi.size == 0 or pi.shape != theta.shape:
            raise ValidationError(f"pi and theta must be non-empty and equal length ({pi.size} vs {theta.size})")
        if not (np.all(np.isfinite(pi)) and np.all(pi >= 0)):
            raise ValidationError("pi entries must be finite and non-negative")
        if abs(math.fsum(pi) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"pi sums to {math.fsum(pi)!r}, not 1")
        if not (np.all(theta >= 0) and np.all(theta <= 1)):
            raise ValidationError("theta entries must lie in [0, 1]")
        pi.flags.writeable = False
        theta.flags.writeable = False
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "theta", theta)

    @property
    def m(self):
        return self.pi.size

    @property
    def viable(self):
        return tuple(int(i) for i in np.flatnonzero(self.theta > 0))

    @property
    def best(self):
        """Index of the highest-success approach (lowest index on ties)."""
        return int(np.argmax(self.theta))


def marginal_success(model):
    return float(min(1.0, max(0.0, math.fsum(model.pi * model.theta))))


def sample_rollout(model, rng):
    """One draw: approach ~ Categorical(pi), then success ~ Bernoulli(theta[approach])."""
    a = int(rng.choice(model.m, p=model.pi))
    return a, bool(rng.random() < model.theta[a])


def sample_rollouts(model, size, rng):
    approaches = rng.choice(model.m, size=size, p=model.pi)
    return approaches, rng.random(size) < model.theta[approaches]


@dataclass(frozen=True)
class UncertaintyReport:
    aleatoric: float
    epistemic_breadth: float
    epistemic_depth: float


def aleatoric(ideal):
    return entropy(ideal.pi)


def epistemic_breadth(ideal, model):
    _same_shape(ideal, model)
    return kl_divergence(ideal.pi, model.pi)


def epistemic_depth(ideal, model):
    """Ideal-weighted Bernoulli KL of success rates over the ideal's viable approaches."""
    _same_shape(ideal, model)
    total = 0.0
    for i in ideal.viable:
        w = ideal.pi[i]
        if w == 0:
            continue
        d = bernoulli_kl(ideal.theta[i], model.theta[i])
        if math.isinf(d):
            return math.inf
        total += w * d
    return total


def decompose(ideal, model):
    return UncertaintyReport(aleatoric(ideal), epistemic_breadth(ideal, model), epistemic_depth(ideal, model))


def _same_shape(a, b):
    if a.m != b.m:
        raise ParameterError(f"mixtures have different approach counts ({a.m} vs {b.m})")


def load_mixture_spec(path):
    """Read ``{"pi", "theta", "ideal_pi", "ideal_theta"}``; the ideal half is optional."""
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON ({exc.msg})") from None
    if not isinstance(d, dict) or "pi" not in d or "theta" not in d:
        raise ValidationError(f"{path}: mixture spec needs 'pi' and 'theta'")
    model = ApproachMixture(d["pi"], d["theta"])
    ideal = None
    if "ideal_pi" in d or "ideal_theta" in d:
        ideal = ApproachMixture(d.get("ideal_pi", d["pi"]), d.get("ideal_theta", d["theta"]))
    return model, ideal


def synthetic_correct_counts(pi, viable_prob, theta_low, theta_high, n_problems, n_rollouts, rng):
    """Correct-rollout counts for a synthetic benchmark sharing one approach distribution.

    Each problem draws its own per-approach success rates: an approach is
    viable with probability ``viable_prob`` and then succeeds with a rate
    uniform on ``[theta_low, theta_high]``. Rollouts are sampled from the
    resulting mixture.
    """
    pi = np.asarray(pi, dtype=np.float64)
    m = pi.size
    viable = rng.random((n_problems, m)) < viable_prob
    theta = np.where(viable, rng.uniform(theta_low, theta_high, (n_problems, m)), 0.0)
    counts = np.empty(n_problems, dtype=np.int64)
    for q in range(n_problems):
        _, success = sample_rollouts(ApproachMixture(pi, theta[q]), n_rollouts, rng)
        counts[q] = int(success.sum())
    return counts
