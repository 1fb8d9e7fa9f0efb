"""Breadth/depth budget split: closed forms, feasibility and a Monte Carlo check.

A budget of ``n`` rollouts is split into ``alpha * n`` exploration draws from
the approach mixture and ``(1 - alpha) * n`` refinement attempts on one
approach. Refinement beats i.i.d. sampling iff ``alpha <= 1 - 1/R`` where
``R = c_star / c_rand`` and ``c = -ln(1 - theta)``.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError
from .kernels import get_kernel
from .mixture import marginal_success

CHUNK_TRIALS = 8192


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        raise ParameterError(f"{name}={v!r} must lie in [0, 1]")


def refine_value(theta):
    """Per-attempt failure-decay exponent ``-ln(1 - theta)``; ``inf`` at theta = 1."""
    _check_prob("theta", theta)
    if theta == 1.0:
        return math.inf
    return -math.log1p(-theta)


def quality_ratio(c_star, c_rand):
    """``c_star / c_rand``. 0/0 and inf/inf (no approach is better than the mix) give 1."""
    if c_rand == 0.0:
        return 1.0 if c_star == 0.0 else math.inf
    if math.isinf(c_rand):
        return 1.0 if math.isinf(c_star) else 0.0
    return c_star / c_rand


def _failure(theta, exponent):
    if exponent == 0:
        return 1.0
    if theta == 1.0:
        return 0.0
    return math.exp(exponent * math.log1p(-theta))


def pass_rand(theta_bar, n):
    _check_prob("theta_bar", theta_bar)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if theta_bar == 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-theta_bar))


def pass_mcts(theta_star, n, alpha):
    """Refinement-only success with a real-valued budget ``(1 - alpha) * n``."""
    _check_prob("theta_star", theta_star)
    _check_prob("alpha", alpha)
    exponent = (1.0 - alpha) * n
    if exponent == 0:
        return 0.0
    if theta_star == 1.0:
        return 1.0
    return -math.expm1(exponent * math.log1p(-theta_star))


def pass_gap(theta_bar, theta_star, n, alpha):
    """``pass_mcts - pass_rand`` evaluated as a difference of failure probabilities.

    Keeps its sign resolvable when both pass rates round to 1.
    """
    _check_prob("alpha", alpha)
    return _failure(theta_bar, n) - _failure(theta_star, (1.0 - alpha) * n)


def alpha_upper(ratio_r):
    """Largest exploration fraction at which refinement still matches i.i.d. sampling."""
    if not ratio_r > 0:
        raise ParameterError(f"ratio_R must be positive, got {ratio_r!r}")
    if math.isinf(ratio_r):
        return 1.0
    return 1.0 - 1.0 / ratio_r


def alpha_min(eta, n, pi_star):
    """Exploration fraction needed to hit the best approach with probability >= 1 - eta.

    Returns ``(exact, approx)``; the approximation replaces ``-ln(1 - pi)`` by ``pi``.
    """
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1], got {eta!r}")
    _check_prob("pi_star", pi_star)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    need = -math.log(eta)
    if need == 0.0 or pi_star == 1.0:
        return 0.0, (need / (n * pi_star) if pi_star > 0 else 0.0)
    if pi_star == 0.0:
        return math.inf, math.inf
    return need / (n * -math.log1p(-pi_star)), need / (n * pi_star)


@dataclass(frozen=True)
class AllocationReport:
    theta_bar: float
    theta_star: float
    pi_star: float
    n: int
    eta: float
    alpha: float
    c_rand: float
    c_star: float
    ratio_R: float
    alpha_upper: float
    alpha_min: float
    alpha_min_approx: float
    feasible: bool
    pass_rand: float
    pass_mcts: float

    def to_dict(self):
        return asdict(self)


def feasibility(ratio_r, eta, n, pi_star):
    """Both constraints can hold iff ``R >= 1 / (1 - alpha_min)``; alpha_min >= 1 never can."""
    exact, _ = alpha_min(eta, n, pi_star)
    if exact >= 1.0:
        return False
    return ratio_r >= 1.0 / (1.0 - exact)


def allocation_report(theta_bar, theta_star, pi_star, n, eta, alpha=None):
    """Evaluate every closed form. ``alpha`` defaults to the discovery minimum, clipped to [0, 1]."""
    c_rand = refine_value(theta_bar)
    c_star = refine_value(theta_star)
    r = quality_ratio(c_star, c_rand)
    exact, approx = alpha_min(eta, n, pi_star)
    if alpha is None:
        alpha = min(1.0, exact)
    return AllocationReport(
        theta_bar=theta_bar, theta_star=theta_star, pi_star=pi_star, n=n, eta=eta, alpha=alpha,
        c_rand=c_rand, c_star=c_star, ratio_R=r,
        alpha_upper=alpha_upper(r) if r > 0 else -math.inf,
        alpha_min=exact, alpha_min_approx=approx,
        feasible=feasibility(r, eta, n, pi_star) if r > 0 else False,
        pass_rand=pass_rand(theta_bar, n), pass_mcts=pass_mcts(theta_star, n, alpha),
    )


def mixture_report(model, n, eta, alpha=None):
    i = model.best
    return allocation_report(marginal_success(model), float(model.theta[i]), float(model.pi[i]), n, eta, alpha)


# -- simulation ----------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    pass_mcts: float
    pass_rand: float
    discovery_rate: float
    trials: int
    n_explore: int
    n_refine: int

    def stderr(self, p):
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials)


def split_budget(n, alpha):
    """Integer exploration/refinement counts ``(round(alpha n), n - round(alpha n))``."""
    _check_prob("alpha", alpha)
    n_e = int(round(alpha * n))
    return n_e, n - n_e


def chunk_seeds(seed, trials):
    """One child ``SeedSequence`` per fixed-size chunk of trials.

    Chunk boundaries depend only on ``trials``, so results are identical for
    any worker count.
    """
    n_chunks = -(-trials // CHUNK_TRIALS)
    return np.random.SeedSequence(seed).spawn(n_chunks)


def _run_chunk(args):
    (seq, size, cum_pi, theta, best, global_target, count_explore, n_e, n_f, n, kernel) = args
    rng = np.random.default_rng(seq)
    u_explore = rng.random((size, n_e))
    u_explore_ok = rng.random((size, n_e)) if count_explore else np.zeros((size, 0))
    u_refine = rng.random((size, n_f))
    fallback = n_e == 0 and not global_target
    u_refine_app = rng.random((size, n_f)) if fallback else np.zeros((size, 0))
    u_base = rng.random((size, n))
    u_base_ok = rng.random((size, n))
    mcts, rand, disc = kernel(cum_pi, theta, best, global_target, count_explore,
                              u_explore, u_explore_ok, u_refine, u_refine_app, u_base, u_base_ok)
    return int(mcts.sum()), int(rand.sum()), int(disc.sum())


def simulate_strategy(model, n, alpha, trials, seed, count_exploration_successes=False,
                      target="discovered", workers=1, backend=None):
    """Monte Carlo estimate of both strategies on an approach mixture.

    Each trial spends ``round(alpha n)`` draws exploring the mixture, then
    ``n - round(alpha n)`` Bernoulli attempts on the refinement target: the
    best discovered approach by true success rate (``target="discovered"``)
    or the globally best one (``target="global"``). With no exploration and a
    discovered target, refinement degenerates to plain mixture draws. The
    i.i.d. arm makes ``n`` mixture draws. Only refinement attempts count
    towards success unless ``count_exploration_successes`` is set.
    """
    if target not in ("discovered", "global"):
        raise ParameterError(f"target must be 'discovered' or 'global', got {target!r}")
    if trials < 1 or n < 1:
        raise ParameterError("trials and n must be >= 1")
    n_e, n_f = split_budget(n, alpha)
    cum_pi = np.minimum(np.cumsum(model.pi), 1.0)
    cum_pi[-1] = 1.0
    theta = np.ascontiguousarray(model.theta, dtype=np.float64)
    kernel = get_kernel("simulate_trials", backend)
    seqs = chunk_seeds(seed, trials)
    jobs = []
    for c, seq in enumerate(seqs):
        size = min(CHUNK_TRIALS, trials - c * CHUNK_TRIALS)
        jobs.append((seq, size, cum_pi, theta, model.best, target == "global",
                     bool(count_exploration_successes), n_e, n_f, n, kernel))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_run_chunk, jobs))
    else:
        counts = [_run_chunk(j) for j in jobs]
    m_ok, r_ok, d_ok = (sum(c[i] for c in counts) for i in range(3))
    return SimulationResult(m_ok / trials, r_ok / trials, d_ok / trials, trials, n_e, n_f)
