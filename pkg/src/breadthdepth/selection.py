"""Choosing K of N rollouts from prefix features alone.

Three selectors: uniform random, MMR (quality minus max Jaccard similarity
to the picks so far), and Adaptive Dispersion (scheduled quality weight plus
max-min hybrid distance, where the hybrid mixes a margin-weighted JSD over
high-disagreement anchor positions with Jaccard distance). Ties always go to
the lowest rollout index.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import LN2, _jsd_unchecked
from .errors import ParameterError
from .kernels import get_kernel
from .metrics import pass_empirical
from .rollouts import featurize, position_margins

METHODS = ("Random", "MMR", "AdaptiveDispersion")


@dataclass(frozen=True)
class SelectionConfig:
    method: str
    k: int
    seed: int = 0
    lam: float = 0.5
    n_anchors: int = 8
    alpha_mix: float = 0.5
    omega_init: float = 0.7
    omega_final: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n_anchors < 1:
            raise ParameterError(f"n_anchors must be >= 1, got {self.n_anchors}")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ParameterError(f"alpha_mix must lie in [0, 1], got {self.alpha_mix}")
        if not 0.0 <= self.omega_final <= self.omega_init <= 1.0:
            raise ParameterError(
                f"need 0 <= omega_final <= omega_init <= 1, got ({self.omega_init}, {self.omega_final})"
            )

    def params(self):
        """The hyperparameters that matter for this method."""
        if self.method == "Random":
            return {"seed": self.seed}
        if self.method == "MMR":
            return {"lambda": self.lam}
        return {"n_anchors": self.n_anchors, "alpha_mix": self.alpha_mix,
                "omega_init": self.omega_init, "omega_final": self.omega_final}


def _check_k(pool, k):
    if k > pool.size:
        raise ParameterError(f"pool {pool.problem_id!r}: k={k} exceeds pool size N={pool.size}")


def random_k(pool, k, seed):
    _check_k(pool, k)
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.permutation(pool.size)[:k]]


# -- pairwise signals -------------------------------------------------------

def jaccard_distance(set_a, set_b):
    union = len(set_a | set_b)
    if union == 0:
        return 0.0
    return 1.0 - len(set_a & set_b) / union


def jaccard_matrices(token_sets):
    """``(similarity, distance)`` over all pairs via a token incidence matrix."""
    vocab = {tok: c for c, tok in enumerate(sorted(set().union(*token_sets)))}
    n = len(token_sets)
    inc = np.zeros((n, max(len(vocab), 1)))
    for i, s in enumerate(token_sets):
        inc[i, [vocab[t] for t in s]] = 1.0
    inter = inc @ inc.T
    sizes = inc.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    sim = np.divide(inter, union, out=np.ones_like(inter), where=union > 0)
    np.fill_diagonal(sim, 1.0)
    return sim, 1.0 - sim


def token_disagreement(pool, position):
    """Distinct-token count at ``position`` mapped to [0, 1] as ``(U - 1) / (N - 1)``."""
    if not 0 <= position < pool.common_length:
        raise ParameterError(f"position {position} outside the common prefix length {pool.common_length}")
    distinct = len({r.tokens[position] for r in pool.rollouts})
    return (distinct - 1) / (pool.size - 1)


def select_anchors(pool, n_anchors):
    """The ``n_anchors`` highest-disagreement positions, earliest first on ties, in ranked order."""
    scores = [token_disagreement(pool, t) for t in range(pool.common_length)]
    ranked = sorted(range(len(scores)), key=lambda t: (-scores[t], t))
    return ranked[:n_anchors]


def aligned_topk(record_i, record_j, position):
    """Both top-k distributions at ``position`` renormalised and embedded on their union support."""
    a, b = record_i.topk[position], record_j.topk[position]
    if not a or not b:
        raise ParameterError(f"empty top-k at position {position}")
    support = list(dict.fromkeys([tok for tok, _ in a] + [tok for tok, _ in b]))
    index = {tok: c for c, tok in enumerate(support)}
    out = []
    for entries in (a, b):
        lp = np.array([x for _, x in entries])
        w = np.exp(lp - lp.max())
        vec = np.zeros(len(support))
        for (tok, _), wi in zip(entries, w / w.sum()):
            vec[index[tok]] += wi
        out.append(vec)
    return out[0], out[1]


def anchor_weight(margin_i, margin_j):
    if margin_i < 0 or margin_j < 0:
        raise ParameterError("margins must be non-negative")
    return 1.0 / (1.0 + 0.5 * (margin_i + margin_j))


def deep_distance(record_i, record_j, anchors):
    """Margin-weighted mean anchor JSD, divided by ln 2 into [0, 1].

    Returns 0 when there are no anchors or every weight underflows to 0.
    """
    num = den = 0.0
    for t in anchors:
        p, r = aligned_topk(record_i, record_j, t)
        w = anchor_weight(position_margins(record_i.topk[t]), position_margins(record_j.topk[t]))
        num += w * _jsd_unchecked(p, r)
        den += w
    if den == 0.0:
        return 0.0
    return min(1.0, num / den / LN2)


def hybrid_distance(record_i, record_j, anchors, alpha_mix, prefix_length=None):
    """``alpha_mix * deep + (1 - alpha_mix) * Jaccard`` for one pair of prefixes."""
    if not 0.0 <= alpha_mix <= 1.0:
        raise ParameterError(f"alpha_mix must lie in [0, 1], got {alpha_mix}")
    broad = jaccard_distance(set(record_i.tokens[:prefix_length]), set(record_j.tokens[:prefix_length]))
    return alpha_mix * deep_distance(record_i, record_j, anchors) + (1.0 - alpha_mix) * broad


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    deep: np.ndarray
    broad: np.ndarray
    anchors: tuple
    degenerate: np.ndarray = field(repr=False)


def anchor_tensors(pool, anchors):
    """``(A, N, V)`` renormalised top-k probabilities on each anchor's pooled support, plus margins."""
    n = pool.size
    probs_per_anchor, margins = [], np.zeros((len(anchors), n))
    width = 1
    for a, t in enumerate(anchors):
        support = {}
        for r in pool.rollouts:
            for tok, _ in r.topk[t]:
                support.setdefault(tok, len(support))
        mat = np.zeros((n, len(support)))
        for i, r in enumerate(pool.rollouts):
            lp = np.array([x for _, x in r.topk[t]])
            w = np.exp(lp - lp.max())
            for (tok, _), wi in zip(r.topk[t], w / w.sum()):
                mat[i, support[tok]] += wi
            margins[a, i] = position_margins(r.topk[t])
        probs_per_anchor.append(mat)
        width = max(width, len(support))
    probs = np.zeros((len(anchors), n, width))
    for a, mat in enumerate(probs_per_anchor):
        probs[a, :, : mat.shape[1]] = mat
    return probs, margins


def distance_matrix(pool, features, n_anchors, alpha_mix, backend=None):
    anchors = tuple(select_anchors(pool, n_anchors))
    _, broad = jaccard_matrices(features.token_sets)
    n = pool.size
    if anchors:
        probs, margins = anchor_tensors(pool, anchors)
        deep, wsum = get_kernel("anchor_deep", backend)(probs, margins)
        degenerate = wsum <= 0
    else:
        deep = np.zeros((n, n))
        degenerate = np.ones((n, n), dtype=bool)
    np.fill_diagonal(degenerate, False)
    values = alpha_mix * deep + (1.0 - alpha_mix) * broad
    values = np.clip(0.5 * (values + values.T), 0.0, 1.0)
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(values, deep, broad, anchors, degenerate)


# -- greedy selectors -------------------------------------------------------

def _argmax_lowest(scores, remaining):
    best, best_score = -1, -math.inf
    for i in remaining:
        if scores[i] > best_score:
            best, best_score = i, scores[i]
    return best


def mmr_order(quality_norm, similarity, lam, k):
    """Greedy MMR over a precomputed similarity matrix; returns pick order."""
    n = len(quality_norm)
    k = min(k, n)
    remaining = list(range(n))
    chosen = []
    max_sim = np.zeros(n)
    for _ in range(k):
        scores = lam * quality_norm - (1.0 - lam) * max_sim
        pick = _argmax_lowest(scores, remaining)
        chosen.append(pick)
        remaining.remove(pick)
        max_sim = np.maximum(max_sim, similarity[pick])
    return chosen


def schedule_omega(step, k, omega_init, omega_final):
    """Linear quality weight from ``omega_init`` at step 0 to ``omega_final`` at step k-1."""
    if not 0 <= step < k:
        raise ParameterError(f"step must lie in [0, {k}), got {step}")
    if k == 1:
        return omega_init
    s = step / (k - 1)
    return omega_init * (1.0 - s) + omega_final * s


def dispersion_order(quality_norm, distance, k, omega_init, omega_final):
    """Greedy max-min selection; step 0 takes the best quality outright."""
    n = len(quality_norm)
    k = min(k, n)
    remaining = list(range(n))
    first = _argmax_lowest(quality_norm, remaining)
    chosen = [first]
    remaining.remove(first)
    min_dist = distance[first].copy()
    for step in range(1, k):
        w = schedule_omega(step, k, omega_init, omega_final)
        scores = w * quality_norm + (1.0 - w) * min_dist
        pick = _argmax_lowest(scores, remaining)
        chosen.append(pick)
        remaining.remove(pick)
        min_dist = np.minimum(min_dist, distance[pick])
    return chosen


def mmr_select(pool, features, lam, k):
    _check_k(pool, k)
    sim, _ = jaccard_matrices(features.token_sets)
    return mmr_order(features.quality_norm, sim, lam, k)


def adaptive_dispersion_select(pool, features, config, backend=None):
    _check_k(pool, config.k)
    dist = distance_matrix(pool, features, config.n_anchors, config.alpha_mix, backend)
    return dispersion_order(features.quality_norm, dist.values, config.k,
                            config.omega_init, config.omega_final)


def select(pool, config, features=None, backend=None):
    """Pick order (indices into ``pool.rollouts``) for one pool."""
    _check_k(pool, config.k)
    if config.method == "Random":
        return random_k(pool, config.k, config.seed)
    features = features or featurize(pool)
    if config.method == "MMR":
        return mmr_select(pool, features, config.lam, config.k)
    return adaptive_dispersion_select(pool, features, config, backend)


# -- sweeps -----------------------------------------------------------------

DEFAULT_LAMBDAS = (0.3, 0.5, 0.7)
DEFAULT_ANCHORS = (6, 8, 10)
DEFAULT_ALPHAS = (0.3, 0.5, 0.7)
DEFAULT_SCHEDULES = ((0.7, 0.1), (0.5, 0.1))


def default_grid(ks, lambdas=DEFAULT_LAMBDAS, anchors=DEFAULT_ANCHORS, alphas=DEFAULT_ALPHAS,
                 schedules=DEFAULT_SCHEDULES, include_random=True):
    grid = []
    for k in ks:
        if include_random:
            grid.append(SelectionConfig("Random", k))
        grid.extend(SelectionConfig("MMR", k, lam=lam) for lam in lambdas)
        grid.extend(
            SelectionConfig("AdaptiveDispersion", k, n_anchors=n, alpha_mix=a, omega_init=wi, omega_final=wf)
            for n, a, (wi, wf) in itertools.product(anchors, alphas, schedules)
        )
    return grid


@dataclass(frozen=True)
class SweepRow:
    config: SelectionConfig
    mean_pass: float
    n_problems: int
    best: bool = False


def sweep(pools, grid, random_seeds=100, backend=None):
    """Mean selected-set pass rate per config; flags the best row per (method, k).

    Random rows average over ``random_seeds`` seeds per problem.
    """
    pools = list(pools)
    if not pools:
        raise ParameterError("sweep needs at least one problem")
    feats = [featurize(p) for p in pools]
    dist_cache = {}
    rows = []
    for cfg in grid:
        per_problem = []
        for pi, (pool, f) in enumerate(zip(pools, feats)):
            _check_k(pool, cfg.k)
            if cfg.method == "Random":
                hits = [pass_empirical([pool.rollouts[i] for i in random_k(pool, cfg.k, cfg.seed + s)])
                        for s in range(random_seeds)]
                per_problem.append(float(np.mean(hits)))
                continue
            if cfg.method == "MMR":
                order = mmr_select(pool, f, cfg.lam, cfg.k)
            else:
                key = (pi, cfg.n_anchors, cfg.alpha_mix)
                if key not in dist_cache:
                    dist_cache[key] = distance_matrix(pool, f, cfg.n_anchors, cfg.alpha_mix, backend).values
                order = dispersion_order(f.quality_norm, dist_cache[key], cfg.k, cfg.omega_init, cfg.omega_final)
            per_problem.append(float(pass_empirical([pool.rollouts[i] for i in order])))
        rows.append(SweepRow(cfg, float(np.mean(per_problem)), len(pools)))

    best_idx = {}
    for idx, row in enumerate(rows):
        key = (row.config.method, row.config.k)
        if key not in best_idx or row.mean_pass > rows[best_idx[key]].mean_pass:
            best_idx[key] = idx
    flagged = set(best_idx.values())
    return [SweepRow(r.config, r.mean_pass, r.n_problems, i in flagged) for i, r in enumerate(rows)]
