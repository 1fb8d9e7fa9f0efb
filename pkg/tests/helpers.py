"""Fixture builders and slow reference implementations used as test oracles.

The oracles deliberately avoid the package's code paths: dict-based top-k
alignment, ``math.log`` JSD, and greedy replays in ``fractions.Fraction``.
"""
import itertools
import math
from fractions import Fraction

import numpy as np

from breadthdepth.rollouts import ProblemPool, RolloutRecord


def make_record(rollout_id, tokens, logprobs=None, topk=None, correct=None, problem_id="p0"):
    tokens = tuple(tokens)
    if logprobs is None:
        logprobs = tuple(-0.1 for _ in tokens)
    if topk is None:
        topk = tuple(((tok, lp), (tok + 1000, lp - 1.0)) for tok, lp in zip(tokens, logprobs))
    return RolloutRecord(problem_id, rollout_id, tokens, tuple(logprobs), tuple(topk), correct)


def make_pool(token_rows, prefix_length=None, logprobs=None, correct=None, problem_id="p0"):
    recs = []
    for i, toks in enumerate(token_rows):
        lp = None if logprobs is None else logprobs[i]
        c = None if correct is None else correct[i]
        recs.append(make_record(i, toks, lp, correct=c, problem_id=problem_id))
    return ProblemPool(problem_id, recs, prefix_length or max(len(t) for t in token_rows))


def random_pool(rng, n=None, length=None, vocab=None, max_k=5, labeled=True, problem_id="p0"):
    """A pool with random tokens, top-k lists and labels; lengths vary around the prefix length."""
    n = n or int(rng.integers(2, 17))
    length = length or int(rng.integers(1, 33))
    vocab = vocab or int(rng.integers(3, 25))
    recs = []
    for i in range(n):
        t_len = int(rng.integers(max(1, length - 3), length + 4))
        tokens, chosen, topk = [], [], []
        for _ in range(t_len):
            k = int(rng.integers(1, max_k + 1))
            cand = rng.choice(vocab, size=min(k, vocab), replace=False)
            lps = np.sort(-rng.exponential(1.5, size=cand.size))[::-1]
            row = tuple((int(c), float(lp)) for c, lp in zip(cand, lps))
            j = int(rng.integers(0, len(row)))
            tok, lp = row[j]
            if rng.random() < 0.1:
                tok, lp = int(vocab + rng.integers(0, 3)), float(-rng.exponential(3.0))
            tokens.append(tok)
            chosen.append(lp)
            topk.append(row)
        correct = bool(rng.random() < 0.3) if labeled else None
        recs.append(RolloutRecord(problem_id, i, tuple(tokens), tuple(chosen), tuple(topk), correct))
    return ProblemPool(problem_id, recs, length)


# -- oracles ------------------------------------------------------------------

def pass_at_k_enumerated(n, c, k):
    labels = [True] * c + [False] * (n - c)
    hit = total = 0
    for subset in itertools.combinations(range(n), k):
        total += 1
        hit += any(labels[i] for i in subset)
    return Fraction(hit, total)


def exact_quality(pool):
    raw = [sum((Fraction(x) for x in r.chosen_logprobs[: pool.prefix_len(i)]), Fraction(0))
           for i, r in enumerate(pool.rollouts)]
    lo, hi = min(raw), max(raw)
    if lo == hi:
        return [Fraction(1, 2)] * len(raw)
    return [(q - lo) / (hi - lo) for q in raw]


def exact_jaccard_sim(pool):
    sets = [set(pool.prefix_tokens(i)) for i in range(pool.size)]
    n = len(sets)
    sim = [[Fraction(1)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            union = len(sets[i] | sets[j])
            if i != j:
                sim[i][j] = Fraction(len(sets[i] & sets[j]), union) if union else Fraction(1)
    return sim


def _greedy(scores_fn, n, k):
    chosen, remaining = [], list(range(n))
    for step in range(min(k, n)):
        scored = [(scores_fn(i, chosen, step), i) for i in remaining]
        best = max(s for s, _ in scored)
        pick = min(i for s, i in scored if s == best)
        chosen.append(pick)
        remaining.remove(pick)
    return chosen


def mmr_replay(quality, sim, lam, k):
    lam = Fraction(lam)

    def score(i, chosen, _):
        div = max((sim[i][j] for j in chosen), default=Fraction(0))
        return lam * quality[i] - (1 - lam) * div

    return _greedy(score, len(quality), k)


def dispersion_replay(quality, dist, k, omega_init, omega_final):
    wi, wf = Fraction(omega_init), Fraction(omega_final)

    def score(i, chosen, step):
        if not chosen:
            return quality[i]
        w = wi if k == 1 else wi * (1 - Fraction(step, k - 1)) + wf * Fraction(step, k - 1)
        return w * quality[i] + (1 - w) * min(dist[i][j] for j in chosen)

    return _greedy(score, len(quality), k)


def _softmax_dict(entries):
    top = max(lp for _, lp in entries)
    w = {}
    for tok, lp in entries:
        w[tok] = w.get(tok, 0.0) + math.exp(lp - top)
    s = sum(w.values())
    return {tok: v / s for tok, v in w.items()}


def _jsd_dict(p, r):
    total = 0.0
    for a in (p, r):
        for tok, v in a.items():
            if v > 0:
                m = 0.5 * (p.get(tok, 0.0) + r.get(tok, 0.0))
                total += 0.5 * v * math.log(v / m)
    return min(max(total, 0.0), math.log(2))


def _margin(row):
    return 1e6 if len(row) < 2 else row[0][1] - row[1][1]


def reference_anchors(pool, n_anchors):
    lc = min(min(pool.prefix_length, len(r.tokens)) for r in pool.rollouts)
    scores = []
    for t in range(lc):
        distinct = len({r.tokens[t] for r in pool.rollouts})
        scores.append(Fraction(distinct - 1, pool.size - 1))
    order = sorted(range(lc), key=lambda t: (-scores[t], t))
    return order[:n_anchors]


def reference_distances(pool, n_anchors, alpha_mix):
    """Hybrid distance matrix via a straightforward per-pair loop, as Fractions of floats."""
    anchors = reference_anchors(pool, n_anchors)
    sets = [set(pool.prefix_tokens(i)) for i in range(pool.size)]
    n = pool.size
    dist = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ri, rj = pool.rollouts[i], pool.rollouts[j]
            num = den = 0.0
            for t in anchors:
                w = 1.0 / (1.0 + 0.5 * (_margin(ri.topk[t]) + _margin(rj.topk[t])))
                num += w * _jsd_dict(_softmax_dict(ri.topk[t]), _softmax_dict(rj.topk[t]))
                den += w
            deep = num / den / math.log(2) if den > 0 else 0.0
            union = len(sets[i] | sets[j])
            broad = 1.0 - len(sets[i] & sets[j]) / union if union else 0.0
            d = Fraction(alpha_mix * deep + (1 - alpha_mix) * broad)
            dist[i][j] = dist[j][i] = d
    return dist
