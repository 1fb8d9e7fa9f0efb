"""Entropy and divergences in nats, with 0 * log 0 := 0."""
import math

import numpy as np

from .errors import ParameterError

LN2 = math.log(2.0)
_NORM_TOL = 1e-9


def _as_prob(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ParameterError(f"{name} must be a 1-d probability vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ParameterError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > _NORM_TOL:
        raise ParameterError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def entropy(p):
    p = _as_prob(p, "p")
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def kl_divergence(p, q):
    """KL(p || q). Returns ``inf`` when q vanishes somewhere p does not."""
    p = _as_prob(p, "p")
    q = _as_prob(q, "q")
    if p.shape != q.shape:
        raise ParameterError("p and q must have the same length")
    nz = p > 0
    if np.any(q[nz] == 0):
        return math.inf
    return max(0.0, float(np.sum(p[nz] * np.log(p[nz] / q[nz]))))


def bernoulli_kl(a, b):
    """KL(Bern(a) || Bern(b))."""
    for name, v in (("a", a), ("b", b)):
        if not 0.0 <= v <= 1.0:
            raise ParameterError(f"{name}={v!r} is not a probability")
    total = 0.0
    for pa, pb in ((a, b), (1.0 - a, 1.0 - b)):
        if pa == 0.0:
            continue
        if pb == 0.0:
            return math.inf
        total += pa * math.log(pa / pb)
    return max(0.0, total)


def _jsd_unchecked(p, r):
    m = 0.5 * (p + r)
    total = 0.0
    for x in (p, r):
        nz = x > 0
        total += 0.5 * float(np.sum(x[nz] * np.log(x[nz] / m[nz])))
    return min(max(total, 0.0), LN2)


def jsd(p, r):
    """Jensen-Shannon divergence, bounded in [0, ln 2]."""
    p = _as_prob(p, "p")
    r = _as_prob(r, "r")
    if p.shape != r.shape:
        raise ParameterError("p and r must share a support")
    return _jsd_unchecked(p, r)
