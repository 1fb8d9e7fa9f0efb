"""Hot loops with a jitted and a vectorised numpy implementation.

Every kernel takes its randomness as pre-drawn uniform arrays, so the two
implementations return identical booleans for the simulator. Distance
kernels agree to floating-point summation order.
"""
import numpy as np

from ._backend import BACKEND, HAVE_NUMBA, njit

LN2 = np.log(2.0)


# -- Monte Carlo allocation trials ------------------------------------------

def simulate_trials_numpy(cum_pi, theta, best, global_target, count_explore,
                          u_explore, u_explore_ok, u_refine, u_refine_app, u_base, u_base_ok):
    """Vectorised trial batch.

    Returns ``(mcts_success, rand_success, discovered_best)`` boolean arrays.
    ``u_refine_app`` is only consulted when nothing was explored and the
    target is not global: refinement then falls back to plain mixture draws.
    """
    trials = u_base.shape[0]
    m = theta.size
    n_e = u_explore.shape[1]

    explore_app = np.searchsorted(cum_pi, u_explore, side="right")
    hit = np.zeros((trials, m), dtype=np.bool_)
    if n_e:
        np.put_along_axis(hit, explore_app, True, axis=1)
    discovered_best = hit[:, best].copy()

    if global_target:
        target_theta = np.full(trials, theta[best])
        refine_ok = (u_refine < target_theta[:, None]).any(axis=1)
    elif n_e:
        target = np.argmax(np.where(hit, theta[None, :], -1.0), axis=1)
        target_theta = theta[target]
        refine_ok = (u_refine < target_theta[:, None]).any(axis=1)
    else:
        app = np.searchsorted(cum_pi, u_refine_app, side="right")
        refine_ok = (u_refine < theta[app]).any(axis=1)

    mcts = refine_ok
    if count_explore and n_e:
        mcts = mcts | (u_explore_ok < theta[explore_app]).any(axis=1)

    base_app = np.searchsorted(cum_pi, u_base, side="right")
    rand = (u_base_ok < theta[base_app]).any(axis=1)
    return mcts, rand, discovered_best


@njit
def _pick(cum_pi, u):
    a = 0
    while u >= cum_pi[a]:
        a += 1
    return a


@njit
def simulate_trials_numba(cum_pi, theta, best, global_target, count_explore,
                          u_explore, u_explore_ok, u_refine, u_refine_app, u_base, u_base_ok):
    trials = u_base.shape[0]
    m = theta.size
    n_e = u_explore.shape[1]
    n_f = u_refine.shape[1]
    n = u_base.shape[1]
    mcts = np.zeros(trials, dtype=np.bool_)
    rand = np.zeros(trials, dtype=np.bool_)
    disc = np.zeros(trials, dtype=np.bool_)
    hit = np.zeros(m, dtype=np.bool_)
    for t in range(trials):
        hit[:] = False
        ok = False
        for s in range(n_e):
            a = _pick(cum_pi, u_explore[t, s])
            hit[a] = True
            if count_explore and u_explore_ok[t, s] < theta[a]:
                ok = True
        disc[t] = hit[best]

        if global_target or n_e > 0:
            if global_target:
                th = theta[best]
            else:
                th = -1.0
                for a in range(m):
                    if hit[a] and theta[a] > th:
                        th = theta[a]
            for s in range(n_f):
                if u_refine[t, s] < th:
                    ok = True
                    break
        else:
            for s in range(n_f):
                if u_refine[t, s] < theta[_pick(cum_pi, u_refine_app[t, s])]:
                    ok = True
                    break
        mcts[t] = ok

        for s in range(n):
            if u_base_ok[t, s] < theta[_pick(cum_pi, u_base[t, s])]:
                rand[t] = True
                break
    return mcts, rand, disc


# -- weighted anchor JSD -----------------------------------------------------

def anchor_deep_numpy(probs, margins):
    """Weighted mean JSD over anchors for every pair, divided by ln 2.

    ``probs`` is ``(A, N, V)``: per anchor, each rollout's renormalised top-k
    distribution on the anchor's shared token support. ``margins`` is
    ``(A, N)``. Returns ``(deep, weight_sum)``, both ``(N, N)``.
    """
    n_anchor, n = probs.shape[0], probs.shape[1]
    num = np.zeros((n, n))
    den = np.zeros((n, n))
    for a in range(n_anchor):
        p = probs[a]
        mid = 0.5 * (p[:, None, :] + p[None, :, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(p[:, None, :] > 0, p[:, None, :] * np.log(p[:, None, :] / mid), 0.0)
            right = np.where(p[None, :, :] > 0, p[None, :, :] * np.log(p[None, :, :] / mid), 0.0)
        js = np.clip(0.5 * left.sum(axis=2) + 0.5 * right.sum(axis=2), 0.0, LN2)
        w = 1.0 / (1.0 + 0.5 * (margins[a][:, None] + margins[a][None, :]))
        num += w * js
        den += w
    deep = np.zeros((n, n))
    ok = den > 0
    deep[ok] = num[ok] / den[ok] / LN2
    np.fill_diagonal(deep, 0.0)
    return np.clip(deep, 0.0, 1.0), den


@njit
def anchor_deep_numba(probs, margins):
    n_anchor, n, v = probs.shape
    num = np.zeros((n, n))
    den = np.zeros((n, n))
    for a in range(n_anchor):
        for i in range(n):
            for j in range(i + 1, n):
                kl_i = 0.0
                kl_j = 0.0
                for k in range(v):
                    pi = probs[a, i, k]
                    pj = probs[a, j, k]
                    mid = 0.5 * (pi + pj)
                    if pi > 0:
                        kl_i += pi * np.log(pi / mid)
                    if pj > 0:
                        kl_j += pj * np.log(pj / mid)
                js = min(max(0.5 * kl_i + 0.5 * kl_j, 0.0), LN2)
                w = 1.0 / (1.0 + 0.5 * (margins[a, i] + margins[a, j]))
                num[i, j] += w * js
                den[i, j] += w
    deep = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            den[j, i] = den[i, j]
            if den[i, j] > 0:
                d = num[i, j] / den[i, j] / LN2
                d = min(max(d, 0.0), 1.0)
                deep[i, j] = d
                deep[j, i] = d
    return deep, den


_IMPLS = {
    "numpy": {"simulate_trials": simulate_trials_numpy, "anchor_deep": anchor_deep_numpy},
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {"simulate_trials": simulate_trials_numba, "anchor_deep": anchor_deep_numba}


def get_kernel(name, backend=None):
    return _IMPLS[backend or BACKEND][name]


def available_backends():
    return tuple(_IMPLS)
