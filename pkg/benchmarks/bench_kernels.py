"""Time the numba and numpy kernels on identical inputs and check they agree.

    python3 benchmarks/bench_kernels.py --trials 200000 --pool-size 64
"""
import argparse
import time

import numpy as np

from breadthdepth import kernels
from breadthdepth.rollouts import ProblemPool, RolloutRecord
from breadthdepth.selection import anchor_tensors, select_anchors


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def simulator_inputs(trials, n, alpha, m, seed):
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(m))
    theta = rng.uniform(0.0, 0.6, m)
    cum_pi = np.minimum(np.cumsum(pi), 1.0)
    cum_pi[-1] = 1.0
    n_e = int(round(alpha * n))
    draws = (rng.random((trials, n_e)), np.zeros((trials, 0)), rng.random((trials, n - n_e)),
             np.zeros((trials, 0)), rng.random((trials, n)), rng.random((trials, n)))
    return (cum_pi, theta, int(np.argmax(theta)), False, False) + draws


def pool_inputs(size, length, vocab, top_k, seed):
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(size):
        tokens, lps, rows = [], [], []
        for _ in range(length):
            cand = rng.choice(vocab, size=top_k, replace=False)
            lp = np.sort(-rng.exponential(1.0, top_k))[::-1]
            rows.append(tuple((int(c), float(x)) for c, x in zip(cand, lp)))
            tokens.append(int(cand[0]))
            lps.append(float(lp[0]))
        recs.append(RolloutRecord("bench", i, tuple(tokens), tuple(lps), tuple(rows)))
    pool = ProblemPool("bench", recs, length)
    return anchor_tensors(pool, select_anchors(pool, 10))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200_000)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--approaches", type=int, default=8)
    ap.add_argument("--pool-size", type=int, default=64)
    ap.add_argument("--prefix-length", type=int, default=64)
    ap.add_argument("--top-k", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if "numba" not in kernels.available_backends():
        raise SystemExit("numba is not installed; nothing to compare")

    sim_args = simulator_inputs(args.trials, args.n, args.alpha, args.approaches, args.seed)
    probs, margins = pool_inputs(args.pool_size, args.prefix_length, 4 * args.top_k, args.top_k, args.seed)

    # one call each to compile
    kernels.simulate_trials_numba(*(a[:1] if isinstance(a, np.ndarray) and a.ndim == 2 else a for a in sim_args))
    kernels.anchor_deep_numba(probs[:, :2], margins[:, :2])

    print(f"{'kernel':<18}{'numpy s':>10}{'numba s':>10}{'speedup':>9}  agree")
    t_np, out_np = best_of(kernels.simulate_trials_numpy, sim_args, args.repeat)
    t_nb, out_nb = best_of(kernels.simulate_trials_numba, sim_args, args.repeat)
    same = all(np.array_equal(a, b) for a, b in zip(out_np, out_nb))
    print(f"{'simulate_trials':<18}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x  {'bitwise' if same else 'NO'}")

    t_np, (d_np, _) = best_of(kernels.anchor_deep_numpy, (probs, margins), args.repeat)
    t_nb, (d_nb, _) = best_of(kernels.anchor_deep_numba, (probs, margins), args.repeat)
    err = float(np.max(np.abs(d_np - d_nb)))
    print(f"{'anchor_deep':<18}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x  max|diff| {err:.1e}")


if __name__ == "__main__":
    main()
