"""Command-line entry point.

Every output carries its resolved configuration (a ``# breadthdepth`` header
line on CSV files, a ``run`` key in JSON) so ``breadthdepth rerun FILE``
can regenerate it. Exit codes: 0 ok, 1 validation, 2 I/O, 3 parameter.
"""
import argparse
import contextlib
import csv
import json
import os
import sys

from . import allocation, metrics, mixture, selection
from ._backend import BACKEND
from .errors import ParameterError, ValidationError
from .rollouts import load_pools

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_PARAMETER = 0, 1, 2, 3
HEADER_PREFIX = "# breadthdepth "
SEED_ENV = "BREADTHDEPTH_SEED"

_METHOD_NAMES = {"random": "Random", "mmr": "MMR", "adaptive-dispersion": "AdaptiveDispersion"}


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _schedules(text):
    try:
        return [tuple(float(v) for v in item.split(":")) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected init:final pairs, got {text!r}") from None


def _default_seed():
    return int(os.environ.get(SEED_ENV, "0"))


def _run_record(args):
    d = {k: v for k, v in vars(args).items() if k not in ("func", "out", "lift_out")}
    return {"command": args.command, "args": d}


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_csv(path, args, header, rows):
    with _open_out(path) as fh:
        fh.write(HEADER_PREFIX + json.dumps(_run_record(args), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, args, payload):
    doc = {"run": _run_record(args), **payload}
    with _open_out(path) as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return repr(float(x)) if isinstance(x, float) else str(x)


# -- commands -----------------------------------------------------------------

def cmd_select(args):
    pools = load_pools(args.input, args.prefix_length)
    cfg_kwargs = dict(method=_METHOD_NAMES[args.method], k=args.k, seed=args.seed, lam=args.lam,
                      n_anchors=args.n_anchors, alpha_mix=args.alpha_mix,
                      omega_init=args.omega_init, omega_final=args.omega_final)
    config = selection.SelectionConfig(**cfg_kwargs)
    results, hits = [], []
    for pool in pools.values():
        order = selection.select(pool, config)
        chosen = [pool.rollouts[i] for i in order]
        passed = metrics.pass_empirical(chosen) if pool.labeled else None
        if passed is not None:
            hits.append(passed)
        results.append({
            "problem_id": pool.problem_id,
            "method": config.method,
            "config": {"k": config.k, **config.params()},
            "selected": sorted(r.rollout_id for r in chosen),
            "order": [r.rollout_id for r in chosen],
            "pass": passed,
        })
    _write_json(args.out, args, {"results": results})
    if hits and len(hits) == len(results):
        print(f"{config.method} mean pass@{config.k} = {sum(hits) / len(hits):.4f} over {len(hits)} problems",
              file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def _parse_tagged(items):
    out = []
    for item in items:
        tag, sep, path = item.partition("=")
        if not sep:
            tag, path = "iid", item
        out.append((tag, path))
    return out


def _lift_rows(table, baseline):
    """``table`` maps model -> {method: pass}; yields one row per non-baseline method."""
    rows = []
    for model, by_method in table.items():
        if baseline not in by_method:
            raise ValidationError(f"model {model!r} has no {baseline!r} pass value")
        base = by_method[baseline]
        for method, value in by_method.items():
            if method == baseline:
                continue
            lf = metrics.lift(value, base)
            rows.append((model, method, value, base, lf, metrics.format_lift(lf)))
    return rows


def _read_pass_table(path):
    table = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = {"model", "method", "pass"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: pass table lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                value = float(row["pass"])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: pass {row['pass']!r} is not a number") from None
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{path}:{lineno}: pass {value} outside [0, 1]")
            table.setdefault(row["model"], {})[row["method"]] = value
    return table


def cmd_evaluate(args):
    if bool(args.input) == bool(args.pass_table):
        raise ParameterError("give either --input TAG=PATH (repeatable) or --pass-table, not both")
    lift_header = ("model", "method", "pass", "baseline_pass", "lift", "lift_pct")
    if args.pass_table:
        table = _read_pass_table(args.pass_table)
        baseline = args.baseline or "Baseline"
        rows = _lift_rows(table, baseline)
        _write_csv(args.lift_out or args.out, args, lift_header, [[_fmt(v) for v in r] for r in rows])
    else:
        budgets = sorted(set(args.budgets))
        n_max = budgets[-1]
        curve_rows, summary = [], {}
        for tag, path in _parse_tagged(args.input):
            pools = load_pools(path, 1)
            for pool in pools.values():
                if not pool.labeled:
                    raise ValidationError(f"{path}: pool {pool.problem_id!r} has unlabeled rollouts")
                for k in budgets:
                    curve_rows.append([pool.problem_id, k, _fmt(metrics.problem_pass(pool, k, args.estimator)), tag])
            summary[tag] = metrics.pass_curve(pools.values(), [n_max], args.estimator).at(n_max)
        _write_csv(args.out, args, ("problem_id", "K", "pass", "method"), curve_rows)
        baseline = args.baseline or next(iter(summary))
        rows = _lift_rows({args.model_tag: summary}, baseline)
        if args.lift_out:
            _write_csv(args.lift_out, args, lift_header, [[_fmt(v) for v in r] for r in rows])
    stream = sys.stderr if (args.lift_out or args.out) in (None, "-") else sys.stdout
    for model, method, _, _, _, pct in rows:
        print(f"{model}\t{method}\tlift {pct}", file=stream)
    return EXIT_OK


def _report_payload(model, ideal, n, eta, alpha):
    rep = allocation.mixture_report(model, n, eta, alpha)
    payload = {"report": rep.to_dict()}
    if ideal is not None:
        u = mixture.decompose(ideal, model)
        payload["uncertainty"] = {"aleatoric": u.aleatoric, "epistemic_breadth": u.epistemic_breadth,
                                  "epistemic_depth": u.epistemic_depth}
    return payload


def cmd_allocate(args):
    model, ideal = mixture.load_mixture_spec(args.mixture)
    _write_json(args.out, args, _report_payload(model, ideal, args.n, args.eta, args.alpha))
    return EXIT_OK


SIMULATE_HEADER = ("theta_bar", "theta_star", "pi_star", "alpha", "n", "pass_rand", "pass_mcts_analytic",
                   "pass_mcts_empirical", "discovery_rate", "feasible", "pass_rand_empirical", "trials")


def cmd_simulate(args):
    model, _ = mixture.load_mixture_spec(args.mixture)
    rows = []
    for alpha in args.alphas:
        rep = allocation.mixture_report(model, args.n, args.eta, alpha)
        sim = allocation.simulate_strategy(model, args.n, alpha, args.trials, args.seed,
                                           count_exploration_successes=args.count_exploration,
                                           target=args.target, workers=args.workers)
        rows.append([_fmt(v) for v in (rep.theta_bar, rep.theta_star, rep.pi_star, alpha, args.n, rep.pass_rand,
                                       rep.pass_mcts, sim.pass_mcts, sim.discovery_rate, rep.feasible,
                                       sim.pass_rand, args.trials)])
    _write_csv(args.out, args, SIMULATE_HEADER, rows)
    return EXIT_OK


def cmd_profile(args):
    pools = load_pools(args.input, 1)
    for pool in pools.values():
        if not pool.labeled:
            raise ValidationError(f"pool {pool.problem_id!r} has unlabeled rollouts")
    prof = metrics.diversity_profile(pools.values(), args.budgets, args.n_max, args.estimator)
    _write_csv(args.out, args, ("K", "avg_gain", "model_tag"),
               [[k, _fmt(g), args.model_tag] for k, g in zip(prof.budgets, prof.gains)])
    return EXIT_OK


SWEEP_HEADER = ("method", "lambda", "n_anchors", "alpha_mix", "omega_init", "omega_final", "k",
                "mean_pass", "n_problems", "best")


def cmd_sweep(args):
    pools = load_pools(args.input, args.prefix_length)
    for pool in pools.values():
        if not pool.labeled:
            raise ValidationError(f"pool {pool.problem_id!r} has unlabeled rollouts")
    grid = selection.default_grid(args.k, args.lambdas, args.anchors, args.alphas, args.schedules,
                                  include_random=not args.no_random)
    rows = selection.sweep(pools.values(), grid, random_seeds=args.random_seeds)
    if args.best_only:
        rows = [r for r in rows if r.best]
    out = []
    for r in rows:
        c = r.config
        mmr = c.method == "MMR"
        ad = c.method == "AdaptiveDispersion"
        out.append([c.method, _fmt(c.lam if mmr else None), _fmt(c.n_anchors if ad else None),
                    _fmt(c.alpha_mix if ad else None), _fmt(c.omega_init if ad else None),
                    _fmt(c.omega_final if ad else None), c.k, _fmt(r.mean_pass), r.n_problems, _fmt(r.best)])
    _write_csv(args.out, args, SWEEP_HEADER, out)
    return EXIT_OK


def _read_run_record(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith(HEADER_PREFIX):
            return json.loads(first[len(HEADER_PREFIX):])
        fh.seek(0)
        try:
            return json.load(fh)["run"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ValidationError(f"{path}: no embedded run configuration") from None


def cmd_rerun(args):
    record = _read_run_record(args.source)
    ns = argparse.Namespace(**record["args"])
    ns.out = args.out
    ns.lift_out = None
    ns.func = COMMANDS[record["command"]]
    if isinstance(getattr(ns, "schedules", None), list):
        ns.schedules = [tuple(s) for s in ns.schedules]
    return ns.func(ns)


COMMANDS = {
    "select": cmd_select, "evaluate": cmd_evaluate, "allocate": cmd_allocate,
    "simulate": cmd_simulate, "profile": cmd_profile, "sweep": cmd_sweep, "rerun": cmd_rerun,
}


def build_parser():
    p = argparse.ArgumentParser(prog="breadthdepth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", help="choose K rollouts per problem from prefix features")
    s.add_argument("--input", required=True)
    s.add_argument("--prefix-length", type=int, default=256)
    s.add_argument("--method", choices=sorted(_METHOD_NAMES), default="mmr")
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--seed", type=int, default=_default_seed())
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--n-anchors", type=int, default=8)
    s.add_argument("--alpha-mix", type=float, default=0.5)
    s.add_argument("--omega-init", type=float, default=0.7)
    s.add_argument("--omega-final", type=float, default=0.1)
    s.add_argument("--out")

    s = sub.add_parser("evaluate", help="pass@K curves and lift against a baseline")
    s.add_argument("--input", action="append", default=[], metavar="TAG=PATH")
    s.add_argument("--pass-table", help="CSV with model,method,pass columns")
    s.add_argument("--budgets", type=_int_list, default=[1, 2, 4, 6, 8, 16])
    s.add_argument("--baseline")
    s.add_argument("--model-tag", default="model")
    s.add_argument("--estimator", choices=metrics.ESTIMATORS, default="unbiased")
    s.add_argument("--out")
    s.add_argument("--lift-out")

    s = sub.add_parser("allocate", help="closed-form allocation report for a mixture")
    s.add_argument("--mixture", required=True)
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--alpha", type=float)
    s.add_argument("--out")

    s = sub.add_parser("simulate", help="Monte Carlo check of the allocation closed forms")
    s.add_argument("--mixture", required=True)
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--alphas", type=_float_list, default=[0.0, 0.25, 0.5, 0.75])
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=_default_seed())
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--target", choices=("discovered", "global"), default="discovered")
    s.add_argument("--count-exploration", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")

    s = sub.add_parser("profile", help="average gain per extra rollout up to n_max")
    s.add_argument("--input", required=True)
    s.add_argument("--n-max", type=int, default=16)
    s.add_argument("--budgets", type=_int_list, default=list(metrics.DEFAULT_PROFILE_BUDGETS))
    s.add_argument("--model-tag", default="model")
    s.add_argument("--estimator", choices=metrics.ESTIMATORS, default="unbiased")
    s.add_argument("--out")

    s = sub.add_parser("sweep", help="hyperparameter grid over the selectors")
    s.add_argument("--input", required=True)
    s.add_argument("--prefix-length", type=int, default=256)
    s.add_argument("--k", type=_int_list, default=[6])
    s.add_argument("--lambdas", type=_float_list, default=list(selection.DEFAULT_LAMBDAS))
    s.add_argument("--anchors", type=_int_list, default=list(selection.DEFAULT_ANCHORS))
    s.add_argument("--alphas", type=_float_list, default=list(selection.DEFAULT_ALPHAS))
    s.add_argument("--schedules", type=_schedules, default=list(selection.DEFAULT_SCHEDULES))
    s.add_argument("--random-seeds", type=int, default=100)
    s.add_argument("--no-random", action="store_true")
    s.add_argument("--best-only", action="store_true")
    s.add_argument("--out")

    s = sub.add_parser("rerun", help="regenerate an output file from its embedded configuration")
    s.add_argument("source")
    s.add_argument("--out")

    for name, parser in sub.choices.items():
        parser.set_defaults(func=COMMANDS[name])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {exc.strerror or exc}" + (f": {name}" if name else ""), file=sys.stderr)
        return EXIT_IO
