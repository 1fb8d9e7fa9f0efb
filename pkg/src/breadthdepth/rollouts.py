"""Logged rollouts: JSON-Lines ingestion, validation and prefix features."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError

# Margin assigned where only one top-k entry exists: no alternative, not a fork.
LARGE_MARGIN = 1e6

_FIELDS = ("problem_id", "rollout_id", "tokens", "chosen_logprobs", "topk", "correct")


@dataclass(frozen=True)
class RolloutRecord:
    problem_id: str
    rollout_id: int
    tokens: tuple
    chosen_logprobs: tuple
    topk: tuple
    correct: bool | None = None
    chosen_outside_topk: bool = field(default=False, compare=False)

    def __post_init__(self):
        rid = self.rollout_id
        n = len(self.tokens)
        if len(self.chosen_logprobs) != n or len(self.topk) != n:
            raise ValidationError(
                f"rollout_id={rid}: tokens ({n}), chosen_logprobs ({len(self.chosen_logprobs)}) "
                f"and topk ({len(self.topk)}) lengths differ"
            )
        for t, lp in enumerate(self.chosen_logprobs):
            if not math.isfinite(lp) or lp > 0:
                raise ValidationError(f"rollout_id={rid}: chosen_logprobs[{t}]={lp!r} must be finite and <= 0")
        outside = False
        for t, entries in enumerate(self.topk):
            if len(entries) == 0:
                raise ValidationError(f"rollout_id={rid}: topk[{t}] is empty")
            prev = 0.0
            for tok, lp in entries:
                if not math.isfinite(lp) or lp > 0:
                    raise ValidationError(f"rollout_id={rid}: topk[{t}] logprob {lp!r} must be finite and <= 0")
                if lp > prev:
                    raise ValidationError(f"rollout_id={rid}: topk[{t}] is not sorted by descending logprob")
                prev = lp
            if all(tok != self.tokens[t] for tok, _ in entries):
                outside = True
        object.__setattr__(self, "chosen_outside_topk", outside)

    def __len__(self):
        return len(self.tokens)

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in _FIELDS[:5] if k not in d]
        if missing:
            raise ValidationError(f"record missing fields {missing}")
        extra = set(d) - set(_FIELDS)
        if extra:
            raise ValidationError(f"record has unknown fields {sorted(extra)}")
        rid = d["rollout_id"]
        if not isinstance(rid, int) or isinstance(rid, bool) or rid < 0:
            raise ValidationError(f"rollout_id must be a non-negative integer, got {rid!r}")
        if not isinstance(d["problem_id"], str):
            raise ValidationError(f"rollout_id={rid}: problem_id must be a string")
        correct = d.get("correct")
        if correct is not None and not isinstance(correct, bool):
            raise ValidationError(f"rollout_id={rid}: correct must be a boolean")
        try:
            tokens = tuple(_as_int(x) for x in d["tokens"])
            logprobs = tuple(float(x) for x in d["chosen_logprobs"])
            topk = tuple(tuple((_as_int(tok), float(lp)) for tok, lp in pos) for pos in d["topk"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"rollout_id={rid}: malformed array field ({exc})") from None
        return cls(d["problem_id"], rid, tokens, logprobs, topk, correct)

    def to_dict(self):
        d = {
            "problem_id": self.problem_id,
            "rollout_id": self.rollout_id,
            "tokens": list(self.tokens),
            "chosen_logprobs": list(self.chosen_logprobs),
            "topk": [[[tok, lp] for tok, lp in pos] for pos in self.topk],
        }
        if self.correct is not None:
            d["correct"] = self.correct
        return d


def _as_int(x):
    if isinstance(x, bool) or not isinstance(x, int):
        raise TypeError(f"expected integer token id, got {x!r}")
    return x


@dataclass(frozen=True)
class ProblemPool:
    problem_id: str
    rollouts: tuple
    prefix_length: int

    def __post_init__(self):
        object.__setattr__(self, "rollouts", tuple(self.rollouts))
        if self.prefix_length < 1:
            raise ParameterError(f"prefix_length must be >= 1, got {self.prefix_length}")
        if len(self.rollouts) < 2:
            raise ValidationError(f"pool {self.problem_id!r} needs at least 2 rollouts, has {len(self.rollouts)}")
        ids = set()
        for r in self.rollouts:
            if r.problem_id != self.problem_id:
                raise ValidationError(f"rollout_id={r.rollout_id} belongs to {r.problem_id!r}, not {self.problem_id!r}")
            if r.rollout_id in ids:
                raise ValidationError(f"pool {self.problem_id!r}: duplicate rollout_id={r.rollout_id}")
            ids.add(r.rollout_id)

    @property
    def size(self):
        return len(self.rollouts)

    def prefix_len(self, i):
        return min(self.prefix_length, len(self.rollouts[i]))

    @property
    def common_length(self):
        return min(self.prefix_len(i) for i in range(self.size))

    def prefix_tokens(self, i):
        return self.rollouts[i].tokens[: self.prefix_len(i)]

    def with_prefix_length(self, prefix_length):
        return ProblemPool(self.problem_id, self.rollouts, prefix_length)

    @property
    def labeled(self):
        return all(r.correct is not None for r in self.rollouts)


def read_records(path):
    """Yield ``RolloutRecord`` objects from a JSON-Lines file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(d, dict):
                raise ValidationError(f"{path}:{lineno}: expected a JSON object")
            try:
                yield RolloutRecord.from_dict(d)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None


def group_pools(records, prefix_length):
    groups = {}
    for rec in records:
        groups.setdefault(rec.problem_id, []).append(rec)
    return {pid: ProblemPool(pid, recs, prefix_length) for pid, recs in groups.items()}


def load_pools(path, prefix_length):
    """Load a rollout file into ``{problem_id: ProblemPool}`` in file order."""
    return group_pools(read_records(path), prefix_length)


load_pool = load_pools


def dump_records(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def dump_pools(pools, path):
    dump_records((r for pool in pools.values() for r in pool.rollouts), path)


@dataclass(frozen=True)
class PrefixFeatures:
    quality_raw: np.ndarray
    quality_norm: np.ndarray
    margins: tuple
    token_sets: tuple


def quality_scores(pool):
    """Summed chosen-token logprob over each prefix and its min-max normalisation.

    A pool whose raw scores are all equal gets 0.5 everywhere.
    """
    raw = np.array(
        [math.fsum(r.chosen_logprobs[: pool.prefix_len(i)]) for i, r in enumerate(pool.rollouts)],
        dtype=np.float64,
    )
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        norm = np.full_like(raw, 0.5)
    else:
        norm = (raw - lo) / (hi - lo)
    return raw, norm


def position_margins(topk_row):
    if len(topk_row) < 2:
        return LARGE_MARGIN
    return max(0.0, topk_row[0][1] - topk_row[1][1])


def margins(pool):
    return tuple(
        np.array([position_margins(row) for row in r.topk[: pool.prefix_len(i)]], dtype=np.float64)
        for i, r in enumerate(pool.rollouts)
    )


def token_sets(pool):
    return tuple(frozenset(pool.prefix_tokens(i)) for i in range(pool.size))


def featurize(pool):
    raw, norm = quality_scores(pool)
    return PrefixFeatures(raw, norm, margins(pool), token_sets(pool))

