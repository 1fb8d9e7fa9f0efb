import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breadthdepth.errors import ValidationError
from breadthdepth.rollouts import (
    LARGE_MARGIN,
    dump_pools,
    featurize,
    load_pools,
    margins,
    position_margins,
    quality_scores,
)
from helpers import make_pool, make_record, random_pool


def _line(problem_id="a", rollout_id=0, tokens=(1, 2), logprobs=(-0.1, -0.2), correct=None):
    d = {"problem_id": problem_id, "rollout_id": rollout_id, "tokens": list(tokens),
         "chosen_logprobs": list(logprobs),
         "topk": [[[t, lp], [t + 1, lp - 1.0]] for t, lp in zip(tokens, logprobs)]}
    if correct is not None:
        d["correct"] = correct
    return json.dumps(d)


def test_load_groups_by_problem(tmp_path):
    path = tmp_path / "r.jsonl"
    lines = [_line(pid, i, correct=i % 2 == 0) for pid in ("a", "b") for i in range(16)]
    path.write_text("\n".join(lines) + "\n")
    pools = load_pools(path, 8)
    assert list(pools) == ["a", "b"]
    assert [p.size for p in pools.values()] == [16, 16]


def test_empty_file_is_empty_collection(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_pools(path, 4) == {}


def test_length_mismatch_names_rollout(tmp_path):
    path = tmp_path / "bad.jsonl"
    d = json.loads(_line(rollout_id=7, tokens=(1, 2, 3, 4, 5), logprobs=(-0.1,) * 5))
    d["chosen_logprobs"] = d["chosen_logprobs"][:4]
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(ValidationError, match="rollout_id=7"):
        load_pools(path, 4)


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(_line() + "\n{not json\n")
    with pytest.raises(ValidationError, match=":2:"):
        load_pools(path, 4)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["chosen_logprobs"].__setitem__(0, 0.5), "chosen_logprobs"),
    (lambda d: d["topk"].__setitem__(0, [[1, -2.0], [2, -0.5]]), "not sorted"),
    (lambda d: d["topk"].__setitem__(0, []), "empty"),
    (lambda d: d.__setitem__("correct", "yes"), "boolean"),
    (lambda d: d.__setitem__("extra", 1), "unknown"),
])
def test_invariant_violations(tmp_path, mutate, message):
    d = json.loads(_line())
    mutate(d)
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(d) + "\n" + _line(rollout_id=1) + "\n")
    with pytest.raises(ValidationError, match=message):
        load_pools(path, 4)


def test_duplicate_rollout_id_rejected(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text(_line(rollout_id=3) + "\n" + _line(rollout_id=3) + "\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_pools(path, 4)


def test_chosen_outside_topk_is_flagged_not_rejected():
    rec = make_record(0, [5], [-0.3], topk=[((1, -0.1), (2, -0.2))])
    assert rec.chosen_outside_topk
    assert not make_record(1, [5], [-0.3]).chosen_outside_topk


def test_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(3)
    pools = {f"p{i}": random_pool(rng, problem_id=f"p{i}") for i in range(4)}
    first = tmp_path / "a.jsonl"
    dump_pools(pools, first)
    reloaded = load_pools(first, 8)
    second = tmp_path / "b.jsonl"
    dump_pools(reloaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert [p.rollouts for p in reloaded.values()] == [p.rollouts for p in pools.values()]


def test_quality_sum_and_minmax():
    pool = make_pool([[1, 2], [3, 4]], logprobs=[[-0.1, -0.2], [-1.0, -1.0]])
    raw, _ = quality_scores(pool)
    assert raw[0] == pytest.approx(-0.3)
    pool = make_pool([[1], [2], [3]], logprobs=[[-3.0], [-1.0], [-2.0]])
    _, norm = quality_scores(pool)
    assert norm.tolist() == [0.0, 1.0, 0.5]


def test_quality_degenerate_range():
    pool = make_pool([[1], [2], [3]], logprobs=[[-2.0]] * 3)
    _, norm = quality_scores(pool)
    assert norm.tolist() == [0.5, 0.5, 0.5]


def test_quality_uses_effective_prefix():
    pool = make_pool([[1, 2, 3], [4]], prefix_length=2, logprobs=[[-1.0, -1.0, -5.0], [-0.5]])
    raw, _ = quality_scores(pool)
    assert raw.tolist() == [-2.0, -0.5]
    assert pool.common_length == 1


@pytest.mark.parametrize("row, expected", [
    (((1, -0.1), (2, -0.9)), 0.8),
    (((1, -0.1),), LARGE_MARGIN),
    (((1, -0.5), (2, -0.5)), 0.0),
])
def test_margins(row, expected):
    assert position_margins(row) == pytest.approx(expected)


def test_margins_per_position_nonnegative():
    pool = random_pool(np.random.default_rng(0))
    for m in margins(pool):
        assert np.all(m >= 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.floats(-5.0, 0.0))
def test_quality_norm_shift_invariant(seed, shift):
    pool = random_pool(np.random.default_rng(seed))
    base = featurize(pool).quality_norm
    shifted_recs = []
    for r in pool.rollouts:
        # adding a per-position constant at t=0 shifts every q by the same amount
        lps = list(r.chosen_logprobs)
        lps[0] += shift
        shifted_recs.append(type(r)(r.problem_id, r.rollout_id, r.tokens, tuple(lps), r.topk, r.correct))
    shifted = type(pool)(pool.problem_id, shifted_recs, pool.prefix_length)
    assert np.allclose(featurize(shifted).quality_norm, base, atol=1e-9)
    assert base.min() >= 0 and base.max() <= 1


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), cut=st.integers(1, 32))
def test_truncation_never_increases_quality(seed, cut):
    pool = random_pool(np.random.default_rng(seed))
    shorter = pool.with_prefix_length(min(cut, pool.prefix_length))
    assert np.all(quality_scores(shorter)[0] >= quality_scores(pool)[0] - 1e-12)


def test_load_pool_alias(tmp_path):
    from breadthdepth.rollouts import load_pool
    path = tmp_path / "r.jsonl"
    path.write_text(_line() + "\n" + _line(rollout_id=1) + "\n")
    assert load_pool(path, 2) == load_pools(path, 2)
