import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgcorpus.util import largest_remainder
from kgcorpus.weights import (
    TaskWeights,
    WeightError,
    assemble_loss,
    compute_weights,
    compute_weights_for,
    plan_interleave,
)


def oracle_alphas(n_ep, n_lp, n_tc):
    """Independent arithmetic: a_i = (sum of the other two) / (2 * sum of all)."""
    total = Fraction(n_ep + n_lp + n_tc)
    return (
        Fraction(n_lp + n_tc) / (2 * total),
        Fraction(n_ep + n_tc) / (2 * total),
        Fraction(n_ep + n_lp) / (2 * total),
    )


def test_weights_on_french_scale_counts():
    weights = compute_weights(n_ep=100_000, n_lp=64_208, n_tc=200_000)
    exp_ep, exp_lp, exp_tc = oracle_alphas(100_000, 64_208, 200_000)
    assert abs(weights.alpha_ep - float(exp_ep)) < 1e-12
    assert abs(weights.alpha_lp - float(exp_lp)) < 1e-12
    assert abs(weights.alpha_tc - float(exp_tc)) < 1e-12
    assert abs(weights.alpha_tc - 0.22543) < 1e-5
    assert abs(weights.alpha_ep - 0.36272) < 1e-5
    assert abs(weights.alpha_lp - 0.41185) < 1e-5
    assert abs(weights.alpha_ep + weights.alpha_lp + weights.alpha_tc - 1.0) < 1e-9


def test_weights_on_equal_scale_counts():
    weights = compute_weights(n_ep=100_000, n_lp=100_000, n_tc=200_000)
    assert abs(weights.alpha_tc - 0.25) < 1e-12
    assert abs(weights.alpha_ep - 0.375) < 1e-12
    assert abs(weights.alpha_lp - 0.375) < 1e-12


def test_weights_symmetric_counts_are_thirds():
    weights = compute_weights(7, 7, 7)
    assert abs(weights.alpha_ep - 1 / 3) < 1e-12
    assert abs(weights.alpha_lp - 1 / 3) < 1e-12
    assert abs(weights.alpha_tc - 1 / 3) < 1e-12


def test_weights_zero_count_rejected_with_guidance():
    with pytest.raises(WeightError, match="drop the task"):
        compute_weights(0, 1, 1)


def test_weights_two_task_ablation():
    weights = compute_weights_for({"ep": 100, "lp": 300})
    assert abs(weights.alpha_ep - 300 / 400) < 1e-12
    assert abs(weights.alpha_lp - 100 / 400) < 1e-12
    assert weights.alpha_tc == 0.0


def test_weights_single_task_ablation():
    weights = compute_weights_for({"tc": 5})
    assert weights.alpha_tc == 1.0
    assert weights.alpha_ep == weights.alpha_lp == 0.0


def test_weights_empty_mix_is_all_zero():
    weights = compute_weights_for({})
    assert (weights.alpha_ep, weights.alpha_lp, weights.alpha_tc) == (0.0, 0.0, 0.0)


@settings(max_examples=300)
@given(
    st.integers(min_value=1, max_value=10_000_000),
    st.integers(min_value=1, max_value=10_000_000),
    st.integers(min_value=1, max_value=10_000_000),
)
def test_weights_normalization_property(n_ep, n_lp, n_tc):
    weights = compute_weights(n_ep, n_lp, n_tc)
    assert abs(weights.alpha_ep + weights.alpha_lp + weights.alpha_tc - 1.0) < 1e-9
    assert weights.alpha_ep >= 0 and weights.alpha_lp >= 0 and weights.alpha_tc >= 0


@settings(max_examples=200)
@given(
    st.integers(min_value=1, max_value=1_000_000),
    st.integers(min_value=1, max_value=1_000_000),
    st.integers(min_value=1, max_value=1_000_000),
    st.integers(min_value=1, max_value=1_000_000),
)
def test_weights_monotonicity_property(n_ep, n_lp, n_tc, bump):
    before = compute_weights(n_ep, n_lp, n_tc)
    after = compute_weights(n_ep + bump, n_lp, n_tc)
    assert after.alpha_ep < before.alpha_ep
    assert after.alpha_lp >= before.alpha_lp
    assert after.alpha_tc >= before.alpha_tc


# -- loss assembly -------------------------------------------------------------


def thirds():
    return TaskWeights(1 / 3, 1 / 3, 1 / 3, 1, 1, 1)


def test_assemble_loss_all_ones_is_two():
    weights = compute_weights(123, 456, 789)
    assert abs(assemble_loss({"mlm": 1.0, "ep": 1.0, "lp": 1.0, "tc": 1.0}, weights) - 2.0) < 1e-9


def test_assemble_loss_mlm_only():
    assert assemble_loss({"mlm": 0.7}, thirds()) == 0.7
    assert assemble_loss({"mlm": 0.7, "ep": None, "lp": None, "tc": None}, thirds()) == 0.7


def test_assemble_loss_hand_arithmetic():
    value = assemble_loss({"mlm": 0.5, "ep": 0.2, "lp": 0.3, "tc": 0.4}, thirds())
    assert abs(value - 0.8) < 1e-9


def test_assemble_loss_rejects_negative_and_unknown():
    with pytest.raises(WeightError):
        assemble_loss({"mlm": -0.1}, thirds())
    with pytest.raises(WeightError):
        assemble_loss({"ner": 0.1}, thirds())


def test_assemble_loss_linear_in_each_task():
    weights = compute_weights(10, 20, 30)
    base = assemble_loss({"mlm": 0.0, "ep": 1.0}, weights)
    doubled = assemble_loss({"mlm": 0.0, "ep": 2.0}, weights)
    assert abs(doubled - 2 * base) < 1e-12


def test_assemble_loss_cross_component_goldens():
    """Frozen values any consumer's loss assembly must reproduce to 1e-6."""
    weights = compute_weights(n_ep=100_000, n_lp=64_208, n_tc=200_000)
    cases = [
        ({"mlm": 0.5, "ep": 0.2, "lp": 0.3, "tc": 0.4}, 0.7862715810745509),
        ({"mlm": 1.25, "ep": 0.0, "lp": 2.5, "tc": 0.75}, 2.4487051355269513),
        ({"mlm": 0.0, "ep": 1.0, "lp": 1.0, "tc": 1.0}, 1.0),
        ({"mlm": 3.14159, "ep": None, "lp": 0.5, "tc": None}, 3.347516283881738),
    ]
    for losses, expected in cases:
        assert abs(assemble_loss(losses, weights) - expected) < 1e-6


# -- interleaving ---------------------------------------------------------------


def test_interleave_small_case_single_batch():
    plan = plan_interleave({"mlm": 2, "ep": 1, "lp": 1, "tc": 1}, batch_size=5, seed=0)
    batches = plan.batches()
    assert len(batches) == 1
    assert sorted(batches[0]) == [("ep", 0), ("lp", 0), ("mlm", 0), ("mlm", 1), ("tc", 0)]


def test_interleave_is_deterministic_under_seed():
    a = plan_interleave({"mlm": 50, "tc": 30}, batch_size=8, seed=9)
    b = plan_interleave({"mlm": 50, "tc": 30}, batch_size=8, seed=9)
    c = plan_interleave({"mlm": 50, "tc": 30}, batch_size=8, seed=10)
    assert a.order == b.order
    assert a.order != c.order


def test_interleave_is_a_permutation():
    sizes = {"mlm": 123, "ep": 45, "lp": 6, "tc": 78}
    plan = plan_interleave(sizes, batch_size=7, seed=3)
    counts = Counter(task for task, _ in plan.order)
    assert counts == Counter(sizes)
    assert len(set(plan.order)) == len(plan.order) == sum(sizes.values())


def test_interleave_batch_mix_tracks_corpus_shares():
    """Expected per-batch task mix equals corpus proportions (large-scale check)."""
    sizes = {"tc": 200_000, "ep": 100_000, "lp": 64_208, "mlm": 25_740}
    total = sum(sizes.values())
    plan = plan_interleave(sizes, batch_size=32, seed=1)
    rng = random.Random(5)
    batches = plan.batches()
    sampled = [batches[rng.randrange(len(batches))] for _ in range(10_000)]
    counts = Counter(task for batch in sampled for task, _ in batch)
    drawn = sum(counts.values())
    for task, size in sizes.items():
        assert abs(counts[task] / drawn - size / total) < 0.02


def test_interleave_rejects_bad_batch_size():
    with pytest.raises(WeightError):
        plan_interleave({"mlm": 1}, batch_size=0, seed=0)


# -- apportionment helper ---------------------------------------------------------


@settings(max_examples=300)
@given(
    st.integers(min_value=0, max_value=5_000),
    st.dictionaries(
        st.text(alphabet="ABCDEFG", min_size=1, max_size=3),
        st.floats(min_value=0.01, max_value=100.0, allow_nan=False),
        min_size=1,
        max_size=8,
    ),
)
def test_largest_remainder_sums_and_stays_within_one_of_quota(total, weights):
    counts = largest_remainder(total, weights)
    assert sum(counts.values()) == total
    weight_sum = sum(weights.values())
    for key, count in counts.items():
        quota = total * weights[key] / weight_sum
        assert abs(count - quota) < 1.0 + 1e-9
