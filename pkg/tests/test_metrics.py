import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clozeprobe.core import PromptType, Strategy
from clozeprobe.errors import CoverageMismatch, EmptyGroup, TooManySets
from clozeprobe.metrics import (
    EvaluationRecord,
    combinability_bounds,
    consistency_partition,
    known_subset,
    mean_entropy,
    p_at_1,
    read_records,
    write_records,
)


def record(
    key,
    prompt_type=PromptType.SIMPLE,
    strategy=Strategy.NOT_APPLICABLE,
    correct=False,
    gold_prob=0.1,
    top_prob=0.5,
    entropy=2.0,
    gold_rank=None,
):
    if correct:
        gold_prob = top_prob
    return EvaluationRecord(
        triple_key=key,
        prompt_type=prompt_type,
        strategy=strategy,
        predicted_token="x",
        correct=correct,
        gold_prob=gold_prob,
        top_prob=top_prob,
        entropy_bits=entropy,
        gold_rank=gold_rank,
    )


def test_record_invariants():
    with pytest.raises(ValueError):  # top_prob below gold_prob
        EvaluationRecord("k", PromptType.SIMPLE, Strategy.NOT_APPLICABLE, "x", False, 0.9, 0.5, 1.0)
    with pytest.raises(ValueError):  # correct requires gold_prob == top_prob
        EvaluationRecord("k", PromptType.SIMPLE, Strategy.NOT_APPLICABLE, "x", True, 0.3, 0.5, 1.0)
    EvaluationRecord("k", PromptType.SIMPLE, Strategy.NOT_APPLICABLE, "x", True, 0.5, 0.5, 1.0)


def test_record_jsonl_round_trip(tmp_path):
    records = [
        record("a", correct=True, gold_rank=1),
        record("b", prompt_type=PromptType.COMPOUND, strategy=Strategy.QUALITY),
    ]
    path = tmp_path / "records.jsonl"
    write_records(records, path, header={"config_hash": "abc"})
    header, loaded = read_records(path)
    assert header["config_hash"] == "abc"
    assert loaded == records


def test_p_at_1_basic():
    records = [record("a", correct=True), record("b"), record("c", correct=True), record("d")]
    assert p_at_1(records) == {"all": 0.5}
    assert p_at_1([record("a", correct=True)])["all"] == 1.0
    with pytest.raises(EmptyGroup):
        p_at_1([])


def test_p_at_1_grouping_and_permutation_invariance():
    records = [
        record("a", prompt_type=PromptType.SIMPLE, correct=True),
        record("b", prompt_type=PromptType.SIMPLE),
        record("c", prompt_type=PromptType.COMPOUND, strategy=Strategy.QUALITY, correct=True),
    ]
    grouped = p_at_1(records, group_by=lambda r: r.prompt_type)
    assert grouped[PromptType.SIMPLE] == 0.5
    assert grouped[PromptType.COMPOUND] == 1.0
    shuffled = records[::-1]
    assert p_at_1(shuffled, group_by=lambda r: r.prompt_type) == grouped
    assert all(0.0 <= v <= 1.0 for v in grouped.values())


def test_known_subset_boundaries():
    records = [
        record("rank1", gold_rank=1),
        record("rank10", gold_rank=10),
        record("rank11", gold_rank=11),
        record("norank", gold_rank=None),
    ]
    assert known_subset(records, k=10) == {"rank1", "rank10"}


def test_bounds_divergence_example():
    # compound correct (gold .6 = top .6); complex wrong (gold .2, top .7):
    # lower picks complex (more confident, wrong), upper picks compound (correct)
    compound = [record("t", PromptType.COMPOUND, Strategy.QUALITY, correct=True, top_prob=0.6)]
    complex_ = [record("t", PromptType.COMPLEX, Strategy.QUALITY, gold_prob=0.2, top_prob=0.7)]
    bounds = combinability_bounds(compound, complex_)
    cell = bounds["t"]
    assert cell.lower_from is PromptType.COMPLEX and not cell.lower_correct
    assert cell.upper_from is PromptType.COMPOUND and cell.upper_correct


def test_bounds_agreement_cases():
    both_correct = combinability_bounds(
        [record("t", PromptType.COMPOUND, correct=True, top_prob=0.5)],
        [record("t", PromptType.COMPLEX, correct=True, top_prob=0.6)],
    )["t"]
    assert both_correct.lower_correct and both_correct.upper_correct

    both_wrong = combinability_bounds(
        [record("t", PromptType.COMPOUND, gold_prob=0.1, top_prob=0.5)],
        [record("t", PromptType.COMPLEX, gold_prob=0.2, top_prob=0.6)],
    )["t"]
    assert not both_wrong.lower_correct and not both_wrong.upper_correct


def test_bounds_tie_prefers_domain_record():
    bounds = combinability_bounds(
        [record("t", PromptType.COMPOUND, gold_prob=0.2, top_prob=0.5)],
        [record("t", PromptType.COMPLEX, gold_prob=0.2, top_prob=0.5)],
    )["t"]
    assert bounds.lower_from is PromptType.COMPOUND
    assert bounds.upper_from is PromptType.COMPOUND


def test_bounds_coverage_mismatch():
    with pytest.raises(CoverageMismatch):
        combinability_bounds(
            [record("a", PromptType.COMPOUND)], [record("b", PromptType.COMPLEX)]
        )


def test_partition_hand_example():
    partition = consistency_partition({"A": {"1", "2"}, "B": {"2", "3"}})
    cells = {frozenset(partition.members_of(c)): set(c.triples) for c in partition.cells}
    assert cells == {
        frozenset({"A"}): {"1"},
        frozenset({"A", "B"}): {"2"},
        frozenset({"B"}): {"3"},
    }
    assert partition.totals == {"A": 2, "B": 2}


def test_partition_identical_sets_single_cell():
    partition = consistency_partition({"A": {"1", "2"}, "B": {"1", "2"}})
    assert len(partition.cells) == 1
    assert partition.members_of(partition.cells[0]) == ("A", "B")


def test_partition_set_count_bounds():
    with pytest.raises(TooManySets):
        consistency_partition({"A": {"1"}})
    with pytest.raises(TooManySets):
        consistency_partition({str(i): {"1"} for i in range(9)})


def brute_force_partition(sets):
    """Independent oracle: enumerate every nonempty membership pattern."""
    names = list(sets)
    cells = {}
    for pattern in itertools.product([False, True], repeat=len(names)):
        if not any(pattern):
            continue
        members = set.intersection(*(set(sets[n]) for n, inc in zip(names, pattern) if inc))
        for name, included in zip(names, pattern):
            if not included:
                members -= set(sets[name])
        if members:
            cells[frozenset(n for n, inc in zip(names, pattern) if inc)] = members
    return cells


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.frozensets(st.integers(min_value=0, max_value=200).map(str), max_size=80),
        min_size=2,
        max_size=4,
    )
)
def test_partition_matches_brute_force(data):
    sets = {f"s{i}": set(members) for i, members in enumerate(data)}
    partition = consistency_partition(sets)
    # disjoint
    seen = set()
    for cell in partition.cells:
        assert not (cell.triples & seen)
        seen |= cell.triples
    # reconstructs inputs
    for i, name in enumerate(partition.set_names):
        rebuilt = set().union(
            *(c.triples for c in partition.cells if c.membership & (1 << i))
        ) if partition.cells else set()
        assert rebuilt == sets[name]
    # matches oracle
    expected = brute_force_partition(sets)
    actual = {frozenset(partition.members_of(c)): set(c.triples) for c in partition.cells}
    assert actual == expected


def test_partition_cell_ordering():
    partition = consistency_partition({"A": {"1", "2", "3"}, "B": {"3", "4"}})
    sizes = [c.size for c in partition.cells]
    assert sizes == sorted(sizes, reverse=True)


def test_mean_entropy():
    records = [
        record("a", entropy=1.0),
        record("b", entropy=3.0),
        record("c", entropy=99.0),  # outside known subset
    ]
    means = mean_entropy(records, known={"a", "b"}, group_by=lambda r: "g")
    assert means == {"g": 2.0}
    single = mean_entropy([record("a", entropy=3.0)], known={"a"}, group_by=lambda r: "g")
    assert single == {"g": 3.0}
    with pytest.raises(EmptyGroup):
        mean_entropy(records, known=set(), group_by=lambda r: "g")


@settings(max_examples=60, deadline=None)
@given(
    outcomes=st.lists(
        st.tuples(
            st.booleans(), st.floats(0.01, 1.0), st.booleans(), st.floats(0.01, 1.0)
        ),
        min_size=1,
        max_size=50,
    )
)
def test_bounds_containment_properties(outcomes):
    domain_records, range_records = [], []
    for i, (dom_ok, dom_top, rng_ok, rng_top) in enumerate(outcomes):
        key = f"t{i}"
        domain_records.append(
            record(key, PromptType.COMPOUND, Strategy.QUALITY, correct=dom_ok,
                   gold_prob=min(0.009, dom_top), top_prob=dom_top)
        )
        range_records.append(
            record(key, PromptType.COMPLEX, Strategy.QUALITY, correct=rng_ok,
                   gold_prob=min(0.009, rng_top), top_prob=rng_top)
        )
    bounds = combinability_bounds(domain_records, range_records)
    dom_correct = {r.triple_key for r in domain_records if r.correct}
    rng_correct = {r.triple_key for r in range_records if r.correct}
    upper_correct = {k for k, c in bounds.items() if c.upper_correct}
    lower_correct = {k for k, c in bounds.items() if c.lower_correct}
    assert upper_correct <= (dom_correct | rng_correct)
    assert (dom_correct & rng_correct) <= (lower_correct & upper_correct)
