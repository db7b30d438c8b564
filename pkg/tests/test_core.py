import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forrelation.core import (
    ForrelationInstance,
    GuardExceeded,
    Label,
    all_functions,
    classical_query_cost,
    classify,
    find_instances,
    forrelation,
    forrelation_bruteforce,
    instrumented_forrelation,
    load_instances,
    negate_function,
    showcase_instances,
)
from forrelation.oracle import BooleanFunction, parse_diagonal, walsh_spectrum

CONST = BooleanFunction(2, (1, 1, 1, 1))
SELF = BooleanFunction(2, (1, 1, 1, -1))


@st.composite
def instances(draw, max_k=4, max_n=3):
    k = draw(st.integers(2, max_k))
    n = draw(st.integers(1, max_n))
    fs = [
        BooleanFunction(n, tuple(draw(st.lists(st.sampled_from([1, -1]), min_size=2**n, max_size=2**n))))
        for _ in range(k)
    ]
    return ForrelationInstance(k, n, tuple(fs))


def test_constant_pair():
    inst = ForrelationInstance.of(CONST, CONST)
    assert forrelation(inst) == 0.5
    assert forrelation_bruteforce(inst) == 0.5


def test_self_transform_pair():
    inst = ForrelationInstance.of(SELF, SELF)
    assert forrelation(inst) == 1.0
    assert forrelation_bruteforce(inst) == 1.0


def test_three_fold_regression():
    # 64-term brute force, evaluated by hand-written enumeration below
    inst = ForrelationInstance.of(SELF, SELF, SELF)
    total = 0
    for x1, x2, x3 in itertools.product(range(4), repeat=3):
        phase = (-1) ** (bin(x1 & x2).count("1") + bin(x2 & x3).count("1"))
        total += phase * SELF(x1) * SELF(x2) * SELF(x3)
    assert total / 2**4 == 0.5
    assert forrelation(inst) == 0.5
    assert forrelation_bruteforce(inst) == 0.5


def test_showcase_targets():
    for k in (2, 3):
        values = [forrelation(inst) for inst in showcase_instances(k)]
        assert values == [1.0, 0.5, 0.0, -0.5, -1.0]


def test_guard():
    f = BooleanFunction(3, (1,) * 8)
    inst = ForrelationInstance(9, 3, (f,) * 9)
    with pytest.raises(GuardExceeded):
        forrelation(inst)
    assert forrelation(inst, guard=27) == pytest.approx(forrelation_bruteforce(ForrelationInstance(3, 3, (f,) * 3)))


def test_guard_env(monkeypatch):
    inst = ForrelationInstance.of(SELF, SELF)
    monkeypatch.setenv("FORRELATION_GUARD", "3")
    with pytest.raises(GuardExceeded):
        forrelation(inst)
    monkeypatch.setenv("FORRELATION_GUARD", "4")
    assert forrelation(inst) == 1.0


def test_instance_validation():
    with pytest.raises(ValueError):
        ForrelationInstance(2, 2, (CONST,))
    with pytest.raises(ValueError):
        ForrelationInstance(2, 2, (CONST, BooleanFunction(1, (1, 1))))
    with pytest.raises(ValueError):
        ForrelationInstance(2, 2, (CONST, CONST), target=1.5)
    with pytest.raises(ValueError):
        ForrelationInstance(1, 2, (CONST,))


@given(instances())
@settings(max_examples=200)
def test_fast_sum_equals_bruteforce(inst):
    assert forrelation(inst) == pytest.approx(forrelation_bruteforce(inst), abs=1e-12)


@given(instances(), st.data())
def test_negation_covariance(inst, data):
    i = data.draw(st.integers(0, inst.k - 1))
    assert forrelation(negate_function(inst, i)) == -forrelation(inst)


@given(instances())
def test_bounded(inst):
    assert abs(forrelation(inst)) <= 1 + 1e-12


@given(instances(max_k=2, max_n=4))
def test_two_fold_walsh_identity(inst):
    f, g = inst.functions
    expected = np.dot(f.table, walsh_spectrum(g)) / 2**inst.n
    assert forrelation(inst) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "phi, label",
    [(1.0, Label.LARGE), (0.0, Label.SMALL), (0.5, Label.NEITHER), (0.6, Label.LARGE), (0.01, Label.SMALL),
     (-0.01, Label.SMALL), (-1.0, Label.NEITHER), (0.0100001, Label.NEITHER)],
)
def test_classify(phi, label):
    c = classify(phi)
    assert c.label is label and c.value == phi


def test_classify_out_of_range():
    with pytest.raises(ValueError):
        classify(1.5)


@pytest.mark.parametrize("k, n, memo, cost", [(2, 2, True, 8), (3, 2, True, 12), (3, 2, False, 192), (2, 2, False, 32)])
def test_classical_query_cost(k, n, memo, cost):
    assert classical_query_cost(k, n, memo) == cost


@given(instances(max_k=3, max_n=2), st.booleans())
def test_instrumented_counts_match_formula(inst, memo):
    phi, oracles = instrumented_forrelation(inst, memoized=memo)
    assert phi == forrelation(inst)
    assert sum(o.classical_queries for o in oracles) == classical_query_cost(inst.k, inst.n, memo)
    assert all(o.quantum_queries == 0 for o in oracles)


def test_all_functions_order():
    fs = list(all_functions(2))
    assert len(fs) == 16
    assert fs[0].table == (1, 1, 1, 1)
    assert fs[1].table == (1, 1, 1, -1)
    assert fs[-1].table == (-1, -1, -1, -1)


def exhaustive(target, k=2, n=2):
    fs = list(all_functions(n))
    return [
        combo for combo in itertools.product(fs, repeat=k)
        if abs(forrelation_bruteforce(ForrelationInstance.of(*combo)) - target) <= 1e-12
    ]


def test_find_target_one():
    hits = find_instances(1.0, 2, 2, limit=100)
    assert hits[0].functions == (SELF, SELF)
    assert [h.functions for h in hits] == exhaustive(1.0)


def test_find_target_half_includes_constants():
    hits = find_instances(0.5, 2, 2, limit=1000)
    assert any(h.functions == (CONST, CONST) for h in hits)
    assert len(hits) == len(exhaustive(0.5))


def test_find_target_minus_one():
    hits = find_instances(-1.0, 2, 2, limit=100)
    assert hits and [h.functions for h in hits] == exhaustive(-1.0)
    assert all(classify(forrelation(h)).label is Label.NEITHER for h in hits)


def test_find_limit_and_determinism():
    a = find_instances(0.0, 3, 2, limit=7)
    b = find_instances(0.0, 3, 2, limit=7)
    assert len(a) == 7 and a == b
    texts = [h.canonical_text() for h in a]
    assert len(set(texts)) == 7


def test_find_unreachable_is_empty():
    assert find_instances(0.3, 2, 2) == []


def test_instance_json_roundtrip():
    inst = ForrelationInstance.of(SELF, CONST, target=0.5)
    again = load_instances(inst.to_json())[0]
    assert again == inst
    doc = {"k": 2, "n": 2, "oracles": ["D([1,1,1,-1])", "D([1 1 1 1])"]}
    assert load_instances(str(doc).replace("'", '"'))[0].functions == (SELF, CONST)


def test_load_instance_list_and_lines():
    a = ForrelationInstance.of(SELF, SELF, target=1.0)
    b = ForrelationInstance.of(CONST, CONST, target=0.5)
    assert load_instances(f"[{a.to_json()}, {b.to_json()}]") == [a, b]
    assert load_instances(a.to_json() + "\n" + b.to_json() + "\n") == [a, b]


def test_load_instance_missing_key():
    with pytest.raises(ValueError, match="oracles"):
        load_instances('{"k": 2, "n": 2}')


def test_parse_in_instance_reports_error():
    with pytest.raises(ValueError, match="wrong element count"):
        load_instances('{"k": 2, "n": 2, "oracles": ["D([1 1 1])", "D([1 1 1 1])"]}')
    assert parse_diagonal("D([1 1 1 1])", 2) == CONST
