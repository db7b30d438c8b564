import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from forrelation.oracle import (
    BooleanFunction,
    CountingOracle,
    DiagonalParseError,
    format_diagonal,
    fwht,
    parse_diagonal,
    walsh_spectrum,
)


@st.composite
def boolean_functions(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    table = draw(st.lists(st.sampled_from([1, -1]), min_size=2**n, max_size=2**n))
    return BooleanFunction(n, tuple(table))


def brute_walsh(table):
    n = len(table).bit_length() - 1
    return [
        sum((-1) ** bin(x & y).count("1") * table[x] for x in range(len(table))) / 2 ** (n / 2)
        for y in range(len(table))
    ]


def test_parse_constant():
    assert parse_diagonal("D([1 1 1 1])", 2).table == (1, 1, 1, 1)


def test_parse_with_sign():
    assert parse_diagonal("D([1 1 1 -1])", 2).table == (1, 1, 1, -1)


@pytest.mark.parametrize("text", ["D([1,1,1,-1])", "D([1, 1, 1, -1])", " D( [1 1 1 -1] ) ", "D([1 1 1 −1])"])
def test_parse_separators(text):
    assert parse_diagonal(text, 2).table == (1, 1, 1, -1)


def test_parse_wrong_count():
    with pytest.raises(DiagonalParseError, match="wrong element count") as err:
        parse_diagonal("D([1 1 1])", 2)
    assert err.value.position == 8


def test_parse_bad_element_position():
    with pytest.raises(DiagonalParseError, match="not 1 or -1") as err:
        parse_diagonal("D([1 2 1 1])", 2)
    assert err.value.position == 5


@pytest.mark.parametrize("text, pos", [("[1 1 1 1]", 0), ("D(1 1 1 1)", 2), ("D([1 1 1 1]", 11)])
def test_parse_malformed(text, pos):
    with pytest.raises(DiagonalParseError) as err:
        parse_diagonal(text, 2)
    assert err.value.position == pos


@given(boolean_functions())
def test_parse_format_roundtrip(f):
    text = format_diagonal(f)
    assert parse_diagonal(text, f.n) == f
    assert format_diagonal(parse_diagonal(text, f.n)) == text


def test_function_invariants():
    with pytest.raises(ValueError):
        BooleanFunction(2, (1, 1, 1))
    with pytest.raises(ValueError):
        BooleanFunction(2, (1, 0, 1, 1))
    with pytest.raises(ValueError):
        BooleanFunction(0, (1,))


def test_evaluate_classical():
    oracle = CountingOracle(parse_diagonal("D([1 1 1 -1])", 2))
    assert oracle.evaluate("11", "classical") == -1
    assert (oracle.classical_queries, oracle.quantum_queries) == (1, 0)


def test_evaluate_quantum():
    oracle = CountingOracle(parse_diagonal("D([1 1 1 1])", 2))
    assert oracle.evaluate("00", "quantum") == 1
    assert (oracle.classical_queries, oracle.quantum_queries) == (0, 1)


def test_evaluate_length_mismatch():
    oracle = CountingOracle(parse_diagonal("D([1 1 1 1])", 2))
    with pytest.raises(ValueError):
        oracle.evaluate("101")
    assert oracle.classical_queries == 0


def test_evaluate_big_endian():
    f = BooleanFunction(2, (1, -1, 1, 1))  # only x = 01 is -1
    oracle = CountingOracle(f)
    assert oracle.evaluate([0, 1]) == -1
    assert oracle.evaluate([1, 0]) == 1


def test_counters_do_not_touch_function():
    f = parse_diagonal("D([1 -1 1 -1])", 2)
    oracle = CountingOracle(f)
    for x in range(4):
        oracle.evaluate(x)
    oracle.apply(np.ones(4))
    assert (oracle.classical_queries, oracle.quantum_queries) == (4, 1)
    oracle.reset()
    assert (oracle.classical_queries, oracle.quantum_queries) == (0, 0)
    assert oracle.function.table == (1, -1, 1, -1)


def test_counters_exact_under_threads():
    oracle = CountingOracle(BooleanFunction(2, (1, 1, 1, -1)))

    def work():
        for i in range(500):
            oracle.evaluate(i % 4)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert oracle.classical_queries == 4000


def test_walsh_constant():
    np.testing.assert_allclose(walsh_spectrum(BooleanFunction(2, (1, 1, 1, 1))), [2, 0, 0, 0])


def test_walsh_self_transform():
    f = BooleanFunction(2, (1, 1, 1, -1))
    np.testing.assert_allclose(walsh_spectrum(f), brute_walsh(f.table))
    np.testing.assert_allclose(walsh_spectrum(f), [1, 1, 1, -1])


@given(boolean_functions(max_n=6))
def test_walsh_matches_bruteforce_and_parseval(f):
    spectrum = walsh_spectrum(f)
    np.testing.assert_allclose(spectrum, brute_walsh(f.table), atol=1e-12)
    assert np.sum(spectrum**2) == pytest.approx(2**f.n)


@given(boolean_functions(max_n=6))
def test_walsh_involution(f):
    np.testing.assert_allclose(fwht(walsh_spectrum(f)), f.table, atol=1e-12)
