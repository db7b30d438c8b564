import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forrelation.circuit import build_forrelation_circuit, circuit_unitary
from forrelation.core import find_instances, forrelation, showcase_instances
from forrelation.density import (
    DensityMatrix,
    all_expectations,
    depolarize,
    evolve,
    expect_pauli,
    expectations_from_csv,
    expectations_to_csv,
    fidelity,
    pauli_words,
    pseudo_pure,
    tomography,
)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, m, rank=None):
    d = 2**m
    a = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = a @ a.conj().T
    return DensityMatrix(m, rho / np.trace(rho).real)


seeds = st.integers(0, 2**32 - 1)


def test_pps_pure_limit():
    np.testing.assert_allclose(pseudo_pure(1.0, 3).matrix, DensityMatrix.basis(3).matrix)


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
def test_pps_epsilon_range(eps):
    with pytest.raises(ValueError):
        pseudo_pure(eps, 3)


@pytest.mark.parametrize("eps", [1e-5, 0.3, 1.0])
def test_pps_probe_signal(eps):
    assert expect_pauli(pseudo_pure(eps, 3), "ZII") == pytest.approx(eps, rel=1e-12)


def test_evolve_identity_and_mixed():
    rho = pseudo_pure(0.2, 2)
    np.testing.assert_allclose(evolve(rho, np.eye(4)).matrix, rho.matrix)
    u = random_unitary(np.random.default_rng(0), 4)
    mixed = DensityMatrix(2, np.eye(4) / 4)
    np.testing.assert_allclose(evolve(mixed, u).matrix, np.eye(4) / 4, atol=1e-15)


def test_evolve_rejects_bad_operators():
    rho = pseudo_pure(0.2, 2)
    with pytest.raises(ValueError):
        evolve(rho, 2 * np.eye(4))
    with pytest.raises(ValueError):
        evolve(rho, np.eye(8))


@given(seeds)
@settings(max_examples=25)
def test_evolve_preserves_spectrum(seed):
    rng = np.random.default_rng(seed)
    rho = random_state(rng, 2)
    out = evolve(rho, random_unitary(rng, 4))
    assert np.trace(out.matrix).real == pytest.approx(1, abs=1e-9)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-9)


@pytest.mark.parametrize("inst", showcase_instances(2) + showcase_instances(3), ids=str)
def test_pps_signal_law(inst):
    eps = 0.01
    u = circuit_unitary(build_forrelation_circuit(inst, with_probe=True))
    rho0 = pseudo_pure(eps, 3)
    signal = expect_pauli(evolve(rho0, u), "ZII")
    assert signal == pytest.approx(eps * forrelation(inst), abs=1e-12)
    assert signal / expect_pauli(rho0, "ZII") == pytest.approx(forrelation(inst), abs=1e-10)


def test_expect_pauli_examples():
    zero = DensityMatrix.basis(3)
    assert expect_pauli(pseudo_pure(1.0, 3), "ZII") == 1
    assert expect_pauli(zero, "XII") == 0
    rho = random_state(np.random.default_rng(3), 3)
    assert expect_pauli(rho, "III") == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("word", ["ZI", "ZIIZ", "ZIA", ""])
def test_expect_pauli_malformed(word):
    with pytest.raises(ValueError):
        expect_pauli(DensityMatrix.basis(3), word)


def test_fidelity_examples():
    rho = random_state(np.random.default_rng(1), 3)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(DensityMatrix.basis(3, 0), DensityMatrix.basis(3, 1)) == 0.0


def test_fidelity_pps_regression():
    # rho = diag(0.5625, 0.0625 x 7); overlap with |000> is 0.5625, purity 0.34375
    expected = 0.5625 / np.sqrt(0.5625**2 + 7 * 0.0625**2)
    assert fidelity(pseudo_pure(0.5, 3), DensityMatrix.basis(3)) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.959403, abs=1e-6)


def test_fidelity_errors():
    with pytest.raises(ValueError):
        fidelity(DensityMatrix.basis(2), DensityMatrix.basis(3))
    with pytest.raises(ValueError):
        fidelity(np.zeros((2, 2)), np.eye(2) / 2)


@given(seeds)
@settings(max_examples=25)
def test_fidelity_symmetric_and_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, 2), random_state(rng, 2)
    u = random_unitary(rng, 4)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-12)
    assert fidelity(evolve(a, u), evolve(b, u)) == pytest.approx(fidelity(a, b), abs=1e-10)
    assert fidelity(a, a) == pytest.approx(1, abs=1e-12)


def test_tomography_examples():
    zero = DensityMatrix.basis(3)
    np.testing.assert_allclose(tomography(all_expectations(zero)).matrix, zero.matrix, atol=1e-10)
    flat = {w: 0.0 for w in pauli_words(3)}
    flat["III"] = 1.0
    np.testing.assert_allclose(tomography(flat).matrix, np.eye(8) / 8, atol=1e-15)


def test_tomography_of_simulated_final_state():
    inst = find_instances(1.0, 2, 2, limit=1)[0]
    u = circuit_unitary(build_forrelation_circuit(inst, with_probe=True))
    final = evolve(pseudo_pure(1e-5, 3), u)
    np.testing.assert_allclose(tomography(all_expectations(final)).matrix, final.matrix, atol=1e-10)


@given(seeds, st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_tomography_roundtrip(seed, m):
    rho = random_state(np.random.default_rng(seed), m)
    back = tomography(all_expectations(rho))
    assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-10
    exps = all_expectations(back)
    for w, v in all_expectations(rho).items():
        assert exps[w] == pytest.approx(v, abs=1e-10)


def test_tomography_errors():
    exps = all_expectations(DensityMatrix.basis(2))
    del exps["XY"]
    with pytest.raises(ValueError, match="missing"):
        tomography(exps)
    exps = all_expectations(DensityMatrix.basis(2))
    exps["II"] = 0.9
    with pytest.raises(ValueError):
        tomography(exps)


def test_depolarize_examples():
    rho = random_state(np.random.default_rng(5), 2)
    np.testing.assert_allclose(depolarize(rho, 0).matrix, rho.matrix)
    np.testing.assert_allclose(depolarize(rho, 1).matrix, np.eye(4) / 4)
    z = expect_pauli(rho, "ZI")
    assert expect_pauli(depolarize(rho, 0.3), "ZI") == pytest.approx(0.7 * z)
    with pytest.raises(ValueError):
        depolarize(rho, 1.2)


@given(seeds, st.floats(0, 1))
@settings(max_examples=25)
def test_depolarize_then_evolve(seed, p):
    rng = np.random.default_rng(seed)
    rho = random_state(rng, 2)
    u = random_unitary(rng, 4)
    for word in ("ZI", "XZ", "II"):
        lhs = expect_pauli(evolve(depolarize(rho, p), u), word)
        identity_part = 1.0 if word == "II" else 0.0
        assert lhs == pytest.approx((1 - p) * expect_pauli(evolve(rho, u), word) + p * identity_part, abs=1e-10)


def test_density_text_roundtrip():
    rho = random_state(np.random.default_rng(7), 2)
    text = rho.to_text()
    assert text.splitlines()[0] == "4"
    np.testing.assert_array_equal(DensityMatrix.from_text(text).matrix, rho.matrix)


def test_expectations_csv_roundtrip():
    exps = all_expectations(random_state(np.random.default_rng(8), 2))
    text = expectations_to_csv(exps)
    assert text.splitlines()[0] == "pauli_word,expectation"
    assert expectations_from_csv(text) == exps


def test_density_invariants():
    with pytest.raises(ValueError):
        DensityMatrix(1, [[1, 1], [0, 0]])
    with pytest.raises(ValueError):
        DensityMatrix(1, np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(1, [[1.5, 0], [0, -0.5]])
