"""Mixed-state side of the NMR model: pseudo-pure states, Pauli readout, tomography."""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np

from .nmr import I2, SX, SY, SZ

PAULIS = {"I": I2, "X": SX, "Y": SY, "Z": SZ}
DEFAULT_EPSILON = 1e-5


@dataclass
class DensityMatrix:
    qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = 2**self.qubits
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {self.qubits} qubits")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(self.matrix).real
        if abs(tr - 1) > 1e-10:
            raise ValueError(f"density matrix trace {tr} is not 1")
        lowest = np.linalg.eigvalsh(self.matrix).min()
        if lowest < -1e-8:
            raise ValueError(f"density matrix has negative eigenvalue {lowest}")

    @classmethod
    def pure(cls, amplitudes: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex)
        qubits = psi.size.bit_length() - 1
        return cls(qubits, np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, qubits: int, index: int = 0) -> "DensityMatrix":
        psi = np.zeros(2**qubits, dtype=complex)
        psi[index] = 1
        return cls.pure(psi)

    @property
    def dim(self) -> int:
        return 2**self.qubits

    def deviation(self) -> np.ndarray:
        """Traceless part ρ - I/d, the part an NMR signal sees."""
        return self.matrix - np.eye(self.dim) / self.dim

    def to_text(self) -> str:
        lines = [str(self.dim)]
        for row in self.matrix:
            lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DensityMatrix":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        d = int(rows[0][0])
        if len(rows) != d + 1:
            raise ValueError(f"expected {d} matrix rows, got {len(rows) - 1}")
        values = np.array([[float(x) for x in row] for row in rows[1:]])
        if values.shape != (d, 2 * d):
            raise ValueError("each row needs d (real, imag) pairs")
        return cls(d.bit_length() - 1, values[:, 0::2] + 1j * values[:, 1::2])


def pseudo_pure(epsilon: float = DEFAULT_EPSILON, m: int = 3) -> DensityMatrix:
    """(1 - ε) I/2^m + ε |0...0><0...0|."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    d = 2**m
    rho = (1 - epsilon) * np.eye(d, dtype=complex) / d
    rho[0, 0] += epsilon
    return DensityMatrix(m, rho)


def evolve(rho: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    if u.shape != rho.matrix.shape:
        raise ValueError(f"unitary shape {u.shape} does not match state dimension {rho.dim}")
    if np.max(np.abs(u.conj().T @ u - np.eye(rho.dim))) > 1e-8:
        raise ValueError("evolution operator is not unitary")
    out = u @ rho.matrix @ u.conj().T
    return DensityMatrix(rho.qubits, 0.5 * (out + out.conj().T))


def pauli_matrix(word: str) -> np.ndarray:
    if not word or any(c not in PAULIS for c in word):
        raise ValueError(f"malformed Pauli word {word!r}")
    return reduce(np.kron, [PAULIS[c] for c in word])


def expect_pauli(rho: DensityMatrix, word: str) -> float:
    """tr(ρ P); the first letter acts on qubit 0."""
    if len(word) != rho.qubits:
        raise ValueError(f"Pauli word {word!r} has length {len(word)}, state has {rho.qubits} qubits")
    value = np.trace(rho.matrix @ pauli_matrix(word))
    assert abs(value.imag) <= 1e-10
    return float(value.real)


def pauli_words(m: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=m)]


def all_expectations(rho: DensityMatrix) -> dict[str, float]:
    return {w: expect_pauli(rho, w) for w in pauli_words(rho.qubits)}


def fidelity(rho_exp, rho_th) -> float:
    """tr(ρ_e ρ_t) / sqrt(tr(ρ_e²) tr(ρ_t²)).

    Takes DensityMatrix objects or plain Hermitian arrays, so deviation
    matrices can be compared directly.
    """
    a = rho_exp.matrix if isinstance(rho_exp, DensityMatrix) else np.asarray(rho_exp, dtype=complex)
    b = rho_th.matrix if isinstance(rho_th, DensityMatrix) else np.asarray(rho_th, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    norm = np.sqrt(np.trace(a @ a).real * np.trace(b @ b).real)
    if norm == 0:
        raise ValueError("fidelity of a zero matrix is undefined")
    return float(np.trace(a @ b).real / norm)


def tomography(expectations: Mapping[str, float]) -> DensityMatrix:
    """Linear inversion ρ = 2^{-m} Σ_P <P> P over all 4^m Pauli words."""
    if not expectations:
        raise ValueError("no expectation values given")
    m = len(next(iter(expectations)))
    missing = [w for w in pauli_words(m) if w not in expectations]
    if missing:
        raise ValueError(f"missing {len(missing)} Pauli words, e.g. {missing[:3]}")
    if abs(expectations["I" * m] - 1) > 1e-12:
        raise ValueError(f"<{'I' * m}> must be 1, got {expectations['I' * m]}")
    rho = sum(expectations[w] * pauli_matrix(w) for w in pauli_words(m)) / 2**m
    return DensityMatrix(m, 0.5 * (rho + rho.conj().T))


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {p}")
    return DensityMatrix(rho.qubits, (1 - p) * rho.matrix + p * np.eye(rho.dim) / rho.dim)


def expectations_to_csv(expectations: Mapping[str, float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pauli_word", "expectation"])
    for word, value in expectations.items():
        writer.writerow([word, repr(float(value))])
    return buf.getvalue()


def expectations_from_csv(text: str) -> dict[str, float]:
    reader = csv.DictReader(io.StringIO(text))
    return {row["pauli_word"].strip(): float(row["expectation"]) for row in reader}
