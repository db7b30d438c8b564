"""Dense statevector simulation of the Forrelation query circuits.

Qubit 0 is the most significant bit of a basis index. With a probe, qubit 0
is the probe and the work register occupies qubits 1..n.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ForrelationInstance, _check_guard
from .oracle import BooleanFunction, CountingOracle

MAX_QUBITS = 20
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class OpKind(str, enum.Enum):
    HADAMARD_LAYER = "HADAMARD_LAYER"
    ORACLE = "ORACLE"
    PROBE_HADAMARD = "PROBE_HADAMARD"


@dataclass(frozen=True)
class CircuitOp:
    kind: OpKind
    targets: tuple[int, ...]
    function: BooleanFunction | None = None
    control: int | None = None
    counter: CountingOracle | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate targets {self.targets}")
        if self.control is not None and self.control in self.targets:
            raise ValueError("control qubit is also a target")
        if self.kind is OpKind.ORACLE:
            if self.function is None:
                raise ValueError("ORACLE needs a function")
            if self.function.n != len(self.targets):
                raise ValueError(
                    f"oracle function has {self.function.n} bits but {len(self.targets)} targets"
                )
        if self.kind is OpKind.PROBE_HADAMARD and len(self.targets) != 1:
            raise ValueError("PROBE_HADAMARD acts on exactly one qubit")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets if self.control is None else (self.control, *self.targets)


@dataclass
class StateVector:
    qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.qubits > MAX_QUBITS:
            raise ValueError(f"{self.qubits} qubits exceeds the dense limit {MAX_QUBITS}")
        if self.amplitudes.size != 2**self.qubits:
            raise ValueError(f"{self.amplitudes.size} amplitudes for {self.qubits} qubits")
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"state norm {norm} is not 1")

    @classmethod
    def zero(cls, qubits: int) -> "StateVector":
        amps = np.zeros(2**qubits, dtype=complex)
        amps[0] = 1
        return cls(qubits, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def circuit_width(ops: Sequence[CircuitOp]) -> int:
    return 1 + max((q for op in ops for q in op.qubits), default=-1)


def quantum_query_count(ops: Sequence[CircuitOp]) -> int:
    return sum(op.kind is OpKind.ORACLE for op in ops)


def build_forrelation_circuit(
    instance: ForrelationInstance,
    with_probe: bool = False,
    oracles: Sequence[CountingOracle] | None = None,
) -> list[CircuitOp]:
    """H, O_1, H, O_2, ..., O_k, H on the work register.

    With a probe the whole work sequence is controlled on qubit 0 and wrapped
    in probe Hadamards (a Hadamard test of U), so that <Z_probe> = Re<0|U|0> = Φ.
    """
    n = instance.n
    offset = 1 if with_probe else 0
    work = tuple(range(offset, offset + n))
    control = 0 if with_probe else None
    if oracles is not None and len(oracles) != instance.k:
        raise ValueError("need one counting oracle per function")

    ops: list[CircuitOp] = []
    if with_probe:
        ops.append(CircuitOp(OpKind.PROBE_HADAMARD, (0,)))
    ops.append(CircuitOp(OpKind.HADAMARD_LAYER, work, control=control))
    for i, f in enumerate(instance.functions):
        counter = None if oracles is None else oracles[i]
        ops.append(CircuitOp(OpKind.ORACLE, work, function=f, control=control, counter=counter))
        ops.append(CircuitOp(OpKind.HADAMARD_LAYER, work, control=control))
    if with_probe:
        ops.append(CircuitOp(OpKind.PROBE_HADAMARD, (0,)))
    return ops


def _apply_op(psi: np.ndarray, op: CircuitOp) -> np.ndarray:
    """Apply one op to a tensor with one axis of size 2 per qubit (in place)."""
    if op.control is not None:
        index = [slice(None)] * psi.ndim
        index[op.control] = 1
        sub = psi[tuple(index)]
        targets = tuple(t - (t > op.control) for t in op.targets)
        sub[...] = _apply_uncontrolled(sub, op, targets)
        return psi
    return _apply_uncontrolled(psi, op, op.targets)


def _apply_uncontrolled(psi: np.ndarray, op: CircuitOp, targets: tuple[int, ...]) -> np.ndarray:
    if op.kind is OpKind.ORACLE:
        if op.counter is not None:
            op.counter._count("quantum")
        diag = op.function.as_array().reshape([2] * len(targets))
        # Broadcast the diagonal over the non-target axes.
        order = np.argsort(targets)
        diag = np.transpose(diag, order)
        shape = [1] * psi.ndim
        for t in targets:
            shape[t] = 2
        return psi * diag.reshape(shape)
    for t in targets:
        psi = np.moveaxis(np.tensordot(_H, psi, axes=([1], [t])), 0, t)
    return psi


def apply_array(ops: Sequence[CircuitOp], amplitudes: np.ndarray, qubits: int) -> np.ndarray:
    """Apply ops to a raw amplitude vector; no normalization check."""
    width = circuit_width(ops)
    if width > qubits:
        raise ValueError(f"circuit needs {width} qubits, state has {qubits}")
    psi = np.array(amplitudes, dtype=complex).reshape([2] * qubits)
    for op in ops:
        psi = _apply_op(psi, op)
    return psi.reshape(-1)


def apply(ops: Sequence[CircuitOp], state: StateVector) -> StateVector:
    out = apply_array(ops, state.amplitudes, state.qubits)
    return StateVector(state.qubits, out)


def circuit_unitary(ops: Sequence[CircuitOp], qubits: int | None = None) -> np.ndarray:
    qubits = circuit_width(ops) if qubits is None else qubits
    dim = 2**qubits
    return np.column_stack([apply_array(ops, np.eye(dim)[:, j], qubits) for j in range(dim)])


def forrelation_amplitude(instance: ForrelationInstance, guard: int | None = None) -> float:
    """<0^n|U|0^n> of the probe-free circuit."""
    _check_guard(instance, guard)
    ops = build_forrelation_circuit(instance, with_probe=False)
    out = apply(ops, StateVector.zero(instance.n))
    amp = out.amplitudes[0]
    assert abs(amp.imag) <= 1e-12, f"amplitude has imaginary part {amp.imag}"
    return float(amp.real)


def probe_z(state: StateVector, probe: int = 0) -> float:
    """<Z> on one qubit: P(0) - P(1)."""
    probs = state.probabilities().reshape([2] * state.qubits)
    probs = np.moveaxis(probs, probe, 0).reshape(2, -1).sum(axis=1)
    return float(probs[0] - probs[1])


def probe_expectation(instance: ForrelationInstance, guard: int | None = None) -> float:
    _check_guard(instance, guard)
    ops = build_forrelation_circuit(instance, with_probe=True)
    out = apply(ops, StateVector.zero(instance.n + 1))
    return probe_z(out, 0)
