"""Compile Hadamard/diagonal-oracle circuits into hard pulses and J-evolution delays.

Lowering goes circuit -> logical gates -> pulse events:

* logical gates are x/y-plane rotations, z rotations and Z-string rotations
  exp(-i θ/2 Z_S);
* z rotations are never emitted; they accumulate in a per-spin frame angle
  that shifts the phase of every later pulse on that spin, and whatever is
  left at the end is flushed as a pair of π pulses;
* Z-strings of weight >= 3 are conjugated down to weight 2 with
  ZZ(π/2) and π/2 rotations;
* each ZZ term is a delay split into L equal parts with π pulses between
  them, so each spin sees a Walsh sign pattern: the coupled pair shares one
  pattern and every other spin gets its own, which cancels all shifts and all
  other couplings exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CircuitOp, OpKind, circuit_width
from .nmr import EventKind, PulseEvent, SpinSystemParams, free_evolution, hard_pulse

TWO_PI = 2 * math.pi


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class Rot:
    spin: int
    phase: float
    angle: float


@dataclass(frozen=True)
class RZ:
    spin: int
    angle: float


@dataclass(frozen=True)
class ZString:
    spins: tuple[int, ...]
    angle: float


@dataclass
class PulseSequence:
    events: list[PulseEvent]
    params: SpinSystemParams
    stats: dict = field(init=False)

    def __post_init__(self):
        self.stats = {
            "pulses": sum(e.kind is EventKind.HARD_PULSE for e in self.events),
            "delays": sum(e.kind is EventKind.DELAY for e in self.events),
            "duration": sum(e.duration for e in self.events if e.kind is EventKind.DELAY),
        }

    @property
    def pulse_count(self) -> int:
        return self.stats["pulses"]

    @property
    def delay_count(self) -> int:
        return self.stats["delays"]

    @property
    def total_duration(self) -> float:
        return self.stats["duration"]

    def to_text(self) -> str:
        lines = []
        for e in self.events:
            if e.kind is EventKind.DELAY:
                lines.append(f"DELAY t={e.duration!r}")
            else:
                spins = ",".join(str(s + 1) for s in e.spins)
                lines.append(f"PULSE spins={spins} angle={e.angle!r} phase={e.phase!r}")
        lines.append(
            f"# pulses={self.pulse_count} delays={self.delay_count} duration={self.total_duration!r}"
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, params: SpinSystemParams) -> "PulseSequence":
        events = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, *fields = line.split()
            kv = dict(f.split("=", 1) for f in fields)
            if head == "DELAY":
                events.append(PulseEvent.delay(float(kv["t"])))
            elif head == "PULSE":
                spins = [int(s) - 1 for s in kv["spins"].split(",")]
                events.append(PulseEvent.pulse(spins, float(kv["angle"]), float(kv["phase"])))
            else:
                raise ValueError(f"line {lineno}: unknown event {head!r}")
        return cls(events, params)


def sequence_unitary(seq: PulseSequence) -> np.ndarray:
    m = seq.params.m
    u = np.eye(2**m, dtype=complex)
    for e in seq.events:
        if e.kind is EventKind.DELAY:
            u = free_evolution(seq.params, e.duration) @ u
        else:
            u = hard_pulse(e, m) @ u
    return u


def equivalent_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> tuple[bool, float]:
    """Whether u = e^{iα} v within ``tol`` (max entry), with α from tr(v† u)."""
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    overlap = np.trace(v.conj().T @ u)
    alpha = float(np.angle(overlap)) if abs(overlap) > 1e-14 else 0.0
    deviation = np.max(np.abs(u - np.exp(1j * alpha) * v))
    return bool(deviation <= tol), alpha


# -- circuit -> logical gates ---------------------------------------------


def _hadamard(spin: int) -> list:
    # H = i Ry(π/2) Rz(π)
    return [RZ(spin, math.pi), Rot(spin, math.pi / 2, math.pi / 2)]


def _controlled_z(c: int, t: int) -> list:
    # CZ = e^{-iπ/4} exp(iπ/4 Z_c) exp(iπ/4 Z_t) exp(-iπ/4 Z_c Z_t)
    return [RZ(c, -math.pi / 2), RZ(t, -math.pi / 2), ZString((c, t), math.pi / 2)]


def _controlled_hadamard(c: int, t: int) -> list:
    # CH = Ry_t(π/4) CZ Ry_t(-π/4)
    return [Rot(t, math.pi / 2, -math.pi / 4), *_controlled_z(c, t), Rot(t, math.pi / 2, math.pi / 4)]


def diagonal_phase_gates(spins: Sequence[int], phases: np.ndarray, tol: float = 1e-12) -> list:
    """Z-string expansion of diag(exp(i phases)) over ``spins`` (global phase dropped).

    ``phases`` is indexed big-endian by the bits of ``spins`` in the given order.
    """
    w = len(spins)
    signs = 1 - 2 * ((np.arange(2**w)[:, None] >> (w - 1 - np.arange(w))[None, :]) & 1)
    gates = []
    for r in range(1, w + 1):
        for subset in itertools.combinations(range(w), r):
            z = np.prod(signs[:, list(subset)], axis=1)
            coeff = float(np.dot(phases, z)) / 2**w
            if abs(coeff) <= tol:
                continue
            chosen = tuple(spins[i] for i in subset)
            angle = -2 * coeff
            gates.append(RZ(chosen[0], angle) if r == 1 else ZString(chosen, angle))
    return gates


def _oracle_gates(op: CircuitOp, spin_of) -> list:
    values = np.array(op.function.table)
    phases = np.where(values < 0, math.pi, 0.0)
    spins = [spin_of(t) for t in op.targets]
    if op.control is not None:
        # phase only on the control = 1 half
        phases = np.concatenate([np.zeros_like(phases), phases])
        spins = [spin_of(op.control), *spins]
    return diagonal_phase_gates(spins, phases)


def logical_gates(ops: Sequence[CircuitOp], spin_of=lambda q: q) -> list:
    gates: list = []
    for op in ops:
        if op.kind is OpKind.ORACLE:
            gates += _oracle_gates(op, spin_of)
        elif op.kind in (OpKind.HADAMARD_LAYER, OpKind.PROBE_HADAMARD):
            for t in op.targets:
                if op.control is None:
                    gates += _hadamard(spin_of(t))
                else:
                    gates += _controlled_hadamard(spin_of(op.control), spin_of(t))
        else:
            raise CompileError(f"unsupported op kind {op.kind}")
    return gates


def reduce_zstring(g: ZString) -> list:
    """Rewrite a weight >= 3 Z-string rotation with ZZ(π/2) and π/2 rotations.

    With b, c the last two spins: Z_A Z_b Z_c = W† (Z_A Z_b) W where
    W = Rx_b(π/2) ZZ_bc(π/2) Ry_b(π/2).
    """
    if len(g.spins) <= 2:
        return [g]
    *rest, b, c = g.spins
    w = [Rot(b, math.pi / 2, math.pi / 2), ZString((b, c), math.pi / 2), Rot(b, 0.0, math.pi / 2)]
    w_dag = [Rot(b, 0.0, -math.pi / 2), ZString((b, c), -math.pi / 2), Rot(b, math.pi / 2, -math.pi / 2)]
    inner = reduce_zstring(ZString((*rest, b), g.angle))
    return [*w, *inner, *w_dag]


# -- logical gates -> events ------------------------------------------------


def _walsh(index: int, length: int) -> list[int]:
    return [-1 if (index & t).bit_count() & 1 else 1 for t in range(length)]


def zz_block(params: SpinSystemParams, j: int, k: int, angle: float) -> list[PulseEvent]:
    """exp(-i angle/2 Z_j Z_k), up to global phase, as refocused J evolution."""
    coupling = params.coupling(j, k)
    if coupling == 0:
        raise CompileError(f"spins {j + 1} and {k + 1} are not coupled")
    m = params.m
    tau = abs(angle) / (math.pi * abs(coupling))
    sign = 1 if angle * coupling > 0 else -1
    length = 2
    while length < m:
        length *= 2
    spectator_rows = iter(range(2, length))
    pattern = {}
    for s in range(m):
        if s == j:
            pattern[s] = [sign * v for v in _walsh(1, length)]
        elif s == k:
            pattern[s] = _walsh(1, length)
        else:
            pattern[s] = _walsh(next(spectator_rows), length)

    events: list[PulseEvent] = []
    previous = {s: 1 for s in range(m)}
    for t in range(length + 1):
        current = {s: (pattern[s][t] if t < length else 1) for s in range(m)}
        flips = [s for s in range(m) if current[s] != previous[s]]
        if flips:
            events.append(PulseEvent.pulse(flips, math.pi, 0.0))
        if t < length:
            events.append(PulseEvent.delay(tau / length))
        previous = current
    return events


def _wrap(angle: float) -> float:
    return (angle + math.pi) % TWO_PI - math.pi


def compile_gates(gates: Sequence, params: SpinSystemParams) -> list[PulseEvent]:
    frame = [0.0] * params.m
    events: list[PulseEvent] = []
    expanded = []
    for g in gates:
        expanded += reduce_zstring(g) if isinstance(g, ZString) else [g]
    for g in expanded:
        if isinstance(g, RZ):
            frame[g.spin] += g.angle
        elif isinstance(g, Rot):
            events.append(PulseEvent.pulse([g.spin], g.angle, _wrap(g.phase - frame[g.spin])))
        elif isinstance(g, ZString):
            # exp(-iπ Z_j Z_k) = -I, so the angle only matters mod 2π
            angle = _wrap(g.angle)
            if abs(angle) > 1e-15:
                events += zz_block(params, *g.spins, angle)
        else:
            raise CompileError(f"unknown gate {g!r}")
    # R_φ1(π) R_φ2(π) = -Rz(2(φ1 - φ2)): flush leftover frame rotations
    for spin, alpha in enumerate(frame):
        if abs(_wrap(alpha)) > 1e-12:
            events.append(PulseEvent.pulse([spin], math.pi, 0.0))
            events.append(PulseEvent.pulse([spin], math.pi, _wrap(alpha / 2)))
    return events


def compile_circuit(
    ops: Sequence[CircuitOp], params: SpinSystemParams, spin_offset: int | None = None
) -> PulseSequence:
    """Compile to a pulse sequence on ``params``' spins.

    Circuit qubit q runs on spin q + spin_offset; by default the circuit is
    placed on the last spins, so a probe-free work register skips the probe.
    """
    width = circuit_width(ops)
    if spin_offset is None:
        spin_offset = params.m - width
    if spin_offset < 0 or spin_offset + width > params.m:
        raise CompileError(f"{width}-qubit circuit does not fit {params.m} spins at offset {spin_offset}")
    gates = logical_gates(ops, lambda q: q + spin_offset)
    return PulseSequence(compile_gates(gates, params), params)


compile = compile_circuit  # noqa: A001
