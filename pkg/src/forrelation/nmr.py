"""Weakly coupled spin-1/2 Hamiltonian in the rotating frame and its propagators.

Energies are angular frequencies (rad/s); shifts and couplings are given in Hz.
Spin i is qubit i (spin 0 is the most significant bit).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def embed(op: np.ndarray, spin: int, m: int) -> np.ndarray:
    """Single-spin operator acting on ``spin`` of an m-spin register."""
    return reduce(np.kron, [op if i == spin else I2 for i in range(m)])


def z_signs(m: int) -> np.ndarray:
    """(2^m, m) array of Z eigenvalues: +1 for bit 0, -1 for bit 1."""
    idx = np.arange(2**m)
    bits = (idx[:, None] >> (m - 1 - np.arange(m))[None, :]) & 1
    return 1 - 2 * bits


@dataclass(frozen=True)
class SpinSystemParams:
    shifts: tuple[float, ...]
    couplings: dict[tuple[int, int], float] = field(default_factory=dict)
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "shifts", tuple(float(v) for v in self.shifts))
        clean = {}
        for (j, k), value in self.couplings.items():
            if not j < k:
                raise ValueError(f"coupling index ({j}, {k}) must satisfy j < k")
            if not 0 <= j < k < self.m:
                raise ValueError(f"coupling ({j}, {k}) out of range for {self.m} spins")
            if not np.isfinite(value):
                raise ValueError(f"coupling ({j}, {k}) is not finite")
            clean[(j, k)] = float(value)
        if not all(np.isfinite(self.shifts)):
            raise ValueError("shifts must be finite")
        object.__setattr__(self, "couplings", clean)

    @property
    def m(self) -> int:
        return len(self.shifts)

    def coupling(self, j: int, k: int) -> float:
        if j > k:
            j, k = k, j
        return self.couplings.get((j, k), 0.0)

    def to_dict(self) -> dict:
        doc = {
            "shifts_hz": list(self.shifts),
            "couplings_hz": {f"{j + 1},{k + 1}": v for (j, k), v in sorted(self.couplings.items())},
        }
        if self.names:
            doc["names"] = list(self.names)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SpinSystemParams":
        """Read the spin file format; coupling keys are 1-based "j,k" strings."""
        couplings = {}
        for key, value in doc.get("couplings_hz", {}).items():
            j, k = (int(s) - 1 for s in key.split(","))
            couplings[(min(j, k), max(j, k))] = float(value)
        names = doc.get("names")
        return cls(tuple(doc["shifts_hz"]), couplings, tuple(names) if names else None)

    @classmethod
    def load(cls, path) -> "SpinSystemParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# Placeholder values, NOT measured parameters of any real sample.
# The shifts are small rotating-frame offsets; couplings have the usual
# magnitudes for a 13C-1H-19F fragment. Supply a spins.json for real work.
PLACEHOLDER_PARAMS = SpinSystemParams(
    shifts=(15.0, -10.0, 5.0),
    couplings={(0, 1): 160.0, (0, 2): -190.0, (1, 2): 48.0},
    names=("13C", "1H", "19F"),
)


def internal_hamiltonian_diagonal(params: SpinSystemParams) -> np.ndarray:
    signs = z_signs(params.m)
    h = np.pi * signs @ np.array(params.shifts)
    for (j, k), coupling in params.couplings.items():
        h = h + 0.5 * np.pi * coupling * signs[:, j] * signs[:, k]
    return h.astype(float)


def internal_hamiltonian(params: SpinSystemParams) -> np.ndarray:
    """Σ π ν_i Z_i + Σ_{j<k} (π/2) J_jk Z_j Z_k, in rad/s."""
    return np.diag(internal_hamiltonian_diagonal(params)).astype(complex)


def free_evolution(params: SpinSystemParams, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"negative evolution time {t}")
    return np.diag(np.exp(-1j * internal_hamiltonian_diagonal(params) * t))


class EventKind(str, enum.Enum):
    DELAY = "DELAY"
    HARD_PULSE = "PULSE"


@dataclass(frozen=True)
class PulseEvent:
    kind: EventKind
    duration: float = 0.0
    spins: tuple[int, ...] = ()
    angle: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(sorted(self.spins)))
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")
        if not np.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")
        if self.kind is EventKind.HARD_PULSE and not self.spins:
            raise ValueError("hard pulse needs at least one spin")

    @classmethod
    def delay(cls, t: float) -> "PulseEvent":
        return cls(EventKind.DELAY, duration=float(t))

    @classmethod
    def pulse(cls, spins: Iterable[int], angle: float, phase: float = 0.0) -> "PulseEvent":
        return cls(EventKind.HARD_PULSE, spins=tuple(spins), angle=float(angle), phase=float(phase))


def rotation(angle: float, phase: float) -> np.ndarray:
    """exp(-i angle/2 (cos(phase) X + sin(phase) Y)) on one spin."""
    axis = np.cos(phase) * SX + np.sin(phase) * SY
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * axis


def hard_pulse(event: PulseEvent, m: int) -> np.ndarray:
    if event.kind is not EventKind.HARD_PULSE or not event.spins:
        raise ValueError("hard_pulse needs a HARD_PULSE event with a non-empty spin set")
    if max(event.spins) >= m:
        raise ValueError(f"pulse on spin {max(event.spins)} but system has {m} spins")
    r = rotation(event.angle, event.phase)
    return reduce(np.kron, [r if i in event.spins else I2 for i in range(m)])


def _expm_hermitian(h: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(-i h dt) for a stack of Hermitian matrices, plus the eigensystem used."""
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w * dt)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return u, w, v


def control_operators(m: int, channels: Iterable[int]) -> np.ndarray:
    """(channels, 2, d, d) stack of π X_c and π Y_c; amplitudes in Hz multiply these."""
    return np.array([[np.pi * embed(SX, c, m), np.pi * embed(SY, c, m)] for c in channels])


def segment_hamiltonians(params: SpinSystemParams, amplitudes: np.ndarray, channels, rf_scale: float = 1.0):
    """(M, d, d) stack of H_int + rf_scale Σ_c π (a_x X_c + a_y Y_c)."""
    ctrl = control_operators(params.m, channels)
    h_rf = np.einsum("scq,cqab->sab", rf_scale * np.asarray(amplitudes, dtype=float), ctrl)
    return internal_hamiltonian(params)[None] + h_rf


def segment_propagators(params: SpinSystemParams, pulse, rf_scale: float = 1.0):
    h = segment_hamiltonians(params, pulse.amplitudes, pulse.channels, rf_scale)
    return _expm_hermitian(h, pulse.dt)


def shaped_propagator(params: SpinSystemParams, pulse, rf_scale: float = 1.0) -> np.ndarray:
    """Ordered product of exp(-i (H_int + H_rf[j]) dt) over the segments."""
    if len(pulse.channels) > params.m or (pulse.channels and max(pulse.channels) >= params.m):
        raise ValueError(f"pulse channels {pulse.channels} do not fit {params.m} spins")
    if pulse.dt <= 0:
        raise ValueError("segment duration must be positive")
    us, _, _ = segment_propagators(params, pulse, rf_scale)
    total = np.eye(2**params.m, dtype=complex)
    for u in us:
        total = u @ total
    return total
