"""GRAPE: gradient ascent on piecewise-constant RF controls toward a target unitary.

The figure of merit is the phase-insensitive gate fidelity |tr(U_t† U)|²/d²,
averaged over an ensemble of RF amplitude scale factors to make the pulse
robust to RF inhomogeneity.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .nmr import SpinSystemParams, control_operators, segment_propagators, shaped_propagator

log = logging.getLogger(__name__)

DEFAULT_RF_SCALES = ((0.95, 1 / 3), (1.0, 1 / 3), (1.05, 1 / 3))


@dataclass
class ControlPulse:
    channels: tuple[int, ...]
    dt: float
    amplitudes: np.ndarray  # (segments, channels, 2): x and y quadratures in Hz

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.amplitudes = np.array(self.amplitudes, dtype=float)
        if self.amplitudes.ndim != 3 or self.amplitudes.shape[1:] != (len(self.channels), 2):
            raise ValueError(
                f"amplitudes must have shape (M, {len(self.channels)}, 2), got {self.amplitudes.shape}"
            )
        if self.amplitudes.shape[0] < 1:
            raise ValueError("need at least one segment")
        if not self.dt > 0:
            raise ValueError(f"segment duration must be positive, got {self.dt}")

    @classmethod
    def zeros(cls, channels, segments: int, duration: float) -> "ControlPulse":
        channels = tuple(channels)
        return cls(channels, duration / segments, np.zeros((segments, len(channels), 2)))

    @property
    def segments(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def duration(self) -> float:
        return self.segments * self.dt

    def with_amplitudes(self, amplitudes: np.ndarray) -> "ControlPulse":
        return ControlPulse(self.channels, self.dt, amplitudes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["channels", *[c + 1 for c in self.channels]])
        w.writerow(["dt", repr(self.dt)])
        w.writerow([f"{q}{c + 1}" for c in self.channels for q in "xy"])
        for row in self.amplitudes.reshape(self.segments, -1):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ControlPulse":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0][0] != "channels" or rows[1][0] != "dt":
            raise ValueError("pulse CSV must start with 'channels' and 'dt' rows")
        channels = tuple(int(c) - 1 for c in rows[0][1:])
        dt = float(rows[1][1])
        values = np.array([[float(v) for v in row] for row in rows[3:] if row])
        return cls(channels, dt, values.reshape(len(values), len(channels), 2))


@dataclass
class GrapeConfig:
    max_iterations: int = 2000
    fidelity_goal: float = 0.995
    initial_step: float = 20.0  # Hz: largest amplitude change of the first trial step
    backtrack: float = 0.5
    grow: float = 1.5
    max_backtracks: int = 30
    gradient_mode: str = "exact"
    fd_step: float = 1e-6
    rf_scales: tuple[tuple[float, float], ...] = DEFAULT_RF_SCALES
    seed: int = 0
    init_scale: float = 10.0  # Hz
    method: str = "cg"

    def __post_init__(self):
        self.rf_scales = tuple((float(s), float(w)) for s, w in self.rf_scales)
        if not self.rf_scales:
            raise ValueError("need at least one rf scale")
        if abs(sum(w for _, w in self.rf_scales) - 1) > 1e-9:
            raise ValueError("rf scale weights must sum to 1")
        if any(w < 0 for _, w in self.rf_scales):
            raise ValueError("rf scale weights must be non-negative")
        if not 0 < self.fidelity_goal <= 1:
            raise ValueError("fidelity goal must be in (0, 1]")
        if self.gradient_mode not in ("exact", "fd"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.method not in ("cg", "steepest"):
            raise ValueError(f"unknown search direction {self.method!r}")
        if not 0 < self.backtrack < 1 or self.grow < 1 or self.max_iterations < 0:
            raise ValueError("impossible step-size policy")


@dataclass
class GrapeResult:
    pulse: ControlPulse
    trace: list[float]
    converged: bool
    per_scale: dict[float, float] = field(default_factory=dict)

    @property
    def fidelity(self) -> float:
        return self.trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def gate_fidelity(u_actual: np.ndarray, u_target: np.ndarray) -> float:
    if u_actual.shape != u_target.shape:
        raise ValueError(f"dimension mismatch {u_actual.shape} vs {u_target.shape}")
    d = u_target.shape[0]
    return float(abs(np.trace(u_target.conj().T @ u_actual)) ** 2 / d**2)


def _check_unitary(u: np.ndarray, tol: float = 1e-8) -> None:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("target must be a square matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol:
        raise ValueError("target is not unitary")


def _fidelity_and_gradient(params, pulse, u_target, rf_scale, ctrl):
    """Fidelity and its exact gradient via forward/backward propagator products.

    Each segment derivative uses the eigenbasis form of the Fréchet derivative
    of exp(-i H dt), so the gradient is exact for any segment length.
    """
    us, w, v = segment_propagators(params, pulse, rf_scale)
    m_seg, d = us.shape[0], us.shape[1]
    forward = np.empty_like(us)  # forward[j] = U_{j-1} ... U_0
    backward = np.empty_like(us)  # backward[j] = U_{M-1} ... U_{j+1}
    acc = np.eye(d, dtype=complex)
    for j in range(m_seg):
        forward[j] = acc
        acc = us[j] @ acc
    total = acc
    acc = np.eye(d, dtype=complex)
    for j in range(m_seg - 1, -1, -1):
        backward[j] = acc
        acc = acc @ us[j]
    g = np.trace(u_target.conj().T @ total)

    b = forward @ u_target.conj().T[None] @ backward
    vh = np.conj(np.swapaxes(v, -1, -2))
    b_eig = vh @ b @ v
    delta = w[:, :, None] - w[:, None, :]
    mean = 0.5 * (w[:, :, None] + w[:, None, :])
    gamma = -1j * pulse.dt * np.exp(-1j * pulse.dt * mean) * np.sinc(pulse.dt * delta / (2 * np.pi))
    c_eig = vh[:, None, None] @ (rf_scale * ctrl)[None] @ v[:, None, None]
    dg = np.einsum("sba,sab,scqab->scq", b_eig, gamma, c_eig)
    grad = 2 * np.real(np.conj(g) * dg) / d**2
    return float(abs(g) ** 2 / d**2), grad


def fidelity_gradient(
    params: SpinSystemParams, pulse: ControlPulse, u_target: np.ndarray, rf_scale: float = 1.0
) -> np.ndarray:
    """d gate_fidelity / d amplitude, shaped like ``pulse.amplitudes`` (per Hz)."""
    ctrl = control_operators(params.m, pulse.channels)
    return _fidelity_and_gradient(params, pulse, u_target, rf_scale, ctrl)[1]


def finite_difference_gradient(
    params: SpinSystemParams, pulse: ControlPulse, u_target: np.ndarray, rf_scale: float = 1.0, h: float = 1e-6
) -> np.ndarray:
    """Central differences of gate_fidelity, one amplitude at a time."""
    grad = np.zeros_like(pulse.amplitudes)
    for idx in np.ndindex(*pulse.amplitudes.shape):
        plus, minus = pulse.amplitudes.copy(), pulse.amplitudes.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = gate_fidelity(shaped_propagator(params, pulse.with_amplitudes(plus), rf_scale), u_target)
        f_minus = gate_fidelity(shaped_propagator(params, pulse.with_amplitudes(minus), rf_scale), u_target)
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def ensemble_fidelity(params, pulse, u_target, rf_scales=DEFAULT_RF_SCALES) -> float:
    # fixed-order weighted sum
    return float(
        sum(w * gate_fidelity(shaped_propagator(params, pulse, s), u_target) for s, w in rf_scales)
    )


def _ensemble(params, pulse, u_target, config, ctrl, need_grad=True):
    total, grad = 0.0, np.zeros_like(pulse.amplitudes)
    for scale, weight in config.rf_scales:
        if not need_grad:
            total += weight * gate_fidelity(shaped_propagator(params, pulse, scale), u_target)
            continue
        if config.gradient_mode == "exact":
            f, g = _fidelity_and_gradient(params, pulse, u_target, scale, ctrl)
        else:
            f = gate_fidelity(shaped_propagator(params, pulse, scale), u_target)
            g = finite_difference_gradient(params, pulse, u_target, scale, config.fd_step)
        total += weight * f
        grad += weight * g
    return total, grad


def initial_pulse(params: SpinSystemParams, segments: int, duration: float, config: GrapeConfig, channels=None):
    channels = tuple(range(params.m)) if channels is None else tuple(channels)
    rng = np.random.default_rng(config.seed)
    amps = config.init_scale * rng.standard_normal((segments, len(channels), 2))
    return ControlPulse(channels, duration / segments, amps)


def optimize(
    params: SpinSystemParams,
    u_target: np.ndarray,
    config: GrapeConfig | None = None,
    segments: int = 500,
    duration: float = 0.015,
    initial: ControlPulse | None = None,
) -> GrapeResult:
    """Maximize the weighted ensemble fidelity by line-searched gradient ascent.

    The search direction is the gradient (``method="steepest"``) or a
    Polak-Ribière conjugate gradient that restarts on the gradient whenever it
    stops being an ascent direction. Steps are only accepted when they raise
    the fidelity, so the returned trace never decreases.
    """
    config = config or GrapeConfig()
    u_target = np.asarray(u_target, dtype=complex)
    _check_unitary(u_target)
    if u_target.shape[0] != 2**params.m:
        raise ValueError(f"target dimension {u_target.shape[0]} does not match {params.m} spins")
    pulse = initial if initial is not None else initial_pulse(params, segments, duration, config)
    ctrl = control_operators(params.m, pulse.channels)

    fid, grad = _ensemble(params, pulse, u_target, config, ctrl)
    trace = [fid]
    direction = grad.copy()
    prev_grad = grad
    step = None
    converged = fid >= config.fidelity_goal
    for it in range(config.max_iterations):
        if converged:
            break
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 == 0:
            break
        slope = float(np.sum(grad * direction))
        if slope <= 0:
            direction, slope = grad.copy(), gnorm2
        if step is None:
            step = config.initial_step / np.max(np.abs(direction))
        accepted = False
        for _ in range(config.max_backtracks):
            trial = pulse.with_amplitudes(pulse.amplitudes + step * direction)
            f_trial, _ = _ensemble(params, trial, u_target, config, ctrl, need_grad=False)
            if f_trial > fid:
                accepted = True
                break
            step *= config.backtrack
        if not accepted:
            if np.array_equal(direction, grad):
                log.info("line search stalled at iteration %d, fidelity %.6f", it, fid)
                break
            direction = grad.copy()  # retry along the plain gradient
            step = None
            continue
        pulse = trial
        fid, new_grad = _ensemble(params, pulse, u_target, config, ctrl)
        trace.append(fid)
        if config.method == "cg":
            beta = max(0.0, float(np.sum(new_grad * (new_grad - prev_grad))) / gnorm2)
            direction = new_grad + beta * direction
        else:
            direction = new_grad.copy()
        prev_grad = grad = new_grad
        step *= config.grow
        converged = fid >= config.fidelity_goal
        if it % 100 == 0:
            log.debug("iteration %d fidelity %.6f", it, fid)

    per_scale = {s: gate_fidelity(shaped_propagator(params, pulse, s), u_target) for s, _ in config.rf_scales}
    return GrapeResult(pulse, trace, converged, per_scale)
