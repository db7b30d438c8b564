"""End-to-end pipeline: PPS preparation, one unitary per pathway, calibrated probe readout, QST."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import build_forrelation_circuit, circuit_unitary, forrelation_amplitude, quantum_query_count
from .compiler import compile_circuit, equivalent_up_to_phase, sequence_unitary
from .core import ForrelationInstance, classical_query_cost, classify, forrelation_bruteforce
from .density import (
    DEFAULT_EPSILON,
    DensityMatrix,
    all_expectations,
    depolarize,
    evolve,
    expect_pauli,
    fidelity,
    pseudo_pure,
    tomography,
)
from .grape import GrapeConfig, gate_fidelity, optimize
from .nmr import SpinSystemParams, shaped_propagator

log = logging.getLogger(__name__)

SKIPPED = "skipped"

COLUMNS = (
    "id",
    "k",
    "n",
    "oracles",
    "target",
    "phi_bruteforce",
    "phi_circuit",
    "probe_ideal",
    "probe_pulse",
    "probe_grape",
    "class_bruteforce",
    "class_ideal",
    "class_pulse",
    "class_grape",
    "depolarizing_p",
    "compile_ok",
    "pulses",
    "delays",
    "grape_fidelity",
    "grape_spread",
    "final_state_fidelity",
    "tomography_error",
    "quantum_queries",
    "classical_queries_memoized",
    "classical_queries_plain",
)


class ExperimentError(RuntimeError):
    def __init__(self, instance_id: str, stage: str, cause: Exception):
        super().__init__(f"instance {instance_id}, stage {stage}: {cause}")
        self.instance_id = instance_id
        self.stage = stage


@dataclass
class PipelineFlags:
    epsilon: float = DEFAULT_EPSILON
    depolarizing_p: float = 0.0
    grape: bool = False
    segments: int = 500
    duration: float = 0.015
    grape_config: GrapeConfig = field(default_factory=GrapeConfig)
    fluctuation_draws: int = 20
    rf_spread: float = 0.05
    seed: int = 0


@dataclass
class ExperimentReport:
    records: list[dict]
    meta: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def probe_word(n: int) -> str:
    return "Z" + "I" * n


def calibrated_probe(u: np.ndarray, n: int, epsilon: float, p: float = 0.0) -> tuple[float, DensityMatrix]:
    """Run u on the PPS and return <Z_probe> divided by the PPS calibration signal."""
    rho0 = pseudo_pure(epsilon, n + 1)
    calibration = expect_pauli(rho0, probe_word(n))
    rho = evolve(rho0, u)
    if p:
        rho = depolarize(rho, p)
    return expect_pauli(rho, probe_word(n)) / calibration, rho


def grape_fluctuation(
    params: SpinSystemParams, pulse, instance: ForrelationInstance, draws: int, spread: float, seed: int,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[float, list[float]]:
    """Spread (max - min) of the calibrated probe signal over random RF scale draws."""
    rng = np.random.default_rng(seed)
    values = []
    for scale in rng.uniform(1 - spread, 1 + spread, size=draws):
        u = shaped_propagator(params, pulse, float(scale))
        values.append(calibrated_probe(u, instance.n, epsilon)[0])
    return float(max(values) - min(values)), values


def _label(value) -> str:
    return SKIPPED if value == SKIPPED else classify(float(np.clip(value, -1, 1))).label.value


def run_instance(
    instance: ForrelationInstance, instance_id: str, params: SpinSystemParams, flags: PipelineFlags
) -> tuple[dict, list[str]]:
    failures: list[str] = []
    n, p = instance.n, flags.depolarizing_p

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:  # annotate and re-raise
            raise ExperimentError(instance_id, name, exc) from exc

    phi_bf = stage("bruteforce", forrelation_bruteforce, instance)
    phi_circ = stage("circuit", forrelation_amplitude, instance)
    ops = build_forrelation_circuit(instance, with_probe=True)
    u_ideal = stage("circuit", circuit_unitary, ops)

    probe_ideal, rho_ideal = stage("readout", calibrated_probe, u_ideal, n, flags.epsilon, p)
    scaled = probe_ideal / (1 - p) if p < 1 else phi_bf
    if abs(scaled - phi_bf) > 1e-8:
        failures.append(f"{instance_id}: ideal pathway {scaled!r} != brute force {phi_bf!r}")

    seq = stage("compile", compile_circuit, ops, params)
    u_pulse = stage("compile", sequence_unitary, seq)
    compile_ok, _ = equivalent_up_to_phase(u_pulse, u_ideal, 1e-8)
    if not compile_ok:
        failures.append(f"{instance_id}: compiled sequence is not equivalent to the circuit")
    probe_pulse, rho_pulse = stage("readout", calibrated_probe, u_pulse, n, flags.epsilon, p)
    if abs(probe_pulse - probe_ideal) > 1e-6:
        failures.append(f"{instance_id}: pulse pathway disagrees with ideal pathway")

    probe_grape = grape_fid = grape_spread = SKIPPED
    rho_measured = rho_pulse
    if flags.grape:
        result = stage(
            "grape", optimize, params, u_ideal, flags.grape_config, segments=flags.segments, duration=flags.duration
        )
        u_grape = shaped_propagator(params, result.pulse, 1.0)
        grape_fid = gate_fidelity(u_grape, u_ideal)
        probe_grape, rho_measured = stage("readout", calibrated_probe, u_grape, n, flags.epsilon, p)
        if not result.converged:
            failures.append(f"{instance_id}: GRAPE stopped at fidelity {result.fidelity:.6f}")
        if abs(probe_grape - probe_ideal) > 2 * (1 - grape_fid) + 1e-6:
            failures.append(f"{instance_id}: GRAPE pathway outside the pulse-fidelity budget")
        grape_spread, _ = stage(
            "fluctuation", grape_fluctuation, params, result.pulse, instance,
            flags.fluctuation_draws, flags.rf_spread, flags.seed, flags.epsilon,
        )
        if grape_spread > 0.01 * (1 - p):
            failures.append(f"{instance_id}: GRAPE probe spread {grape_spread:.4f} exceeds 0.01")

    rho_th = evolve(pseudo_pure(flags.epsilon, n + 1), u_ideal)
    rho_rec = stage("tomography", tomography, all_expectations(rho_measured))
    tomo_error = float(np.max(np.abs(rho_rec.matrix - rho_measured.matrix)))
    final_fid = fidelity(rho_rec.deviation(), rho_th.deviation())

    with_counters = instance.k * n <= 12
    record = {
        "id": instance_id,
        "k": instance.k,
        "n": n,
        "oracles": instance.canonical_text(),
        "target": SKIPPED if instance.target is None else instance.target,
        "phi_bruteforce": phi_bf,
        "phi_circuit": phi_circ,
        "probe_ideal": probe_ideal,
        "probe_pulse": probe_pulse,
        "probe_grape": probe_grape,
        "class_bruteforce": _label(phi_bf),
        "class_ideal": _label(probe_ideal),
        "class_pulse": _label(probe_pulse),
        "class_grape": _label(probe_grape),
        "depolarizing_p": p,
        "compile_ok": compile_ok,
        "pulses": seq.pulse_count,
        "delays": seq.delay_count,
        "grape_fidelity": grape_fid,
        "grape_spread": grape_spread,
        "final_state_fidelity": final_fid,
        "tomography_error": tomo_error,
        "quantum_queries": quantum_query_count(ops),
        "classical_queries_memoized": classical_query_cost(instance.k, n, True),
        "classical_queries_plain": classical_query_cost(instance.k, n, False),
    }
    if with_counters:
        from .core import instrumented_forrelation

        for memo, key in ((True, "classical_queries_memoized"), (False, "classical_queries_plain")):
            _, oracles = instrumented_forrelation(instance, memoized=memo)
            counted = sum(o.classical_queries for o in oracles)
            if counted != record[key]:
                failures.append(f"{instance_id}: counted {counted} classical queries, expected {record[key]}")
    if tomo_error > 1e-10:
        failures.append(f"{instance_id}: tomography round trip error {tomo_error:.3e}")
    return record, failures


def default_ids(instances: Sequence[ForrelationInstance]) -> list[str]:
    counters: dict[int, int] = {}
    ids = []
    for inst in instances:
        counters[inst.k] = counters.get(inst.k, 0) + 1
        ids.append(f"{inst.k}-{counters[inst.k]}")
    return ids


def run_experiment(
    instances: Sequence[ForrelationInstance],
    params: SpinSystemParams,
    flags: PipelineFlags | None = None,
    ids: Sequence[str] | None = None,
) -> ExperimentReport:
    flags = flags or PipelineFlags()
    ids = list(ids) if ids is not None else default_ids(instances)
    records, failures = [], []
    for inst, inst_id in zip(instances, ids):
        log.info("running instance %s", inst_id)
        record, problems = run_instance(inst, inst_id, params, flags)
        records.append(record)
        failures += problems
    meta = {
        "epsilon": flags.epsilon,
        "depolarizing_p": flags.depolarizing_p,
        "grape": flags.grape,
        "seed": flags.seed,
        "params": params.to_dict(),
    }
    if flags.grape:
        meta.update(segments=flags.segments, duration=flags.duration, goal=flags.grape_config.fidelity_goal)
    return ExperimentReport(records, meta, failures)


def _pretty(value):
    if isinstance(value, float):
        return round(value, 4)
    return value


def emit(report: ExperimentReport, fmt: str = "json", pretty: bool = False) -> str:
    """Serialize a report. CSV columns follow ``COLUMNS``; JSON also keeps meta and failures."""
    records = [{c: (_pretty(r[c]) if pretty else r[c]) for c in COLUMNS} for r in report.records]
    if fmt == "json":
        doc = {"meta": report.meta, "records": records, "failures": report.failures}
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in r.items()})
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def report_from_json(text: str) -> ExperimentReport:
    doc = json.loads(text)
    return ExperimentReport(doc["records"], doc.get("meta", {}), doc.get("failures", []))
