"""Command-line entry point: ``forrelation <subcommand> ...``.

Every subcommand writes to stdout (or ``--out``) and exits 0 only when all of
its checks pass.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import circuit, compiler, core, density, experiment, grape
from .nmr import PLACEHOLDER_PARAMS, SpinSystemParams


def _read_instances(path: str) -> list[core.ForrelationInstance]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return core.load_instances(text)


def _params(path: str | None) -> SpinSystemParams:
    return SpinSystemParams.load(path) if path else PLACEHOLDER_PARAMS


def _write(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compute(args) -> int:
    lines = []
    for inst in _read_instances(args.instance):
        phi = core.forrelation(inst, guard=args.guard)
        label = core.classify(phi).label.value
        lines.append(f"{phi!r} {label}")
    _write(args, "\n".join(lines) + "\n")
    return 0


def cmd_search(args) -> int:
    hits = core.find_instances(args.target, args.k, args.n, args.limit)
    _write(args, "".join(inst.to_json() + "\n" for inst in hits))
    return 0


def cmd_simulate(args) -> int:
    lines, ok = [], True
    for inst in _read_instances(args.instance):
        ops = circuit.build_forrelation_circuit(inst, with_probe=args.probe)
        if args.probe:
            value = circuit.probe_expectation(inst, guard=args.guard)
            name = "probe_expectation"
        else:
            value = circuit.forrelation_amplitude(inst, guard=args.guard)
            name = "amplitude"
        ok &= abs(value - core.forrelation(inst, guard=args.guard)) <= 1e-10
        lines.append(f"{name}={value!r} quantum_queries={circuit.quantum_query_count(ops)}")
    _write(args, "\n".join(lines) + "\n")
    return 0 if ok else 1


def cmd_compile(args) -> int:
    params = _params(args.params)
    out, ok = [], True
    for inst in _read_instances(args.instance):
        ops = circuit.build_forrelation_circuit(inst, with_probe=not args.no_probe)
        seq = compiler.compile_circuit(ops, params)
        ideal = circuit.circuit_unitary(ops)
        pad = params.m - circuit.circuit_width(ops)
        ideal = np.kron(np.eye(2**pad), ideal)
        equivalent, _ = compiler.equivalent_up_to_phase(compiler.sequence_unitary(seq), ideal)
        ok &= equivalent
        out.append(f"# instance {inst.canonical_text()} equivalent={equivalent}\n" + seq.to_text())
    _write(args, "".join(out))
    return 0 if ok else 1


def cmd_grape(args) -> int:
    params = _params(args.params)
    inst = _read_instances(args.instance)[0]
    ops = circuit.build_forrelation_circuit(inst, with_probe=True)
    target = circuit.circuit_unitary(ops)
    config = grape.GrapeConfig(
        max_iterations=args.max_iterations, fidelity_goal=args.goal, seed=args.seed, method=args.method
    )
    result = grape.optimize(params, target, config, segments=args.segments, duration=args.duration)
    _write(args, result.pulse.to_csv())
    summary = {
        "iterations": result.iterations,
        "ensemble_fidelity": result.fidelity,
        "per_scale": {str(k): v for k, v in result.per_scale.items()},
        "converged": result.converged,
    }
    print(json.dumps(summary), file=sys.stderr)
    return 0 if result.converged else 1


def cmd_experiment(args) -> int:
    params = _params(args.params)
    if args.instances:
        instances = _read_instances(args.instances)
    else:
        instances = core.showcase_instances(2) + core.showcase_instances(3)
    flags = experiment.PipelineFlags(
        epsilon=args.epsilon,
        depolarizing_p=args.depolarize,
        grape=args.grape,
        segments=args.segments,
        duration=args.duration,
        grape_config=grape.GrapeConfig(fidelity_goal=args.goal, seed=args.seed, max_iterations=args.max_iterations),
        seed=args.seed,
    )
    report = experiment.run_experiment(instances, params, flags)
    _write(args, experiment.emit(report, args.format, pretty=args.pretty))
    for failure in report.failures:
        print(f"FAIL {failure}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_tomo(args) -> int:
    if args.expectations:
        expectations = density.expectations_from_csv(Path(args.expectations).read_text())
        rho = density.tomography(expectations)
        _write(args, rho.to_text())
        return 0
    inst = _read_instances(args.instance)[0]
    u = circuit.circuit_unitary(circuit.build_forrelation_circuit(inst, with_probe=True))
    rho = density.evolve(density.pseudo_pure(args.epsilon, inst.n + 1), u)
    _write(args, density.expectations_to_csv(density.all_expectations(rho)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forrelation", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write to this file instead of stdout")
        return p

    p = add("compute", cmd_compute, "exact Forrelation and its classification")
    p.add_argument("instance")
    p.add_argument("--guard", type=int, default=None, help="k*n enumeration limit")

    p = add("search", cmd_search, "find instances with a given Forrelation")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--limit", type=int, default=10)

    p = add("simulate", cmd_simulate, "statevector simulation of the query circuit")
    p.add_argument("instance")
    p.add_argument("--probe", action="store_true", help="read out through the probe qubit")
    p.add_argument("--guard", type=int, default=None)

    p = add("compile", cmd_compile, "compile the circuit to hard pulses and delays")
    p.add_argument("instance")
    p.add_argument("--params", help="spin system JSON (default: placeholder values)")
    p.add_argument("--no-probe", action="store_true", help="compile the probe-free circuit")

    p = add("grape", cmd_grape, "optimize one shaped pulse for the probe circuit")
    p.add_argument("instance")
    p.add_argument("--params")
    p.add_argument("--segments", type=int, default=500)
    p.add_argument("--duration", type=float, default=0.015)
    p.add_argument("--goal", type=float, default=0.995)
    p.add_argument("--max-iterations", type=int, default=2000)
    p.add_argument("--method", choices=("cg", "steepest"), default="cg")
    p.add_argument("--seed", type=int, default=0)

    p = add("experiment", cmd_experiment, "run the full pipeline and emit a report")
    p.add_argument("instances", nargs="?", help="instance file (default: the ten showcase instances)")
    p.add_argument("--params")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--pretty", action="store_true", help="round values to 4 decimals")
    p.add_argument("--grape", action="store_true", help="also run the GRAPE pathway")
    p.add_argument("--depolarize", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=density.DEFAULT_EPSILON)
    p.add_argument("--segments", type=int, default=500)
    p.add_argument("--duration", type=float, default=0.015)
    p.add_argument("--goal", type=float, default=0.995)
    p.add_argument("--max-iterations", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = add("tomo", cmd_tomo, "state tomography: reconstruct, or emit simulated expectations")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--expectations", help="CSV of pauli_word,expectation to invert")
    src.add_argument("--instance", help="emit expectations of this instance's final state")
    p.add_argument("--epsilon", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
