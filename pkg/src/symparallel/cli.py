"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 data error, 3 capacity error.
The default output directory comes from ``SYMPARALLEL_OUT`` (else ``.``).
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import replace

from .circuits import and_or_gate, decode_gate_chain, decode_outputs, full_adder
from .dynamics import IntegratorConfig, InvalidInputError, evolve, sample_initial
from .experiments import ExperimentConfig, build_adder, build_gate, run, write_report
from .netio import DataError, load_circuit, load_network
from .oracle import CapacityError, enumerate_nontrivial_chains, restricted_ground_state, truth
from .symmetry import chain_readout, verify_cut_invariance

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY = 0, 1, 2, 3
OUT_ENV = "SYMPARALLEL_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _integrator(args, base: IntegratorConfig | None = None) -> IntegratorConfig:
    cfg = base or IntegratorConfig()
    over = {k: getattr(args, k) for k in ("dt", "epsilon") if getattr(args, k, None) is not None}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    return replace(cfg, **over)


def _emit(doc, args):
    text = json.dumps(doc, indent=1)
    if getattr(args, "out", None) and args.command in ("enumerate-chains", "verify-gate", "readout"):
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.command}.json")
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _experiment(args) -> int:
    circuit = load_circuit(args.config)
    if args.command == "run-adder" and circuit.type != "adder":
        raise DataError(f"{args.config}: run-adder needs an adder circuit")
    if args.command == "run-gate" and circuit.type == "adder":
        raise DataError(f"{args.config}: run-gate needs an and_or or fa circuit")
    cfg = ExperimentConfig(
        circuit=circuit,
        durations=tuple(args.durations),
        trials=args.trials,
        mode=args.mode,
        integrator=_integrator(args),
        seed=args.seed if args.seed is not None else 0,
    )
    report = run(cfg)
    out = args.out or os.environ.get(OUT_ENV, ".")
    stem = "gate" if args.command == "run-gate" else f"adder_{cfg.mode}"
    csv_path, json_path = write_report(report, out, stem)
    summary = {"csv": str(csv_path), "json": str(json_path),
               "all_correct": report.all_correct.tolist(), "trials": report.trials}
    print(json.dumps(summary))
    return EXIT_OK


def _enumerate(args) -> int:
    groups = None
    if args.groups:
        groups = [tuple(int(a) for a in g.split(",")) for g in args.groups.split(";")]
    c = enumerate_nontrivial_chains(args.function, groups)
    _emit({
        "function": args.function,
        "total": c.total,
        "broken": [{"base": list(b), "steps": [list(s) for s in st]} for b, st in c.broken],
        "total_inversion_reversal_quotient": c.total_inversion_quotient,
        "broken_inversion_reversal_quotient": c.broken_inversion_quotient,
    }, args)
    return EXIT_OK


def _verify_gate(args) -> int:
    if args.gate in ("and", "or"):
        gate = and_or_gate(1 if args.gate == "and" else -1)
        fn = args.gate
    else:
        gate, fn = full_adder(), "fa"
    free_args = gate.input_nodes
    rows, ok = [], True
    for bits in itertools.product((-1, 1), repeat=len(free_args)):
        clamp = dict(zip(free_args, bits))
        for k in gate.fixed_nodes:
            clamp[k] = 1 if gate.net.clamped[k] >= 0 else -1
        gs = restricted_ground_state(gate.net, clamp)
        got = tuple(int(gs.sigma[k]) for k in gate.output_nodes)
        want = truth(fn, bits)
        ok &= got == want and len(gs.ties) == 1
        rows.append({"inputs": list(bits), "outputs": list(got), "expected": list(want),
                     "energy": gs.energy, "ties": len(gs.ties)})
    _emit({"gate": args.gate, "ok": bool(ok), "rows": rows}, args)
    return EXIT_OK if ok else EXIT_DATA


def _readout(args) -> int:
    cfg = _integrator(args)
    if args.network:
        net = load_network(args.network)
        cfg = replace(cfg, t_max=args.t_max)
        term = evolve(net, sample_initial(net, cfg), cfg)
        chain = chain_readout(term.points, cfg.cluster_tolerance, net)
        lo, hi, inv = verify_cut_invariance(net, term.points, cfg.cluster_tolerance)
        doc = {"converged": term.converged, "elapsed": term.elapsed,
               "theta": term.points.tolist(), "chain": chain.to_json(),
               "cut_min": lo, "cut_max": hi, "cut_invariant": inv}
    elif args.config:
        circuit = load_circuit(args.config)
        cfg = replace(cfg, t_max=args.t_max)
        if circuit.type == "adder":
            adder, net, enc = build_adder(circuit)
            term = evolve(net, sample_initial(net, cfg), cfg)
            decoded = decode_outputs(term, enc, adder, cfg.cluster_tolerance)
            doc = {"converged": term.converged, "encoding": enc.to_json(),
                   "branches": [{"flip_set": list(d.flipped), "observed": str(d.observed_sum),
                                 "expected": str(d.expected_sum), "correct": d.correct,
                                 "certified": d.certified, "r": d.rotation} for d in decoded]}
        else:
            gate, net, enc = build_gate(circuit)
            term = evolve(net, sample_initial(net, cfg), cfg)
            rows = decode_gate_chain(gate, term.points, enc, cfg.cluster_tolerance)
            doc = {"converged": term.converged,
                   "chain": [{"r": r, "args": list(a), "expected": list(e), "observed": list(o)}
                             for r, a, e, o in rows]}
    else:
        raise InvalidInputError("readout needs --network or --config")
    _emit(doc, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symparallel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, experiment=False):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        if experiment:
            sp.add_argument("--config", required=True, help="circuit description (JSON)")
            sp.add_argument("--trials", type=_positive_int, default=100)
            sp.add_argument("--durations", type=_floats, default=[1.0, 5.0, 20.0])
            sp.add_argument("--mode", choices=("concurrent", "sequential"), default="concurrent")

    common(sub.add_parser("run-gate", help="Monte Carlo chain success for one gate"), True)
    common(sub.add_parser("run-adder", help="Monte Carlo branch success for an adder"), True)
    sp = sub.add_parser("enumerate-chains", help="chain census for a gate function")
    sp.add_argument("--function", default="and_or", choices=("and_or", "fa", "maj"))
    sp.add_argument("--groups", help="argument groups, e.g. '0,1;2'")
    sp.add_argument("--out")
    sp = sub.add_parser("verify-gate", help="restricted ground states against truth tables")
    sp.add_argument("--gate", default="and", choices=("and", "or", "fa"))
    sp.add_argument("--out")
    sp = sub.add_parser("readout", help="evolve once and print the rotation readout")
    sp.add_argument("--network", help="network file (JSON)")
    sp.add_argument("--config", help="circuit description (JSON)")
    sp.add_argument("--t-max", type=float, default=50.0)
    common(sp)
    return p


_HANDLERS = {
    "run-gate": _experiment,
    "run-adder": _experiment,
    "enumerate-chains": _enumerate,
    "verify-gate": _verify_gate,
    "readout": _readout,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (InvalidInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
