"""Monte Carlo success-probability experiments on encoded circuits."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .circuits import (DecodedBranch, GateSpec, and_or_gate, decode_gate_chain, decode_outputs,
                       encode_branches, encode_gate, enumerate_branches, full_adder,
                       gate_arg_nodes, ripple_carry_adder)
from .dynamics import (IntegratorConfig, InvalidInputError, SpinNetwork, evolve_batch,
                       sample_initial)
from .netio import CircuitConfig
from .symmetry import snap_clusters

__all__ = [
    "ExperimentConfig",
    "SuccessReport",
    "GroupStats",
    "build_adder",
    "build_gate",
    "initial_states",
    "run_concurrent",
    "run_sequential",
    "run_gate",
    "run",
    "group_analysis",
    "write_report",
    "__version__",
]

__version__ = "0.1.0"
MODES = ("concurrent", "sequential")


@dataclass(frozen=True)
class ExperimentConfig:
    circuit: CircuitConfig
    durations: tuple = (1.0, 5.0, 20.0)
    trials: int = 100
    mode: str = "concurrent"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        durations = tuple(float(d) for d in self.durations)
        object.__setattr__(self, "durations", durations)
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        if not durations or any(d < 0 for d in durations):
            raise InvalidInputError("durations must be non-negative and non-empty")
        if any(b <= a for a, b in zip(durations, durations[1:])):
            raise InvalidInputError("durations must be strictly increasing")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}")

    def to_json(self) -> dict:
        return {
            "circuit": self.circuit.to_json(),
            "durations": list(self.durations),
            "trials": self.trials,
            "mode": self.mode,
            "integrator": asdict(self.integrator),
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SuccessReport:
    """``successes[d, b]`` counts trials whose branch ``b`` decoded
    correctly after duration ``durations[d]``."""

    mode: str
    durations: list
    labels: list  # one per branch; the group inverted to reach it
    expected: list  # expected result per branch
    trials: int
    successes: np.ndarray
    all_correct: np.ndarray  # (D,) trials with every branch right
    metadata: dict = field(default_factory=dict)

    @property
    def probability(self) -> np.ndarray:
        return self.successes / self.trials

    def rows(self) -> list[dict]:
        out = []
        for d, dur in enumerate(self.durations):
            for b, label in enumerate(self.labels):
                k = int(self.successes[d, b])
                ci = binomtest(k, self.trials).proportion_ci(method="wilson")
                out.append({
                    "duration": dur, "branch_id": b, "flip_set": label,
                    "trials": self.trials, "successes": k,
                    "probability": k / self.trials,
                    "ci_low": ci.low, "ci_high": ci.high,
                })
        return out

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "durations": list(self.durations),
            "trials": self.trials,
            "branches": [{"branch_id": b, "flip_set": l, "expected": str(e)}
                         for b, (l, e) in enumerate(zip(self.labels, self.expected))],
            "successes": self.successes.tolist(),
            "all_correct": self.all_correct.tolist(),
            "groups": [g.to_json() for g in group_analysis(self)],
            "metadata": self.metadata,
        }


def build_adder(circuit: CircuitConfig):
    """``(adder, clamped_net, encoding)`` for an adder circuit file."""
    if circuit.type != "adder":
        raise InvalidInputError("circuit is not an adder")
    adder = ripple_carry_adder(circuit.n_bits, condition=circuit.condition, seed=circuit.seed)
    inp = circuit.inputs
    clamps, enc = encode_branches(adder, inp.get("x", 0), inp.get("y", 0), inp.get("c_in", 0),
                                  circuit.order, circuit.arc)
    return adder, adder.net.with_clamps(clamps), enc


_GATE_ARGS = {"and_or": ("x", "y", "f"), "fa": ("x", "y", "c_in")}


def build_gate(circuit: CircuitConfig):
    """``(gate, clamped_net, encoding)`` for an AND/OR or FA circuit file."""
    names = _GATE_ARGS.get(circuit.type)
    if names is None:
        raise InvalidInputError("circuit is not a gate")
    gate = and_or_gate() if circuit.type == "and_or" else full_adder()
    bits = []
    for a in names:
        v = circuit.inputs.get(a, 1 if a == "f" else 0)
        if v not in (-1, 0, 1):
            raise InvalidInputError(f"gate input {a} must be a bit")
        bits.append(1 if v == 1 else -1)
    order = circuit.order or tuple((a,) for a in names)
    try:
        groups = [tuple(names.index(a) for a in g) for g in order]
    except ValueError:
        raise InvalidInputError(f"order may only name {names}") from None
    clamps, enc = encode_gate(gate, bits, groups, circuit.arc)
    return gate, gate.net.with_clamps(clamps), enc


def initial_states(net: SpinNetwork, trials: int, seed: int) -> np.ndarray:
    """One uniform random state per trial from the sub-seed (seed, trial)."""
    cfg = IntegratorConfig(seed=seed)
    return np.array([sample_initial(net, cfg, np.random.default_rng([seed, t]))
                     for t in range(trials)])


def _metadata(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "config_hash": cfg.config_hash(), "version": __version__}


def _adder_labels(enc):
    labels, expected = [], []
    for b in enumerate_branches(enc):
        labels.append(str(b.flipped[-1]) if b.flipped else "∅")
        expected.append(b.expected_sum)
    return labels, expected


def _score(decoded: Sequence[Sequence[DecodedBranch]]):
    ok = np.array([[d.correct for d in row] for row in decoded], dtype=bool)
    return ok.sum(axis=0), int(ok.all(axis=1).sum())


def run_concurrent(cfg: ExperimentConfig) -> SuccessReport:
    """All FAs evolve together; every duration is a snapshot of the same
    trajectories."""
    adder, net, enc = build_adder(cfg.circuit)
    icfg = replace(cfg.integrator, t_max=cfg.durations[-1])
    tol = icfg.cluster_tolerance
    init = initial_states(net, cfg.trials, cfg.seed)
    res = evolve_batch(net, init, icfg, times=cfg.durations)
    labels, expected = _adder_labels(enc)
    succ = np.zeros((len(cfg.durations), len(labels)), dtype=int)
    full = np.zeros(len(cfg.durations), dtype=int)
    for d, snap in enumerate(res.snapshots):
        decoded = [decode_outputs(p, enc, adder, tol) for p in snap]
        succ[d], full[d] = _score(decoded)
    return SuccessReport("concurrent", list(cfg.durations), labels, expected, cfg.trials,
                         succ, full, _metadata(cfg))


def _fa_subnet(adder: GateSpec, net: SpinNetwork, k: int):
    nodes = sorted([adder.x_nodes[k], adder.y_nodes[k], adder.s_nodes[k],
                    adder.c_nodes[k], adder.c_nodes[k + 1]])
    local = {g: i for i, g in enumerate(nodes)}
    a = net.weights[np.ix_(nodes, nodes)]
    clamps = {local[g]: net.clamped.get(g, 0.0)
              for g in (adder.x_nodes[k], adder.y_nodes[k], adder.c_nodes[k])}
    sub = SpinNetwork(a, clamped=clamps, names=tuple(net.names[g] for g in nodes))
    return sub, nodes


def run_sequential(cfg: ExperimentConfig) -> SuccessReport:
    """FAs evolve one at a time in bit order for each duration.

    After FA k stops, its state is snapped to its clusters and the carry-out
    is clamped there as FA k+1's carry-in.
    """
    adder, net, enc = build_adder(cfg.circuit)
    tol = cfg.integrator.cluster_tolerance
    init = initial_states(net, cfg.trials, cfg.seed)
    labels, expected = _adder_labels(enc)
    succ = np.zeros((len(cfg.durations), len(labels)), dtype=int)
    full = np.zeros(len(cfg.durations), dtype=int)
    subs = [_fa_subnet(adder, net, k) for k in range(adder.n_bits)]
    for d, dur in enumerate(cfg.durations):
        icfg = replace(cfg.integrator, t_max=dur)
        theta = init.copy()
        for sub, nodes in subs:
            res = evolve_batch(sub, theta[:, nodes], icfg, clamps_from_initial=True)
            for t in range(cfg.trials):
                theta[t, nodes] = snap_clusters(res.points[t], tol, sub)
        decoded = [decode_outputs(p, enc, adder, tol) for p in theta]
        succ[d], full[d] = _score(decoded)
    return SuccessReport("sequential", list(cfg.durations), labels, expected, cfg.trials,
                         succ, full, _metadata(cfg))


def run_gate(cfg: ExperimentConfig) -> SuccessReport:
    """Single gate: every chain position over a full rotation is a branch."""
    gate, net, enc = build_gate(cfg.circuit)
    icfg = replace(cfg.integrator, t_max=cfg.durations[-1])
    tol = icfg.cluster_tolerance
    init = initial_states(net, cfg.trials, cfg.seed)
    res = evolve_batch(net, init, icfg, times=cfg.durations)
    ref = decode_gate_chain(gate, init[0], enc)
    labels = [",".join(f"{a:+d}" for a in args) for _, args, _, _ in ref]
    expected = [",".join(f"{a:+d}" for a in e) for _, _, e, _ in ref]
    succ = np.zeros((len(cfg.durations), len(labels)), dtype=int)
    full = np.zeros(len(cfg.durations), dtype=int)
    for d, snap in enumerate(res.snapshots):
        ok = np.array([[e == o for _, _, e, o in decode_gate_chain(gate, p, enc, tol)]
                       for p in snap], dtype=bool)
        succ[d], full[d] = ok.sum(axis=0), int(ok.all(axis=1).sum())
    return SuccessReport("concurrent", list(cfg.durations), labels, expected, cfg.trials,
                         succ, full, _metadata(cfg))


def run(cfg: ExperimentConfig) -> SuccessReport:
    if cfg.circuit.type != "adder":
        return run_gate(cfg)
    return run_sequential(cfg) if cfg.mode == "sequential" else run_concurrent(cfg)


@dataclass(frozen=True)
class GroupStats:
    expected: object
    branches: list
    mean: list  # per duration
    spread: list  # per duration, max - min probability inside the group

    def to_json(self) -> dict:
        return {"expected": str(self.expected), "branches": self.branches,
                "mean": self.mean, "spread": self.spread}


def group_analysis(report: SuccessReport) -> list[GroupStats]:
    """Branches sharing an expected result, ordered by that result."""
    groups: dict = {}
    for b, e in enumerate(report.expected):
        groups.setdefault(e, []).append(b)
    p = report.probability
    out = []
    for e in sorted(groups):
        idx = groups[e]
        sub = p[:, idx]
        out.append(GroupStats(e, [report.labels[b] for b in idx],
                              sub.mean(axis=1).tolist(),
                              (sub.max(axis=1) - sub.min(axis=1)).tolist()))
    return out


def write_report(report: SuccessReport, out_dir, stem: str = "success") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    rows = report.rows()
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    json_path.write_text(json.dumps(report.to_json(), indent=1) + "\n")
    return csv_path, json_path
