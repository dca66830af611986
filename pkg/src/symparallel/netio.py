"""JSON network and circuit files, trajectory CSV."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (IntegratorConfig, InvalidInputError, SpinNetwork, evolve_batch,
                       relaxed_cut)

__all__ = [
    "DataError",
    "network_to_json",
    "network_from_json",
    "save_network",
    "load_network",
    "CircuitConfig",
    "load_circuit",
    "write_trajectory_csv",
]


class DataError(InvalidInputError):
    """Unreadable or schema-violating input file."""


def network_to_json(net: SpinNetwork) -> dict:
    return {
        "n": net.n,
        "names": list(net.names),
        "roles": list(net.roles),
        "clamped": {str(k): v for k, v in sorted(net.clamped.items())},
        "edges": [[m, k, w] for m, k, w in net.edges()],
    }


def network_from_json(doc: dict) -> SpinNetwork:
    try:
        n = int(doc["n"])
        edges = [(int(m), int(k), float(w)) for m, k, w in doc.get("edges", [])]
        clamped = {int(k): float(v) for k, v in doc.get("clamped", {}).items()}
        roles = tuple(doc.get("roles", ()))
        names = tuple(doc.get("names", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed network document: {exc}") from None
    for m, k, _ in edges:
        if not (0 <= m < n and 0 <= k < n):
            raise DataError(f"edge ({m}, {k}) out of range for n={n}")
    seen = set()
    for m, k, _ in edges:
        key = (min(m, k), max(m, k))
        if key in seen:
            raise DataError(f"duplicate edge {key}")
        seen.add(key)
    return SpinNetwork.from_edges(n, edges, clamped=clamped, roles=roles, names=names)


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def save_network(net: SpinNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_json(net), indent=1) + "\n")


def load_network(path) -> SpinNetwork:
    return network_from_json(_read_json(path))


@dataclass(frozen=True)
class CircuitConfig:
    """Circuit description file.

    ``type`` is ``"adder"``, ``"and_or"`` or ``"fa"``.  For adders the
    inputs are decimal strings and ``order`` lists flip positions (0 is the
    carry-in, k the pair x_k, y_k).  For gates the inputs are bits and
    ``order`` is a list of argument-name groups in flip order.
    """

    type: str
    n_bits: int = 1
    condition: bool = False
    seed: int = 0
    inputs: dict = field(default_factory=dict)
    order: tuple = ()
    arc: tuple = (0.1, 1.9)

    @classmethod
    def from_json(cls, doc: dict, where: str = "<config>") -> "CircuitConfig":
        if not isinstance(doc, dict):
            raise DataError(f"{where}: top level must be an object")
        kind = doc.get("type")
        if kind not in ("adder", "and_or", "fa"):
            raise DataError(f"{where}: type must be adder, and_or or fa, got {kind!r}")
        try:
            arc = tuple(float(v) for v in doc.get("arc", (0.1, 1.9)))
            inputs = {str(k): int(str(v)) for k, v in doc.get("inputs", {}).items()}
            if kind == "adder":
                order = tuple(int(g) for g in doc.get("order", ()))
            else:
                order = tuple(tuple(str(a) for a in (g if isinstance(g, list) else [g]))
                              for g in doc.get("order", ()))
            cfg = cls(type=kind, n_bits=int(doc.get("N", 1)), condition=bool(doc.get("condition", False)),
                      seed=int(doc.get("seed", 0)), inputs=inputs, order=order, arc=arc)
        except (TypeError, ValueError) as exc:
            raise DataError(f"{where}: {exc}") from None
        if len(arc) != 2:
            raise DataError(f"{where}: arc needs two values")
        return cfg

    def to_json(self) -> dict:
        order = list(self.order) if self.type == "adder" else [list(g) for g in self.order]
        return {"type": self.type, "N": self.n_bits, "condition": self.condition,
                "seed": self.seed, "inputs": {k: str(v) for k, v in self.inputs.items()},
                "order": order, "arc": list(self.arc)}


def load_circuit(path) -> CircuitConfig:
    return CircuitConfig.from_json(_read_json(path), str(path))


def write_trajectory_csv(net: SpinNetwork, initial, cfg: IntegratorConfig, path,
                         every: float = 0.05) -> int:
    """Dump ``t, theta_0..theta_{n-1}, C_V2`` rows; returns the row count."""
    if every <= 0:
        raise InvalidInputError("sampling interval must be positive")
    times = list(np.arange(0.0, cfg.t_max + 0.5 * every, every))
    res = evolve_batch(net, np.asarray(initial, dtype=float), cfg, times=times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"theta_{k}" for k in range(net.n)] + ["C_V2"])
        for t, snap in zip(res.times, res.snapshots):
            theta = snap[0]
            w.writerow([repr(float(t))] + [repr(float(v)) for v in theta]
                       + [repr(relaxed_cut(net, theta, cfg.epsilon))])
    return len(res.times)
