"""Spin-network gates, the ripple-carry adder and branch encodings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .dynamics import (InvalidInputError, SpinNetwork, TerminalState, cont_of,
                       detect_clusters, sigma_of, theta_of, wrap)
from .oracle import truth
from .symmetry import rotate, snap_clusters

__all__ = [
    "GateSpec",
    "BranchEncoding",
    "Branch",
    "DecodedBranch",
    "and_or_gate",
    "full_adder",
    "FA_WEIGHTS",
    "ripple_carry_adder",
    "condition_weights",
    "first_primes",
    "encode_branches",
    "enumerate_branches",
    "group_crossings",
    "readout_rotations",
    "read_adder",
    "decode_outputs",
    "ideal_terminal_state",
    "snap_to_groups",
    "DEFAULT_ARC",
    "GateEncoding",
    "encode_gate",
    "decode_gate_chain",
    "gate_chain_rotations",
    "gate_arg_nodes",
    "ideal_gate_state",
]

DEFAULT_ARC = (0.1, 1.9)

# H_FA couplings keyed by (node, node); o = carry-out, i = carry-in
FA_WEIGHTS = {
    ("o", "s"): 2.0, ("o", "x"): -2.0, ("o", "y"): -2.0, ("o", "i"): -2.0,
    ("s", "x"): -1.0, ("s", "y"): -1.0, ("s", "i"): -1.0,
    ("x", "y"): 1.0, ("x", "i"): 1.0, ("y", "i"): 1.0,
}


@dataclass(frozen=True)
class GateSpec:
    net: SpinNetwork
    input_nodes: tuple
    output_nodes: tuple
    fixed_nodes: tuple
    oracle: Callable
    kind: str = "gate"
    n_bits: int = 0
    # adder bookkeeping: node indices of x_k, y_k, s_k (k = 1..N) and c_0..c_N
    x_nodes: tuple = ()
    y_nodes: tuple = ()
    s_nodes: tuple = ()
    c_nodes: tuple = ()
    fa_edges: tuple = ()
    scale_factors: tuple = ()


def and_or_gate(sigma_f: int = 1) -> GateSpec:
    """AND (``sigma_f = +1``) / OR (``sigma_f = -1``) on nodes (x, y, a, f)."""
    if sigma_f not in (-1, 1):
        raise InvalidInputError("sigma_f must be +-1")
    edges = [(0, 1, 1.0), (0, 2, -2.0), (1, 2, -2.0), (0, 3, -1.0), (1, 3, -1.0), (2, 3, 2.0)]
    net = SpinNetwork.from_edges(
        4, edges,
        clamped={3: float(theta_of(sigma_f, 0.0))},
        roles=("input", "input", "output", "auxiliary_fixed"),
        names=("x", "y", "a", "f"),
    )
    return GateSpec(net, (0, 1), (2,), (3,), oracle=lambda x, y, f: truth("and_or", (x, y, f)),
                    kind="and_or")


def full_adder() -> GateSpec:
    names = ("x", "y", "c_in", "s", "c_out")
    short = {"x": 0, "y": 1, "i": 2, "s": 3, "o": 4}
    edges = [(short[a], short[b], w) for (a, b), w in FA_WEIGHTS.items()]
    net = SpinNetwork.from_edges(5, edges, roles=("input", "input", "input", "output", "output"),
                                 names=names)
    return GateSpec(net, (0, 1, 2), (3, 4), (), oracle=lambda x, y, c: truth("fa", (x, y, c)),
                    kind="fa", n_bits=1, x_nodes=(0,), y_nodes=(1,), s_nodes=(3,), c_nodes=(2, 4),
                    fa_edges=(tuple((short[a], short[b]) for (a, b) in FA_WEIGHTS),))


def _adder_oracle(n_bits):
    def oracle(x, y, c):
        return truth(f"adder_{n_bits}", (x, y, c))
    return oracle


def ripple_carry_adder(n_bits: int, condition: bool = False, seed: int = 0) -> GateSpec:
    """N full adders sharing carry nodes: c_k is FA k's carry-out and
    FA (k+1)'s carry-in.

    Node layout: ``x_1..x_N, y_1..y_N, s_1..s_N, c_0..c_N`` (4N + 1 nodes).
    """
    if not isinstance(n_bits, (int, np.integer)) or n_bits < 1:
        raise InvalidInputError("adder needs N >= 1 bits")
    n_bits = int(n_bits)
    xs = tuple(range(n_bits))
    ys = tuple(range(n_bits, 2 * n_bits))
    ss = tuple(range(2 * n_bits, 3 * n_bits))
    cs = tuple(range(3 * n_bits, 4 * n_bits + 1))
    n = 4 * n_bits + 1
    a = np.zeros((n, n))
    fa_edges = []
    for k in range(n_bits):
        node = {"x": xs[k], "y": ys[k], "s": ss[k], "i": cs[k], "o": cs[k + 1]}
        pairs = []
        for (p, q), w in FA_WEIGHTS.items():
            m, l = node[p], node[q]
            a[m, l] = a[l, m] = w
            pairs.append((m, l))
        fa_edges.append(tuple(pairs))
    roles = ["input"] * (2 * n_bits) + ["output"] * n_bits + ["input"] + \
            ["internal"] * (n_bits - 1) + ["output"]
    names = tuple([f"x{k + 1}" for k in range(n_bits)] + [f"y{k + 1}" for k in range(n_bits)]
                  + [f"s{k + 1}" for k in range(n_bits)] + [f"c{k}" for k in range(n_bits + 1)])
    adder = GateSpec(
        SpinNetwork(a, roles=tuple(roles), names=names),
        input_nodes=xs + ys + (cs[0],),
        output_nodes=ss + (cs[-1],),
        fixed_nodes=(),
        oracle=_adder_oracle(n_bits),
        kind="adder",
        n_bits=n_bits,
        x_nodes=xs, y_nodes=ys, s_nodes=ss, c_nodes=cs,
        fa_edges=tuple(fa_edges),
        scale_factors=(1.0,) * n_bits,
    )
    return condition_weights(adder, seed) if condition else adder


@lru_cache(maxsize=4)
def first_primes(count: int) -> np.ndarray:
    limit = max(16, int(count * (math.log(count + 2) + math.log(math.log(count + 3)) + 3)))
    while True:
        sieve = np.ones(limit + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, int(limit ** 0.5) + 1):
            if sieve[p]:
                sieve[p * p::p] = False
        primes = np.nonzero(sieve)[0]
        if len(primes) >= count:
            return primes[:count]
        limit *= 2


def condition_weights(adder: GateSpec, seed: int = 0, pool_size: int = 10_000,
                      boost: float = 1.1) -> GateSpec:
    """Break rational dependencies between FA weights.

    Inside FA k, the (x, c_out) and (y, c_out) couplings are scaled by
    ``boost``; then all ten couplings of FA k are scaled by
    ``sqrt(p_k) / floor(sqrt(p_k))`` with distinct primes drawn from the
    first ``pool_size`` primes.
    """
    if adder.kind != "adder":
        raise InvalidInputError("condition_weights expects a ripple-carry adder")
    n_bits = adder.n_bits
    pool = first_primes(max(pool_size, n_bits))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(pool, size=n_bits, replace=False)
    a = np.array(adder.net.weights)
    factors = []
    for k, pairs in enumerate(adder.fa_edges):
        p = int(chosen[k])
        factor = math.sqrt(p) / math.isqrt(p)
        factors.append(factor)
        out = adder.c_nodes[k + 1]
        for m, l in pairs:
            w = a[m, l]
            if out in (m, l) and ({m, l} & {adder.x_nodes[k], adder.y_nodes[k]}):
                w *= boost
            a[m, l] = a[l, m] = w * factor
    net = replace(adder.net, weights=a)
    return replace(adder, net=net, scale_factors=tuple(factors))


@dataclass(frozen=True)
class Branch:
    flipped: tuple  # group ids inverted so far (in flip order)
    x: int
    y: int
    c_in: int
    expected_sum: int

    @property
    def label(self) -> str:
        return "{" + ",".join(str(g) for g in self.flipped[-1:]) + "}" if self.flipped else "{}"


@dataclass(frozen=True)
class BranchEncoding:
    """Placement of adder input groups on the phase circle.

    Group 0 is the carry-in spin; group k (1..N) is the pair (x_k, y_k).
    ``offsets[g]`` is the shared continuous component of group g.
    """

    n_bits: int
    x: int
    y: int
    c_in: int
    order: tuple
    offsets: dict = field(default_factory=dict)

    @property
    def placement(self) -> list[tuple[int, float]]:
        return sorted(self.offsets.items(), key=lambda kv: -kv[1])

    @property
    def flip_sequence(self) -> list[int]:
        return [g for g, _ in self.placement]

    @property
    def branch_args(self) -> list[tuple[int, int, int]]:
        out = [(self.x, self.y, self.c_in)]
        x, y, c = self.x, self.y, self.c_in
        for g in self.order:
            if g == 0:
                c ^= 1
            else:
                bit = 1 << (g - 1)
                x ^= bit
                y ^= bit
            out.append((x, y, c))
        return out

    def to_json(self) -> dict:
        return {
            "n_bits": self.n_bits, "x": str(self.x), "y": str(self.y), "c_in": self.c_in,
            "order": list(self.order),
            "placement": [{"group": g, "x_offset": v} for g, v in self.placement],
            "branches": [{"flipped": list(b.flipped), "x": str(b.x), "y": str(b.y),
                          "c_in": b.c_in, "expected_sum": str(b.expected_sum)}
                         for b in enumerate_branches(self)],
        }


def _bit(v: int, k: int) -> int:
    return 1 if (v >> k) & 1 else -1


def encode_branches(adder: GateSpec, x: int, y: int, c_in: int, order: Sequence[int] = (),
                    arc: tuple = DEFAULT_ARC):
    """Clamp the adder inputs so that one rotation traverses ``order``.

    Listed groups get distinct continuous offsets descending from the top
    of ``arc`` (theta on the sigma=+1 sheet), so they flip first and in the
    listed order.  Unlisted groups share the lowest offset and flip last.
    Returns ``(clamps, encoding)``; ``clamps`` maps node index to theta.
    """
    n_bits = adder.n_bits
    order = tuple(int(g) for g in order)
    if len(set(order)) != len(order):
        raise InvalidInputError("duplicate positions in order")
    if any(not 0 <= g <= n_bits for g in order):
        raise InvalidInputError(f"positions must lie in 0..{n_bits}")
    if not (0 <= x < 2 ** n_bits and 0 <= y < 2 ** n_bits and c_in in (0, 1)):
        raise InvalidInputError("inputs out of range")
    lo, hi = arc
    if not -0.0 <= lo < hi <= 2.0:
        raise InvalidInputError("arc must satisfy 0 <= lo < hi <= 2")
    unlisted = [g for g in range(n_bits + 1) if g not in order]
    slots = len(order) + (1 if unlisted else 0)
    positions = np.linspace(hi, lo, slots) - 1.0 if slots > 1 else np.array([hi - 1.0])
    offsets = {g: float(positions[j]) for j, g in enumerate(order)}
    for g in unlisted:
        offsets[g] = float(positions[-1])
    enc = BranchEncoding(n_bits, int(x), int(y), int(c_in), order, offsets)
    clamps = {adder.c_nodes[0]: float(theta_of(1 if c_in else -1, offsets[0]))}
    for k in range(n_bits):
        clamps[adder.x_nodes[k]] = float(theta_of(_bit(x, k), offsets[k + 1]))
        clamps[adder.y_nodes[k]] = float(theta_of(_bit(y, k), offsets[k + 1]))
    return clamps, enc


def enumerate_branches(enc: BranchEncoding) -> list[Branch]:
    out = []
    for j, (x, y, c) in enumerate(enc.branch_args):
        out.append(Branch(tuple(enc.order[:j]), x, y, c, c + x + y))
    return out


def group_crossings(offsets: Sequence[float]) -> np.ndarray:
    """Rotation in [0, 2) at which a group with continuous offset X flips."""
    return np.mod(1.0 - np.asarray(offsets, dtype=float), 2.0)


def readout_rotations(enc: BranchEncoding) -> list[float]:
    """Midpoint rotation of each branch's readout interval."""
    listed = [enc.offsets[g] for g in enc.order]
    unlisted = sorted({v for g, v in enc.offsets.items() if g not in enc.order})
    r_listed = list(group_crossings(listed))
    if unlisted:
        r_last = float(group_crossings(unlisted[:1])[0])
        bounds = [r_last - 2.0] + r_listed + [r_last]
    else:
        bounds = [r_listed[-1] - 2.0] + r_listed + [r_listed[0] + 2.0]
    return [0.5 * (bounds[j] + bounds[j + 1]) for j in range(len(enc.order) + 1)]


def snap_to_groups(points, net: SpinNetwork, cluster_tol: float) -> np.ndarray:
    """Move every spin onto its cluster's continuous component, anchored
    on a clamped member when there is one."""
    return snap_clusters(points, cluster_tol, net)


def read_adder(adder: GateSpec, sigma) -> tuple[int, int, int, int]:
    """(x, y, c_in, sum) read from a +-1 configuration."""
    def to_int(nodes):
        return sum(1 << k for k, m in enumerate(nodes) if sigma[m] > 0)
    x = to_int(adder.x_nodes)
    y = to_int(adder.y_nodes)
    c = 1 if sigma[adder.c_nodes[0]] > 0 else 0
    total = to_int(adder.s_nodes) + ((1 << adder.n_bits) if sigma[adder.c_nodes[-1]] > 0 else 0)
    return x, y, c, total


@dataclass(frozen=True)
class DecodedBranch:
    flipped: tuple
    observed_sum: int
    expected_sum: int
    correct: bool
    inputs_match: bool
    certified: bool
    rotation: float


def decode_outputs(term: TerminalState | np.ndarray, enc: BranchEncoding, adder: GateSpec,
                   cluster_tol: float = 0.0, converged: bool | None = None) -> list[DecodedBranch]:
    """Rotate the terminal state to each branch's readout point and compare
    the read sum against exact integer addition."""
    if isinstance(term, TerminalState):
        points, converged = term.points, term.converged if converged is None else converged
    else:
        points = np.asarray(term, dtype=float)
        converged = True if converged is None else converged
    theta = snap_to_groups(points, adder.net, cluster_tol) if cluster_tol > 0 else points
    out = []
    for b, r in zip(enumerate_branches(enc), readout_rotations(enc)):
        sig = sigma_of(wrap(theta + r))
        x, y, c, total = read_adder(adder, sig)
        out.append(DecodedBranch(b.flipped, total, b.expected_sum, total == b.expected_sum,
                                 (x, y, c) == (b.x, b.y, b.c_in), bool(converged), float(r)))
    return out


def ideal_terminal_state(adder: GateSpec, clamps: dict, enc: BranchEncoding) -> np.ndarray:
    """Place every free spin where the exact chain of wire values says it
    must flip: in the group whose crossing inverts it.

    Raises ``InvalidInputError`` if some wire is not isotone along the chain.
    """
    n_bits = adder.n_bits
    unlisted = [g for g in range(n_bits + 1) if g not in enc.order]
    blocks = [(g,) for g in enc.order] + ([tuple(unlisted)] if unlisted else [])
    args = [(enc.x, enc.y, enc.c_in)]
    x, y, c = enc.x, enc.y, enc.c_in
    for block in blocks:
        for g in block:
            if g == 0:
                c ^= 1
            else:
                x ^= 1 << (g - 1)
                y ^= 1 << (g - 1)
        args.append((x, y, c))

    def wires(x, y, c):
        carries, sums = [c], []
        for k in range(n_bits):
            xb, yb = (x >> k) & 1, (y >> k) & 1
            t = xb + yb + carries[-1]
            sums.append(t & 1)
            carries.append(t >> 1)
        return sums, carries

    theta = np.zeros(adder.net.n)
    for k, v in clamps.items():
        theta[k] = v
    table = [wires(*a) for a in args]
    free_nodes = list(adder.s_nodes) + list(adder.c_nodes[1:])
    for node in free_nodes:
        if node in adder.s_nodes:
            vals = [t[0][adder.s_nodes.index(node)] for t in table]
        else:
            vals = [t[1][adder.c_nodes.index(node)] for t in table]
        changes = [j for j in range(len(vals) - 1) if vals[j] != vals[j + 1]]
        if len(changes) != 1:
            raise InvalidInputError(f"wire {adder.net.names[node]} is not isotone along the chain")
        g = blocks[changes[0]][0]
        theta[node] = theta_of(1 if vals[0] else -1, enc.offsets[g])
    return theta


@dataclass(frozen=True)
class GateEncoding:
    """Clamped argument spins of a gate, grouped and placed on the circle.

    ``groups[j]`` is a tuple of argument positions sharing offset
    ``offsets[j]``; ``args`` are the +-1 argument values at r = 0.
    """

    args: tuple
    groups: tuple
    offsets: tuple

    def crossings(self) -> list[float]:
        return sorted(set(group_crossings(self.offsets).tolist()))


def gate_arg_nodes(gate: GateSpec) -> tuple:
    return tuple(gate.input_nodes) + tuple(gate.fixed_nodes)


def encode_gate(gate: GateSpec, args: Sequence[int], groups: Sequence[Sequence[int]],
                arc: tuple = DEFAULT_ARC):
    """Clamp every gate argument; ``groups`` lists argument positions in
    flip order, members of one group sharing an offset.  Returns
    ``(clamps, encoding)``."""
    nodes = gate_arg_nodes(gate)
    args = tuple(int(a) for a in args)
    if len(args) != len(nodes) or any(a not in (-1, 1) for a in args):
        raise InvalidInputError(f"expected {len(nodes)} arguments in +-1")
    flat = [p for g in groups for p in g]
    if sorted(flat) != list(range(len(nodes))):
        raise InvalidInputError("groups must partition the argument positions")
    lo, hi = arc
    positions = np.linspace(hi, lo, len(groups)) - 1.0 if len(groups) > 1 \
        else np.array([hi - 1.0])
    clamps = {}
    for g, off in zip(groups, positions):
        for p in g:
            clamps[nodes[p]] = float(theta_of(args[p], off))
    enc = GateEncoding(args, tuple(tuple(g) for g in groups), tuple(float(v) for v in positions))
    return clamps, enc


def gate_chain_rotations(enc: GateEncoding) -> list[float]:
    """One readout rotation per interval between argument crossings over a
    full period, starting with the interval that contains r = 0."""
    c = enc.crossings()
    bounds = c + [v + 2.0 for v in c]
    mids = [0.0] + [0.5 * (a + b) for a, b in zip(bounds[:-1], bounds[1:])]
    return mids


def decode_gate_chain(gate: GateSpec, points, enc: GateEncoding, cluster_tol: float = 0.0):
    """Read arguments and outputs at every chain position.

    Returns a list of ``(r, args, expected, observed)`` tuples.
    """
    theta = snap_clusters(points, cluster_tol, gate.net)
    arg_nodes = gate_arg_nodes(gate)
    out = []
    for r in gate_chain_rotations(enc):
        sig = sigma_of(rotate(theta, r))
        args = tuple(int(sig[k]) for k in arg_nodes)
        expected = tuple(gate.oracle(*args))
        observed = tuple(int(sig[k]) for k in gate.output_nodes)
        out.append((float(r), args, expected, observed))
    return out


def ideal_gate_state(gate: GateSpec, clamps: dict, enc: GateEncoding) -> np.ndarray:
    """Each output placed on the group whose crossing flips it.

    Raises ``InvalidInputError`` when an output is not isotone along the
    half-period chain.
    """
    theta = np.zeros(gate.net.n)
    for k, v in clamps.items():
        theta[k] = v
    chain = [tuple(enc.args)]
    cur = list(enc.args)
    for g in enc.groups:
        for p in g:
            cur[p] = -cur[p]
        chain.append(tuple(cur))
    outs = [gate.oracle(*a) for a in chain]
    for j, node in enumerate(gate.output_nodes):
        vals = [o[j] for o in outs]
        changes = [i for i in range(len(vals) - 1) if vals[i] != vals[i + 1]]
        if len(changes) != 1:
            raise InvalidInputError(f"output {gate.net.names[node]} is not isotone along the chain")
        theta[node] = theta_of(vals[0], enc.offsets[changes[0]])
    return theta
