"""Exhaustive ground truth for gate networks and bit-flip chains."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dynamics import InvalidInputError, SpinNetwork, rate, theta_of

__all__ = [
    "CapacityError",
    "FlipChain",
    "GroundState",
    "restricted_ground_state",
    "maj",
    "truth",
    "isotone_check",
    "ChainCensus",
    "enumerate_nontrivial_chains",
    "drift_sign_profile",
    "stable_boundaries",
    "stable_positions",
    "FUNCTIONS",
]

MAX_FREE = 24


class CapacityError(RuntimeError):
    """Problem too large for exhaustive enumeration."""


@dataclass(frozen=True)
class GroundState:
    sigma: np.ndarray
    energy: float
    ties: list  # every argmin configuration, lexicographically sorted


def _free_configs(k: int) -> np.ndarray:
    # lexicographic order with -1 < +1
    idx = np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)[None, :]
    return (2 * (idx & 1) - 1).astype(np.int8)


def restricted_ground_state(net: SpinNetwork, clamp_sigma: Mapping[int, int],
                            tol: float = 1e-9) -> GroundState:
    """Exact argmin of the Ising energy over free spins, given clamped ones."""
    n = net.n
    for k, v in clamp_sigma.items():
        if not 0 <= k < n or v not in (-1, 1):
            raise InvalidInputError(f"bad clamp {k}={v}")
    free = [k for k in range(n) if k not in clamp_sigma]
    if len(free) > MAX_FREE:
        raise CapacityError(f"{len(free)} free spins exceed the limit of {MAX_FREE}")
    base = np.zeros(n)
    for k, v in clamp_sigma.items():
        base[k] = v
    a = net.weights
    best, ties = np.inf, []
    chunk = 1 << 16
    configs_all = _free_configs(len(free))
    for start in range(0, len(configs_all), chunk):
        cfgs = configs_all[start:start + chunk]
        s = np.repeat(base[None, :], len(cfgs), axis=0)
        s[:, free] = cfgs
        e = 0.5 * np.einsum("ti,ij,tj->t", s, a, s)
        m = e.min()
        if m < best - tol:
            best, ties = m, []
        if m <= best + tol:
            ties.extend(s[e <= best + tol].astype(np.int8))
    ties.sort(key=lambda v: tuple(v))
    return GroundState(sigma=ties[0], energy=float(best), ties=ties)


def maj(*args: int) -> int:
    return 1 if sum(args) > 0 else -1


def _and_or(x, y, f=1):
    # sigma_f = +1 selects AND, -1 selects OR; both are MAJ(x, y, -f)
    return (maj(x, y, -f),)


def _fa(x, y, c):
    s = x * y * c  # XOR in the +-1 encoding
    return (s, maj(x, y, c))


FUNCTIONS: dict[str, Callable] = {
    "and_or": _and_or,
    "and": lambda x, y: _and_or(x, y, 1),
    "or": lambda x, y: _and_or(x, y, -1),
    "fa": _fa,
    "maj": lambda *a: (maj(*a),),
}


def truth(fn_id: str, args: Sequence[int]):
    """Boolean evaluation.

    Gate ids take +-1 spins and return a tuple of +-1 outputs.  ``adder_N``
    takes integers ``(x, y, c_in)`` and returns the integer sum.
    """
    if fn_id.startswith("adder_"):
        nbits = int(fn_id.split("_", 1)[1])
        x, y, c = (int(v) for v in args)
        if not (0 <= x < 2 ** nbits and 0 <= y < 2 ** nbits and c in (0, 1)):
            raise InvalidInputError(f"arguments out of range for {fn_id}")
        return x + y + c
    try:
        fn = FUNCTIONS[fn_id]
    except KeyError:
        raise InvalidInputError(f"unknown function {fn_id!r}") from None
    return tuple(int(v) for v in fn(*args))


@dataclass(frozen=True)
class FlipChain:
    """Bit-flip chain stored by its increments (disjoint index groups)."""

    steps: tuple
    arity: int

    def __post_init__(self):
        steps = tuple(tuple(sorted(s)) for s in self.steps)
        seen: set = set()
        for s in steps:
            if not s:
                raise InvalidInputError("chain increments must be non-empty")
            if seen & set(s):
                raise InvalidInputError("chain increments must be disjoint")
            if any(not 0 <= i < self.arity for i in s):
                raise InvalidInputError("chain index out of range")
            seen |= set(s)
        object.__setattr__(self, "steps", steps)

    def apply(self, base: Sequence[int]) -> list[tuple]:
        cur = list(base)
        out = [tuple(cur)]
        for s in self.steps:
            for i in s:
                cur[i] = -cur[i]
            out.append(tuple(cur))
        return out


def isotone_check(fn, base_args: Sequence[int], chain: FlipChain):
    """Evaluate ``fn`` along the chain; isotone iff every output bit
    changes at most once."""
    f = (lambda a: truth(fn, a)) if isinstance(fn, str) else fn
    outputs = [tuple(f(a)) for a in chain.apply(base_args)]
    ok = True
    for bit in range(len(outputs[0])):
        col = [o[bit] for o in outputs]
        if sum(col[k] != col[k + 1] for k in range(len(col) - 1)) > 1:
            ok = False
            break
    return ok, outputs


@dataclass(frozen=True)
class ChainCensus:
    total: int
    broken: list  # representative (base, steps) of each broken class
    total_inversion_quotient: int
    broken_inversion_quotient: int


_SYMMETRIES = {
    # argument permutations that leave the function unchanged
    "and_or": [(1, 0, 2)],
    "fa": [(1, 0, 2), (2, 1, 0), (0, 2, 1)],
}


def _ordered_partitions(items):
    items = list(items)
    if not items:
        yield ()
        return
    for k in range(1, len(items) + 1):
        for first in itertools.combinations(items, k):
            rest = [e for e in items if e not in first]
            for tail in _ordered_partitions(rest):
                yield (first,) + tail


def enumerate_nontrivial_chains(fn_id: str, groups: Sequence[Sequence[int]] | None = None,
                                arity: int | None = None, symmetries=None) -> ChainCensus:
    """Count argument chains up to symmetry and list the broken ones.

    A chain is a base argument vector plus an ordered arrangement of the
    argument groups on the phase circle (groups sharing a position flip
    together).  Chains with fewer than two positions are trivial unless the
    function has a single group.  Two quotients are reported:

    * ``total``/``broken``: argument symmetries of the function plus the
      phase-circle rotation (the chain seen from its next element onward);
    * ``*_inversion_quotient``: argument symmetries plus global inversion and
      reversal of traversal.
    """
    if arity is None:
        arity = {"and_or": 3, "fa": 3, "maj": 3, "and": 2, "or": 2}.get(fn_id)
        if arity is None:
            raise InvalidInputError("arity required for this function")
    if groups is None:
        groups = [(i,) for i in range(arity)]
    groups = [tuple(g) for g in groups]
    if len(groups) > 4:
        raise CapacityError("chain census supports at most 4 argument groups")
    perms = list(symmetries if symmetries is not None else _SYMMETRIES.get(fn_id, []))
    group_of = {}
    for gi, g in enumerate(groups):
        for a in g:
            group_of[a] = gi
    # keep only permutations that map groups onto groups
    valid_perms = []
    for p in perms:
        mapped = {tuple(sorted(p[a] for a in g)) for g in groups}
        if mapped == {tuple(sorted(g)) for g in groups}:
            valid_perms.append(p)

    min_blocks = 2 if len(groups) > 1 else 1
    chains = []
    for base in itertools.product((1, -1), repeat=arity):
        for part in _ordered_partitions(range(len(groups))):
            if len(part) >= min_blocks:
                steps = tuple(frozenset(a for gi in blk for a in groups[gi]) for blk in part)
                chains.append((base, steps))

    def invert(c):
        b, s = c
        return tuple(-v for v in b), s

    def reverse(c):
        b, s = c
        return tuple(-v for v in b), tuple(reversed(s))

    def rotate(c):
        b, s = c
        nb = list(b)
        for a in s[0]:
            nb[a] = -nb[a]
        return tuple(nb), s[1:] + s[:1]

    def permuter(p):
        inv = {p[i]: i for i in range(len(p))}

        def apply(c):
            b, s = c
            return (tuple(b[inv[i]] for i in range(len(b))),
                    tuple(frozenset(p[a] for a in blk) for blk in s))
        return apply

    def orbits(gens):
        seen, reps = set(), []
        for c in chains:
            if c in seen:
                continue
            orbit, stack = {c}, [c]
            while stack:
                d = stack.pop()
                for g in gens:
                    e = g(d)
                    if e not in orbit:
                        orbit.add(e)
                        stack.append(e)
            seen |= orbit
            reps.append(min(orbit, key=lambda c: (c[0], [sorted(b) for b in c[1]])))
        return reps

    def is_broken(c):
        b, s = c
        ok, _ = isotone_check(fn_id, b, FlipChain(tuple(s), arity))
        return not ok

    sym = [permuter(p) for p in valid_perms]
    main = orbits(sym + [rotate])
    alt = orbits(sym + [invert, reverse])
    broken = [(c[0], tuple(tuple(sorted(b)) for b in c[1])) for c in main if is_broken(c)]
    return ChainCensus(
        total=len(main),
        broken=broken,
        total_inversion_quotient=len(alt),
        broken_inversion_quotient=sum(1 for c in alt if is_broken(c)),
    )


def drift_sign_profile(net: SpinNetwork, free_node: int, placements: Mapping[int, float],
                       sigma_free: int = 1):
    """Sign of the free spin's rate in each interval between clamped X values.

    ``placements`` maps every other node to its theta.  Returns
    ``(boundaries, signs)`` where ``boundaries`` are the distinct X values in
    increasing order and ``signs[k]`` is the rate sign inside the k-th
    interval of [-1, 1) (leftmost first), evaluated with the free spin's
    discrete component fixed at ``sigma_free``.
    """
    others = [k for k in range(net.n) if k != free_node]
    if sorted(placements) != others:
        raise InvalidInputError("drift profile needs exactly one free spin")
    theta = np.zeros(net.n)
    for k, v in placements.items():
        theta[k] = v
    xs = np.unique(np.round(theta[others] - np.where(theta[others] >= 0, 1, -1), 12))
    edges = np.concatenate([[-1.0], xs, [1.0]])
    signs = []
    probe = SpinNetwork(net.weights, clamped={k: theta[k] for k in others},
                        roles=net.roles, names=net.names)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 0:
            continue
        t = theta.copy()
        t[free_node] = theta_of(sigma_free, 0.5 * (lo + hi))
        signs.append(int(np.sign(rate(probe, t)[free_node])))
    return xs, signs


def stable_boundaries(signs: Sequence[int]) -> list[tuple[int, int]]:
    """Stable equilibria of a single free spin on the double phase circle.

    The sign sequence on the sigma=-1 sheet is the negation of the +1 sheet.
    Returns ``(sigma, k)`` pairs: the free spin with discrete component
    ``sigma`` rests on the boundary between intervals ``k`` and ``k + 1``.
    """
    loop = [(1, s) for s in signs] + [(-1, -s) for s in signs]
    out = []
    m = len(loop)
    for k in range(m):
        (sa, a), (_, b) = loop[k], loop[(k + 1) % m]
        if a > 0 and b < 0:
            out.append((sa, k % len(signs)))
    return out


def stable_positions(xs: Sequence[float], signs: Sequence[int]) -> list[float]:
    """Theta of every stable boundary found by :func:`stable_boundaries`."""
    out = []
    for sigma, k in stable_boundaries(signs):
        if k < len(xs):
            out.append(float(theta_of(sigma, xs[k])))
        else:
            # right end of the sheet, where the free spin changes sheet
            out.append(float(theta_of(sigma, 1.0)))
    return out
