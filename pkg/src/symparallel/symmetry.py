"""Phase-circle rotation and the chain of configurations a state encodes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (CIRCUMFERENCE, SpinNetwork, circular_diff, cont_of, detect_clusters,
                       discrete_cut, sigma_of, theta_of, wrap)

__all__ = [
    "ChainEntry",
    "ChainReadout",
    "rotate",
    "critical_rotations",
    "chain_readout",
    "snap_clusters",
    "verify_cut_invariance",
    "same_cyclic_chain",
]

DEDUP = 1e-12


def rotate(points, r: float) -> np.ndarray:
    """Shift every spin, clamped or not, by ``r`` along the circle."""
    return wrap(np.asarray(points, dtype=float) + float(r))


def critical_rotations(points) -> list[float]:
    """Rotations in (0, 4] at which some spin crosses 0 or +-2.

    A spin at ``theta`` crosses at ``-theta`` and ``2 - theta`` (mod 4).
    A crossing at exactly 0 is reported as 4.
    """
    theta = np.asarray(points, dtype=float).ravel()
    if theta.size == 0:
        return []
    r = np.concatenate([np.mod(-theta, CIRCUMFERENCE), np.mod(2.0 - theta, CIRCUMFERENCE)])
    r = np.where(r <= 0.0, CIRCUMFERENCE, r)
    r.sort()
    out = [float(r[0])]
    for v in r[1:]:
        if v - out[-1] > DEDUP:
            out.append(float(v))
    return out


@dataclass(frozen=True)
class ChainEntry:
    r: float
    sigma: tuple
    flipped: frozenset


@dataclass(frozen=True)
class ChainReadout:
    entries: tuple
    base_sigma: tuple
    points: tuple = ()  # snapped theta the chain was read from

    def sigma_at(self, r: float) -> tuple:
        """Configuration at rotation ``r``; undefined exactly on a crossing."""
        return tuple(int(v) for v in sigma_of(rotate(np.array(self.points), r)))

    def states(self) -> list[tuple]:
        return [e.sigma for e in self.entries]

    def to_json(self) -> dict:
        return {
            "base_sigma": list(self.base_sigma),
            "entries": [{"r": e.r, "sigma": list(e.sigma), "flipped": sorted(e.flipped)}
                        for e in self.entries],
        }


def snap_clusters(points, cluster_tol: float, net: SpinNetwork | None = None) -> np.ndarray:
    """Put every member of a cluster on one continuous component.

    A clamped member (when ``net`` is given) is the anchor; otherwise the
    lowest-index member.  Each member moves to the anchor or its antipode,
    whichever is nearer, so a cluster straddling X = +-1 is handled like any
    other and discrete components change only for members that sat within
    the tolerance of a sheet boundary.
    """
    theta = np.array(points, dtype=float)
    if cluster_tol <= 0 or theta.size == 0:
        return theta
    clamped = net.clamped if net is not None else {}
    ref_theta = theta.copy()
    for cluster in detect_clusters(ref_theta, cluster_tol):
        anchors = [k for k in cluster if k in clamped]
        ref = ref_theta[anchors[0] if anchors else cluster[0]]
        for k in cluster:
            half_turns = np.round(circular_diff(ref_theta[k], ref) / 2.0)
            theta[k] = wrap(ref + 2.0 * half_turns) if half_turns else ref
    return theta


def chain_readout(points, cluster_tol: float = 0.0, net: SpinNetwork | None = None) -> ChainReadout:
    """Sample the discrete configuration once per interval between critical
    rotations over one full period.

    Entry 0 (r = 0) is sampled at the midpoint of the interval containing
    r = 0, so a spin sitting exactly on a boundary never decides the base
    state; later entries sit at the midpoints of the following intervals.
    Crossings within 1e-12 of each other, also across r = 0, count as one
    simultaneous flip.
    """
    theta = snap_clusters(points, cluster_tol, net)
    crit = critical_rotations(theta)
    if len(crit) > 1 and crit[0] + CIRCUMFERENCE - crit[-1] <= DEDUP:
        crit = crit[1:]
    if crit:
        start = 0.5 * (crit[-1] - CIRCUMFERENCE + crit[0])
        base = tuple(int(v) for v in sigma_of(rotate(theta, start)))
    else:
        base = ()
    entries = [ChainEntry(0.0, base, frozenset())]
    prev = base
    # past the last crossing the chain is back at the base configuration
    for lo, hi in zip(crit[:-1], crit[1:]):
        mid = 0.5 * (lo + hi)
        sig = tuple(int(v) for v in sigma_of(rotate(theta, mid)))
        flipped = frozenset(k for k in range(len(sig)) if sig[k] != prev[k])
        if flipped:
            entries.append(ChainEntry(float(mid), sig, flipped))
            prev = sig
    return ChainReadout(tuple(entries), base, tuple(float(v) for v in theta))


def verify_cut_invariance(net: SpinNetwork, points, cluster_tol: float = 0.0,
                          tol_abs: float = 1e-9) -> tuple[float, float, bool]:
    """Discrete cut over every configuration in the readout chain."""
    chain = chain_readout(points, cluster_tol, net)
    cuts = [discrete_cut(net, np.array(s)) for s in chain.states()]
    lo, hi = min(cuts), max(cuts)
    return lo, hi, (hi - lo) <= tol_abs


def same_cyclic_chain(a: ChainReadout, b: ChainReadout) -> bool:
    """True if the two chains visit the same configurations in the same
    cyclic order, whichever configuration each starts from."""
    sa, sb = a.states(), b.states()
    if len(sa) != len(sb):
        return False
    if not sa:
        return True
    return any(sb[k:] + sb[:k] == sa for k in range(len(sb)) if sb[k] == sa[0])
