"""Relaxed-spin states and the V2 gradient flow.

A relaxed spin is stored as a single canonical coordinate ``theta`` on a
circle of circumference 4, ``theta = sigma + X`` with ``theta`` in [-2, 2).
The discrete component is ``sigma = +1`` on [0, 2) and ``-1`` on [-2, 0);
the continuous component is ``X = theta - sigma`` in [-1, 1).  Crossing a
sector boundary is then a plain modular wrap, and the rotation of the phase
circle is a uniform shift of ``theta``.

In this coordinate the pair interaction only depends on the circular
difference ``u = theta_m - theta_n``::

    sigma_m sigma_n sgn(X_m - X_n) = sqw(u)     (square wave, period 4)
    1 - sigma_m sigma_n (1 - |X_m - X_n|) = tri(u)  (circular distance)

so ``rate_m = sum_n A_mn sqw(theta_m - theta_n)`` and the relaxed cut is
``1/4 sum_mn A_mn tri(theta_m - theta_n)``.  Regularization replaces
``sqw`` by a piecewise-linear ramp of half-width ``epsilon`` at both of its
jumps (u = 0 and u = 2), which keeps the flow exactly rotation-equivariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

__all__ = [
    "CIRCUMFERENCE",
    "PhasePoint",
    "SpinNetwork",
    "IntegratorConfig",
    "TerminalState",
    "BatchResult",
    "InvalidInputError",
    "NumericError",
    "wrap",
    "sigma_of",
    "cont_of",
    "theta_of",
    "circular_diff",
    "square_wave",
    "rate",
    "step",
    "evolve",
    "evolve_batch",
    "discrete_cut",
    "ising_energy",
    "cut_correction",
    "relaxed_cut",
    "detect_clusters",
    "sample_initial",
    "effective_dt",
]

CIRCUMFERENCE = 4.0
ROLES = ("input", "output", "auxiliary_fixed", "internal")


class InvalidInputError(ValueError):
    """Malformed network, state or configuration."""


class NumericError(ArithmeticError):
    """Non-finite values produced during integration."""


def wrap(theta):
    """Fold ``theta`` into [-2, 2)."""
    out = np.mod(np.asarray(theta, dtype=float) + 2.0, CIRCUMFERENCE) - 2.0
    # np.mod can return exactly 4.0 for tiny negative inputs
    return np.where(out >= 2.0, out - CIRCUMFERENCE, out)


def sigma_of(theta):
    return np.where(np.asarray(theta) >= 0.0, 1, -1).astype(np.int8)


def cont_of(theta):
    theta = np.asarray(theta, dtype=float)
    return theta - sigma_of(theta)


def theta_of(sigma, x):
    """Canonical coordinate from discrete and continuous components."""
    return wrap(np.asarray(sigma, dtype=float) + np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PhasePoint:
    """One relaxed spin; vectors of these are kept as float arrays of theta."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap(self.theta)))

    @property
    def sigma(self) -> int:
        return 1 if self.theta >= 0.0 else -1

    @property
    def x(self) -> float:
        return self.theta - self.sigma

    @classmethod
    def from_components(cls, sigma: int, x: float) -> "PhasePoint":
        if sigma not in (-1, 1):
            raise InvalidInputError(f"sigma must be +-1, got {sigma}")
        return cls(sigma + x)


def circular_diff(a, b):
    """``a - b`` folded into [-2, 2)."""
    return wrap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def _ramp_arg(u):
    # odd, continuous triangle wave: u near 0, (+-2 - u) near the antipode
    return np.where(np.abs(u) <= 1.0, u, np.copysign(2.0, u) - u)


def square_wave(u, epsilon: float = 0.0):
    """``sigma_m sigma_n sgn(X_m - X_n)`` as a function of ``theta_m - theta_n``.

    With ``epsilon == 0`` this is the exact sign with ``sgn(0) = 0``.
    """
    h = _ramp_arg(wrap(u))
    if epsilon > 0.0:
        return np.clip(h / epsilon, -1.0, 1.0)
    return np.sign(h)


def _smoothed_distance(u, epsilon: float):
    """Antiderivative of ``square_wave``; equals the circular distance
    outside the regularization bands."""
    w = wrap(u)
    aw = np.abs(w)
    if epsilon <= 0.0:
        return np.minimum(aw, CIRCUMFERENCE - aw)

    def huber(v):
        return np.where(v <= epsilon, v * v / (2 * epsilon), v - epsilon / 2)

    near = huber(aw) + epsilon / 2
    far = 2.0 - huber(2.0 - aw) - epsilon / 2
    return np.where(aw <= 1.0, near, far)


@dataclass(frozen=True)
class SpinNetwork:
    """Symmetric weighted graph with clamped placements and node roles.

    ``clamped`` maps node index to its fixed theta.  Weights are kept dense;
    the edge list is derived once for the integrator.
    """

    weights: np.ndarray
    clamped: Mapping[int, float] = field(default_factory=dict)
    roles: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        a = np.array(self.weights, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError("weights must be a square matrix")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("weights must be finite")
        if not np.array_equal(a, a.T):
            raise InvalidInputError("weights must be symmetric")
        if np.any(np.diag(a) != 0):
            raise InvalidInputError("weights must have a zero diagonal")
        a.setflags(write=False)
        object.__setattr__(self, "weights", a)
        n = a.shape[0]
        clamped = {int(k): float(wrap(v)) for k, v in dict(self.clamped).items()}
        for k in clamped:
            if not 0 <= k < n:
                raise InvalidInputError(f"clamped node {k} out of range")
        object.__setattr__(self, "clamped", clamped)
        roles = tuple(self.roles) if self.roles else tuple(
            "input" if k in clamped else "internal" for k in range(n))
        if len(roles) != n or any(r not in ROLES for r in roles):
            raise InvalidInputError(f"roles must be {n} tags from {ROLES}")
        for k, r in enumerate(roles):
            if r == "auxiliary_fixed" and k not in clamped:
                raise InvalidInputError(f"auxiliary node {k} must be clamped")
        object.__setattr__(self, "roles", roles)
        names = tuple(self.names) if self.names else tuple(str(k) for k in range(n))
        if len(names) != n:
            raise InvalidInputError("names must have one entry per node")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], **kw) -> "SpinNetwork":
        a = np.zeros((n, n))
        for m, k, w in edges:
            if m == k:
                raise InvalidInputError("self loops are not allowed")
            a[m, k] += w
            a[k, m] += w
        return cls(a, **kw)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.clamped)] = False
        return mask

    def edges(self) -> list[tuple[int, int, float]]:
        i, j = np.nonzero(np.triu(self.weights))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_clamps(self, clamps: Mapping[int, float], roles=None) -> "SpinNetwork":
        merged = dict(self.clamped)
        merged.update(clamps)
        return replace(self, clamped=merged, roles=roles if roles is not None else self.roles)

    def without_clamps(self) -> "SpinNetwork":
        roles = tuple("internal" if r == "auxiliary_fixed" else r for r in self.roles)
        return replace(self, clamped={}, roles=roles)


@dataclass(frozen=True)
class IntegratorConfig:
    """Knobs for the explicit integrator.

    ``dt`` is an upper bound: when ``epsilon > 0`` the step is reduced to
    ``stability * epsilon / max_row_weight`` so the regularized update
    cannot overshoot a coincidence band (see :func:`effective_dt`).
    """

    dt: float = 1e-2
    epsilon: float = 1e-2
    t_max: float = 50.0
    eq_tol: float | None = None
    eq_window: float = 1.0
    cluster_tol: float | None = None
    seed: int = 0
    stability: float = 0.5
    trace_every: float = 0.05

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        for name in ("epsilon", "t_max", "eq_window"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")
        if self.eq_tol is not None and self.eq_tol < 0:
            raise InvalidInputError("eq_tol must be >= 0")
        if self.cluster_tol is not None and self.cluster_tol < 0:
            raise InvalidInputError("cluster_tol must be >= 0")
        if not 0 < self.stability <= 1:
            raise InvalidInputError("stability must be in (0, 1]")

    def tolerance_for(self, net: SpinNetwork) -> float:
        if self.eq_tol is not None:
            return self.eq_tol
        scale = float(np.max(np.abs(net.weights))) if net.n else 0.0
        return 1e-6 * (scale if scale > 0 else 1.0)

    @property
    def cluster_tolerance(self) -> float:
        return self.cluster_tol if self.cluster_tol is not None else 10.0 * self.epsilon


@dataclass
class TerminalState:
    points: np.ndarray
    clusters: list[list[int]]
    elapsed: float
    lyapunov_trace: np.ndarray
    converged: bool

    @property
    def sigma(self) -> np.ndarray:
        return sigma_of(self.points)

    @property
    def x(self) -> np.ndarray:
        return cont_of(self.points)


def _check_points(net: SpinNetwork, points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.shape[-1] != net.n:
        raise InvalidInputError(f"expected {net.n} phase points, got shape {p.shape}")
    return p


def rate(net: SpinNetwork, points, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """dX/dt for every node; clamped nodes get 0."""
    eps = cfg.epsilon if cfg is not None else 0.0
    theta = _check_points(net, points)
    u = theta[..., :, None] - theta[..., None, :]
    r = np.sum(net.weights * square_wave(u, eps), axis=-1)
    r[..., ~net.free] = 0.0
    return r


def step(net: SpinNetwork, points, cfg: IntegratorConfig) -> np.ndarray:
    """One explicit update ``theta <- wrap(theta + dt * rate)``."""
    theta = _check_points(net, points)
    r = rate(net, theta, cfg)
    if not np.all(np.isfinite(r)):
        raise NumericError("non-finite rate")
    out = wrap(theta + effective_dt(net, cfg) * r)
    out[..., ~net.free] = theta[..., ~net.free]
    return out


def effective_dt(net: SpinNetwork, cfg: IntegratorConfig) -> float:
    free = net.free
    if cfg.epsilon <= 0 or not free.any():
        return cfg.dt
    row = float(np.max(np.sum(np.abs(net.weights[free]), axis=1)))
    if row == 0:
        return cfg.dt
    return min(cfg.dt, cfg.stability * cfg.epsilon / row)


def discrete_cut(net: SpinNetwork, sigma) -> float:
    s = np.asarray(sigma, dtype=float)
    if s.shape[-1] != net.n:
        raise InvalidInputError("sigma has wrong length")
    return 0.25 * float(np.sum(net.weights * (1.0 - np.multiply.outer(s, s))))


def ising_energy(net: SpinNetwork, sigma) -> float:
    s = np.asarray(sigma, dtype=float)
    if s.shape[-1] != net.n:
        raise InvalidInputError("sigma has wrong length")
    return 0.5 * float(s @ net.weights @ s)


def cut_correction(net: SpinNetwork, points) -> float:
    theta = _check_points(net, points)
    s = sigma_of(theta).astype(float)
    x = cont_of(theta)
    return 0.25 * float(np.sum(net.weights * np.multiply.outer(s, s)
                               * np.abs(np.subtract.outer(x, x))))


def relaxed_cut(net: SpinNetwork, points, epsilon: float = 0.0) -> float:
    """``C(sigma) + Delta C``.

    With ``epsilon > 0`` returns the smoothed relaxed cut whose gradient is
    exactly the regularized rate; it agrees with the exact value wherever
    no pair sits inside a regularization band.
    """
    theta = _check_points(net, points)
    if epsilon <= 0.0:
        return discrete_cut(net, sigma_of(theta)) + cut_correction(net, theta)
    u = np.subtract.outer(theta, theta)
    return 0.25 * float(np.sum(net.weights * _smoothed_distance(u, epsilon)))


def detect_clusters(points, cluster_tol: float) -> list[list[int]]:
    """Group spins whose continuous components coincide within ``cluster_tol``.

    Distances are measured on the X circle (circumference 2): spins with
    equal X but opposite sigma sit at antipodal theta and still flip
    together under rotation.  Membership is the transitive closure of the
    pairwise relation; output is sorted by smallest member.
    """
    if cluster_tol < 0:
        raise InvalidInputError("cluster_tol must be >= 0")
    x = cont_of(np.asarray(points, dtype=float))
    n = x.size
    if n == 0:
        return []
    order = np.argsort(x, kind="stable")
    xs = x[order]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    gaps = np.diff(xs)
    for k in np.nonzero(gaps <= cluster_tol)[0]:
        union(int(order[k]), int(order[k + 1]))
    if n > 1 and xs[0] + 2.0 - xs[-1] <= cluster_tol:
        union(int(order[0]), int(order[-1]))
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return sorted(groups.values(), key=lambda g: g[0])


def sample_initial(net: SpinNetwork, cfg: IntegratorConfig, rng=None) -> np.ndarray:
    """Uniform random theta for free nodes, clamp placements elsewhere."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    theta = rng.uniform(-2.0, 2.0, size=net.n)
    for k, v in net.clamped.items():
        theta[k] = v
    return theta


@dataclass
class BatchResult:
    """Outcome of :func:`evolve_batch`; ``snapshots[k]`` is the (T, n)
    state at ``times[k]``."""

    points: np.ndarray
    converged: np.ndarray
    elapsed: np.ndarray
    times: list[float]
    snapshots: list[np.ndarray]
    trace: list


@njit(cache=True)
def _wrap1(v):
    v = (v + 2.0) % 4.0 - 2.0
    if v >= 2.0:
        v -= 4.0
    return v


@njit(cache=True)
def _sqw1(u, eps):
    u = _wrap1(u)
    if abs(u) <= 1.0:
        h = u
    elif u > 0:
        h = 2.0 - u
    else:
        h = -2.0 - u
    if eps > 0.0:
        v = h / eps
        if v > 1.0:
            return 1.0
        if v < -1.0:
            return -1.0
        return v
    if h > 0:
        return 1.0
    if h < 0:
        return -1.0
    return 0.0


@njit(cache=True)
def _dist1(u, eps):
    aw = abs(_wrap1(u))
    if eps <= 0.0:
        return min(aw, 4.0 - aw)
    if aw <= 1.0:
        v = aw
        hub = v * v / (2 * eps) if v <= eps else v - eps / 2
        return hub + eps / 2
    v = 2.0 - aw
    hub = v * v / (2 * eps) if v <= eps else v - eps / 2
    return 2.0 - hub - eps / 2


@njit(cache=True)
def _integrate(theta, ei, ej, w, free, dt, eps, tol, window, t_end, times,
               trace_every, n_trace):
    T, n = theta.shape
    E = ei.size
    K = times.size
    snaps = np.empty((K, T, n))
    converged = np.zeros(T, dtype=np.bool_)
    elapsed = np.zeros(T)
    trace = np.full((T, n_trace), np.nan)
    r = np.zeros(n)
    nsteps = int(np.ceil(t_end / dt - 1e-9))
    for trial in range(T):
        th = theta[trial]
        quiet = 0.0
        t = 0.0
        k = 0
        while k < K and times[k] <= 0.0:
            snaps[k, trial] = th
            k += 1
        tr = 0
        done = E == 0
        converged[trial] = done
        for it in range(nsteps):
            if done and k >= K:
                break
            if n_trace > 0 and tr < n_trace - 1 and t >= tr * trace_every - 1e-12:
                c = 0.0
                for e in range(E):
                    c += w[e] * _dist1(th[ei[e]] - th[ej[e]], eps)
                trace[trial, tr] = 0.5 * c
                tr += 1
            h = min(dt, t_end - t)
            if not done:
                for m in range(n):
                    r[m] = 0.0
                for e in range(E):
                    g = w[e] * _sqw1(th[ei[e]] - th[ej[e]], eps)
                    r[ei[e]] += g
                    r[ej[e]] -= g
                rmax = 0.0
                for m in range(n):
                    if free[m]:
                        a = abs(r[m])
                        if not np.isfinite(a):
                            raise ArithmeticError("non-finite rate")
                        if a > rmax:
                            rmax = a
                if rmax <= tol:
                    quiet += h
                else:
                    quiet = 0.0
                for m in range(n):
                    if free[m]:
                        th[m] = _wrap1(th[m] + h * r[m])
                elapsed[trial] = t + h
                if quiet >= window:
                    done = True
                    converged[trial] = True
            t += h
            while k < K and t >= times[k] - 1e-12:
                snaps[k, trial] = th
                k += 1
        while k < K:
            snaps[k, trial] = th
            k += 1
        if n_trace > 0:
            c = 0.0
            for e in range(E):
                c += w[e] * _dist1(th[ei[e]] - th[ej[e]], eps)
            trace[trial, tr] = 0.5 * c
    return converged, elapsed, snaps, trace


def evolve_batch(net: SpinNetwork, initial, cfg: IntegratorConfig,
                 times: Sequence[float] = (), trace: bool = False,
                 clamps_from_initial: bool = False) -> BatchResult:
    """Integrate T independent trajectories.

    A trajectory is frozen once every free rate has stayed below the
    equilibrium tolerance for ``eq_window``.  ``times`` requests snapshots;
    the horizon is ``max(t_max, times)``.  Trajectories are computed one by
    one, so a trial's result never depends on what else is in the batch.

    Clamped columns are reset to the network's placements unless
    ``clamps_from_initial`` is set, in which case each trial keeps the
    clamped values it was given (per-trial clamps, same couplings).
    """
    theta = np.array(_check_points(net, initial), dtype=float, ndmin=2)
    if theta.ndim != 2:
        raise InvalidInputError("initial must be (n,) or (T, n)")
    theta = np.ascontiguousarray(wrap(theta))
    if not clamps_from_initial:
        for k, v in net.clamped.items():
            theta[:, k] = v
    times = sorted(float(t) for t in times)
    t_end = max([cfg.t_max] + times)
    ei, ej = np.nonzero(np.triu(net.weights))
    w = np.ascontiguousarray(net.weights[ei, ej])
    free = net.free
    if not free.any():
        ei, ej, w = ei[:0], ej[:0], w[:0]
    n_trace = int(math.floor(t_end / cfg.trace_every + 1e-9)) + 2 if trace else 0
    try:
        converged, elapsed, snaps, tr = _integrate(
            theta, ei.astype(np.int64), ej.astype(np.int64), w, free,
            effective_dt(net, cfg), float(cfg.epsilon), cfg.tolerance_for(net),
            float(cfg.eq_window), float(t_end), np.array(times, dtype=float),
            float(cfg.trace_every), n_trace)
    except ArithmeticError as exc:
        raise NumericError(str(exc)) from None
    return BatchResult(
        points=theta,
        converged=converged,
        elapsed=elapsed,
        times=times,
        snapshots=list(snaps),
        trace=[row[~np.isnan(row)] for row in tr] if trace else [],
    )


def evolve(net: SpinNetwork, initial, cfg: IntegratorConfig) -> TerminalState:
    theta0 = np.asarray(_check_points(net, initial), dtype=float)
    if theta0.ndim != 1:
        raise InvalidInputError("evolve takes a single state; use evolve_batch")
    res = evolve_batch(net, theta0, cfg, trace=True)
    pts = res.points[0]
    return TerminalState(
        points=pts,
        clusters=detect_clusters(pts, cfg.cluster_tolerance),
        elapsed=float(res.elapsed[0]),
        lyapunov_trace=res.trace[0],
        converged=bool(res.converged[0]),
    )
