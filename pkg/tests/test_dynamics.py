import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symparallel.dynamics import (IntegratorConfig, InvalidInputError, NumericError,
                                  PhasePoint, SpinNetwork, circular_diff, cont_of,
                                  cut_correction, detect_clusters, discrete_cut,
                                  effective_dt, evolve, evolve_batch, ising_energy, rate,
                                  relaxed_cut, sample_initial, sigma_of, square_wave, step,
                                  theta_of, wrap)
from symparallel.symmetry import rotate


def complete(n, w=1.0):
    return SpinNetwork.from_edges(n, [(i, j, w) for i in range(n) for j in range(i + 1, n)])


def random_net(rng, n, density=0.7):
    edges = [(i, j, float(rng.choice([-1, 1]) * rng.uniform(0.2, 2.0)))
             for i in range(n) for j in range(i + 1, n) if rng.random() < density]
    return SpinNetwork.from_edges(n, edges)


small_nets = st.integers(2, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2**32 - 1)))


# --- phase points and coordinates -------------------------------------------

def test_phase_point_components():
    p = PhasePoint.from_components(-1, 0.25)
    assert p.theta == pytest.approx(-0.75)
    assert p.sigma == -1 and p.x == pytest.approx(0.25)
    q = PhasePoint(2.0)
    assert q.theta == -2.0 and q.sigma == -1 and q.x == -1.0
    with pytest.raises(InvalidInputError):
        PhasePoint.from_components(0, 0.1)


@given(st.floats(-50, 50, allow_nan=False))
def test_wrap_range(t):
    w = float(wrap(t))
    assert -2.0 <= w < 2.0
    assert math.isclose(math.remainder(w - t, 4.0), 0.0, abs_tol=1e-9)


# keep away from X = 1 where sigma + X rounds onto the sheet boundary
@given(st.sampled_from([-1, 1]), st.floats(-1, 1 - 1e-9))
def test_theta_roundtrip(s, x):
    th = theta_of(s, x)
    assert sigma_of(th) == s
    assert cont_of(th) == pytest.approx(x, abs=1e-12)


def test_square_wave_values():
    u = np.array([0.0, 0.5, -0.5, 1.5, -1.5, 2.0, -2.0])
    assert square_wave(u).tolist() == [0, 1, -1, 1, -1, 0, 0]
    assert square_wave(np.array([0.004]), 0.01)[0] == pytest.approx(0.4)
    # the antipodal jump is regularized too
    assert square_wave(np.array([1.996]), 0.01)[0] == pytest.approx(0.4)


# --- network construction ----------------------------------------------------

def test_network_validation():
    with pytest.raises(InvalidInputError):
        SpinNetwork(np.array([[0, 1], [2, 0]]))
    with pytest.raises(InvalidInputError):
        SpinNetwork(np.array([[1.0, 0], [0, 0]]))
    with pytest.raises(InvalidInputError):
        SpinNetwork(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        SpinNetwork(np.zeros((2, 2)), clamped={5: 0.0})
    with pytest.raises(InvalidInputError):
        SpinNetwork(np.zeros((2, 2)), roles=("auxiliary_fixed", "internal"))
    with pytest.raises(InvalidInputError):
        SpinNetwork.from_edges(2, [(0, 0, 1.0)])


def test_weights_read_only():
    net = complete(3)
    with pytest.raises(ValueError):
        net.weights[0, 1] = 5.0


def test_edges_and_index():
    net = SpinNetwork.from_edges(3, [(0, 2, -1.5)], names=("a", "b", "c"))
    assert net.edges() == [(0, 2, -1.5)]
    assert net.index("c") == 2
    assert net.with_clamps({1: 0.5}).clamped == {1: 0.5}
    assert net.with_clamps({1: 0.5}).without_clamps().clamped == {}


# --- cut functions -------------------------------------------------------------

def test_k5_discrete_cut():
    net = complete(5)
    assert discrete_cut(net, [1, 1, -1, -1, -1]) == 6.0
    assert discrete_cut(net, [1, 1, 1, 1, 1]) == 0.0
    assert ising_energy(net, [1, 1, -1, -1, -1]) == pytest.approx(-2.0)


@given(small_nets)
def test_cut_energy_relation(case):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    s = rng.choice([-1, 1], size=n)
    total = net.weights.sum() / 2
    assert discrete_cut(net, s) == pytest.approx(0.5 * total - 0.5 * ising_energy(net, s))


def test_relaxed_cut_matches_discrete_when_clustered():
    net = complete(4)
    th = theta_of(np.array([1, -1, 1, -1]), np.full(4, 0.3))
    assert cut_correction(net, th) == pytest.approx(0.0)
    assert relaxed_cut(net, th) == pytest.approx(discrete_cut(net, sigma_of(th)))


@settings(max_examples=100)
@given(small_nets, st.floats(0.0, 4.0))
def test_relaxed_cut_rotation_invariant(case, r):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    th = rng.uniform(-2, 2, n)
    assert relaxed_cut(net, rotate(th, r)) == pytest.approx(relaxed_cut(net, th), abs=1e-9)


@settings(max_examples=100)
@given(small_nets)
def test_smoothed_cut_exact_away_from_bands(case):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    th = rng.uniform(-2, 2, n)
    eps = 1e-3
    d = np.abs(circular_diff(th[:, None], th[None, :]))
    band = (np.minimum(d, np.abs(2 - d)) < eps) & ~np.eye(n, dtype=bool)
    if band.any():
        return
    assert relaxed_cut(net, th, eps) == pytest.approx(relaxed_cut(net, th), abs=1e-12)


# --- rates -----------------------------------------------------------------------

def test_rate_two_spins():
    net = SpinNetwork.from_edges(2, [(0, 1, 1.0)])
    # same sheet: the larger X is pushed up, the smaller down (cut ascent)
    r = rate(net, theta_of([1, 1], [0.2, -0.3]))
    assert r.tolist() == [1.0, -1.0]
    r = rate(net, theta_of([1, -1], [0.2, -0.3]))
    assert r.tolist() == [-1.0, 1.0]


def test_rate_zero_for_clamped():
    net = complete(3).with_clamps({0: 0.5})
    assert rate(net, [0.5, -1.0, 1.2])[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(small_nets)
def test_rate_is_twice_cut_gradient(case):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    eps, h = 1e-3, 1e-7
    th = rng.uniform(-2, 2, n)
    x = cont_of(th)
    gaps = np.abs(np.subtract.outer(x, x))[~np.eye(n, dtype=bool)]
    if gaps.size and (gaps.min() <= eps or np.abs(x).max() > 1 - 1e-5):
        return
    r = rate(net, th, IntegratorConfig(epsilon=eps))
    for m in range(n):
        up, dn = th.copy(), th.copy()
        up[m] += h
        dn[m] -= h
        fd = (cut_correction(net, up) - cut_correction(net, dn)) / (2 * h)
        assert r[m] == pytest.approx(2 * fd, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(small_nets, st.sampled_from([0.0, 2.0]))
def test_rate_continuous_across_sheet_boundary(case, b):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    cfg = IntegratorConfig(epsilon=1e-2)
    th = rng.uniform(-2, 2, n)
    lo, hi = th.copy(), th.copy()
    lo[0], hi[0] = b - 1e-9, b + 1e-9
    jump = abs(rate(net, lo, cfg)[0] - rate(net, hi, cfg)[0])
    assert jump <= cfg.epsilon * np.abs(net.weights[0]).sum() + 1e-12


# --- integration --------------------------------------------------------------

def test_effective_dt_limits_step():
    net = complete(5)
    cfg = IntegratorConfig(dt=0.1, epsilon=0.01)
    assert effective_dt(net, cfg) == pytest.approx(0.5 * 0.01 / 4)
    assert effective_dt(net, IntegratorConfig(dt=0.1, epsilon=0.0)) == 0.1


def test_batch_kernel_matches_step():
    rng = np.random.default_rng(4)
    net = random_net(rng, 6).with_clamps({2: 0.7})
    h = effective_dt(net, IntegratorConfig())
    cfg = IntegratorConfig(t_max=60 * h, eq_window=10)
    th = sample_initial(net, cfg, rng)
    a = th.copy()
    for _ in range(60):
        a = step(net, a, cfg)
    b = evolve_batch(net, th, cfg).points[0]
    assert np.max(np.abs(circular_diff(a, b))) < 1e-12


def test_k5_reaches_max_cut():
    net = complete(5)
    cfg = IntegratorConfig(t_max=10)
    for seed in range(5):
        term = evolve(net, sample_initial(net, replace(cfg, seed=seed)), cfg)
        assert term.converged
        assert discrete_cut(net, term.sigma) == 6.0
        assert term.lyapunov_trace[-1] == pytest.approx(6.0)


def test_clamped_nodes_never_move():
    rng = np.random.default_rng(1)
    net = random_net(rng, 5).with_clamps({0: 1.3, 3: -0.4})
    cfg = IntegratorConfig(t_max=5)
    res = evolve_batch(net, rng.uniform(-2, 2, (4, 5)), cfg, times=[1.0, 2.5])
    for snap in res.snapshots + [res.points]:
        assert np.all(snap[:, 0] == net.clamped[0]) and np.all(snap[:, 3] == net.clamped[3])


def test_clamped_node_acts_as_fixed_external_spin():
    # free-node update computed by hand with the clamped node as a field
    rng = np.random.default_rng(7)
    net = random_net(rng, 4, density=1.0).with_clamps({3: 0.9})
    h = effective_dt(net, IntegratorConfig())
    cfg = IntegratorConfig(t_max=100 * h, eq_window=10)
    th = sample_initial(net, cfg, rng)
    a = net.weights
    free = th[:3].copy()
    for _ in range(100):
        u = free[:, None] - free[None, :]
        r = (a[:3, :3] * square_wave(u, cfg.epsilon)).sum(axis=1)
        r += a[:3, 3] * square_wave(free - 0.9, cfg.epsilon)
        free = wrap(free + h * r)
    out = evolve_batch(net, th, cfg).points[0]
    assert np.max(np.abs(circular_diff(out[:3], free))) < 1e-9


def test_batch_results_independent_of_batch_size():
    rng = np.random.default_rng(3)
    net = random_net(rng, 6)
    cfg = IntegratorConfig(t_max=3)
    init = rng.uniform(-2, 2, (5, 6))
    whole = evolve_batch(net, init, cfg).points
    alone = np.array([evolve_batch(net, init[k], cfg).points[0] for k in range(5)])
    assert np.array_equal(whole, alone)


def test_snapshots_ordered_and_final():
    net = complete(4)
    cfg = IntegratorConfig(t_max=4)
    init = np.random.default_rng(0).uniform(-2, 2, (3, 4))
    res = evolve_batch(net, init, cfg, times=[0.0, 1.0, 30.0])
    assert np.array_equal(res.snapshots[0], wrap(init))
    assert np.array_equal(res.snapshots[-1], res.points)


def test_degenerate_networks():
    empty = SpinNetwork(np.zeros((0, 0)))
    res = evolve_batch(empty, np.zeros((2, 0)), IntegratorConfig())
    assert res.converged.all()
    pinned = complete(3).with_clamps({0: 0.1, 1: 0.2, 2: 0.3})
    term = evolve(pinned, [0.1, 0.2, 0.3], IntegratorConfig())
    assert term.converged and term.elapsed == 0.0


def test_determinism():
    net = complete(6)
    cfg = IntegratorConfig(t_max=5, seed=11)
    a = evolve(net, sample_initial(net, cfg), cfg)
    b = evolve(net, sample_initial(net, cfg), cfg)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.lyapunov_trace, b.lyapunov_trace)


def test_non_finite_rejected():
    net = complete(3)
    with pytest.raises(NumericError):
        step(net, [0.1, np.nan, 0.3], IntegratorConfig())
    with pytest.raises(NumericError):
        evolve_batch(net, [0.1, np.nan, 0.3], IntegratorConfig())
    with pytest.raises(InvalidInputError):
        evolve(net, [0.1, 0.2], IntegratorConfig())


def test_config_validation():
    for bad in ({"dt": 0}, {"epsilon": -1}, {"stability": 2}, {"eq_tol": -1},
                {"cluster_tol": -0.1}):
        with pytest.raises(InvalidInputError):
            IntegratorConfig(**bad)
    cfg = IntegratorConfig(epsilon=0.02)
    assert cfg.cluster_tolerance == pytest.approx(0.2)
    assert cfg.tolerance_for(SpinNetwork.from_edges(2, [(0, 1, -3.0)])) == pytest.approx(3e-6)


@settings(max_examples=40, deadline=None)
@given(small_nets)
def test_lyapunov_non_decreasing(case):
    n, seed = case
    rng = np.random.default_rng(seed)
    net = random_net(rng, n)
    cfg = IntegratorConfig(t_max=3, trace_every=0.01)
    term = evolve(net, rng.uniform(-2, 2, n), cfg)
    h = effective_dt(net, cfg)
    if len(term.lyapunov_trace) > 1:
        assert np.min(np.diff(term.lyapunov_trace)) >= -h * h


# --- clusters -----------------------------------------------------------------

def test_clusters_on_x_circle():
    th = theta_of(np.array([1, -1, 1, 1]), np.array([0.3, 0.3 + 1e-4, -0.6, 0.999]))
    assert detect_clusters(th, 1e-3) == [[0, 1], [2], [3]]
    # X = 0.999 and X = -0.9995 are neighbours across the wrap
    th2 = theta_of(np.array([1, 1]), np.array([0.999, -0.9995]))
    assert detect_clusters(th2, 2e-3) == [[0, 1]]
    assert detect_clusters(np.array([]), 0.1) == []
    with pytest.raises(InvalidInputError):
        detect_clusters(th, -1)


def test_clusters_transitive():
    th = theta_of(np.ones(3), np.array([0.0, 0.008, 0.016]))
    assert detect_clusters(th, 0.01) == [[0, 1, 2]]
