import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from popdyn.crn import builtin_model, parse_network
from popdyn.crn.network import SimGrid
from popdyn.evaluate import wasserstein_1d
from popdyn.simulate import (
    InitialSetting, project, sample_initial_setting, sample_initial_state, simulate_batch,
    ssa_trajectory, tau_leap_trajectory,
)


def _many(net, s0, n, seed=0, **kw):
    return simulate_batch(net, [InitialSetting(s0)] * n, net.grid, seed, workers=1, **kw)


def test_pure_death_mean_matches_exponential_decay(pure_death):
    trajs = _many(pure_death, (100,), 4000)
    t = pure_death.grid.times
    mean = trajs[:, :, 0].mean(axis=0)
    # each molecule survives to t independently: Binomial(100, e^-t)
    p = np.exp(-t)
    se = np.sqrt(100 * p * (1 - p) / trajs.shape[0])
    assert np.all(np.abs(mean - 100 * p) <= 4 * se + 1e-12)
    # mean at t=1 within 3 standard errors of 100/e
    assert abs(mean[-1] - 100 * math.exp(-1)) <= 3 * se[-1]


def test_birth_death_moments(birth_death):
    trajs = _many(birth_death, (0,), 10000, seed=3)
    t = birth_death.grid.times[1:]
    # started empty, the count is Poisson with mean kb/kd (1 - e^{-kd t})
    lam = 10.0 * (1 - np.exp(-t))
    x = trajs[:, 1:, 0].astype(float)
    n = x.shape[0]
    assert np.all(np.abs(x.mean(0) - lam) <= 4 * np.sqrt(lam / n))
    # variance of the sample variance for a Poisson law: (mu4 - sigma^4 (n-3)/(n-1)) / n
    mu4 = lam * (1 + 3 * lam)
    se_var = np.sqrt((mu4 - lam**2 * (n - 3) / (n - 1)) / n)
    assert np.all(np.abs(x.var(0, ddof=1) - lam) <= 4 * se_var)


def test_sir_without_infected_is_constant():
    net = builtin_model("sir").network
    out = ssa_trajectory(net, InitialSetting((50, 0, 40)), net.grid, 1)
    assert np.all(out == [50, 0, 40])
    tl = tau_leap_trajectory(net, InitialSetting((50, 0, 40)), net.grid, net.grid.dt, 1)
    assert np.array_equal(out, tl)


def test_shape_for_single_step():
    net = builtin_model("sir").network
    out = ssa_trajectory(net, InitialSetting((50, 10, 40)), SimGrid(0, 0.5, 1), 1)
    assert out.shape == (2, 3)
    assert out.dtype == np.int64


def test_row_zero_is_initial_state():
    net = builtin_model("esirs").network
    out = ssa_trajectory(net, InitialSetting((30, 40, 30)), net.grid, 5)
    assert tuple(out[0]) == (30, 40, 30)


def test_cadlag_sampling_records_state_at_grid_time():
    # a single irreversible event: the value at t_i is the state after the
    # last event at or before t_i
    net = parse_network("species X Y\nparam k = 1\ninit X in [1, 1]\ninit Y in [0, 0]\n"
                        "grid t0=0 dt=0.1 H=50\nreaction r: X -> Y @ k*X\n")
    out = ssa_trajectory(net, InitialSetting((1, 0)), net.grid, 2)
    col = out[:, 1]
    assert set(col.tolist()) <= {0, 1}
    assert np.all(np.diff(col) >= 0)
    assert np.all(out.sum(axis=1) == 1)


def test_deterministic_given_seed():
    net = builtin_model("esirs").network
    s = InitialSetting((30, 40, 30))
    assert np.array_equal(ssa_trajectory(net, s, net.grid, 9), ssa_trajectory(net, s, net.grid, 9))
    assert not np.array_equal(ssa_trajectory(net, s, net.grid, 9), ssa_trajectory(net, s, net.grid, 10))


def test_batch_independent_of_workers(monkeypatch):
    net = builtin_model("esirs").network
    settings = [sample_initial_setting(net, i) for i in range(12)]
    monkeypatch.delenv("POPDYN_THREADS", raising=False)
    one = simulate_batch(net, settings, net.grid, 4, workers=1)
    two = simulate_batch(net, settings, net.grid, 4, workers=2)
    assert np.array_equal(one, two)


def test_tau_leap_pure_death_mean(pure_death):
    grid = SimGrid(0, 1.0, 1)
    trajs = simulate_batch(pure_death, [InitialSetting((100,))] * 500, grid, 1, method="tau", tau=0.01,
                           workers=1)
    assert abs(trajs[:, -1, 0].mean() - 100 / math.e) <= 0.05 * 100 / math.e


def test_tau_leap_converges_towards_ssa(pure_death):
    grid = SimGrid(0, 1.0, 1)
    n = 10000
    ssa = simulate_batch(pure_death, [InitialSetting((100,))] * n, grid, 1, workers=1)[:, -1, 0]
    dists = []
    for tau in (1.0, 0.25, 1 / 16):
        tl = simulate_batch(pure_death, [InitialSetting((100,))] * n, grid, 2, method="tau", tau=tau,
                            workers=1)[:, -1, 0]
        dists.append(wasserstein_1d(ssa, tl))
    inversions = sum(b > a for a, b in zip(dists, dists[1:]))
    assert inversions <= 1
    assert dists[-1] < dists[0]


def test_tau_leap_clamps_are_counted():
    net = parse_network("species X\nparam k = 5\ninit X in [3, 3]\nreaction r: X -> 0 @ k*X\n")
    total = 0
    for seed in range(20):
        out, clamps = tau_leap_trajectory(net, InitialSetting((3,)), SimGrid(0, 1, 2), 1.0, seed,
                                          return_clamps=True)
        assert out.min() >= 0
        total += clamps
    assert total > 0


def test_tau_must_not_exceed_dt(pure_death):
    with pytest.raises(ValueError):
        tau_leap_trajectory(pure_death, InitialSetting((100,)), pure_death.grid, 1.0)


@pytest.mark.parametrize("name,group", [
    ("esirs", ["S", "I", "R"]),
    ("oscillator", ["A", "B", "C"]),
    ("toggle-switch", ["G1on", "G1off"]),
])
def test_conservation_along_trajectories(name, group):
    net = builtin_model(name).network
    idx = [net.species.index(s) for s in group]
    settings = [sample_initial_setting(net, i) for i in range(30)]
    trajs = simulate_batch(net, settings, net.grid, 0, workers=1)
    sums = trajs[:, :, idx].sum(axis=2)
    assert np.all(sums == sums[:, :1])
    assert trajs.min() >= 0


def test_sir_absorption():
    net = builtin_model("sir").network
    settings = [sample_initial_setting(net, i) for i in range(100)]
    trajs = simulate_batch(net, settings, net.grid, 0, workers=1)
    for tr in trajs:
        zero = np.flatnonzero(tr[:, 1] == 0)
        if zero.size:
            assert np.all(tr[zero[0]:] == tr[zero[0]])


def test_projection():
    net = builtin_model("toggle-switch").network
    tr = ssa_trajectory(net, sample_initial_setting(net, 0), net.grid, 0)
    assert project(tr, net.observed_indices).shape == (net.grid.H + 1, 2)
    assert np.array_equal(project(tr, range(net.n)), tr)
    mapk = builtin_model("mapk").network
    assert mapk.observed_indices == (mapk.species.index("MAPK_PP"),)
    with pytest.raises(ValueError):
        project(tr, [])


def test_initial_states_respect_constraints():
    esirs = builtin_model("esirs").network
    sir = builtin_model("sir").network
    for i in range(200):
        assert sum(sample_initial_state(esirs, i)) == 100
        assert all(30 <= v <= 200 for v in sample_initial_state(sir, i))


def test_degenerate_range():
    net = parse_network("species X\ninit X in [5, 5]\nreaction r: X -> 0 @ X\n")
    assert all(sample_initial_state(net, i) == (5,) for i in range(10))


def test_constrained_sampling_is_uniform():
    net = parse_network(
        "species A B C\ninit A in [0, 3]\ninit B in [0, 3]\ninit C in [0, 3]\n"
        "constraint A + B + C = 3\nreaction r: A -> B @ A\n"
    )
    counts = {}
    for i in range(4000):
        s = sample_initial_state(net, i)
        counts[s] = counts.get(s, 0) + 1
    # the simplex {a+b+c = 3} has 10 integer points
    assert len(counts) == 10
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_hidden_species_resampled_with_observed_fixed():
    net = builtin_model("mapk").network
    obs = net.observed_indices[0]
    seen = set()
    for j in range(20):
        s0 = sample_initial_state(net, j, fixed={obs: 40})
        assert s0[obs] == 40
        seen.add(s0)
    assert len(seen) > 1


@given(st.integers(0, 2**32 - 1))
def test_ssa_output_nonnegative_integers(seed):
    net = builtin_model("esirs").network
    out = ssa_trajectory(net, sample_initial_setting(net, seed), net.grid, seed)
    assert out.min() >= 0 and np.all(out.sum(axis=1) == 100)
