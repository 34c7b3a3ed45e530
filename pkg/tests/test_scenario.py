import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccbf.scenario import (
    ConfigError,
    CostBreakdown,
    Popularity,
    RadioConfig,
    Scenario,
    backhaul_cost,
    block_powers,
    build_scenario,
    build_topology,
    group_rate,
    hex_centers,
    make_groups,
    network_cost,
    noise_power_watt,
    pathloss_db,
    place_cache,
    power_cost,
    sample_channels,
    sample_requests,
    scenario_from_channels,
    sinr,
    watt_to_dbm,
    zipf_popularity,
)


def test_pathloss_golden():
    assert pathloss_db(1.0) == 148.1
    assert pathloss_db(0.5) == pytest.approx(148.1 - 37.6 * math.log10(2), abs=1e-12)
    assert abs(pathloss_db(0.5) - 136.78) < 0.01


def test_noise_golden():
    p = noise_power_watt(-172.0, 10e6)
    assert watt_to_dbm(p) == pytest.approx(-102.0, abs=1e-12)
    assert p == pytest.approx(10 ** -13.2, rel=1e-12)


def test_rate_golden():
    r = group_rate(10.0, 10e6)
    assert r == 10e6 * math.log2(11)
    assert abs(r - 3.459e7) < 1e4


def test_config_validation():
    with pytest.raises(ConfigError):
        RadioConfig(n_bs=0)
    with pytest.raises(ConfigError):
        RadioConfig(exclusion_radius=300.0)
    with pytest.raises(ConfigError):
        RadioConfig(bandwidth=0.0)
    with pytest.raises(ConfigError):
        RadioConfig(sinr_target=math.inf)


def test_hex_layout():
    c = hex_centers(7, 500.0)
    assert np.allclose(c[0], 0) and np.allclose(c[1], (500, 0))
    d = np.hypot(*(c[1:]).T)
    assert np.allclose(d, 500.0)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_topology_exclusion_and_determinism(seed):
    cfg = RadioConfig()
    t1, t2 = build_topology(cfg, seed), build_topology(cfg, seed)
    assert np.array_equal(t1.user_positions, t2.user_positions)
    assert t1.user_positions.shape == (30, 2) and t1.bs_positions.shape == (7, 2)
    assert t1.distances().min() >= 50.0
    # every user lies within 1.01 circumradius of its nearest BS
    assert t1.distances().min(axis=1).max() <= 500 / math.sqrt(3) * 1.01


def test_channel_decomposition():
    cfg = RadioConfig(n_bs=3, n_ant=2, n_users=4, shadowing_std=0.0)
    topo = build_topology(cfg, 3)
    ch = sample_channels(topo, cfg, 5)
    assert ch.h.shape == (4, 6) and np.isfinite(ch.h).all()
    # with no shadowing, regenerating the Rayleigh draw recovers the amplitude exactly
    rng = np.random.default_rng(5)
    rng.normal(0.0, 0.0, size=(4, 3))
    v = (rng.standard_normal((4, 3, 2)) + 1j * rng.standard_normal((4, 3, 2))) / math.sqrt(2)
    amp_db = -pathloss_db(topo.distances() / 1000) + cfg.antenna_gain
    expect = (10 ** (amp_db / 20))[:, :, None] * v
    assert np.allclose(ch.h, expect.reshape(4, 6), rtol=1e-12)
    assert np.all(ch.noise_power == cfg.noise_power)


def test_zipf_examples():
    p = zipf_popularity(100, 1.0, 0.5).probs
    H99 = sum(1 / r for r in range(1, 100))
    assert p[0] == pytest.approx(0.5) and p[1] == pytest.approx(0.5 / H99)
    assert np.allclose(zipf_popularity(4, 0.0).probs, 0.25)
    assert np.allclose(zipf_popularity(3, 1.0).probs, [6 / 11, 3 / 11, 2 / 11])


@given(st.integers(1, 50), st.floats(0, 3), st.one_of(st.none(), st.floats(0, 0.99)))
def test_popularity_is_distribution(F, alpha, trend):
    p = zipf_popularity(F, alpha, trend).probs
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-12


def test_popularity_rejects_bad():
    with pytest.raises(ConfigError):
        Popularity(np.array([0.5, 0.6]))


def test_requests_examples():
    one = Popularity(np.eye(10)[7])
    g = sample_requests(one, 5, 10.0, 10e6, 0)
    assert g.contents == (7,) and g.users == ((0, 1, 2, 3, 4),)
    assert g.rate[0] == 10e6 * math.log2(1 + 10 ** 1.0)
    g = make_groups([3, 1, 2], 10.0, 10e6)
    assert len(g.contents) == 3 and all(len(u) == 1 for u in g.users)


@given(st.integers(0, 10_000), st.integers(1, 40))
def test_groups_disjoint_and_rates(seed, K):
    g = sample_requests(zipf_popularity(20, 1.0, 0.5), K, 10.0, 10e6, seed)
    users = [k for u in g.users for k in u]
    assert len(users) == len(set(users)) == K
    assert 1 <= len(g.contents) <= min(K, 20)
    assert np.all(g.rate == 10e6 * np.log2(1 + g.gamma))


def test_cache_examples():
    pop = Popularity(np.array([0.48, 0.24, 0.16, 0.12]))
    c = place_cache("PopC", pop, 2, 3, 0).c
    assert np.array_equal(c[:, 0], [1, 1, 0, 0]) and (c == c[:, :1]).all()
    c = place_cache("RanC", pop, 3, 5, 1).c
    assert np.all(c.sum(axis=0) == 3)
    c = place_cache("PopC", Popularity(np.full(5, 0.2)), 3, 2, 0).c
    assert np.array_equal(c[:, 0], [1, 1, 1, 0, 0])
    with pytest.raises(ConfigError):
        place_cache("PopC", pop, 4, 3, 0)


@given(st.sampled_from(["PopC", "RanC", "ProC"]), st.integers(0, 9), st.integers(1, 6), st.integers(0, 999))
def test_cache_column_sums(strategy, Y, N, seed):
    pop = zipf_popularity(10, 1.0, 0.5)
    c = place_cache(strategy, pop, Y, N, seed)
    assert np.all(c.c.sum(axis=0) == Y)
    assert np.array_equal(c.c, place_cache(strategy, pop, Y, N, seed).c)


def test_sinr_examples():
    sc = scenario_from_channels([[1.0]], [[0]], [0], [[0]])
    assert sinr(0, 0, np.array([[math.sqrt(10)]]), sc.channels) == pytest.approx(10)
    assert sinr(0, 0, np.zeros((1, 1)), sc.channels) == 0
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    sc2 = scenario_from_channels(h, [[0], [1]], [0, 1], [[0], [0]])
    w = np.array([[2.0, 0.0], [0.0, 3.0]])
    assert sinr(0, 0, w, sc2.channels) == pytest.approx(4.0)


@given(st.integers(0, 500), st.floats(0, 2 * math.pi), st.floats(0.1, 10))
def test_sinr_phase_invariance_and_monotonicity(seed, phi, scale):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    sc = scenario_from_channels(h, [[0, 1], [2]], [0, 1], [[0], [0]], n_ant=2)
    w = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    w2 = w.copy()
    w2[0] *= np.exp(1j * phi)
    assert sinr(0, 0, w, sc.channels) == pytest.approx(sinr(0, 0, w2, sc.channels), rel=1e-9)
    single = scenario_from_channels(h, [[0, 1, 2]], [0], [[0], [0]], n_ant=2)
    lo = sinr(1, 0, w[:1], single.channels)
    hi = sinr(1, 0, w[:1] * (1 + scale), single.channels)
    assert hi > lo


def _two_group():
    h = np.ones((2, 2))
    return scenario_from_channels(h, [[0], [1]], [0, 1], [[0, 0], [0, 0]], backhaul_unit=1.0)


def test_backhaul_examples():
    sc = _two_group()
    R = sc.groups.rate
    s = np.ones((2, 2))
    assert backhaul_cost(s, sc.cache, sc.groups) == pytest.approx(2 * (R[0] + R[1]))
    cached = scenario_from_channels(np.ones((2, 2)), [[0], [1]], [0, 1], [[1, 1], [1, 1]])
    assert backhaul_cost(s, cached.cache, cached.groups) == 0


@given(st.integers(0, 1000))
def test_backhaul_monotone_and_prop1(seed):
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 2, size=(3, 3))
    sc = scenario_from_channels(np.ones((3, 3)), [[0], [1], [2]], [0, 1, 2], c)
    s = rng.integers(0, 2, size=(3, 3))
    base = backhaul_cost(s, sc.cache, sc.groups)
    for m in range(3):
        for n in range(3):
            s2 = s.copy()
            s2[m, n] = 1
            up = backhaul_cost(s2, sc.cache, sc.groups)
            assert up >= base
            if c[m, n] == 1:
                assert up == base


def test_power_cost_examples():
    assert power_cost(np.zeros((2, 3))) == 0
    assert power_cost(np.array([[3, 4j]])) == pytest.approx(25)
    w = np.array([[1 + 1j, 2], [0.5j, -1]])
    assert power_cost(3 * w) == pytest.approx(9 * power_cost(w))
    assert np.allclose(block_powers(np.array([[3, 4j, 1, 0]]), 2, 2), [[25, 1]])


def test_network_cost_examples():
    sc = _two_group()
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    s = np.zeros((2, 2))
    c = network_cost(w, s, sc, 0.0)
    assert c.total == c.backhaul == 0
    s = np.array([[1, 0], [0, 0]])
    c = network_cost(w, s, sc, 5.0)
    assert c.total == c.backhaul + 5.0 * c.power
    assert CostBreakdown(2.0, 3.0, 2.0 + 5 * 3.0, 5.0).total == 17.0
    assert network_cost(w, s, sc, math.inf).total == c.power


def test_scenario_determinism_and_roundtrip(tmp_path):
    cfg = RadioConfig(n_bs=3, n_ant=2, n_users=5, n_contents=6)
    a, b = build_scenario(cfg, 11, cache_size=2), build_scenario(cfg, 11, cache_size=2)
    assert np.array_equal(a.channels.h, b.channels.h)
    assert a.groups.users == b.groups.users and np.array_equal(a.cache.c, b.cache.c)
    path = tmp_path / "sc.json"
    a.save(path)
    c = Scenario.load(path)
    assert np.array_equal(c.channels.h, a.channels.h)
    assert np.array_equal(c.cache.c, a.cache.c)
    assert c.groups.users == a.groups.users and c.cfg == a.cfg
