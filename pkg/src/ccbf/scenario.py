"""Scenario generation for a cache-enabled cloud RAN and the SINR / cost model.

Content ids, user ids and BS ids are 0-based throughout. Beamformers are
stored as an ``(M, N*L)`` complex array whose row ``m`` is the network-wide
beamformer of group ``m``; block ``(m, n)`` is ``w[m, n*L:(n+1)*L]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MAX_PLACEMENT_DRAWS = 10**6


class ConfigError(ValueError):
    """Raised when a configuration cannot produce a valid scenario."""


# --------------------------------------------------------------------------
# unit helpers


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def dbm_to_watt(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p) + 30.0


def pathloss_db(d_km, intercept: float = 148.1, slope: float = 37.6):
    """Distance-dependent pathloss in dB, ``d_km`` in kilometres."""
    return intercept + slope * np.log10(np.asarray(d_km, dtype=float))


def noise_power_watt(noise_psd_dbm_hz: float, bandwidth_hz: float) -> float:
    return float(dbm_to_watt(noise_psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)))


def group_rate(gamma_lin, bandwidth_hz: float):
    """Fixed transmission rate B*log2(1+gamma) in bits/s."""
    return bandwidth_hz * np.log2(1.0 + np.asarray(gamma_lin, dtype=float))


def child_seeds(seed: int, n: int) -> list[int]:
    """Independent integer seeds derived from ``seed``."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(n)]


def _frozen(a, dtype=None) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RadioConfig:
    n_bs: int = 7
    n_ant: int = 4
    n_users: int = 30
    n_contents: int = 100
    inter_bs_distance: float = 500.0  # m
    exclusion_radius: float = 50.0  # m
    bandwidth: float = 10e6  # Hz
    antenna_gain: float = 10.0  # dBi
    pathloss_intercept: float = 148.1  # dB
    pathloss_slope: float = 37.6  # dB/decade
    shadowing_std: float = 8.0  # dB
    noise_psd: float = -172.0  # dBm/Hz
    sinr_target: float = 10.0  # dB, every group
    per_antenna_peak: Optional[float] = None  # dBm
    per_bs_peak: Optional[float] = None  # dBm
    # bits/s per unit of backhaul cost; 1e6 reports C_B in Mbit/s
    backhaul_unit: float = 1e6

    def __post_init__(self):
        for name in ("n_bs", "n_ant", "n_users", "n_contents"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if not 0 <= self.exclusion_radius < self.inter_bs_distance / 2:
            raise ConfigError("exclusion_radius must be in [0, inter_bs_distance/2)")
        if not math.isfinite(self.sinr_target):
            raise ConfigError("sinr_target must be finite")
        if self.backhaul_unit <= 0:
            raise ConfigError("backhaul_unit must be positive")

    @property
    def gamma(self) -> float:
        return float(db_to_lin(self.sinr_target))

    @property
    def noise_power(self) -> float:
        return noise_power_watt(self.noise_psd, self.bandwidth)

    @property
    def per_antenna_peak_watt(self) -> Optional[float]:
        return None if self.per_antenna_peak is None else float(dbm_to_watt(self.per_antenna_peak))

    @property
    def per_bs_peak_watt(self) -> Optional[float]:
        return None if self.per_bs_peak is None else float(dbm_to_watt(self.per_bs_peak))


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray  # (N, 2) metres
    user_positions: np.ndarray  # (K, 2) metres

    def distances(self) -> np.ndarray:
        """(K, N) user-to-BS distances in metres."""
        diff = self.user_positions[:, None, :] - self.bs_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class ChannelState:
    h: np.ndarray  # (K, N*L) complex, row k is h_k
    noise_power: np.ndarray  # (K,) watts


@dataclass(frozen=True)
class Popularity:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("popularity must be a non-negative vector summing to 1")


@dataclass(frozen=True)
class MulticastGroups:
    contents: tuple[int, ...]  # f_m
    users: tuple[tuple[int, ...], ...]  # G_m
    gamma: np.ndarray  # (M,) linear SINR targets
    rate: np.ndarray  # (M,) bits/s

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.users:
            if not g or seen.intersection(g):
                raise ConfigError("user groups must be non-empty and pairwise disjoint")
            seen.update(g)
        if len(set(self.contents)) != len(self.contents):
            raise ConfigError("each content forms exactly one group")

    @property
    def n_groups(self) -> int:
        return len(self.contents)

    def group_of_user(self) -> dict[int, int]:
        return {k: m for m, g in enumerate(self.users) for k in g}


@dataclass(frozen=True)
class CachePlacement:
    c: np.ndarray  # (F, N) in {0, 1}
    capacity: np.ndarray  # (N,)

    def __post_init__(self):
        if np.any(self.c.sum(axis=0) > self.capacity):
            raise ConfigError("cache column exceeds capacity")


@dataclass(frozen=True)
class CostBreakdown:
    """Backhaul (in ``backhaul_unit``), power (W) and their weighted sum.

    ``eta = inf`` is power-only mode; its ``total`` is the power.
    """

    backhaul: float
    power: float
    total: float
    eta: float


@dataclass(frozen=True)
class Scenario:
    cfg: RadioConfig
    topology: Topology
    channels: ChannelState
    groups: MulticastGroups
    cache: CachePlacement
    popularity: Optional[Popularity] = None
    seed: Optional[int] = None

    @property
    def M(self) -> int:
        return self.groups.n_groups

    @property
    def N(self) -> int:
        return self.cfg.n_bs

    @property
    def L(self) -> int:
        return self.cfg.n_ant

    def cached(self) -> np.ndarray:
        """(M, N) boolean: c_{f_m, n} = 1."""
        return self.cache.c[list(self.groups.contents), :].astype(bool).reshape(self.M, self.N)

    def alpha(self) -> np.ndarray:
        """(M, N) per-pair backhaul weights (1 - c_{f_m,n}) R_m in cost units."""
        rate = np.asarray(self.groups.rate) / self.cfg.backhaul_unit
        return (~self.cached()) * rate[:, None]

    def scaled_channels(self) -> np.ndarray:
        """Channels divided by the per-user noise amplitude (unit noise)."""
        return self.channels.h / np.sqrt(self.channels.noise_power)[:, None]

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        h = self.channels.h
        return {
            "cfg": asdict(self.cfg),
            "seed": self.seed,
            "topology": {
                "bs_positions": self.topology.bs_positions.tolist(),
                "user_positions": self.topology.user_positions.tolist(),
            },
            "channels": {
                "h_real": h.real.tolist(),
                "h_imag": h.imag.tolist(),
                "noise_power": self.channels.noise_power.tolist(),
            },
            "groups": {
                "contents": list(self.groups.contents),
                "users": [list(g) for g in self.groups.users],
                "gamma": self.groups.gamma.tolist(),
                "rate": self.groups.rate.tolist(),
            },
            "cache": {"c": self.cache.c.tolist(), "capacity": self.cache.capacity.tolist()},
            "popularity": None if self.popularity is None else self.popularity.probs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        ch = d["channels"]
        h = np.array(ch["h_real"], dtype=float) + 1j * np.array(ch["h_imag"], dtype=float)
        g = d["groups"]
        return cls(
            cfg=RadioConfig(**d["cfg"]),
            topology=Topology(
                _frozen(d["topology"]["bs_positions"], float).reshape(-1, 2),
                _frozen(d["topology"]["user_positions"], float).reshape(-1, 2),
            ),
            channels=ChannelState(_frozen(h), _frozen(ch["noise_power"], float)),
            groups=MulticastGroups(
                tuple(int(f) for f in g["contents"]),
                tuple(tuple(int(k) for k in u) for u in g["users"]),
                _frozen(g["gamma"], float),
                _frozen(g["rate"], float),
            ),
            cache=CachePlacement(_frozen(d["cache"]["c"], np.int8), _frozen(d["cache"]["capacity"], int)),
            popularity=None if d.get("popularity") is None else Popularity(_frozen(d["popularity"], float)),
            seed=d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


# --------------------------------------------------------------------------
# generation


def hex_centers(n: int, spacing: float) -> np.ndarray:
    """First ``n`` centres of a hexagonal lattice, ordered by ring then angle.

    Ring 1 starts at angle 0, so the second BS sits at ``(spacing, 0)``.
    """
    pts = [(0.0, 0.0)]
    ring = 1
    while len(pts) < n:
        corners = [
            (ring * spacing * math.cos(math.radians(60 * i)), ring * spacing * math.sin(math.radians(60 * i)))
            for i in range(6)
        ]
        for i in range(6):
            (x0, y0), (x1, y1) = corners[i], corners[(i + 1) % 6]
            for j in range(ring):
                pts.append((x0 + (x1 - x0) * j / ring, y0 + (y1 - y0) * j / ring))
        ring += 1
    return np.array(pts[:n])


def _in_hex(p: np.ndarray, apothem: float) -> np.ndarray:
    # edge normals at 0, 60, 120 degrees: neighbours share an edge
    ok = np.ones(p.shape[:-1], dtype=bool)
    for ang in (0.0, math.pi / 3, 2 * math.pi / 3):
        ok &= np.abs(p[..., 0] * math.cos(ang) + p[..., 1] * math.sin(ang)) <= apothem
    return ok


def build_topology(cfg: RadioConfig, seed: int) -> Topology:
    """BSs on a hexagonal grid; users uniform over the union of the cells
    minus an exclusion disc around every BS."""
    rng = np.random.default_rng(seed)
    bs = hex_centers(cfg.n_bs, cfg.inter_bs_distance)
    apothem = cfg.inter_bs_distance / 2
    circum = cfg.inter_bs_distance / math.sqrt(3)
    users = []
    draws = 0
    while len(users) < cfg.n_users:
        if draws >= MAX_PLACEMENT_DRAWS:
            raise ConfigError("user placement did not terminate; check exclusion_radius")
        draws += 1
        cell = rng.integers(cfg.n_bs)
        p = rng.uniform([-apothem, -circum], [apothem, circum])
        if not _in_hex(p, apothem):
            continue
        p = p + bs[cell]
        if np.min(np.hypot(*(bs - p).T)) < cfg.exclusion_radius:
            continue
        users.append(p)
    return Topology(_frozen(bs), _frozen(np.array(users).reshape(-1, 2)))


def sample_channels(topo: Topology, cfg: RadioConfig, seed: int) -> ChannelState:
    """Pathloss x log-normal shadowing (per user-BS link) x Rayleigh (per antenna)."""
    rng = np.random.default_rng(seed)
    K, N, L = cfg.n_users, cfg.n_bs, cfg.n_ant
    d_km = topo.distances() / 1000.0
    shadow = rng.normal(0.0, cfg.shadowing_std, size=(K, N))
    gain_db = -pathloss_db(d_km, cfg.pathloss_intercept, cfg.pathloss_slope) + cfg.antenna_gain + shadow
    amp = 10.0 ** (gain_db / 20.0)
    fading = (rng.standard_normal((K, N, L)) + 1j * rng.standard_normal((K, N, L))) / math.sqrt(2.0)
    h = (amp[:, :, None] * fading).reshape(K, N * L)
    noise = np.full(K, cfg.noise_power)
    return ChannelState(_frozen(h), _frozen(noise))


def zipf_popularity(F: int, alpha: float, trending_mass: Optional[float] = None) -> Popularity:
    """Zipf popularity; with ``trending_mass`` content 0 takes that mass and the
    remaining ``F-1`` contents share the rest by rank^-alpha."""
    if F < 1 or alpha < 0:
        raise ConfigError("need F >= 1 and alpha >= 0")
    if trending_mass is None:
        w = np.arange(1, F + 1, dtype=float) ** -alpha
        return Popularity(_frozen(w / w.sum()))
    if not 0 <= trending_mass < 1:
        raise ConfigError("trending_mass must be in [0, 1)")
    if F == 1:
        return Popularity(_frozen([1.0]))
    w = np.arange(1, F, dtype=float) ** -alpha
    p = np.concatenate([[trending_mass], (1 - trending_mass) * w / w.sum()])
    return Popularity(_frozen(p / p.sum()))


def make_groups(requests: Sequence[int], gamma_db: float, bandwidth: float) -> MulticastGroups:
    """Merge per-user content requests into multicast groups ordered by content id."""
    by_content: dict[int, list[int]] = {}
    for k, f in enumerate(requests):
        by_content.setdefault(int(f), []).append(k)
    contents = tuple(sorted(by_content))
    gamma = np.full(len(contents), float(db_to_lin(gamma_db)))
    return MulticastGroups(
        contents,
        tuple(tuple(by_content[f]) for f in contents),
        _frozen(gamma),
        _frozen(group_rate(gamma, bandwidth)),
    )


def sample_requests(pop: Popularity, K: int, gamma_db: float, B: float, seed: int) -> MulticastGroups:
    rng = np.random.default_rng(seed)
    req = rng.choice(len(pop.probs), size=K, p=pop.probs)
    return make_groups(req, gamma_db, B)


CACHE_STRATEGIES = ("PopC", "RanC", "ProC")


def place_cache(strategy: str, pop: Popularity, Y: int, N: int, seed: int) -> CachePlacement:
    """Cache placement by popularity (PopC), uniformly at random (RanC) or by
    popularity-weighted sampling without replacement (ProC)."""
    probs = np.asarray(pop.probs, dtype=float)
    F = probs.size
    if not 0 <= Y < F:
        raise ConfigError("cache size must satisfy 0 <= Y < F")
    rng = np.random.default_rng(seed)
    c = np.zeros((F, N), dtype=np.int8)
    if strategy == "PopC":
        top = np.lexsort((np.arange(F), -probs))[:Y]  # ties by lower id
        c[top, :] = 1
    elif strategy == "RanC":
        for n in range(N):
            c[rng.choice(F, size=Y, replace=False), n] = 1
    elif strategy == "ProC":
        for n in range(N):
            w = probs.copy()
            for _ in range(Y):
                if w.sum() <= 0:
                    w = (c[:, n] == 0).astype(float)
                f = rng.choice(F, p=w / w.sum())
                c[f, n] = 1
                w[f] = 0.0
    else:
        raise ConfigError(f"unknown caching strategy {strategy!r}")
    return CachePlacement(_frozen(c), _frozen(np.full(N, Y, dtype=int)))


def build_scenario(
    cfg: RadioConfig,
    seed: int,
    popularity: Optional[Popularity] = None,
    strategy: str = "PopC",
    cache_size: int = 10,
) -> Scenario:
    """One trial: a single draw of positions, channels, requests and caches."""
    if popularity is None:
        popularity = zipf_popularity(cfg.n_contents, 1.0, 0.5)
    if len(popularity.probs) != cfg.n_contents:
        raise ConfigError("popularity length must equal n_contents")
    s_topo, s_ch, s_req, s_cache = child_seeds(seed, 4)
    topo = build_topology(cfg, s_topo)
    return Scenario(
        cfg=cfg,
        topology=topo,
        channels=sample_channels(topo, cfg, s_ch),
        groups=sample_requests(popularity, cfg.n_users, cfg.sinr_target, cfg.bandwidth, s_req),
        cache=place_cache(strategy, popularity, cache_size, cfg.n_bs, s_cache),
        popularity=popularity,
        seed=seed,
    )


def scenario_from_channels(
    h,
    groups_users: Sequence[Sequence[int]],
    contents: Sequence[int],
    cache,
    n_ant: int = 1,
    noise_power=1.0,
    gamma: float = 10.0,
    bandwidth: float = 10e6,
    backhaul_unit: float = 1e6,
    **cfg_overrides,
) -> Scenario:
    """Hand-built scenario from explicit channels (tests and toy instances).

    ``gamma`` is linear; ``cache`` is an (F, N) 0/1 matrix.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    K, NL = h.shape
    N = NL // n_ant
    c = np.atleast_2d(np.asarray(cache, dtype=np.int8))
    F = c.shape[0]
    gamma_db = 10 * math.log10(gamma)
    cfg = RadioConfig(
        n_bs=N, n_ant=n_ant, n_users=K, n_contents=F, bandwidth=bandwidth,
        sinr_target=gamma_db, backhaul_unit=backhaul_unit, **cfg_overrides,
    )
    M = len(groups_users)
    g = np.full(M, float(gamma))
    groups = MulticastGroups(
        tuple(int(f) for f in contents),
        tuple(tuple(int(k) for k in u) for u in groups_users),
        _frozen(g),
        _frozen(group_rate(g, bandwidth)),
    )
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (K,))
    cap = np.maximum(c.sum(axis=0), 0)
    return Scenario(
        cfg=cfg,
        topology=Topology(_frozen(np.zeros((N, 2))), _frozen(np.zeros((K, 2)))),
        channels=ChannelState(_frozen(h), _frozen(noise)),
        groups=groups,
        cache=CachePlacement(_frozen(c), _frozen(cap)),
    )


# --------------------------------------------------------------------------
# SINR and cost model


def sinr(k: int, m: int, w: np.ndarray, ch: ChannelState) -> float:
    """SINR of user ``k`` served by group ``m`` under beamformers ``w``."""
    gains = np.abs(w.conj() @ ch.h[k]) ** 2  # |h_k^H w_j|^2 for all j
    interference = gains.sum() - gains[m]
    return float(gains[m] / (interference + ch.noise_power[k]))


def sinr_all(w: np.ndarray, sc: Scenario) -> np.ndarray:
    """SINR of every scheduled user, ordered group by group."""
    out = []
    for m, users in enumerate(sc.groups.users):
        for k in users:
            out.append(sinr(k, m, w, sc.channels))
    return np.array(out)


def min_sinr_margin(w: np.ndarray, sc: Scenario) -> float:
    """min over users of SINR_k / gamma_m."""
    gam = np.concatenate([[sc.groups.gamma[m]] * len(u) for m, u in enumerate(sc.groups.users)])
    return float(np.min(sinr_all(w, sc) / gam))


def block_powers(w: np.ndarray, n_bs: int, n_ant: int) -> np.ndarray:
    """(M, N) array of ||w_{m,n}||^2."""
    w = np.asarray(w)
    return (np.abs(w) ** 2).reshape(w.shape[0], n_bs, n_ant).sum(axis=2)


def backhaul_cost(s: np.ndarray, c: CachePlacement, groups: MulticastGroups, unit: float = 1.0) -> float:
    """sum_m sum_n s_{m,n} (1 - c_{f_m,n}) R_m, divided by ``unit``."""
    s = np.asarray(s, dtype=float)
    miss = 1 - c.c[list(groups.contents), :].astype(float)
    return float(np.sum(s * miss * np.asarray(groups.rate)[:, None]) / unit)


def power_cost(w: np.ndarray) -> float:
    return float(np.sum(np.abs(np.asarray(w)) ** 2))


def network_cost(w: np.ndarray, s: np.ndarray, sc: Scenario, eta: float) -> CostBreakdown:
    cb = backhaul_cost(s, sc.cache, sc.groups, sc.cfg.backhaul_unit)
    cp = power_cost(w)
    total = cp if math.isinf(eta) else cb + eta * cp
    return CostBreakdown(backhaul=cb, power=cp, total=total, eta=float(eta))
