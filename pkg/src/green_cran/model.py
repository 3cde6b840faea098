"""Network topology, channel generation, SINR / QoS evaluation and the
network power model for multicast Cloud-RAN."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import yaml

__all__ = [
    "NetworkConfig",
    "Channel",
    "Beamformer",
    "PowerBreakdown",
    "TierSpec",
    "rng_stream",
    "generate_channel",
    "sinr",
    "qos_margin",
    "network_power",
    "mixed_l12_norm",
    "load_scenario",
    "db_to_linear",
]


def db_to_linear(x_db: float) -> float:
    return float(10.0 ** (x_db / 10.0))


def rng_stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, purpose label, index).

    Streams are independent and stable across serial / parallel execution.
    """
    h = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(h, index))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class TierSpec:
    """Large-scale gain tiers: tier i assigns gain ``gains[i]`` to ``sizes[i]``
    RRHs, drawn uniformly per user at channel generation."""
    gains: tuple
    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))


@dataclass(frozen=True)
class NetworkConfig:
    num_rrhs: int
    antennas: tuple            # N_l per RRH
    num_users: int
    groups: tuple              # disjoint non-empty tuples of 0-based user ids
    max_tx_power: tuple        # P_l [W]
    fronthaul_power: tuple     # P_l^c [W]
    drain_inefficiency: tuple  # eta_l in (0, 1]
    noise_sigma: tuple         # sigma_k per user
    target_sinr: tuple         # gamma_k, linear
    group_weights: tuple       # rho_l > 0 per RRH
    tiers: TierSpec | None = None
    gain_map: tuple | None = None  # optional (K, L) large-scale gains
    name: str = "unnamed"

    def __post_init__(self):
        L, K = self.num_rrhs, self.num_users
        for attr in ("antennas", "max_tx_power", "fronthaul_power",
                     "drain_inefficiency", "group_weights"):
            vals = tuple(getattr(self, attr))
            if len(vals) != L:
                raise ValueError(f"{attr} must have one entry per RRH")
            object.__setattr__(self, attr, vals)
        for attr in ("noise_sigma", "target_sinr"):
            vals = tuple(getattr(self, attr))
            if len(vals) != K:
                raise ValueError(f"{attr} must have one entry per user")
            object.__setattr__(self, attr, vals)
        groups = tuple(tuple(sorted(g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise ValueError("multicast groups must be non-empty")
            if seen & set(g):
                raise ValueError("multicast groups must be disjoint")
            seen |= set(g)
        if seen != set(range(K)):
            raise ValueError("groups must partition the user set")
        if any(n <= 0 for n in self.antennas):
            raise ValueError("antenna counts must be positive")
        if any(p <= 0 for p in self.max_tx_power):
            raise ValueError("max_tx_power must be positive")
        if any(p < 0 for p in self.fronthaul_power):
            raise ValueError("fronthaul_power must be nonnegative")
        if any(not 0 < e <= 1 for e in self.drain_inefficiency):
            raise ValueError("drain_inefficiency must lie in (0, 1]")
        if any(s <= 0 for s in self.noise_sigma):
            raise ValueError("noise_sigma must be positive")
        if any(g <= 0 for g in self.target_sinr):
            raise ValueError("target_sinr must be positive")
        if any(r <= 0 for r in self.group_weights):
            raise ValueError("group_weights must be positive")
        if self.gain_map is not None:
            gm = tuple(tuple(float(v) for v in row) for row in self.gain_map)
            if len(gm) != K or any(len(r) != L for r in gm):
                raise ValueError("gain_map must be K x L")
            object.__setattr__(self, "gain_map", gm)
        if self.tiers is not None and sum(self.tiers.sizes) != L:
            raise ValueError("tier sizes must partition the RRH set")
        if self.tiers is None and self.gain_map is None:
            raise ValueError("either tiers or an explicit gain_map is required")

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def total_antennas(self) -> int:
        return sum(self.antennas)

    @property
    def antenna_offsets(self) -> tuple:
        off, pos = [], 0
        for n in self.antennas:
            off.append(pos)
            pos += n
        return tuple(off)

    def group_of(self, k: int) -> int:
        for m, g in enumerate(self.groups):
            if k in g:
                return m
        raise ValueError(f"user {k} not in any group")

    def with_sinr(self, gamma_linear: float) -> "NetworkConfig":
        return NetworkConfig(
            self.num_rrhs, self.antennas, self.num_users, self.groups,
            self.max_tx_power, self.fronthaul_power, self.drain_inefficiency,
            self.noise_sigma, (gamma_linear,) * self.num_users,
            self.group_weights, self.tiers, self.gain_map, self.name,
        )


@dataclass(frozen=True)
class Channel:
    """Complex channels h_{kl}; ``h`` stacks per-RRH blocks into rows of
    length N = sum N_l (aggregate vectors h_k)."""
    h: np.ndarray              # (K, N) complex
    gains: np.ndarray          # (K, L) large-scale coefficients actually used
    seed: int

    def block(self, cfg: NetworkConfig, k: int, l: int) -> np.ndarray:
        off = cfg.antenna_offsets[l]
        return self.h[k, off:off + cfg.antennas[l]]

    def restrict(self, cfg: NetworkConfig, active_rrhs) -> np.ndarray:
        """Aggregate channels with only the antenna columns of ``active_rrhs``."""
        cols = []
        for l in sorted(active_rrhs):
            off = cfg.antenna_offsets[l]
            cols.extend(range(off, off + cfg.antennas[l]))
        return self.h[:, cols]


@dataclass(frozen=True)
class Beamformer:
    """Per-group beamforming vectors v_m stacked as rows of length N."""
    v: np.ndarray  # (M, N) complex

    def rrh_block(self, cfg: NetworkConfig, l: int) -> np.ndarray:
        """View of all coefficients of RRH l across groups (tilde v_l)."""
        off = cfg.antenna_offsets[l]
        return self.v[:, off:off + cfg.antennas[l]]


@dataclass(frozen=True)
class PowerBreakdown:
    transmit_w: float
    fronthaul_w: float
    total_w: float
    active_rrhs: frozenset

    @staticmethod
    def combine(transmit_w: float, fronthaul_w: float, active) -> "PowerBreakdown":
        return PowerBreakdown(transmit_w, fronthaul_w,
                              transmit_w + fronthaul_w, frozenset(active))


def generate_channel(cfg: NetworkConfig, seed: int) -> Channel:
    """Draw h_{kl} = D_{kl} g_{kl}, g i.i.d. circular complex Gaussian with
    unit variance per complex entry. Pure function of (cfg, seed)."""
    rng = rng_stream(seed, "channel")
    K, L, N = cfg.num_users, cfg.num_rrhs, cfg.total_antennas
    if cfg.gain_map is not None:
        gains = np.array(cfg.gain_map, dtype=float)
    else:
        gains = np.empty((K, L))
        for k in range(K):
            perm = rng.permutation(L)
            pos = 0
            for g, s in zip(cfg.tiers.gains, cfg.tiers.sizes):
                gains[k, perm[pos:pos + s]] = g
                pos += s
    g = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) \
        / np.sqrt(2.0)
    h = np.empty((K, N), dtype=complex)
    for l in range(L):
        off = cfg.antenna_offsets[l]
        h[:, off:off + cfg.antennas[l]] = \
            gains[:, l:l + 1] * g[:, off:off + cfg.antennas[l]]
    return Channel(h=h, gains=gains, seed=seed)


def _check_dims(ch: Channel, bf: Beamformer, cfg: NetworkConfig):
    if ch.h.shape[1] != cfg.total_antennas or bf.v.shape[1] != cfg.total_antennas:
        raise ValueError("channel/beamformer dimension mismatch with config")
    if bf.v.shape[0] != cfg.num_groups:
        raise ValueError("beamformer must have one vector per group")


def sinr(ch: Channel, bf: Beamformer, k: int, cfg: NetworkConfig) -> float:
    """Received SINR of user k under beamformer ``bf``."""
    _check_dims(ch, bf, cfg)
    m = cfg.group_of(k)
    g = np.abs(ch.h[k].conj() @ bf.v.T) ** 2  # |h_k^H v_i|^2 per group
    interf = float(g.sum() - g[m])
    return float(g[m] / (interf + cfg.noise_sigma[k] ** 2))


def qos_margin(ch: Channel, bf: Beamformer, k: int, cfg: NetworkConfig) -> float:
    """Quadratic QoS margin; nonpositive iff the SINR target of user k is met."""
    _check_dims(ch, bf, cfg)
    m = cfg.group_of(k)
    g = np.abs(ch.h[k].conj() @ bf.v.T) ** 2
    interf = float(g.sum() - g[m])
    return float(cfg.target_sinr[k] * (interf + cfg.noise_sigma[k] ** 2) - g[m])


def default_zero_tol(cfg: NetworkConfig) -> float:
    # exact-zero support never occurs numerically; scale by the power budget
    return 1e-6 * np.sqrt(max(cfg.max_tx_power))


def network_power(bf: Beamformer, cfg: NetworkConfig,
                  zero_tol: float | None = None) -> PowerBreakdown:
    """Transmit power sum(||v_lm||^2 / eta_l) plus fronthaul power of every
    RRH whose coefficient block exceeds ``zero_tol`` in Euclidean norm."""
    if bf.v.shape[1] != cfg.total_antennas:
        raise ValueError("beamformer dimension mismatch with config")
    if zero_tol is None:
        zero_tol = default_zero_tol(cfg)
    transmit = 0.0
    fronthaul = 0.0
    active = []
    for l in range(cfg.num_rrhs):
        blk = bf.rrh_block(cfg, l)
        sq = float(np.sum(np.abs(blk) ** 2))
        transmit += sq / cfg.drain_inefficiency[l]
        if np.sqrt(sq) > zero_tol:
            fronthaul += cfg.fronthaul_power[l]
            active.append(l)
    return PowerBreakdown.combine(transmit, fronthaul, active)


def mixed_l12_norm(bf: Beamformer, cfg: NetworkConfig, rho=None) -> float:
    """Weighted mixed l1/l2 norm of the per-RRH blocks (group-sparsity gauge)."""
    if rho is None:
        rho = cfg.group_weights
    total = 0.0
    for l in range(cfg.num_rrhs):
        total += rho[l] * float(np.linalg.norm(bf.rrh_block(cfg, l)))
    return total


def _broadcast(val, n, what):
    if isinstance(val, (int, float)):
        return (float(val),) * n
    vals = tuple(float(v) for v in val)
    if len(vals) != n:
        raise ValueError(f"{what}: expected scalar or list of length {n}")
    return vals


def load_scenario(path, sinr_db: float | None = None) -> NetworkConfig:
    """Load a scenario file (YAML key-value schema, see scenarios/README.md).

    SINR targets are given in dB and converted to linear scale exactly once,
    here. ``sinr_db`` overrides the file's target for sweeps.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    L = int(raw["num_rrhs"])
    K = int(raw["num_users"])
    groups = tuple(tuple(int(u) - 1 for u in g) for g in raw["groups"])
    antennas = _broadcast(raw.get("antennas", 1), L, "antennas")
    antennas = tuple(int(a) for a in antennas)
    p_max = _broadcast(raw.get("max_tx_power_w", 1.0), L, "max_tx_power_w")
    fh_default = tuple(5.6 + l for l in range(L))
    fronthaul = raw.get("fronthaul_power_w", "default")
    fronthaul = fh_default if fronthaul == "default" \
        else _broadcast(fronthaul, L, "fronthaul_power_w")
    eta = _broadcast(raw.get("drain_inefficiency", 0.25), L, "drain_inefficiency")
    sigma = _broadcast(raw.get("noise_sigma", 1.0), K, "noise_sigma")
    if sinr_db is None:
        sinr_db = float(raw.get("target_sinr_db", 0.0))
    gamma = (db_to_linear(sinr_db),) * K
    weights = raw.get("group_weights", "fronthaul")
    weights = fronthaul if weights == "fronthaul" \
        else _broadcast(weights, L, "group_weights")
    tiers = None
    gain_map = None
    if "tiers" in raw:
        tiers = TierSpec(gains=raw["tiers"]["gains"], sizes=raw["tiers"]["sizes"])
    if "gain_map" in raw:
        gain_map = tuple(tuple(float(v) for v in row) for row in raw["gain_map"])
    return NetworkConfig(
        num_rrhs=L, antennas=antennas, num_users=K, groups=groups,
        max_tx_power=p_max, fronthaul_power=fronthaul,
        drain_inefficiency=eta, noise_sigma=sigma, target_sinr=gamma,
        group_weights=weights, tiers=tiers, gain_map=gain_map,
        name=str(raw.get("name", "unnamed")),
    )
