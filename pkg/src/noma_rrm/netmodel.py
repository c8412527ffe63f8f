"""Network scenario, synthetic channel model and the NOMA performance metrics.

Array conventions used throughout the package:

* ``x`` -- association, int array ``[B, M]``, ``x[b, m] = 1`` iff user ``m`` is served by BS ``b``.
* ``s`` -- subchannel allocation, int array ``[B, M, N]``.
* ``p`` -- transmit power in watts, float array ``[B, M, N]``.
* ``sc.gains[j, m, n]`` -- linear power gain from BS ``j`` to user ``m`` on subchannel ``n``.

Users sharing a subchannel are decoded in ascending gain order: a user sees the
signals of the stronger co-channel users as interference, the strongest user
sees none after SIC.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ChecksumError, ConfigError, TruncatedFileError,
                     UndefinedLoadError, VersionMismatchError)

MACRO = "macro"
SMALL = "small"


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class BaseStation:
    id: int
    kind: str
    position: tuple
    p_max: float
    p_circuit: float
    k_cap: int
    i_cap: float

    def __post_init__(self):
        if self.kind not in (MACRO, SMALL):
            raise ConfigError(f"unknown BS kind {self.kind!r}")
        if self.p_max <= 0 or self.p_circuit <= 0 or self.i_cap <= 0:
            raise ConfigError(f"BS {self.id}: powers and interference cap must be positive")
        if self.k_cap < 1:
            raise ConfigError(f"BS {self.id}: k_cap must be >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, radio parameters and channel-model constants.

    Powers are given in dBm and converted to watts by :func:`generate_scenario`.
    ``k_cap=None`` means ``ceil(ceil(M/B) * 1.5)``; ``interference_cap_w=None``
    means ten times the noise power.
    """
    n_small: int = 3
    n_users: int = 60
    n_subchannels: int = 12
    macro_radius: float = 100.0
    small_radius: float = 30.0
    small_placement_radius: float = 80.0
    macro_power_dbm: float = 9.5
    small_power_dbm: float = 4.7
    macro_circuit_dbm: float = 10.0
    small_circuit_dbm: float = 7.0
    noise_dbm: float = -134.0
    bandwidth_hz: float = 1.2e9
    qos_rate: float = 1e7
    interference_cap_w: float | None = None
    k_cap: int | None = None
    alpha_macro: float = 3.5
    alpha_small: float = 3.0
    edge_snr_db: float = 10.0
    min_distance: float = 1.0

    @property
    def n_bs(self):
        return self.n_small + 1

    def validate(self):
        if self.n_small < 0 or self.n_users < 1 or self.n_subchannels < 1:
            raise ConfigError("need n_small >= 0, n_users >= 1, n_subchannels >= 1")
        positive = ["macro_radius", "small_radius", "bandwidth_hz", "alpha_macro",
                    "alpha_small", "min_distance"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.small_placement_radius < 0 or self.small_placement_radius > self.macro_radius:
            raise ConfigError("small_placement_radius must lie in [0, macro_radius]")
        if self.qos_rate < 0:
            raise ConfigError("qos_rate must be >= 0")
        if self.interference_cap_w is not None and self.interference_cap_w <= 0:
            raise ConfigError("interference_cap_w must be positive")
        if self.k_cap is not None and self.k_cap < 1:
            raise ConfigError("k_cap must be >= 1")
        for name in ("macro_power_dbm", "small_power_dbm", "macro_circuit_dbm",
                     "small_circuit_dbm", "noise_dbm", "edge_snr_db"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    def default_k_cap(self):
        if self.k_cap is not None:
            return int(self.k_cap)
        return int(math.ceil(math.ceil(self.n_users / self.n_bs) * 1.5))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


DESK_SCALE = ScenarioConfig(n_users=24, n_subchannels=6)
REFERENCE = ScenarioConfig()


def load_config(path) -> ScenarioConfig:
    """Read a ``key = value`` text file into a :class:`ScenarioConfig`.

    Blank lines and ``#`` comments are ignored. Unknown keys and a ``seed`` key
    are returned separately by :func:`read_config_file`; this helper drops them.
    """
    return read_config_file(path)[0]


def read_config_file(path, base: ScenarioConfig | None = None):
    """Parse a key-value config file. Returns ``(ScenarioConfig, extras)``.

    ``extras`` holds keys that are not ScenarioConfig fields (e.g. ``seed``),
    as raw strings.
    """
    base = base or ScenarioConfig()
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    changes, extras = {}, {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in types:
            extras[key] = value
            continue
        kind = types[key]
        try:
            if value.lower() in ("none", ""):
                changes[key] = None
            elif "int" in str(kind):
                changes[key] = int(value)
            else:
                changes[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    cfg = dataclasses.replace(base, **changes)
    cfg.validate()
    return cfg, extras


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scenario:
    stations: tuple
    n_users: int
    n_subchannels: int
    bandwidth_hz: float
    noise_power: float
    qos_rate: float
    gains: np.ndarray
    seed: int = 0
    user_positions: np.ndarray = field(default=None)

    def __post_init__(self):
        g = _readonly(np.asarray(self.gains, dtype=float))
        object.__setattr__(self, "gains", g)
        if self.user_positions is not None:
            object.__setattr__(self, "user_positions", _readonly(self.user_positions))
        if g.shape != (len(self.stations), self.n_users, self.n_subchannels):
            raise ConfigError(f"gains shape {g.shape} does not match stations/users/subchannels")
        if not (np.all(np.isfinite(g)) and np.all(g > 0)):
            raise ConfigError("gains must be strictly positive and finite")
        if self.bandwidth_hz <= 0 or self.noise_power <= 0 or self.qos_rate < 0:
            raise ConfigError("bandwidth and noise must be positive, qos_rate >= 0")
        if sum(st.kind == MACRO for st in self.stations) != 1:
            raise ConfigError("a scenario needs exactly one macro BS")

    @property
    def n_bs(self):
        return len(self.stations)

    @property
    def shape(self):
        return self.gains.shape

    @property
    def macro_index(self):
        return next(i for i, st in enumerate(self.stations) if st.kind == MACRO)

    @property
    def p_max(self):
        return np.array([st.p_max for st in self.stations])

    @property
    def p_circuit(self):
        return np.array([st.p_circuit for st in self.stations])

    @property
    def k_cap(self):
        return np.array([st.k_cap for st in self.stations], dtype=int)

    @property
    def i_cap(self):
        return np.array([st.i_cap for st in self.stations])

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.stations == other.stations and self.n_users == other.n_users
                and self.n_subchannels == other.n_subchannels
                and self.bandwidth_hz == other.bandwidth_hz
                and self.noise_power == other.noise_power
                and self.qos_rate == other.qos_rate and self.seed == other.seed
                and np.array_equal(self.gains, other.gains))


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_scenario(config: ScenarioConfig = REFERENCE, seed: int = 0) -> Scenario:
    """Draw a scenario: BS and user positions, then log-distance path loss times Rayleigh fading.

    The path-loss constant of each tier is set so that a user at the tier's
    coverage radius sees ``edge_snr_db`` at full BS power on a unit fading draw.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    noise = float(dbm_to_watt(config.noise_dbm))
    i_cap = config.interference_cap_w if config.interference_cap_w is not None else 10.0 * noise
    k_cap = config.default_k_cap()
    edge_snr = 10.0 ** (config.edge_snr_db / 10.0)

    positions = np.vstack([[0.0, 0.0], _uniform_disc(rng, config.n_small, config.small_placement_radius)])
    users = _uniform_disc(rng, config.n_users, config.macro_radius)

    p_macro = float(dbm_to_watt(config.macro_power_dbm))
    p_small = float(dbm_to_watt(config.small_power_dbm))
    stations = [BaseStation(0, MACRO, tuple(positions[0]), p_macro,
                            float(dbm_to_watt(config.macro_circuit_dbm)), k_cap, i_cap)]
    for i in range(1, config.n_bs):
        stations.append(BaseStation(i, SMALL, tuple(positions[i]), p_small,
                                    float(dbm_to_watt(config.small_circuit_dbm)), k_cap, i_cap))

    alpha = np.array([config.alpha_macro] + [config.alpha_small] * config.n_small)
    radius = np.array([config.macro_radius] + [config.small_radius] * config.n_small)
    p_max = np.array([st.p_max for st in stations])
    const = edge_snr * noise * radius ** alpha / p_max

    dist = np.linalg.norm(positions[:, None, :] - users[None, :, :], axis=-1)
    dist = np.maximum(dist, config.min_distance)
    path_gain = const[:, None] * dist ** (-alpha[:, None])
    fading = rng.exponential(1.0, size=(config.n_bs, config.n_users, config.n_subchannels))
    # exponential draws can underflow to exactly 0 only with vanishing probability
    fading = np.maximum(fading, 1e-12)
    gains = path_gain[:, :, None] * fading

    return Scenario(tuple(stations), config.n_users, config.n_subchannels,
                    config.bandwidth_hz, noise, config.qos_rate, gains, seed, users)


# ---------------------------------------------------------------------------
# Scenario persistence

_SCN_MAGIC = b"NOMASCN\0"
_SCN_VERSION = 1


def save_scenario(sc: Scenario, path):
    """Binary form: magic, version, little-endian header, BS table, gains (b, m, n row-major), sha256."""
    body = bytearray()
    body += struct.pack("<IIIIddd q", _SCN_VERSION, sc.n_bs, sc.n_users, sc.n_subchannels,
                        sc.bandwidth_hz, sc.noise_power, sc.qos_rate, sc.seed)
    for st in sc.stations:
        body += struct.pack("<B dd dd q d", st.kind == MACRO, st.position[0], st.position[1],
                            st.p_max, st.p_circuit, st.k_cap, st.i_cap)
    body += np.ascontiguousarray(sc.gains, dtype="<f8").tobytes()
    data = _SCN_MAGIC + bytes(body)
    Path(path).write_bytes(data + hashlib.sha256(data).digest())


def load_scenario(path) -> Scenario:
    raw = Path(path).read_bytes()
    if raw[:8] != _SCN_MAGIC:
        raise VersionMismatchError("not a scenario file")
    head = struct.calcsize("<IIIIddd q")
    if len(raw) < 8 + head + 32:
        raise TruncatedFileError("scenario file truncated")
    version, nb, nm, nn, bw, noise, qos, seed = struct.unpack_from("<IIIIddd q", raw, 8)
    if version != _SCN_VERSION:
        raise VersionMismatchError(f"scenario version {version}, expected {_SCN_VERSION}")
    st_size = struct.calcsize("<B dd dd q d")
    expected = 8 + head + nb * st_size + nb * nm * nn * 8 + 32
    if len(raw) < expected:
        raise TruncatedFileError("scenario file truncated")
    data, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(data).digest() != digest:
        raise ChecksumError("scenario checksum mismatch")
    off = 8 + head
    stations = []
    for i in range(nb):
        is_macro, px, py, pmax, pc, kc, ic = struct.unpack_from("<B dd dd q d", raw, off)
        off += st_size
        stations.append(BaseStation(i, MACRO if is_macro else SMALL, (px, py), pmax, pc, kc, ic))
    gains = np.frombuffer(raw, dtype="<f8", count=nb * nm * nn, offset=off).reshape(nb, nm, nn)
    return Scenario(tuple(stations), nm, nn, bw, noise, qos, gains.astype(float), seed)


# ---------------------------------------------------------------------------
# Metrics

def loads(x):
    return np.asarray(x).sum(axis=1)


def _active(x, s):
    return np.asarray(s) * np.asarray(x)[:, :, None]


def intra_interference(sc: Scenario, x, s, p):
    """Same-BS same-subchannel power from users ranked after ``m`` in SIC order, ``[B, M, N]``."""
    g = sc.gains
    sp = _active(x, s) * p
    M = sc.n_users
    idx = np.arange(M)
    # after[b, m, r, n]: r decoded after m, i.e. r has the stronger channel (ties: larger index)
    gm = g[:, :, None, :]
    gr = g[:, None, :, :]
    after = (gr > gm) | ((gr == gm) & (idx[None, None, :, None] > idx[None, :, None, None]))
    return np.einsum("bmrn,brn->bmn", after, sp)


def cross_interference(sc: Scenario, x, s, p):
    """Co-channel power received by user ``m`` from all BSs other than ``b``, ``[B, M, N]``."""
    g = sc.gains
    per_bs = (_active(x, s) * p).sum(axis=1)                 # [B, N]
    total = np.einsum("jn,jmn->mn", per_bs, g)               # [M, N]
    return total[None, :, :] - per_bs[:, None, :] * g


def sinr_tensor(sc: Scenario, x, s, p):
    a = _active(x, s)
    g = sc.gains
    num = a * p * g
    den = g * intra_interference(sc, x, s, p) + cross_interference(sc, x, s, p) + sc.noise_power
    return num / den


def sinr(sc, x, s, p, b, m, n):
    return float(sinr_tensor(sc, x, s, p)[b, m, n])


def capacity_tensor(sc: Scenario, x, s, p):
    """Per-link rate in bits/s; rows of BSs without users are zero."""
    load = loads(x)
    share = np.where(load > 0, sc.bandwidth_hz / np.maximum(load, 1), 0.0)
    return share[:, None, None] * np.log2(1.0 + sinr_tensor(sc, x, s, p))


def capacity(sc, x, s, p, b, m, n):
    if loads(x)[b] < 1:
        raise UndefinedLoadError(f"no users associated to BS {b}")
    return float(capacity_tensor(sc, x, s, p)[b, m, n])


def user_rates(sc, x, s, p):
    """Total rate of each user over its serving BS's subchannels, ``[M]``."""
    c = capacity_tensor(sc, x, s, p)
    return (np.asarray(x)[:, :, None] * c).sum(axis=(0, 2))


def sum_rate(sc, x, s, p):
    return float(user_rates(sc, x, s, p).sum())


def transmit_power(sc, x, s, p):
    """Transmit power used at each BS, ``[B]``."""
    return (_active(x, s) * p).sum(axis=(1, 2))


def total_power(sc, x, s, p):
    return float(transmit_power(sc, x, s, p).sum() + sc.p_circuit.sum())


def energy_efficiency(sc, x, s, p):
    return sum_rate(sc, x, s, p) / total_power(sc, x, s, p)


# ---------------------------------------------------------------------------
# Constraints

@dataclass
class ConstraintCheck:
    passed: bool
    slack: np.ndarray

    @property
    def worst(self):
        return float(self.slack.min()) if self.slack.size else 0.0


@dataclass
class ConstraintReport:
    """Slack convention: a constraint holds iff every slack entry is >= 0 (up to tolerance)."""
    c1: ConstraintCheck
    c2: ConstraintCheck
    c3: ConstraintCheck
    c4: ConstraintCheck
    c5: ConstraintCheck
    c6: ConstraintCheck

    def passed(self, names=("c1", "c2", "c3", "c4", "c5", "c6")):
        return all(getattr(self, n).passed for n in names)

    def failures(self):
        return [n for n in ("c1", "c2", "c3", "c4", "c5", "c6") if not getattr(self, n).passed]

    @property
    def c5_satisfaction(self):
        """Fraction of users meeting the QoS rate."""
        sl = self.c5.slack
        return float(np.mean(sl >= 0)) if sl.size else 1.0


def check_constraints(sc: Scenario, x, s, p, rtol=1e-9) -> ConstraintReport:
    x = np.asarray(x)
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    c1 = -np.abs(x.sum(axis=0) - 1).astype(float)
    c2 = (2 - _active(x, s).sum(axis=1)).astype(float)
    c3 = (sc.k_cap - loads(x)).astype(float)
    used = transmit_power(sc, x, s, p)
    c4 = sc.p_max - used
    c5 = user_rates(sc, x, s, p) - sc.qos_rate
    a = _active(x, s).astype(bool)
    interf = cross_interference(sc, x, s, p)
    cap = np.broadcast_to(sc.i_cap[:, None, None], a.shape)
    c6 = (cap - interf)[a]
    c6_scale = cap[a]

    return ConstraintReport(
        c1=ConstraintCheck(bool(np.all(c1 == 0)), c1),
        c2=ConstraintCheck(bool(np.all(c2 >= 0)), c2.ravel()),
        c3=ConstraintCheck(bool(np.all(c3 >= 0)), c3),
        c4=ConstraintCheck(bool(np.all(c4 >= -rtol * sc.p_max)), c4),
        c5=ConstraintCheck(bool(np.all(c5 >= -rtol * max(sc.qos_rate, 1.0))), c5),
        c6=ConstraintCheck(bool(np.all(c6 >= -rtol * c6_scale)), c6),
    )
