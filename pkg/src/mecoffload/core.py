"""Domain types, configuration loading and seeded random streams.

Every physical quantity is SI: seconds, joules, watts, hertz, bits, meters.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

MD = "MD"
ED = "ED"

# per task type: (deadline low, deadline high, clipped deadline) in seconds
DEADLINE_RANGES = {1: (0.05, 0.5, 0.3), 2: (0.5, 1.0, 0.75), 3: (1.0, 3.0, 2.0)}
SIZE_RANGE = (5e6, 6e6)
CYCLES_RANGE = (0.2e9, 0.6e9)


class ConfigError(ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SimConfig:
    num_mds: int = 7
    num_eds: int = 5
    arena_side: float = 200.0
    d2d_range: float = 30.0
    slot_length: float = 1.0
    episode_slots: int = 100
    task_gen_prob: float = 0.9
    disconnect_prob: float = 0.1
    # per-class overrides of disconnect_prob, None means "use disconnect_prob"
    md_disconnect_prob: float | None = None
    ed_disconnect_prob: float | None = None
    battery_capacity: float = 1000.0
    min_distance: float = 1.0
    seed: int = 0

    def validate(self):
        for name in ("num_mds", "num_eds", "episode_slots"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        for name in ("task_gen_prob", "disconnect_prob", "md_disconnect_prob", "ed_disconnect_prob"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if self.slot_length <= 0:
            raise ConfigError("slot_length", "must be > 0")
        if self.arena_side <= 0:
            raise ConfigError("arena_side", "must be > 0")
        if not 0 < self.d2d_range <= self.arena_side:
            raise ConfigError("d2d_range", "must lie in (0, arena_side]")
        if self.battery_capacity <= 0:
            raise ConfigError("battery_capacity", "must be > 0")
        if self.min_distance <= 0:
            raise ConfigError("min_distance", "must be > 0")

    @property
    def num_devices(self) -> int:
        return self.num_mds + self.num_eds

    def disconnect_probs(self) -> np.ndarray:
        md = self.disconnect_prob if self.md_disconnect_prob is None else self.md_disconnect_prob
        ed = self.disconnect_prob if self.ed_disconnect_prob is None else self.ed_disconnect_prob
        return np.array([md] * self.num_mds + [ed] * self.num_eds)


@dataclass(frozen=True)
class LinkParams:
    pt_m: float = 0.1
    pt_e: float = 0.2
    pr_m: float = 0.1
    pr_e: float = 0.2
    bandwidth: float = 1e7
    n_tot: int = 64
    path_loss_exp: float = 4.0
    noise: float = 5e-14

    def validate(self):
        for f in dataclasses.fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f.name, "must be > 0")
        if self.n_tot < 1:
            raise ConfigError("n_tot", "must be >= 1")


@dataclass(frozen=True)
class DvfsTable:
    """Ordered (frequency, voltage) operating modes of one device class."""

    frequencies: tuple[float, ...]
    voltages: tuple[float, ...]
    k_stat: float = 0.3
    k_dyn: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, "voltages", tuple(float(v) for v in self.voltages))

    def validate(self, name: str = "dvfs"):
        f, v = np.asarray(self.frequencies), np.asarray(self.voltages)
        if len(f) < 1 or len(f) != len(v):
            raise ConfigError(f"{name}.frequencies", "need >= 1 mode and one voltage per frequency")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ConfigError(f"{name}.frequencies", "must be positive and strictly increasing")
        if np.any(v <= 0) or np.any(np.diff(v) < 0):
            raise ConfigError(f"{name}.voltages", "must be positive and non-decreasing")
        if self.k_stat < 0:
            raise ConfigError(f"{name}.k_stat", "must be >= 0")
        if self.k_dyn <= 0:
            raise ConfigError(f"{name}.k_dyn", "must be > 0")

    @property
    def wf(self) -> int:
        return len(self.frequencies)

    @property
    def f_max(self) -> float:
        return self.frequencies[-1]

    @property
    def max_mode(self) -> int:
        return self.wf - 1

    def power(self, mode: int) -> float:
        """Execution power of a mode in watts, static share included."""
        f, v = self.frequencies[mode], self.voltages[mode]
        return (1.0 + self.k_stat) * self.k_dyn * v * v * f

    def fixed_max(self) -> DvfsTable:
        """Single-mode table pinned at the highest frequency."""
        return DvfsTable((self.f_max,), (self.voltages[-1],), self.k_stat, self.k_dyn)


def default_md_dvfs() -> DvfsTable:
    return DvfsTable((0.8e9, 1.4e9, 1.8e9), (0.90, 1.05, 1.20))


def default_ed_dvfs() -> DvfsTable:
    return DvfsTable((1.0e9, 1.8e9, 2.6e9), (1.10, 1.20, 1.30))


@dataclass(frozen=True)
class BatteryParams:
    a: float = 1e-3
    b: float = 2.0
    c: float = 1.0
    d: float = 0.5
    t_life: float = 3.15e8
    q_norm: float = 3600.0

    def validate(self):
        for name in ("a", "c", "t_life", "q_norm"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be > 0")
        for name in ("b", "d"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")


@dataclass(frozen=True)
class CostWeights:
    omega: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    chi: float = 1e4
    tau: float = 0.1

    def validate(self):
        values = dataclasses.astuple(self)
        for f, v in zip(dataclasses.fields(self), values):
            if v < 0:
                raise ConfigError(f.name, "must be >= 0")
        if not any(v > 0 for v in values):
            raise ConfigError("cost", "at least one weight must be > 0")


@dataclass(frozen=True)
class Config:
    """Everything needed to build an environment."""

    sim: SimConfig = field(default_factory=SimConfig)
    link: LinkParams = field(default_factory=LinkParams)
    dvfs_md: DvfsTable = field(default_factory=default_md_dvfs)
    dvfs_ed: DvfsTable = field(default_factory=default_ed_dvfs)
    battery: BatteryParams = field(default_factory=BatteryParams)
    cost: CostWeights = field(default_factory=CostWeights)

    def validate(self) -> Config:
        self.sim.validate()
        self.link.validate()
        self.dvfs_md.validate("dvfs.md")
        self.dvfs_ed.validate("dvfs.ed")
        if self.dvfs_md.wf != self.dvfs_ed.wf:
            raise ConfigError("dvfs", "MD and ED tables need the same number of modes")
        self.battery.validate()
        self.cost.validate()
        return self

    @property
    def seed(self) -> int:
        return self.sim.seed

    def replace(self, **sections) -> Config:
        """Return a copy with fields overridden, e.g. ``replace(sim={"num_mds": 3})``."""
        kw = {}
        for name, changes in sections.items():
            current = getattr(self, name)
            if isinstance(changes, dict):
                kw[name] = dataclasses.replace(current, **changes)
            else:
                kw[name] = changes
        return dataclasses.replace(self, **kw).validate()

    def with_fixed_max_frequency(self) -> Config:
        return dataclasses.replace(
            self, dvfs_md=self.dvfs_md.fixed_max(), dvfs_ed=self.dvfs_ed.fixed_max()
        )

    def to_dict(self) -> dict[str, Any]:
        sim = {k: v for k, v in dataclasses.asdict(self.sim).items() if v is not None}
        seed = sim.pop("seed")
        return {
            "seed": seed,
            "sim": sim,
            "link": dataclasses.asdict(self.link),
            "dvfs": {
                "md": _dvfs_dict(self.dvfs_md),
                "ed": _dvfs_dict(self.dvfs_ed),
            },
            "battery": dataclasses.asdict(self.battery),
            "cost": dataclasses.asdict(self.cost),
        }


def _dvfs_dict(t: DvfsTable) -> dict[str, Any]:
    return {"frequencies": list(t.frequencies), "voltages": list(t.voltages),
            "k_stat": t.k_stat, "k_dyn": t.k_dyn}


_INT_FIELDS = {"num_mds", "num_eds", "episode_slots", "n_tot", "seed"}


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(section, "expected a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown field")
    kw = {}
    for k, v in data.items():
        if k in _INT_FIELDS:
            if isinstance(v, bool) or not float(v).is_integer():
                raise ConfigError(k, "must be an integer")
            v = int(v)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            v = float(v)
        kw[k] = v
    return cls(**kw)


def config_from_dict(data: dict[str, Any]) -> Config:
    data = dict(data)
    sim = dict(data.pop("sim", {}))
    if "seed" in data:
        sim["seed"] = data.pop("seed")
    dvfs = dict(data.pop("dvfs", {}))
    md_table = dvfs.pop("md", None)
    ed_table = dvfs.pop("ed", None)
    if dvfs:
        raise ConfigError(f"dvfs.{sorted(dvfs)[0]}", "unknown field")
    cfg = Config(
        sim=_build(SimConfig, sim, "sim"),
        link=_build(LinkParams, data.pop("link", {}), "link"),
        dvfs_md=_build(DvfsTable, md_table, "dvfs.md") if md_table else default_md_dvfs(),
        dvfs_ed=_build(DvfsTable, ed_table, "dvfs.ed") if ed_table else default_ed_dvfs(),
        battery=_build(BatteryParams, data.pop("battery", {}), "battery"),
        cost=_build(CostWeights, data.pop("cost", {}), "cost"),
    )
    if data:
        raise ConfigError(sorted(data)[0], "unknown section")
    return cfg.validate()


def load_config(path: str | Path) -> Config:
    """Read a TOML (or JSON, by ``.json`` suffix) config; absent fields take defaults."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else tomli.loads(text)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError("file", f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: Config, path: str | Path):
    path = Path(path)
    data = cfg.to_dict()
    if path.suffix == ".json":
        path.write_text(json.dumps(data, indent=2))
    else:
        path.write_text(tomli_w.dumps(data))


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Deterministic generator for ``(seed, label)``.

    PCG64 keyed by a SeedSequence of the seed and a SHA-256 digest of the
    label, so streams are stable across processes and platforms.
    """
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _label_key(label)])
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class Task:
    origin: int
    gen_order: int
    gen_slot: int
    size: float
    cycles: float
    deadline: float
    type: int
    effective_deadline: float

    def __post_init__(self):
        if not (self.size > 0 and self.cycles > 0 and self.deadline > 0):
            raise ValueError("task size, cycles and deadline must be positive")
        if self.type not in (1, 2, 3):
            raise ValueError("task type must be 1, 2 or 3")


def sample_task(rng: np.random.Generator, origin: int, gen_order: int, gen_slot: int) -> Task:
    """Draw task attributes uniformly from the per-type ranges.

    Always consumes exactly four uniforms so that streams stay aligned
    whether or not the task is actually generated.
    """
    u = rng.random(4)
    x = 1 + min(int(u[0] * 3), 2)
    lo, hi, clip = DEADLINE_RANGES[x]
    return Task(
        origin=origin,
        gen_order=gen_order,
        gen_slot=gen_slot,
        size=SIZE_RANGE[0] + u[1] * (SIZE_RANGE[1] - SIZE_RANGE[0]),
        cycles=CYCLES_RANGE[0] + u[2] * (CYCLES_RANGE[1] - CYCLES_RANGE[0]),
        deadline=lo + u[3] * (hi - lo),
        type=x,
        effective_deadline=clip,
    )


@dataclass
class DeviceState:
    id: int
    kind: str
    position: tuple[float, float]
    battery: float
    b_max: float
    dvfs: DvfsTable
    connected: bool = True
    queue_tail: float = 0.0
    generated: int = 0
    processed: int = 0

    @property
    def soc(self) -> float:
        return self.battery / self.b_max

    @property
    def observed_battery(self) -> float:
        return self.battery if self.connected else 0.0
