"""Multi-agent offloading environment.

One agent per mobile device (MD). Each slot an agent with a fresh task
picks an offloading target (itself, another MD over D2D, or an edge
device behind the base station) and a DVFS mode for the executor. Costs
are credited to the generating agent at the slot the task resolves.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import battery as bat
from . import channel as ch
from .compute import drain, execute
from .core import (CYCLES_RANGE, ED, MD, SIZE_RANGE, Config, CostWeights, DeviceState, Task,
                   rng_stream, sample_task)

log = logging.getLogger(__name__)

MAX_DEADLINE = 3.0
MAX_CLIPPED_DEADLINE = 2.0


@dataclass
class TaskResult:
    """Resolution of one generated task and its cost breakdown."""

    agent: int
    g: int
    k: int
    target: int
    mode: int
    type: int
    dropped: bool = False
    failed: bool = False
    e_tra: float = 0.0
    e_rec: float = 0.0
    e_exe: float = 0.0
    bd_tx: float = 0.0
    bd_rx: float = 0.0
    t_tra: float = 0.0
    t_sta: float = 0.0
    t_fin: float = 0.0
    resolve_time: float = 0.0
    reward_slot: int = 0
    cost: float = 0.0
    components: dict = field(default_factory=dict)

    @property
    def local(self) -> bool:
        return self.target == self.agent

    @property
    def bd_tot(self) -> float:
        return self.bd_tx + self.bd_rx

    def to_record(self) -> dict:
        return {"agent": self.agent, "g": self.g, "k": self.k, "target": self.target,
                "mode": self.mode, "X": self.type, "Ds": int(self.dropped), "Fs": int(self.failed),
                "E_tra": self.e_tra, "E_rec": self.e_rec, "E_exe": self.e_exe,
                "BD_tot": self.bd_tot, "cost": self.cost, "reward_slot": self.reward_slot}


def task_cost(result: TaskResult, w: CostWeights) -> tuple[float, dict]:
    """Weighted cost of a resolved task and its four additive parts."""
    e_pri = result.type * (result.e_tra + result.e_rec + result.e_exe)
    parts = {
        "epri": w.omega * e_pri,
        "drop": w.beta * float(result.dropped),
        "fail": w.gamma * float(result.failed),
        "bd": w.chi * result.bd_tot,
    }
    return parts["epri"] + parts["drop"] + parts["fail"] + parts["bd"], parts


def reward(costs, tau: float) -> float:
    """Reward of one agent in one slot from the costs resolved in it."""
    return -tau * sum(costs)


@dataclass
class _Pending:
    result: TaskResult
    task: Task
    receive: tuple[float, float] | None


class MecEnv:
    """Gym-style environment with array observations.

    ``reset`` returns ``(obs, state)`` with ``obs`` shaped (M, obs_dim);
    ``step(actions)`` takes an int array (M, 2) of (target, mode) and
    returns ``(obs, rewards, done, info)``. Targets are 0-based: MDs first
    (0..M-1), then EDs (M..M+N-1).
    """

    def __init__(self, config: Config):
        self.config = config.validate()
        sim = config.sim
        self.n_agents = sim.num_mds
        self.n_targets = sim.num_devices
        self.n_modes = config.dvfs_md.wf
        self.obs_dim = 6 + 4 * self.n_targets
        self.state_dim = 6 * self.n_agents + 4 * self.n_targets + self.n_agents * self.n_targets + 1
        self._dist_scale = sim.arena_side * math.sqrt(2.0)
        self.episode_length = sim.episode_slots
        self.t = 0
        self.done = True

    # ------------------------------------------------------------------ reset
    def reset(self, seed: int | None = None):
        cfg, sim = self.config, self.config.sim
        seed = sim.seed if seed is None else seed
        self.seed = seed
        self._taskgen = rng_stream(seed, "taskgen")
        self._taskattr = rng_stream(seed, "taskattr")
        self._disconnect = rng_stream(seed, "disconnect")
        self._channel = rng_stream(seed, "channel")
        netinit = rng_stream(seed, "netinit")

        m, n = sim.num_mds, sim.num_eds
        self.md_pos = netinit.uniform(0.0, sim.arena_side, size=(m, 2))
        self.bs_pos = np.array([sim.arena_side / 2, sim.arena_side / 2])
        self.devices = [DeviceState(i, MD, tuple(self.md_pos[i]), sim.battery_capacity,
                                    sim.battery_capacity, cfg.dvfs_md) for i in range(m)]
        self.devices += [DeviceState(m + j, ED, tuple(self.bs_pos), sim.battery_capacity,
                                     sim.battery_capacity, cfg.dvfs_ed) for j in range(n)]

        dist = np.empty((m, m + n))
        diff = self.md_pos[:, None, :] - self.md_pos[None, :, :]
        dist[:, :m] = np.sqrt((diff ** 2).sum(-1))
        dist[:, m:] = np.linalg.norm(self.md_pos - self.bs_pos, axis=1)[:, None]
        self.dist = np.maximum(dist, sim.min_distance)
        np.fill_diagonal(self.dist[:, :m], 0.0)
        self.in_range = np.ones((m, m + n), dtype=bool)
        self.in_range[:, :m] = self.dist[:, :m] <= sim.d2d_range

        self._pending: list = []
        self._seq = 0
        self._outstanding: list[TaskResult] = []
        self.results: list[TaskResult] = []
        self.e_tra = np.zeros(m + n)
        self.e_rec = np.zeros(m + n)
        self.e_exe = np.zeros(m + n)
        self.returns = np.zeros(m)
        self.trace_rows: list[tuple] = []
        self.invalid_actions = 0

        self.t = 1
        self.done = False
        self.tasks: list[Task | None] = [None] * m
        self._begin_slot()
        return self.observations(), self.global_state()

    def _begin_slot(self):
        """Draw this slot's disconnections and tasks (fixed stream consumption)."""
        sim = self.config.sim
        down = self._disconnect.random(sim.num_devices) < sim.disconnect_probs()
        for dev, d in zip(self.devices, down):
            dev.connected = not d
        gen = self._taskgen.random(sim.num_mds) < sim.task_gen_prob
        for i in range(sim.num_mds):
            dev = self.devices[i]
            task = sample_task(self._taskattr, i, dev.generated + 1, self.t)
            if gen[i]:
                dev.generated += 1
                self.tasks[i] = task
            else:
                self.tasks[i] = None

    # ---------------------------------------------------------- observations
    @property
    def now(self) -> float:
        """Start time of the current slot in seconds."""
        return (self.t - 1) * self.config.sim.slot_length

    def action_masks(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean (M, M+N) target mask and (M, WF) mode mask.

        Agents without a task, and disconnected agents, may only pick
        themselves; agents without a task only mode 0 (the no-op).
        """
        m = self.n_agents
        targets = self.in_range.copy()
        modes = np.ones((m, self.n_modes), dtype=bool)
        for i in range(m):
            if self.tasks[i] is None or not self.devices[i].connected:
                targets[i] = False
                targets[i, i] = True
            if self.tasks[i] is None:
                modes[i] = False
                modes[i, 0] = True
        return targets, modes

    def active(self) -> np.ndarray:
        return np.array([t is not None for t in self.tasks])

    def _task_features(self, task: Task | None) -> list[float]:
        if task is None:
            return [0.0] * 6
        return [1.0, task.size / SIZE_RANGE[1], task.cycles / CYCLES_RANGE[1],
                task.deadline / MAX_DEADLINE, task.type / 3.0,
                task.effective_deadline / MAX_CLIPPED_DEADLINE]

    def _backlog(self) -> np.ndarray:
        tails = np.array([d.queue_tail for d in self.devices])
        return np.clip((tails - self.now) / MAX_CLIPPED_DEADLINE, 0.0, 1.0)

    def observations(self) -> np.ndarray:
        """Local observations (M, obs_dim): own task, distances, reachability,
        observed batteries (0 when disconnected) and queue backlogs."""
        b_max = self.config.sim.battery_capacity
        observed = np.array([d.observed_battery for d in self.devices]) / b_max
        backlog = self._backlog()
        targets, _ = self.action_masks()
        rows = []
        for i in range(self.n_agents):
            rows.append(np.concatenate([
                self._task_features(self.tasks[i]),
                self.dist[i] / self._dist_scale,
                targets[i],
                observed,
                backlog,
            ]))
        return np.array(rows)

    def global_state(self) -> np.ndarray:
        """Deduplicated centralized state for the critic."""
        b_max = self.config.sim.battery_capacity
        return np.concatenate([
            np.concatenate([self._task_features(t) for t in self.tasks]),
            np.array([d.battery for d in self.devices]) / b_max,
            np.array([float(d.connected) for d in self.devices]),
            self._backlog(),
            self.dist.ravel() / self._dist_scale,
            np.array([d.queue_tail > self.now for d in self.devices], dtype=float),
            [(self.t - 1) / self.config.sim.episode_slots],
        ])

    # ------------------------------------------------------------------ step
    def step(self, actions):
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        cfg, sim = self.config, self.config.sim
        actions = np.asarray(actions, dtype=int).reshape(self.n_agents, 2)
        m = self.n_agents
        dt = sim.slot_length
        t0, t1 = self.now, self.now + dt
        target_mask, mode_mask = self.action_masks()

        # sanitize: no-task agents are no-ops, masked choices are invalid
        plan = []
        for i in range(m):
            task = self.tasks[i]
            tgt, mode = int(actions[i, 0]), int(actions[i, 1])
            if not (0 <= tgt < self.n_targets and 0 <= mode < self.n_modes):
                raise ValueError(f"agent {i}: action ({tgt}, {mode}) out of range")
            if task is None:
                if tgt != i or mode != 0:
                    log.debug("agent %d has no task; action ignored", i)
                plan.append(None)
                continue
            valid = target_mask[i, tgt] and mode_mask[i, mode]
            if not valid:
                self.invalid_actions += 1
                log.warning("agent %d chose masked action (%d, %d)", i, tgt, mode)
            plan.append((task, tgt, mode, valid))

        # subchannel pools: one per D2D receiver MD, one shared at the base station
        pool = {}
        for i, p in enumerate(plan):
            if p and p[3] and p[1] != i:
                key = "bs" if p[1] >= m else p[1]
                pool[key] = pool.get(key, 0) + 1

        draws = self._channel.random(m)
        resolved_now: list[TaskResult] = []
        for i, p in enumerate(plan):
            if p is None:
                continue
            task, tgt, mode, valid = p
            res = TaskResult(agent=i, g=task.gen_order, k=task.gen_slot, target=tgt,
                             mode=mode, type=task.type)
            if tgt == i:
                res.resolve_time = t0
                self._push(t0, _Pending(res, task, None))
                continue
            if not valid:
                res.dropped = True
                res.resolve_time = t0
                resolved_now.append(res)
                continue
            kind = ch.CELLULAR if tgt >= m else ch.D2D
            n_tra = pool["bs" if tgt >= m else tgt]
            link = ch.LinkInstance(i, tgt, kind, float(self.dist[i, tgt]), n_tra,
                                   ch.subchannels(cfg.link.n_tot, n_tra))
            out = ch.transmit(task, link, cfg.link, dt, float(draws[i]), sim.d2d_range)
            if out.dropped:
                res.dropped = True
                res.resolve_time = t0
                resolved_now.append(res)
                continue
            res.t_tra = out.t_tra
            pt, pr = ch.powers(kind, cfg.link)
            sender = self.devices[i]
            b_before = sender.battery
            sender.battery, drawn, dead = drain(sender.battery, [(pt, out.t_tra)])
            res.e_tra = sum(a * b for a, b in drawn)
            self.e_tra[i] += res.e_tra
            self._log_segments(i, t0, b_before, drawn)
            res.bd_tx = bat.evaluate(bat.PowerTrace(b_before, sim.battery_capacity, drawn),
                                     cfg.battery).bd
            if dead:
                res.failed = True
                res.resolve_time = t0
                resolved_now.append(res)
                continue
            self._push(t0 + out.t_tra, _Pending(res, task, (pr, out.t_tra)))

        for res in resolved_now:
            self._settle(res)

        last = self.t >= sim.episode_slots
        self._process_arrivals(math.inf if last else t1)

        rewards = np.zeros(m)
        credited = []
        keep = []
        for res in self._outstanding:
            if last or res.resolve_time < t1:
                res.reward_slot = self.t
                rewards[res.agent] -= cfg.cost.tau * res.cost
                credited.append(res)
            else:
                keep.append(res)
        self._outstanding = keep
        self.results.extend(credited)
        self.returns += rewards
        self._check_budget()

        self.t += 1
        self.done = self.t > sim.episode_slots
        if not self.done:
            self._begin_slot()
        else:
            self.tasks = [None] * m
        info = {"resolved": credited, "invalid_actions": self.invalid_actions}
        return self.observations(), rewards, self.done, info

    def _push(self, when: float, item: _Pending):
        heapq.heappush(self._pending, (when, self._seq, item))
        self._seq += 1

    def _process_arrivals(self, horizon: float):
        sim, cfg = self.config.sim, self.config
        while self._pending and self._pending[0][0] < horizon:
            arrival, _, item = heapq.heappop(self._pending)
            res, task = item.result, item.task
            target = self.devices[res.target]
            local = item.receive is None
            connected = target.connected
            if local:
                # own network outage does not stop on-board execution
                target.connected = True
            gen_time = (task.gen_slot - 1) * sim.slot_length
            rec = execute(task, target, res.mode, arrival, gen_time, item.receive)
            target.connected = connected
            res.e_rec, res.e_exe = rec.e_rec, rec.e_exe
            res.t_sta, res.t_fin = rec.t_sta, rec.t_fin
            res.failed = rec.failed
            res.resolve_time = rec.t_fin
            self.e_rec[res.target] += rec.e_rec
            self.e_exe[res.target] += rec.e_exe
            self._log_segments(res.target, arrival, rec.battery_before, rec.rec_segments)
            self._log_segments(res.target, rec.t_sta, rec.battery_before - rec.e_rec,
                               rec.power_segments)
            segs = rec.rec_segments + rec.power_segments
            if segs:
                res.bd_rx = bat.evaluate(
                    bat.PowerTrace(rec.battery_before, sim.battery_capacity, segs),
                    cfg.battery).bd
            self._settle(res)

    def _settle(self, res: TaskResult):
        res.cost, res.components = task_cost(res, self.config.cost)
        self._outstanding.append(res)

    def _log_segments(self, device: int, start: float, b0: float, segments):
        for p, d in segments:
            self.trace_rows.append((device, start, d, p, b0))
            start += d
            b0 -= p * d

    def _check_budget(self):
        spent = self.e_tra + self.e_rec + self.e_exe
        limit = self.config.sim.battery_capacity
        if np.any(spent > limit * (1 + 1e-12)):
            raise AssertionError("per-device energy budget exceeded")

    # --------------------------------------------------------------- metrics
    def episode_metrics(self) -> dict:
        """Cost totals of the finished (or running) episode."""
        m = self.n_agents
        per_agent = np.zeros(m)
        parts = {"epri": 0.0, "drop": 0.0, "fail": 0.0, "bd": 0.0}
        for r in self.results:
            per_agent[r.agent] += r.cost
            for k in parts:
                parts[k] += r.components[k]
        n = len(self.results)
        return {
            "cost": float(per_agent.sum()),
            "per_agent_cost": per_agent,
            "cost_epri": parts["epri"], "cost_drop": parts["drop"],
            "cost_fail": parts["fail"], "cost_bd": parts["bd"],
            "tasks": n,
            "drop_rate": sum(r.dropped for r in self.results) / n if n else 0.0,
            "fail_rate": sum(r.failed for r in self.results) / n if n else 0.0,
            "e_tra": float(self.e_tra.sum()), "e_rec": float(self.e_rec.sum()),
            "e_exe": float(self.e_exe.sum()),
        }

    def battery_drain(self) -> np.ndarray:
        b_max = self.config.sim.battery_capacity
        return np.array([b_max - d.battery for d in self.devices])
