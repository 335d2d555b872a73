"""FIFO execution with deadline-triggered acceleration and DVFS energy."""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import DeviceState, DvfsTable, Task


def schedule(queue_tail: float, arrival: float) -> float:
    """Start time of a task joining a FIFO queue."""
    return max(queue_tail, arrival)


def exec_time(cycles: float, deadline: float, gen_time: float, t_sta: float,
              f: float, f_max: float) -> tuple[float, float]:
    """Split execution into (seconds at ``f`` before the deadline, seconds at ``f_max`` after)."""
    slack = deadline + gen_time - t_sta
    t_in = max(0.0, min(slack, cycles / f))
    remaining = max(0.0, cycles - max(0.0, slack) * f)
    return t_in, remaining / f_max


def exec_energy(dvfs: DvfsTable, mode: int, t_in: float, t_over: float
                ) -> tuple[float, list[tuple[float, float]]]:
    """Energy and (power, duration) segments; overtime runs in the top mode."""
    segments = []
    if t_in > 0:
        segments.append((dvfs.power(mode), t_in))
    if t_over > 0:
        segments.append((dvfs.power(dvfs.max_mode), t_over))
    return sum(p * d for p, d in segments), segments


def drain(battery: float, segments: list[tuple[float, float]]
          ) -> tuple[float, list[tuple[float, float]], bool]:
    """Draw ``segments`` from ``battery`` in order, stopping at depletion.

    Returns the remaining battery, the segments actually drawn (the last one
    truncated at the depletion instant) and whether the battery ran out.
    """
    drawn = []
    for p, d in segments:
        need = p * d
        if need <= battery:
            battery -= need
            drawn.append((p, d))
            continue
        if p > 0 and battery > 0:
            drawn.append((p, battery / p))
        return 0.0, drawn, True
    return battery, drawn, False


@dataclass
class ExecutionRecord:
    task: Task
    executor: int
    exec_order: int = 0
    arrival: float = 0.0
    t_sta: float = 0.0
    t_fin: float = 0.0
    t_exe: float = 0.0
    e_exe: float = 0.0
    e_rec: float = 0.0
    frequency: float = 0.0
    voltage: float = 0.0
    failed: bool = False
    disconnected: bool = False
    battery_before: float = 0.0
    rec_segments: list[tuple[float, float]] = field(default_factory=list)
    power_segments: list[tuple[float, float]] = field(default_factory=list)


def execute(task: Task, target: DeviceState, mode: int, arrival: float, gen_time: float,
            receive: tuple[float, float] | None = None) -> ExecutionRecord:
    """Enqueue ``task`` on ``target`` and settle its energy.

    ``receive`` is the (power, duration) of the reception on the target for
    offloaded tasks; it is drawn before execution. ``target`` is mutated:
    battery, queue tail and processed counter.
    """
    dvfs = target.dvfs
    rec = ExecutionRecord(task=task, executor=target.id, arrival=arrival,
                          frequency=dvfs.frequencies[mode], voltage=dvfs.voltages[mode],
                          battery_before=target.battery)
    if not target.connected:
        rec.failed = rec.disconnected = True
        rec.t_sta = rec.t_fin = arrival
        return rec

    if receive is not None:
        target.battery, rec.rec_segments, dead = drain(target.battery, [receive])
        rec.e_rec = sum(p * d for p, d in rec.rec_segments)
        if dead:
            rec.failed = True
            rec.t_sta = rec.t_fin = arrival
            return rec

    rec.t_sta = schedule(target.queue_tail, arrival)
    t_in, t_over = exec_time(task.cycles, task.effective_deadline, gen_time, rec.t_sta,
                             dvfs.frequencies[mode], dvfs.f_max)
    _, segments = exec_energy(dvfs, mode, t_in, t_over)
    target.battery, rec.power_segments, dead = drain(target.battery, segments)
    rec.e_exe = sum(p * d for p, d in rec.power_segments)
    rec.t_exe = sum(d for _, d in rec.power_segments) if dead else t_in + t_over
    rec.t_fin = rec.t_sta + rec.t_exe
    rec.failed = dead
    target.queue_tail = rec.t_fin
    target.processed += 1
    rec.exec_order = target.processed
    return rec
