"""State-of-charge statistics over piecewise-constant power traces and the
per-task battery degradation estimate."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import BatteryParams


@dataclass
class PowerTrace:
    """Battery draw between transition points.

    ``segments`` are (power in W, duration in s); positive power discharges.
    """

    b0: float
    b_max: float
    segments: list[tuple[float, float]] = field(default_factory=list)
    t0: float = 0.0

    def __post_init__(self):
        for p, d in self.segments:
            if d <= 0:
                raise ValueError("segment durations must be positive")
        if self.b0 - sum(p * d for p, d in self.segments) < -1e-9 * self.b_max:
            raise ValueError("trace drives the battery negative")

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.segments)

    def levels(self) -> list[float]:
        """Battery energy at each transition point, length Z+1."""
        out = [self.b0]
        for p, d in self.segments:
            out.append(out[-1] - p * d)
        return out

    def soc_at(self, t: np.ndarray) -> np.ndarray:
        """SoC at times ``t`` measured from ``t0``; used by quadrature checks."""
        t = np.asarray(t, dtype=float)
        bounds = np.concatenate([[0.0], np.cumsum([d for _, d in self.segments])])
        levels = np.array(self.levels())
        idx = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, len(self.segments) - 1)
        p = np.array([p for p, _ in self.segments])[idx]
        return (levels[idx] - p * (t - bounds[idx])) / self.b_max


@dataclass(frozen=True)
class DegradationResult:
    soc_avg: float
    soc_dev: float
    n_cyc: float
    bd: float


def _require(trace: PowerTrace):
    if not trace.segments:
        raise ValueError("empty trace")


def soc_avg(trace: PowerTrace) -> float:
    _require(trace)
    levels = trace.levels()
    area = sum((levels[z] + levels[z + 1]) / 2 * d for z, (_, d) in enumerate(trace.segments))
    return area / trace.duration / trace.b_max


def soc_dev(trace: PowerTrace) -> float:
    """Twice sqrt(3) times the RMS deviation of SoC from its mean.

    Each segment contributes ``((u + p*dt)**3 - u**3) / p`` with
    ``u = B_avg - B(t_z)``; it is expanded as ``dt*(3u^2 + 3u*p*dt + (p*dt)^2)``
    which is exact, avoids cancellation and has the right limit at ``p = 0``.
    """
    _require(trace)
    total = trace.duration
    b_avg = soc_avg(trace) * trace.b_max
    levels = trace.levels()
    acc = 0.0
    for (p, dt), b in zip(trace.segments, levels[:-1]):
        u = b_avg - b
        x = p * dt
        acc += dt * (3 * u * u + 3 * u * x + x * x)
    return 2.0 * math.sqrt(max(acc, 0.0) / (total * trace.b_max ** 2))


def effective_cycles(trace: PowerTrace) -> float:
    """Half the net SoC swing (discharge-only traces)."""
    if not trace.segments:
        return 0.0
    levels = trace.levels()
    return max(0.0, (levels[0] - levels[-1]) / trace.b_max / 2)


def degradation(n_cyc: float, soc_dev: float, soc_avg: float, duration: float,
                params: BatteryParams) -> float:
    cycling = params.a * n_cyc * math.exp((soc_dev - 1.0) * params.b)
    calendar = 0.2 * duration / params.t_life
    return (cycling + calendar) * params.c * math.exp(params.d * (soc_avg - 0.5))


def evaluate(trace: PowerTrace | None, params: BatteryParams) -> DegradationResult:
    """All four statistics for one trace; an empty or missing trace degrades nothing."""
    if trace is None or not trace.segments:
        avg = trace.b0 / trace.b_max if trace is not None else 0.0
        return DegradationResult(avg, 0.0, 0.0, 0.0)
    avg = soc_avg(trace)
    dev = soc_dev(trace)
    n = effective_cycles(trace)
    return DegradationResult(avg, dev, n, degradation(n, dev, avg, trace.duration, params))


def bd_total(tx_trace: PowerTrace | None, rx_trace: PowerTrace | None,
             params: BatteryParams) -> float:
    """Degradation charged to one task: transmitter side plus executor side."""
    return evaluate(tx_trace, params).bd + evaluate(rx_trace, params).bd


TRACE_COLUMNS = ["device", "t_start_s", "duration_s", "power_w", "b_start_j"]


def write_trace_csv(path, rows: Iterable[tuple]):
    """Dump (device, t_start, duration, power, battery at start) rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
