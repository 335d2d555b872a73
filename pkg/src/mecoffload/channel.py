"""Closed-form link model: SINR, OFDMA rate, success probability and
transmission time/energy of a single upload."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LinkParams, Task

D2D = "D2D"
CELLULAR = "cellular"

# 2**x overflows a double past this exponent; treat the threshold as infinite.
_MAX_EXPONENT = 1024.0


def sinr(pt: float, dist: float, alpha: float, noise: float) -> float:
    if dist <= 0:
        raise ValueError("distance must be positive")
    return pt * dist ** (-alpha) / noise


def tx_rate(bandwidth: float, n_sub: int, n_tot: int, f: float) -> float:
    """Achievable rate in bit/s on ``n_sub`` of ``n_tot`` subchannels."""
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")
    return bandwidth * n_sub / n_tot * math.log2(1.0 + f)


def success_threshold(size: float, dt: float, bandwidth: float, n_sub: int, n_tot: int) -> float:
    exponent = size * n_tot / (dt * bandwidth * n_sub)
    if exponent > _MAX_EXPONENT:
        return math.inf
    return 2.0 ** exponent - 1.0


def success_prob(pt: float, dist: float, alpha: float, noise: float, eps: float) -> float:
    if eps < 0:
        raise ValueError("threshold must be >= 0")
    if math.isinf(eps):
        return 0.0
    return math.exp(-noise * eps / (pt * dist ** (-alpha)))


def subchannels(n_tot: int, n_tra: int) -> int:
    """Even split of a receiver's subchannels among co-targeting transmitters.

    Zero when there are more transmitters than subchannels; such uploads drop.
    """
    if n_tra < 1:
        raise ValueError("n_tra must be >= 1")
    return n_tot // n_tra


@dataclass(frozen=True)
class LinkInstance:
    transmitter: int
    receiver: int
    kind: str
    distance: float
    n_tra: int
    n_sub: int

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("link distance must be positive")
        if self.kind not in (D2D, CELLULAR):
            raise ValueError(f"unknown link kind {self.kind!r}")


@dataclass(frozen=True)
class TransmissionOutcome:
    offloaded: bool = False
    dropped: bool = False
    t_tra: float = 0.0
    e_tra: float = 0.0
    e_rec: float = 0.0
    p_suc: float = 1.0
    invalid_target: bool = False


LOCAL = TransmissionOutcome()


def powers(kind: str, params: LinkParams) -> tuple[float, float]:
    if kind == D2D:
        return params.pt_m, params.pr_m
    return params.pt_e, params.pr_e


def link_success_prob(task: Task, link: LinkInstance, params: LinkParams, dt: float) -> float:
    pt, _ = powers(link.kind, params)
    eps = success_threshold(task.size, dt, params.bandwidth, link.n_sub, params.n_tot)
    return success_prob(pt, link.distance, params.path_loss_exp, params.noise, eps)


def transmit(task: Task | None, link: LinkInstance | None, params: LinkParams, dt: float,
             u: float, d2d_range: float = math.inf) -> TransmissionOutcome:
    """Resolve one upload given a uniform draw ``u`` from the channel stream.

    ``link=None`` is local execution. Dropped uploads cost no energy; the
    drop penalty in the task cost carries it.
    """
    if link is None:
        return LOCAL
    if link.kind == D2D and link.distance > d2d_range:
        return TransmissionOutcome(offloaded=True, dropped=True, p_suc=0.0, invalid_target=True)
    if link.n_sub < 1:
        return TransmissionOutcome(offloaded=True, dropped=True, p_suc=0.0)
    p = link_success_prob(task, link, params, dt)
    if u >= p:
        return TransmissionOutcome(offloaded=True, dropped=True, p_suc=p)
    pt, pr = powers(link.kind, params)
    f = sinr(pt, link.distance, params.path_loss_exp, params.noise)
    t_tra = task.size / tx_rate(params.bandwidth, link.n_sub, params.n_tot, f)
    return TransmissionOutcome(offloaded=True, dropped=False, t_tra=t_tra,
                               e_tra=pt * t_tra, e_rec=pr * t_tra, p_suc=p)


def transmit_with_stream(task, link, params, dt, stream: np.random.Generator, d2d_range=math.inf):
    return transmit(task, link, params, dt, float(stream.random()), d2d_range)
