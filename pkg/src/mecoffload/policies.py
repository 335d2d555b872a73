"""Heuristic baselines. A policy maps (observations, masks) to an (M, 2)
array of (target, mode) choices; every choice respects the masks."""
from __future__ import annotations

import numpy as np

from .core import rng_stream


def _noop(i):
    return (i, 0)


class RandomPolicy:
    """Uniform over valid (target, mode) pairs."""

    def __init__(self, seed: int = 0, stream=None):
        self.stream = stream if stream is not None else rng_stream(seed, "policy/random")

    def __call__(self, obs, masks):
        target_mask, mode_mask = masks
        out = np.empty((len(target_mask), 2), dtype=int)
        for i, (tm, mm) in enumerate(zip(target_mask, mode_mask)):
            targets, modes = np.flatnonzero(tm), np.flatnonzero(mm)
            if len(targets) == 0 or len(modes) == 0:
                out[i] = _noop(i)
                continue
            out[i] = (targets[self.stream.integers(len(targets))],
                      modes[self.stream.integers(len(modes))])
        return out


class OedPolicy:
    """Offload everything to edge devices, round-robin, top frequency."""

    def __init__(self, num_mds: int, num_eds: int):
        self.num_mds, self.num_eds = num_mds, num_eds
        self.counter = 0

    def __call__(self, obs, masks):
        target_mask, mode_mask = masks
        out = np.empty((len(target_mask), 2), dtype=int)
        for i, (tm, mm) in enumerate(zip(target_mask, mode_mask)):
            target = self.num_mds + self.counter % self.num_eds
            if not tm[target]:
                # disconnected sender or no task: only local is allowed
                out[i] = (i, 0 if not mm[-1] else len(mm) - 1)
                continue
            self.counter += 1
            out[i] = (target, len(mm) - 1)
        return out


class OmdPolicy:
    """Execute every task on its own device at top frequency."""

    def __call__(self, obs, masks):
        target_mask, mode_mask = masks
        out = np.empty((len(target_mask), 2), dtype=int)
        for i, mm in enumerate(mode_mask):
            out[i] = (i, len(mm) - 1 if mm[-1] else 0)
        return out


class FixedFrequency:
    """Wrap a policy and force one DVFS mode wherever that mode is allowed."""

    def __init__(self, inner, mode: int = -1):
        self.inner, self.mode = inner, mode

    def __call__(self, obs, masks):
        out = np.array(self.inner(obs, masks))
        _, mode_mask = masks
        for i, mm in enumerate(mode_mask):
            mode = self.mode % len(mm)
            if mm[mode]:
                out[i, 1] = mode
        return out


def make_policy(name: str, num_mds: int, num_eds: int, seed: int = 0):
    name = name.lower()
    if name == "random":
        return RandomPolicy(seed)
    if name == "oed":
        return OedPolicy(num_mds, num_eds)
    if name == "omd":
        return OmdPolicy()
    if name == "random-maxfreq":
        return FixedFrequency(RandomPolicy(seed), -1)
    raise ValueError(f"unknown policy {name!r}")


BASELINES = ("random", "oed", "omd", "random-maxfreq")
