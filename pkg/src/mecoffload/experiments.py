"""Episode runners shared by the trainer, the CLI and the demos."""
from __future__ import annotations

import numpy as np

from .core import Config
from .env import MecEnv


def run_episode(env: MecEnv, policy, seed: int) -> dict:
    """Play one episode and return ``env.episode_metrics()``.

    Policies see only local observations and masks; a ``reset()`` method,
    if present, is called at episode start.
    """
    obs, _ = env.reset(seed=seed)
    if hasattr(policy, "reset"):
        policy.reset(env.n_agents)
    done = False
    while not done:
        obs, _, done, _ = env.step(policy(obs, env.action_masks()))
    return env.episode_metrics()


def run_episodes(config: Config, policy, seeds) -> list[dict]:
    env = MecEnv(config)
    return [run_episode(env, policy, int(s)) for s in seeds]


def summarize(metrics: list[dict]) -> dict:
    """Mean over episodes of the scalar metrics plus the per-agent costs."""
    keys = [k for k, v in metrics[0].items() if np.isscalar(v)]
    out = {k: float(np.mean([m[k] for m in metrics])) for k in keys}
    out["per_agent_cost"] = np.mean([m["per_agent_cost"] for m in metrics], axis=0)
    out["episodes"] = len(metrics)
    return out


def episode_seeds(seed: int, count: int) -> list[int]:
    """Evaluation episode seeds shared across policies for paired comparisons."""
    return [int(seed) * 100_003 + i for i in range(count)]


def greedy_evaluator(config: Config, seeds):
    """``evaluate_fn`` for :meth:`Trainer.train`: greedy episodes on fixed seeds."""
    seeds = list(seeds)

    def evaluate(trainer) -> dict:
        return summarize(run_episodes(config, trainer.greedy_policy(), seeds))

    return evaluate
