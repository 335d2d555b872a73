"""Recurrent multi-agent PPO with a centralized critic and separate rewards.

Actors act on local observations; the critic sees the global state plus
the agent's one-hot id and predicts that agent's own return. Both are
:class:`~mecoffload.neural.RecurrentNet` and are trained with truncated
BPTT over fixed-length chunks whose head hidden states were stored during
collection. Value targets are PopArt-normalized.

Any environment exposing ``n_agents, n_targets, n_modes, obs_dim,
state_dim, episode_length, reset(seed), step(actions), action_masks(),
active(), global_state()`` can be trained.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import zipfile
from dataclasses import dataclass

import numpy as np

from . import neural as nn
from .core import rng_stream

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    step_max: int = 200_000
    n_rollout: int = 8
    num_mini_batch: int = 4
    chunk_len: int = 10
    ppo_epoch: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    value_clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 1.0
    lr: float = 3e-4
    critic_lr: float = 3e-4
    lr_decay: bool = True
    max_grad_norm: float = 10.0
    hidden: int = 64
    share_params: bool = True
    popart_beta: float = 0.99999
    eval_interval: int = 5000
    eval_episodes: int = 10
    eval_seed: int = 12345
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown train config field {sorted(unknown)[0]!r}")
        cfg = cls(**data)
        if cfg.n_rollout < 1 or cfg.num_mini_batch < 1 or cfg.chunk_len < 1 or cfg.step_max < 0:
            raise ValueError("n_rollout, num_mini_batch, chunk_len must be >= 1 and step_max >= 0")
        return cfg


class TrainingDiverged(FloatingPointError):
    def __init__(self, diagnostics: dict):
        super().__init__(f"non-finite loss during PPO update: {diagnostics}")
        self.diagnostics = diagnostics


# ------------------------------------------------------------------- GAE
def compute_gae(rewards, values, dones, gamma: float, lam: float, last_value=0.0):
    """Generalized advantage estimates along axis 0.

    ``dones[t]`` marks that the episode ended after step ``t`` (no
    bootstrap from ``values[t+1]``). ``last_value`` bootstraps past the end.
    Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values and dones must have the same shape")
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = np.broadcast_to(np.asarray(last_value, dtype=float), rewards.shape[1:])
    running = np.zeros(rewards.shape[1:])
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def ppo_surrogate(ratio, adv, clip):
    """Per-sample clipped objective and d(objective)/d(log-ratio)."""
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    s1, s2 = ratio * adv, clipped * adv
    obj = np.minimum(s1, s2)
    live = (s1 <= s2) | ((ratio >= 1.0 - clip) & (ratio <= 1.0 + clip))
    return obj, np.where(live, adv * ratio, 0.0)


# ----------------------------------------------------------------- buffer
def chunk_time(a: np.ndarray, L: int) -> np.ndarray:
    """(T, ...) -> (L, n_chunks, ...), zero-padding the last chunk."""
    n = math.ceil(a.shape[0] / L)
    pad = n * L - a.shape[0]
    if pad:
        a = np.concatenate([a, np.zeros((pad,) + a.shape[1:], dtype=a.dtype)])
    return np.swapaxes(a.reshape((n, L) + a.shape[1:]), 0, 1)


@dataclass
class RolloutBuffer:
    """Time-major rollout arrays (T, E, M, ...) plus chunk bookkeeping."""

    obs: np.ndarray
    state: np.ndarray
    target_mask: np.ndarray
    mode_mask: np.ndarray
    active: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    h_pi: np.ndarray
    h_v: np.ndarray
    chunk_len: int
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_chunks(self) -> int:
        return math.ceil(self.steps / self.chunk_len)

    def chunked(self, name: str) -> np.ndarray:
        return chunk_time(getattr(self, name), self.chunk_len)

    def valid(self) -> np.ndarray:
        return chunk_time(np.ones(self.rewards.shape, dtype=bool), self.chunk_len)

    def chunk_heads(self, name: str) -> np.ndarray:
        """Hidden states at chunk starts, (n_chunks, E, M, H)."""
        return getattr(self, name)[:: self.chunk_len]


# ---------------------------------------------------------------- trainer
class _Group:
    """Parameters, optimizers and value normalizer shared by some agents."""

    def __init__(self, agents, actor: nn.RecurrentNet, critic: nn.RecurrentNet, rng, cfg):
        self.agents = list(agents)
        self.actor_p = actor.init(rng, 0.01)
        self.critic_p = critic.init(rng, 1.0)
        self.actor_opt = nn.Adam(self.actor_p.flat.size, cfg.lr)
        self.critic_opt = nn.Adam(self.critic_p.flat.size, cfg.critic_lr)
        self.popart = nn.PopArt(cfg.popart_beta)


class Trainer:
    def __init__(self, env_factory, cfg: TrainConfig):
        self.cfg = cfg
        self.env_factory = env_factory
        self.envs = [env_factory() for _ in range(cfg.n_rollout)]
        env = self.envs[0]
        self.M, self.nT, self.nF = env.n_agents, env.n_targets, env.n_modes
        self.T = env.episode_length
        self.eye = np.eye(self.M)
        self.actor = nn.RecurrentNet(env.obs_dim + self.M, cfg.hidden, self.nT + self.nF)
        self.critic = nn.RecurrentNet(env.state_dim + self.M, cfg.hidden, 1)
        init_rng = rng_stream(cfg.seed, "train/init")
        members = [range(self.M)] if cfg.share_params else [[m] for m in range(self.M)]
        self.groups = [_Group(a, self.actor, self.critic, init_rng, cfg) for a in members]
        self.sample_rng = rng_stream(cfg.seed, "train/sample")
        self.shuffle_rng = rng_stream(cfg.seed, "train/shuffle")
        self.episode_rng = rng_stream(cfg.seed, "train/episodes")
        self.total_steps = 0
        self.updates = 0
        self.curve: list[dict] = []
        self.last_diagnostics: dict = {}

    # ----------------------------------------------------------- net helpers
    def actor_inputs(self, obs):
        """Append agent one-hots: (..., M, obs_dim) -> (..., M, obs_dim + M)."""
        eye = np.broadcast_to(self.eye, obs.shape[:-1] + (self.M,))
        return np.concatenate([obs, eye], axis=-1)

    def critic_inputs(self, state):
        """Per-agent critic inputs from global states (..., state_dim)."""
        rep = np.broadcast_to(state[..., None, :], state.shape[:-1] + (self.M, state.shape[-1]))
        return self.actor_inputs(rep)

    def _run(self, net, which, x, h0):
        """Forward (L, E, M, D) inputs group by group; returns outputs and hidden."""
        L, E = x.shape[:2]
        out = np.empty((L, E, self.M, net.out_dim))
        h_out = np.empty_like(h0)
        for g in self.groups:
            idx = g.agents
            xs = x[:, :, idx].reshape(L, E * len(idx), -1)
            hs = h0[:, idx].reshape(E * len(idx), -1)
            y, h, _ = net.forward(getattr(g, which), xs, hs)
            out[:, :, idx] = y.reshape(L, E, len(idx), -1)
            h_out[:, idx] = h.reshape(E, len(idx), -1)
        return out, h_out

    def policy_logp(self, logits, target_mask, mode_mask):
        lt = nn.masked_log_softmax(logits[..., :self.nT], target_mask)
        lm = nn.masked_log_softmax(logits[..., self.nT:], mode_mask)
        return lt, lm

    # ------------------------------------------------------------ collection
    def collect_rollouts(self, greedy: bool = False) -> RolloutBuffer:
        cfg = self.cfg
        E, M, T, H = len(self.envs), self.M, self.T, cfg.hidden
        env0 = self.envs[0]
        buf = dict(
            obs=np.zeros((T, E, M, env0.obs_dim + M)),
            state=np.zeros((T, E, M, env0.state_dim + M)),
            target_mask=np.zeros((T, E, M, self.nT), dtype=bool),
            mode_mask=np.zeros((T, E, M, self.nF), dtype=bool),
            active=np.zeros((T, E, M), dtype=bool),
            actions=np.zeros((T, E, M, 2), dtype=int),
            logp=np.zeros((T, E, M)), values=np.zeros((T, E, M)),
            rewards=np.zeros((T, E, M)), dones=np.zeros((T, E, M)),
            h_pi=np.zeros((T, E, M, H)), h_v=np.zeros((T, E, M, H)),
        )
        obs = np.stack([env.reset(seed=int(self.episode_rng.integers(2 ** 62)))[0]
                        for env in self.envs])
        h_pi = np.zeros((E, M, H))
        h_v = np.zeros((E, M, H))
        for t in range(T):
            masks = [env.action_masks() for env in self.envs]
            tmask = np.stack([m[0] for m in masks])
            mmask = np.stack([m[1] for m in masks])
            x_pi = self.actor_inputs(obs)
            x_v = self.critic_inputs(np.stack([env.global_state() for env in self.envs]))
            buf["h_pi"][t], buf["h_v"][t] = h_pi, h_v
            logits, h_pi = self._run(self.actor, "actor_p", x_pi[None], h_pi)
            vals, h_v = self._run(self.critic, "critic_p", x_v[None], h_v)
            lt, lm = self.policy_logp(logits[0], tmask, mmask)
            if greedy:
                at, am = nn.greedy(lt), nn.greedy(lm)
            else:
                at, am = nn.sample(lt, self.sample_rng), nn.sample(lm, self.sample_rng)
            actions = np.stack([at, am], axis=-1)
            logp = (np.take_along_axis(lt, at[..., None], -1)[..., 0]
                    + np.take_along_axis(lm, am[..., None], -1)[..., 0])
            raw_v = np.empty((E, M))
            for g in self.groups:
                raw_v[:, g.agents] = g.popart.denormalize(vals[0][:, g.agents, 0])
            buf["obs"][t], buf["state"][t] = x_pi, x_v
            buf["target_mask"][t], buf["mode_mask"][t] = tmask, mmask
            buf["active"][t] = np.stack([env.active() for env in self.envs])
            buf["actions"][t], buf["logp"][t], buf["values"][t] = actions, logp, raw_v
            nxt = []
            for e, env in enumerate(self.envs):
                o, r, done, _ = env.step(actions[e])
                buf["rewards"][t, e] = r
                buf["dones"][t, e] = float(done)
                nxt.append(o)
            obs = np.stack(nxt)
        self.total_steps += E * T
        return RolloutBuffer(chunk_len=cfg.chunk_len, **buf)

    def prepare(self, buf: RolloutBuffer):
        """GAE in raw units, then PopArt update on the returns."""
        cfg = self.cfg
        adv, ret = compute_gae(buf.rewards, buf.values, buf.dones, cfg.gamma, cfg.gae_lambda)
        buf.advantages, buf.returns = adv, ret
        for g in self.groups:
            g.popart.update(ret[:, :, g.agents], g.critic_p["W_out"], g.critic_p["b_out"])
        return buf

    # ---------------------------------------------------------------- update
    def ppo_update(self, buf: RolloutBuffer) -> dict:
        cfg = self.cfg
        act = buf.active
        a_mean = buf.advantages[act].mean() if act.any() else 0.0
        a_std = buf.advantages[act].std() if act.sum() > 1 else 1.0
        adv_n = (buf.advantages - a_mean) / (a_std + 1e-8)

        lr_scale = 1.0
        if cfg.lr_decay and cfg.step_max > 0:
            lr_scale = max(1.0 - (self.total_steps - len(self.envs) * self.T) / cfg.step_max, 0.0)

        chunks = {name: buf.chunked(name) for name in
                  ("obs", "state", "target_mask", "mode_mask", "active", "actions", "logp")}
        chunks["valid"] = buf.valid()
        # padded steps carry no action; open their masks so log-softmax stays finite
        for name in ("target_mask", "mode_mask"):
            chunks[name] = chunks[name] | ~chunks["valid"][..., None]
        chunks["adv"] = chunk_time(adv_n, buf.chunk_len)
        heads = {"h_pi": buf.chunk_heads("h_pi"), "h_v": buf.chunk_heads("h_v")}

        stats = {"policy_loss": [], "value_loss": [], "entropy": [], "clip_frac": [],
                 "approx_kl": [], "actor_grad_norm": [], "critic_grad_norm": []}
        for g in self.groups:
            idx = g.agents
            ret_n = g.popart.normalize(buf.returns)
            old_v = g.popart.normalize(buf.values)
            gch = {k: _select(v, idx) for k, v in chunks.items()}
            gch["ret"] = _select(chunk_time(ret_n, buf.chunk_len), idx)
            gch["old_v"] = _select(chunk_time(old_v, buf.chunk_len), idx)
            gh = {k: v[:, :, idx].reshape(-1, v.shape[-1]) for k, v in heads.items()}
            n_seq = gh["h_pi"].shape[0]
            for _ in range(cfg.ppo_epoch):
                perm = self.shuffle_rng.permutation(n_seq)
                for mb in np.array_split(perm, cfg.num_mini_batch):
                    if len(mb) == 0:
                        continue
                    d = self._update_minibatch(g, {k: v[:, mb] for k, v in gch.items()},
                                               gh["h_pi"][mb], gh["h_v"][mb], lr_scale)
                    for k, v in d.items():
                        stats[k].append(v)
        self.updates += 1
        diag = {k: float(np.mean(v)) if v else 0.0 for k, v in stats.items()}
        self.last_diagnostics = diag
        return diag

    def _update_minibatch(self, g: _Group, b: dict, h_pi0, h_v0, lr_scale) -> dict:
        cfg = self.cfg
        # actor
        logits, _, cache = self.actor.forward(g.actor_p, b["obs"], h_pi0)
        lt, lm = self.policy_logp(logits, b["target_mask"], b["mode_mask"])
        at, am = b["actions"][..., 0], b["actions"][..., 1]
        new_logp = (np.take_along_axis(lt, at[..., None], -1)[..., 0]
                    + np.take_along_axis(lm, am[..., None], -1)[..., 0])
        w = (b["active"] & b["valid"]).astype(float)
        n_act = max(w.sum(), 1.0)
        log_ratio = np.where(w > 0, new_logp - b["logp"], 0.0)
        ratio = np.exp(log_ratio)
        obj, dobj = ppo_surrogate(ratio, b["adv"], cfg.clip)
        ent = nn.entropy(lt, b["target_mask"]) + nn.entropy(lm, b["mode_mask"])
        policy_loss = -(w * obj).sum() / n_act
        ent_mean = (w * ent).sum() / n_act
        # d loss / d new_logp, then through both heads
        dlogp = (-w * dobj / n_act)[..., None]
        dent = (-cfg.entropy_coef * w / n_act)[..., None]
        dlogits = np.concatenate([
            dlogp * nn.log_prob_grad(lt, b["target_mask"], at) + dent * nn.entropy_grad(lt, b["target_mask"]),
            dlogp * nn.log_prob_grad(lm, b["mode_mask"], am) + dent * nn.entropy_grad(lm, b["mode_mask"]),
        ], axis=-1)
        ga, _ = self.actor.backward(g.actor_p, cache, dlogits)

        # critic
        v, _, vcache = self.critic.forward(g.critic_p, b["state"], h_v0)
        v = v[..., 0]
        wv = b["valid"].astype(float)
        n_v = max(wv.sum(), 1.0)
        ret, old = b["ret"], b["old_v"]
        v_clip = old + np.clip(v - old, -cfg.value_clip, cfg.value_clip)
        e1, e2 = v - ret, v_clip - ret
        use1 = e1 ** 2 >= e2 ** 2
        value_loss = 0.5 * (wv * np.where(use1, e1 ** 2, e2 ** 2)).sum() / n_v
        inside = np.abs(v - old) <= cfg.value_clip
        dv = wv * np.where(use1, e1, np.where(inside, e2, 0.0)) / n_v * cfg.value_coef
        gc, _ = self.critic.backward(g.critic_p, vcache, dv[..., None])

        total = policy_loss - cfg.entropy_coef * ent_mean + cfg.value_coef * value_loss
        if not (np.isfinite(total) and np.all(np.isfinite(ga.flat)) and np.all(np.isfinite(gc.flat))):
            raise TrainingDiverged({"policy_loss": float(policy_loss),
                                    "value_loss": float(value_loss),
                                    "entropy": float(ent_mean), "updates": self.updates,
                                    "total_steps": self.total_steps})
        an = nn.clip_grad_norm(ga.flat, cfg.max_grad_norm)
        cn = nn.clip_grad_norm(gc.flat, cfg.max_grad_norm)
        g.actor_opt.step(g.actor_p.flat, ga.flat, cfg.lr * lr_scale)
        g.critic_opt.step(g.critic_p.flat, gc.flat, cfg.critic_lr * lr_scale)
        clipped = (np.abs(ratio - 1.0) > cfg.clip) & (w > 0)
        return {"policy_loss": float(policy_loss), "value_loss": float(value_loss),
                "entropy": float(ent_mean), "clip_frac": float(clipped.sum() / n_act),
                "approx_kl": float((w * (-log_ratio)).sum() / n_act),
                "actor_grad_norm": an, "critic_grad_norm": cn}

    # ------------------------------------------------------------------ loop
    def train(self, evaluate_fn=None, on_update=None, until: int | None = None) -> list[dict]:
        """Alternate collection and updates until ``step_max`` env steps.

        ``evaluate_fn(trainer)`` returns a metrics dict appended to the
        learning curve every ``eval_interval`` steps. ``until`` stops early
        without changing the learning-rate schedule, e.g. to checkpoint a
        run half way.
        """
        cfg = self.cfg
        stop = cfg.step_max if until is None else min(until, cfg.step_max)
        next_eval = (self.total_steps // cfg.eval_interval + 1) * cfg.eval_interval
        while self.total_steps < stop:
            buf = self.prepare(self.collect_rollouts())
            diag = self.ppo_update(buf)
            if on_update is not None:
                on_update(self, diag)
            if evaluate_fn is not None and (self.total_steps >= next_eval
                                            or self.total_steps >= cfg.step_max):
                point = {"total_steps": self.total_steps, **evaluate_fn(self)}
                self.curve.append(point)
                next_eval = (self.total_steps // cfg.eval_interval + 1) * cfg.eval_interval
        return self.curve

    def greedy_policy(self) -> GreedyPolicy:
        return GreedyPolicy(self.actor, [(g.agents, g.actor_p) for g in self.groups], self.nT)

    # ------------------------------------------------------------ checkpoint
    def save(self, path, extra: dict | None = None):
        arrays = {}
        for i, g in enumerate(self.groups):
            arrays[f"g{i}/actor"] = g.actor_p.flat
            arrays[f"g{i}/critic"] = g.critic_p.flat
            for name, opt in (("actor_opt", g.actor_opt), ("critic_opt", g.critic_opt)):
                arrays[f"g{i}/{name}/m"] = opt.m
                arrays[f"g{i}/{name}/v"] = opt.v
        meta = {
            "version": CHECKPOINT_VERSION,
            "train_config": dataclasses.asdict(self.cfg),
            "dims": {"M": self.M, "nT": self.nT, "nF": self.nF,
                     "obs_dim": self.actor.in_dim - self.M,
                     "state_dim": self.critic.in_dim - self.M},
            "groups": [{"agents": g.agents, "actor_t": g.actor_opt.t,
                        "critic_t": g.critic_opt.t, "popart": g.popart.state()}
                       for g in self.groups],
            "total_steps": self.total_steps,
            "updates": self.updates,
            "rng": {k: getattr(self, k).bit_generator.state
                    for k in ("sample_rng", "shuffle_rng", "episode_rng")},
            "curve": [{k: (v.tolist() if isinstance(v, np.ndarray) else v)
                       for k, v in p.items()} for p in self.curve],
            "extra": extra or {},
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        write_npz(path, arrays)

    @classmethod
    def load(cls, path, env_factory, cfg: TrainConfig | None = None) -> Trainer:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        meta = read_meta(arrays)
        tcfg = cfg or TrainConfig(**meta["train_config"])
        tr = cls(env_factory, tcfg)
        dims = meta["dims"]
        if (tr.M, tr.nT, tr.nF) != (dims["M"], dims["nT"], dims["nF"]) or \
                tr.actor.in_dim - tr.M != dims["obs_dim"]:
            raise ValueError("checkpoint dimensions do not match the environment")
        if len(meta["groups"]) != len(tr.groups):
            raise ValueError("checkpoint parameter sharing does not match the config")
        for i, (g, gm) in enumerate(zip(tr.groups, meta["groups"])):
            g.actor_p.flat[:] = arrays[f"g{i}/actor"]
            g.critic_p.flat[:] = arrays[f"g{i}/critic"]
            g.actor_opt.load({"m": arrays[f"g{i}/actor_opt/m"], "v": arrays[f"g{i}/actor_opt/v"],
                              "t": gm["actor_t"]})
            g.critic_opt.load({"m": arrays[f"g{i}/critic_opt/m"],
                               "v": arrays[f"g{i}/critic_opt/v"], "t": gm["critic_t"]})
            g.popart.load(gm["popart"])
        for k, state in meta["rng"].items():
            getattr(tr, k).bit_generator.state = state
        tr.total_steps = meta["total_steps"]
        tr.updates = meta["updates"]
        tr.curve = meta["curve"]
        return tr


def write_npz(path, arrays: dict):
    """``np.savez`` with fixed zip timestamps so identical inputs give identical bytes."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asanyarray(arr), allow_pickle=False)


def checkpoint_meta(path) -> dict:
    """Metadata of a checkpoint file without building a trainer."""
    with np.load(path) as data:
        return read_meta({"meta": data["meta"]})


def read_meta(arrays) -> dict:
    meta = json.loads(bytes(arrays["meta"]).decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    return meta


def _select(chunked: np.ndarray, agents) -> np.ndarray:
    """(L, C, E, M, ...) -> (L, C*E*|agents|, ...) for the given agents."""
    a = chunked[:, :, :, agents]
    return a.reshape((a.shape[0], -1) + a.shape[4:])


class GreedyPolicy:
    """Decentralized execution: argmax actions from local observations only."""

    def __init__(self, actor: nn.RecurrentNet, groups, n_targets: int):
        self.actor, self.groups, self.nT = actor, groups, n_targets
        self.h = None

    def reset(self, n_agents: int):
        self.h = np.zeros((n_agents, self.actor.hidden))

    def __call__(self, obs, masks):
        M = obs.shape[0]
        if self.h is None or self.h.shape[0] != M:
            self.reset(M)
        x = np.concatenate([obs, np.eye(M)], axis=-1)
        logits = np.empty((M, self.actor.out_dim))
        for agents, params in self.groups:
            y, h, _ = self.actor.forward(params, x[None, agents], self.h[agents])
            logits[agents] = y[0]
            self.h[agents] = h
        lt = nn.masked_log_softmax(logits[:, :self.nT], masks[0])
        lm = nn.masked_log_softmax(logits[:, self.nT:], masks[1])
        return np.stack([nn.greedy(lt), nn.greedy(lm)], axis=-1)


def write_curve(path, curve: list[dict], n_agents: int):
    cols = ["total_steps", "eval_mean_cost", "eval_neg_cost", "eval_cost_epri", "eval_cost_drop",
            "eval_cost_fail", "eval_cost_bd"] + [f"agent{i}_cost" for i in range(n_agents)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for p in curve:
            row = [p["total_steps"], p["cost"], -p["cost"], p["cost_epri"], p["cost_drop"],
                   p["cost_fail"], p["cost_bd"]] + list(p["per_agent_cost"])
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
