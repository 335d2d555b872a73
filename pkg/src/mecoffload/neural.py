"""Small numpy networks with hand-written gradients.

A :class:`RecurrentNet` is ``input -> tanh dense -> GRU -> linear``. All
arrays are float64 and time-major: sequences are (L, B, features).
"""
from __future__ import annotations

import numpy as np


class ParamSet:
    """One flat float64 vector with named array views into it."""

    def __init__(self, shapes: dict[str, tuple[int, ...]], flat: np.ndarray | None = None):
        self.shapes = {k: tuple(v) for k, v in shapes.items()}
        size = sum(int(np.prod(s)) for s in self.shapes.values())
        self.flat = np.zeros(size) if flat is None else flat
        if self.flat.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {self.flat.shape}")
        self.views = {}
        offset = 0
        for name, shape in self.shapes.items():
            n = int(np.prod(shape))
            self.views[name] = self.flat[offset:offset + n].reshape(shape)
            offset += n

    def __getitem__(self, name):
        return self.views[name]

    def __iter__(self):
        return iter(self.views)

    def zeros_like(self) -> ParamSet:
        return ParamSet(self.shapes)

    def copy(self) -> ParamSet:
        return ParamSet(self.shapes, self.flat.copy())


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float = 1.0) -> np.ndarray:
    a = rng.standard_normal(shape)
    transpose = shape[0] < shape[1]
    q, r = np.linalg.qr(a.T if transpose else a)
    q = q * np.sign(np.diag(r))
    return gain * (q.T if transpose else q)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class RecurrentNet:
    def __init__(self, in_dim: int, hidden: int, out_dim: int):
        self.in_dim, self.hidden, self.out_dim = in_dim, hidden, out_dim
        h = hidden
        self.shapes = {
            "W_in": (in_dim, h), "b_in": (h,),
            "W_x": (h, 3 * h), "b_x": (3 * h,),
            "W_h": (h, 3 * h), "b_h": (3 * h,),
            "W_out": (h, out_dim), "b_out": (out_dim,),
        }

    def init(self, rng: np.random.Generator, out_gain: float = 0.01) -> ParamSet:
        p = ParamSet(self.shapes)
        h = self.hidden
        p["W_in"][:] = orthogonal(rng, (self.in_dim, h))
        for k in range(3):
            p["W_x"][:, k * h:(k + 1) * h] = orthogonal(rng, (h, h))
            p["W_h"][:, k * h:(k + 1) * h] = orthogonal(rng, (h, h))
        p["W_out"][:] = orthogonal(rng, (h, self.out_dim), out_gain)
        return p

    def initial_state(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.hidden))

    def forward(self, p: ParamSet, x: np.ndarray, h0: np.ndarray):
        """Run a (L, B, in_dim) sequence from hidden ``h0`` (B, hidden).

        Returns outputs (L, B, out_dim), the final hidden state and a cache
        for :meth:`backward`.
        """
        L, B, _ = x.shape
        H = self.hidden
        a = np.tanh(x @ p["W_in"] + p["b_in"])
        gx = a @ p["W_x"] + p["b_x"]
        hs = np.empty((L + 1, B, H))
        hs[0] = h0
        r = np.empty((L, B, H))
        z = np.empty((L, B, H))
        n = np.empty((L, B, H))
        ghn = np.empty((L, B, H))
        W_h, b_h = p["W_h"], p["b_h"]
        for t in range(L):
            gh = hs[t] @ W_h + b_h
            r[t] = sigmoid(gx[t, :, :H] + gh[:, :H])
            z[t] = sigmoid(gx[t, :, H:2 * H] + gh[:, H:2 * H])
            ghn[t] = gh[:, 2 * H:]
            n[t] = np.tanh(gx[t, :, 2 * H:] + r[t] * ghn[t])
            hs[t + 1] = (1.0 - z[t]) * n[t] + z[t] * hs[t]
        y = hs[1:] @ p["W_out"] + p["b_out"]
        cache = (x, a, hs, r, z, n, ghn)
        return y, hs[-1].copy(), cache

    def backward(self, p: ParamSet, cache, dy: np.ndarray, dh_last: np.ndarray | None = None):
        """Gradients of a scalar loss given dloss/doutputs ``dy`` (L, B, out_dim).

        Returns (ParamSet of gradients, dloss/dh0).
        """
        x, a, hs, r, z, n, ghn = cache
        L, B, _ = x.shape
        H = self.hidden
        g = p.zeros_like()
        hseq = hs[1:]
        g["W_out"][:] = hseq.reshape(-1, H).T @ dy.reshape(-1, self.out_dim)
        g["b_out"][:] = dy.sum(axis=(0, 1))
        dh_out = dy @ p["W_out"].T
        dgx = np.empty((L, B, 3 * H))
        dgh = np.empty((L, B, 3 * H))
        dh = np.zeros((B, H)) if dh_last is None else dh_last.copy()
        W_h = p["W_h"]
        for t in range(L - 1, -1, -1):
            dh = dh + dh_out[t]
            dn = dh * (1.0 - z[t])
            dz = dh * (hs[t] - n[t])
            dn_pre = dn * (1.0 - n[t] ** 2)
            dr = dn_pre * ghn[t]
            dr_pre = dr * r[t] * (1.0 - r[t])
            dz_pre = dz * z[t] * (1.0 - z[t])
            dgx[t, :, :H] = dr_pre
            dgx[t, :, H:2 * H] = dz_pre
            dgx[t, :, 2 * H:] = dn_pre
            dgh[t, :, :H] = dr_pre
            dgh[t, :, H:2 * H] = dz_pre
            dgh[t, :, 2 * H:] = dn_pre * r[t]
            dh = dh * z[t] + dgh[t] @ W_h.T
        g["W_h"][:] = hs[:-1].reshape(-1, H).T @ dgh.reshape(-1, 3 * H)
        g["b_h"][:] = dgh.sum(axis=(0, 1))
        g["W_x"][:] = a.reshape(-1, H).T @ dgx.reshape(-1, 3 * H)
        g["b_x"][:] = dgx.sum(axis=(0, 1))
        da = dgx @ p["W_x"].T
        dpre = da * (1.0 - a ** 2)
        g["W_in"][:] = x.reshape(-1, self.in_dim).T @ dpre.reshape(-1, H)
        g["b_in"][:] = dpre.sum(axis=(0, 1))
        return g, dh


# --------------------------------------------------------------------- heads
def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-probabilities with -inf on masked entries (mask True = allowed)."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    with np.errstate(divide="ignore"):
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def entropy(logp: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return -(np.exp(logp) * np.where(mask, logp, 0.0)).sum(axis=-1)


def log_prob_grad(logp: np.ndarray, mask: np.ndarray, action: np.ndarray) -> np.ndarray:
    """d log p(action) / d logits."""
    g = -np.exp(logp) * mask
    np.put_along_axis(g, action[..., None], np.take_along_axis(g, action[..., None], -1) + 1.0, -1)
    return g


def entropy_grad(logp: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """d entropy / d logits."""
    p = np.exp(logp)
    safe = np.where(mask, logp, 0.0)
    h = -(p * safe).sum(axis=-1, keepdims=True)
    return np.where(mask, -p * (safe + h), 0.0)


def sample(logp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row by inverting the CDF; masked entries are never chosen."""
    cdf = np.cumsum(np.exp(logp), axis=-1)
    u = rng.random(cdf.shape[:-1])[..., None] * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    # guard rounding at the top end: fall back to the last allowed entry
    last = logp.shape[-1] - 1 - np.argmax(np.isfinite(logp)[..., ::-1], axis=-1)
    return np.minimum(idx, last)


def greedy(logp: np.ndarray) -> np.ndarray:
    return np.argmax(logp, axis=-1)


# ------------------------------------------------------------------ optimizer
class Adam:
    def __init__(self, size: int, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-5):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float | None = None):
        """In-place update of ``params``."""
        lr = self.lr if lr is None else lr
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self) -> dict:
        return {"m": self.m, "v": self.v, "t": self.t}

    def load(self, state: dict):
        self.m = np.array(state["m"], dtype=float)
        self.v = np.array(state["v"], dtype=float)
        self.t = int(state["t"])


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> float:
    norm = float(np.sqrt(np.dot(grad, grad)))
    if max_norm and norm > max_norm:
        grad *= max_norm / (norm + 1e-12)
    return norm


# --------------------------------------------------------------------- PopArt
class PopArt:
    """Running target statistics with output-preserving head rescaling.

    Moments are exponential moving averages with debiasing; the scale is
    floored at ``floor``.
    """

    def __init__(self, beta: float = 0.99999, floor: float = 1e-4):
        self.beta, self.floor = beta, floor
        self.mean_acc = 0.0
        self.sq_acc = 0.0
        self.debias = 0.0

    @property
    def mean(self) -> float:
        return self.mean_acc / self.debias if self.debias > 0 else 0.0

    @property
    def std(self) -> float:
        if self.debias <= 0:
            return 1.0
        var = self.sq_acc / self.debias - self.mean ** 2
        return float(np.sqrt(max(var, self.floor ** 2)))

    def normalize(self, x):
        return (np.asarray(x) - self.mean) / self.std

    def denormalize(self, x):
        return np.asarray(x) * self.std + self.mean

    def update(self, targets, W_out: np.ndarray | None = None, b_out: np.ndarray | None = None):
        """Fold a batch of raw targets into the statistics and rescale the
        value head (``W_out``, ``b_out``, modified in place) so that its
        raw-unit outputs are unchanged."""
        targets = np.asarray(targets, dtype=float).ravel()
        old_mean, old_std = self.mean, self.std
        self.mean_acc = self.beta * self.mean_acc + (1 - self.beta) * targets.mean()
        self.sq_acc = self.beta * self.sq_acc + (1 - self.beta) * np.mean(targets ** 2)
        self.debias = self.beta * self.debias + (1 - self.beta)
        new_mean, new_std = self.mean, self.std
        if W_out is not None:
            W_out *= old_std / new_std
            b_out *= old_std
            b_out += old_mean - new_mean
            b_out /= new_std

    def state(self) -> dict:
        return {"mean_acc": self.mean_acc, "sq_acc": self.sq_acc, "debias": self.debias,
                "beta": self.beta, "floor": self.floor}

    def load(self, state: dict):
        for k in ("mean_acc", "sq_acc", "debias", "beta", "floor"):
            setattr(self, k, float(state[k]))
