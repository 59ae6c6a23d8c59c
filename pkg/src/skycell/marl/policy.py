"""Shared actor-critic policy: tanh MLPs with manual backprop, Adam, checkpoints.

Implemented directly on NumPy (no autograd framework); the analytic gradients
are validated against central finite differences in the test suite.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..output import load_npz, savez_deterministic

CHECKPOINT_VERSION = 1
_MASKED_LOGIT = -1e30


class Mlp:
    """Fully-connected network, tanh hidden layers, linear output."""

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0):
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.weights[-1] *= out_scale

    def forward(self, x):
        """Returns (output (B, out), activation cache for backward)."""
        acts = [np.asarray(x, dtype=float)]
        h = acts[0]
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if l == last else np.tanh(z)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out):
        """Gradients of a scalar loss wrt parameters, given d(loss)/d(output)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = grad_out
        for l in range(len(self.weights) - 1, -1, -1):
            grads_w[l] = acts[l].T @ delta
            grads_b[l] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l].T) * (1.0 - acts[l] ** 2)
        return grads_w, grads_b

    def params(self):
        return self.weights + self.biases

    def set_params(self, params):
        n = len(self.weights)
        self.weights = [np.array(p) for p in params[:n]]
        self.biases = [np.array(p) for p in params[n:]]

    def copy_params(self):
        return [p.copy() for p in self.params()]


class Adam:
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def masked_distribution(logits, mask):
    """Softmax restricted to valid actions.

    Returns (probs, logp) with zero probability and a large negative
    log-probability on masked entries.  Every row must have >= 1 valid action.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=1).all():
        raise ValueError("each agent needs at least one valid action")
    z = np.where(mask, logits, _MASKED_LOGIT)
    z = z - z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    total = expz.sum(axis=1, keepdims=True)
    probs = expz / total
    logp = z - np.log(total)
    return probs, logp


def entropy(probs, logp):
    safe = np.where(probs > 0.0, probs * logp, 0.0)
    return -safe.sum(axis=1)


@dataclass
class PolicyModel:
    """Actor + critic over fixed-size observations and the full AP action set."""

    actor: Mlp
    critic: Mlp
    obs_dim: int
    n_actions: int
    hidden: tuple[int, ...]
    normalization: dict
    config_hash: str = ""

    @classmethod
    def init(cls, obs_dim: int, n_actions: int, hidden, rng: np.random.Generator,
             normalization: dict | None = None, config_hash: str = "") -> "PolicyModel":
        hidden = tuple(int(h) for h in hidden)
        actor = Mlp((obs_dim,) + hidden + (n_actions,), rng, out_scale=0.01)
        critic = Mlp((obs_dim,) + hidden + (1,), rng)
        return cls(
            actor=actor,
            critic=critic,
            obs_dim=obs_dim,
            n_actions=n_actions,
            hidden=hidden,
            normalization=dict(normalization or {}),
            config_hash=config_hash,
        )

    def distribution(self, obs, mask):
        obs = np.asarray(obs, dtype=float)
        if not np.isfinite(obs).all():
            raise ValueError("observation contains non-finite features")
        logits, _ = self.actor.forward(obs)
        return masked_distribution(logits, mask)

    def value(self, obs):
        v, _ = self.critic.forward(obs)
        return v[:, 0]

    def act(self, obs, mask, rng: np.random.Generator | None = None):
        """Sampled actions when rng is given, greedy argmax otherwise.

        Returns (actions, log-probabilities of the chosen actions).
        """
        probs, logp = self.distribution(obs, mask)
        if rng is None:
            actions = probs.argmax(axis=1)
        else:
            u = rng.random(probs.shape[0])
            cdf = probs.cumsum(axis=1)
            actions = (u[:, None] > cdf).sum(axis=1)
            actions = np.minimum(actions, probs.shape[1] - 1)
        rows = np.arange(probs.shape[0])
        return actions.astype(np.int64), logp[rows, actions]

    def snapshot(self):
        return self.actor.copy_params(), self.critic.copy_params()

    def restore(self, snap):
        self.actor.set_params(snap[0])
        self.critic.set_params(snap[1])

    def finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.actor.params() + self.critic.params())

    # -- checkpoint io ------------------------------------------------------

    def save(self, path):
        meta = {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
            "normalization": self.normalization,
            "config_hash": self.config_hash,
        }
        arrays = {
            "meta": np.frombuffer(
                json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
            ).copy()
        }
        for prefix, net in (("actor", self.actor), ("critic", self.critic)):
            for l, (w, b) in enumerate(zip(net.weights, net.biases)):
                arrays[f"{prefix}_w{l}"] = w
                arrays[f"{prefix}_b{l}"] = b
        savez_deterministic(path, **arrays)

    @classmethod
    def load(cls, path) -> "PolicyModel":
        data = load_npz(path)
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        rng = np.random.Generator(np.random.PCG64(0))
        model = cls.init(
            meta["obs_dim"],
            meta["n_actions"],
            meta["hidden"],
            rng,
            normalization=meta.get("normalization"),
            config_hash=meta.get("config_hash", ""),
        )
        for prefix, net in (("actor", model.actor), ("critic", model.critic)):
            for l in range(len(net.weights)):
                net.weights[l] = np.array(data[f"{prefix}_w{l}"])
                net.biases[l] = np.array(data[f"{prefix}_b{l}"])
        return model


def config_digest(cfg_dict: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg_dict, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]
