"""Proximal policy optimization on the shared actor-critic.

Advantages are plain return-minus-value (no GAE); the clipped surrogate and
its manual gradients are finite-difference-checked in the tests.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .policy import Adam, PolicyModel, entropy, masked_distribution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    discount: float = 0.6
    episodes: int = 3000
    episode_len: int = 150
    clip_ratio: float = 0.2
    epochs_per_update: int = 4
    minibatch_size: int = 256
    alpha: float = 1.0
    n_neighbors: int = 5
    entropy_coef: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    value_coef: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "discount": self.discount,
            "episodes": self.episodes,
            "episode_len": self.episode_len,
            "clip_ratio": self.clip_ratio,
            "epochs_per_update": self.epochs_per_update,
            "minibatch_size": self.minibatch_size,
            "alpha": self.alpha,
            "n_neighbors": self.n_neighbors,
            "entropy_coef": self.entropy_coef,
            "hidden": list(self.hidden),
            "value_coef": self.value_coef,
        }


def discounted_return(rewards, gamma: float, t: int = 0) -> float:
    """Discounted sum of the rewards from step t on: sum gamma^(i-t) r_i."""
    rewards = np.asarray(rewards, dtype=float)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    if not 0 <= t < rewards.shape[0]:
        raise ValueError("t out of range")
    tail = rewards[t:]
    return float(tail @ np.power(gamma, np.arange(tail.shape[0])))


def returns_vector(rewards, gamma: float):
    """G(t) for every t, by backward recursion."""
    rewards = np.asarray(rewards, dtype=float)
    out = np.empty_like(rewards)
    acc = 0.0
    for i in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


@dataclass
class RolloutBatch:
    obs: np.ndarray  # (N, D)
    mask: np.ndarray  # (N, A) bool
    actions: np.ndarray  # (N,)
    logp_old: np.ndarray  # (N,)
    returns: np.ndarray  # (N,)


@dataclass
class UpdateDiagnostics:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    aborted: bool = False
    minibatches: int = 0

    def merge(self, other: "UpdateDiagnostics"):
        n = self.minibatches + other.minibatches
        if n == 0:
            return
        w0 = self.minibatches / n
        w1 = other.minibatches / n
        self.policy_loss = w0 * self.policy_loss + w1 * other.policy_loss
        self.value_loss = w0 * self.value_loss + w1 * other.value_loss
        self.entropy = w0 * self.entropy + w1 * other.entropy
        self.clip_fraction = w0 * self.clip_fraction + w1 * other.clip_fraction
        self.approx_kl = w0 * self.approx_kl + w1 * other.approx_kl
        self.minibatches = n


def actor_loss_and_grads(policy: PolicyModel, obs, mask, actions, logp_old,
                         advantages, clip_ratio: float, entropy_coef: float):
    """Clipped-surrogate loss (plus entropy bonus) and parameter gradients."""
    n = obs.shape[0]
    logits, acts = policy.actor.forward(obs)
    probs, logp_all = masked_distribution(logits, mask)
    rows = np.arange(n)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    objective = np.minimum(surr1, surr2)
    ent = entropy(probs, logp_all)
    loss = -objective.mean() - entropy_coef * ent.mean()

    inside = (ratio > 1.0 - clip_ratio) & (ratio < 1.0 + clip_ratio)
    pass_through = (surr1 <= surr2) | inside
    coeff = np.where(pass_through, advantages * ratio, 0.0) / n  # d(-loss)/d(logp)

    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    grad_logits = -coeff[:, None] * (onehot - probs)
    if entropy_coef != 0.0:
        safe_logp = np.where(probs > 0.0, logp_all, 0.0)
        grad_logits += entropy_coef / n * probs * (safe_logp + ent[:, None])
    grads_w, grads_b = policy.actor.backward(acts, grad_logits)

    diag = {
        "loss": float(loss),
        "entropy": float(ent.mean()),
        "clip_fraction": float((~inside).mean()),
        "approx_kl": float((logp_old - logp).mean()),
    }
    return loss, grads_w + grads_b, diag


def critic_loss_and_grads(policy: PolicyModel, obs, returns, value_coef: float):
    v, acts = policy.critic.forward(obs)
    err = v[:, 0] - returns
    loss = 0.5 * value_coef * float((err**2).mean())
    grad_out = (value_coef * err / err.shape[0])[:, None]
    grads_w, grads_b = policy.critic.backward(acts, grad_out)
    return loss, grads_w + grads_b


def ppo_update(policy: PolicyModel, batch: RolloutBatch, cfg: TrainConfig,
               rng: np.random.Generator, adam_actor: Adam, adam_critic: Adam) -> UpdateDiagnostics:
    """Minibatched clipped-surrogate update; rolls back on a non-finite loss."""
    n = batch.obs.shape[0]
    values = policy.value(batch.obs)
    adv = batch.returns - values
    std = adv.std()
    adv = (adv - adv.mean()) / (std + 1e-8)

    snap = policy.snapshot()
    out = UpdateDiagnostics()
    mb = min(cfg.minibatch_size, n)
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            a_loss, a_grads, a_diag = actor_loss_and_grads(
                policy,
                batch.obs[idx],
                batch.mask[idx],
                batch.actions[idx],
                batch.logp_old[idx],
                adv[idx],
                cfg.clip_ratio,
                cfg.entropy_coef,
            )
            c_loss, c_grads = critic_loss_and_grads(
                policy, batch.obs[idx], batch.returns[idx], cfg.value_coef
            )
            if not (np.isfinite(a_loss) and np.isfinite(c_loss)):
                policy.restore(snap)
                log.warning("non-finite PPO loss; update aborted and state rolled back")
                out.aborted = True
                return out
            adam_actor.step(policy.actor.params(), a_grads)
            adam_critic.step(policy.critic.params(), c_grads)
            out.merge(
                UpdateDiagnostics(
                    policy_loss=a_loss,
                    value_loss=c_loss,
                    entropy=a_diag["entropy"],
                    clip_fraction=a_diag["clip_fraction"],
                    approx_kl=a_diag["approx_kl"],
                    minibatches=1,
                )
            )
    if not policy.finite():
        policy.restore(snap)
        log.warning("non-finite parameters after PPO update; state rolled back")
        out.aborted = True
    return out
