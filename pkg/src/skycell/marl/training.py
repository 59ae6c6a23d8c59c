"""Association environment, PPO training loop, and policy evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..association import (
    handover_frequency,
    network_utility_from_rates,
    qos_vector,
    sum_delivered_rate,
)
from ..channel import ChannelRealization, compute_link_stats
from ..deployment import DeploymentPlan, active_network
from ..scenario import Scenario, sample_demand, sample_user_positions, step_mobility
from .observe import RSS_FLOOR_DBM, ObservationSpec, build_observations
from .policy import Adam, PolicyModel, config_digest
from .ppo import RolloutBatch, TrainConfig, ppo_update, returns_vector

_TAG_POLICY_INIT = 201
_TAG_UPDATE = 202
_TAG_EPISODE = 203
_TAG_ACTION = 204
_TAG_EVAL = 205


def _gen(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


@dataclass
class StepOutcome:
    serving_fleet: np.ndarray  # (P,) fleet AP ids, -1 unassociated
    kappa: np.ndarray
    rate_bps: np.ndarray
    r_alpha: float
    delivered_bps: float
    qos_fraction: float
    loads_fleet: np.ndarray  # (n_fleet,)


class AssociationEnv:
    """Mobile users requesting APs over a fixed deployment.

    Every step: associations resolve under capacity and coverage, the shared
    utility reward is computed, then the world advances (random-walk
    mobility, fresh Poisson demands, fresh channel realization).  Actions and
    observations are indexed in fleet space (MBS slot 0 plus every MAP of the
    scenario, deployed or not); undeployed slots are masked out of the policy
    distribution and floored in the observations.
    """

    def __init__(self, scenario: Scenario, plan: DeploymentPlan | None,
                 n_neighbors: int = 5, alpha: float = 1.0):
        self.scenario = scenario
        self.alpha = alpha
        self.aps = active_network(scenario, plan)
        self.n_fleet = scenario.k_max + 1
        self.row_of_id = np.full(self.n_fleet, -1, dtype=np.int64)
        for row, ap_id in enumerate(self.aps.ids):
            self.row_of_id[ap_id] = row
        self.id_of_row = np.array(self.aps.ids, dtype=np.int64)
        self.spec = ObservationSpec(
            n_aps=self.n_fleet,
            n_neighbors=n_neighbors,
            area_width_m=scenario.area_m[0],
            mean_demand_bps=scenario.traffic.mean_demand_bps,
        )

    # -- lifecycle ----------------------------------------------------------

    def reset(self, rng: np.random.Generator):
        self.rng = rng
        self.ue_pos = sample_user_positions(self.scenario, rng)
        self.demand = sample_demand(self.scenario.traffic, rng, self.scenario.num_users)
        self.prev_actions = np.zeros(self.scenario.num_users, dtype=np.int64)
        self.r_alpha_prev = 0.0
        self.own_rate_prev = np.zeros(self.scenario.num_users)
        self._refresh_links()
        return self._observe()

    def _refresh_links(self):
        realization = ChannelRealization.draw(
            self.rng, self.aps.n, self.scenario.num_users
        )
        self.links = compute_link_stats(
            self.aps, self.ue_pos, self.scenario.channel, realization
        )

    def _observe(self):
        p = self.scenario.num_users
        rss_fleet = np.full((self.n_fleet, p), RSS_FLOOR_DBM)
        aoa_fleet = np.zeros((self.n_fleet, p))
        visible = np.zeros((self.n_fleet, p), dtype=np.uint8)
        rows = self.row_of_id >= 0
        rss_fleet[rows] = self.links.rss_dbm
        aoa_fleet[rows] = self.links.aoa_deg
        visible[rows] = self.links.in_cov
        obs, _ = build_observations(
            self.spec,
            self.ue_pos,
            rss_fleet,
            aoa_fleet,
            visible,
            self.own_rate_prev,
            self.demand,
            self.prev_actions,
            self.r_alpha_prev,
        )
        action_mask = visible.T.astype(bool)  # deployed and inside the cone
        action_mask[:, 0] = True  # the MBS always accepts requests
        return obs, action_mask

    def step(self, actions_fleet):
        """Apply per-user requests (fleet AP ids); returns (obs', mask', outcome)."""
        actions_fleet = np.asarray(actions_fleet, dtype=np.int64)
        requests = np.where(
            (actions_fleet >= 0) & (actions_fleet < self.n_fleet),
            self.row_of_id[np.clip(actions_fleet, 0, self.n_fleet - 1)],
            -1,
        )
        serving = kernels.resolve_requests(
            requests, self.links.snr_db, self.links.in_cov, self.aps.capacity
        )
        outcome = self._outcome(serving)
        self.prev_actions = actions_fleet
        self._advance()
        obs, mask = self._observe()
        return obs, mask, outcome

    def step_max_snr(self):
        """Baseline step: greedy MAX-SNR association instead of requests."""
        serving = kernels.greedy_max_snr(
            self.links.snr_db, self.links.in_cov, self.aps.capacity
        )
        outcome = self._outcome(serving)
        self.prev_actions = np.where(serving >= 0, self.id_of_row[serving], 0)
        self._advance()
        obs, mask = self._observe()
        return obs, mask, outcome

    def _outcome(self, serving) -> StepOutcome:
        _, rate, _ = kernels.served_sinr_rate(
            self.links.rss_dbm,
            self.links.pathloss_db,
            self.links.in_cov,
            serving,
            self.aps.pos,
            self.aps.kind,
            self.aps.band,
            self.aps.tx_dbm,
            self.aps.gain_dbi,
            self.aps.gain_min_dbi,
            self.aps.beam_cos_half,
            self.aps.bw_hz,
            self.ue_pos,
            self.scenario.channel.ue_rx_gain_dbi,
            self.scenario.channel.noise_dbm_hz,
        )
        kappa = qos_vector(rate, self.demand, serving)
        r_alpha = network_utility_from_rates(rate, self.demand, serving, self.alpha)
        delivered = sum_delivered_rate(rate, self.demand, serving)
        satisfied = kappa >= self.scenario.qos_target - 1e-12
        serving_fleet = np.where(serving >= 0, self.id_of_row[np.maximum(serving, 0)], -1)
        loads_fleet = np.zeros(self.n_fleet, dtype=np.int64)
        for ap_id in serving_fleet[serving_fleet >= 0]:
            loads_fleet[ap_id] += 1
        self.r_alpha_prev = r_alpha
        self.own_rate_prev = rate
        return StepOutcome(
            serving_fleet=serving_fleet,
            kappa=kappa,
            rate_bps=rate,
            r_alpha=r_alpha,
            delivered_bps=delivered,
            qos_fraction=float(satisfied.mean()) if kappa.size else 1.0,
            loads_fleet=loads_fleet,
        )

    def _advance(self):
        self.ue_pos = step_mobility(self.ue_pos, self.scenario, self.rng)
        self.demand = sample_demand(self.scenario.traffic, self.rng, self.scenario.num_users)
        self._refresh_links()


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    policy: PolicyModel
    curve: np.ndarray  # mean shared reward per episode
    diagnostics: list
    aborted: bool = False


def train(scenario: Scenario, plan: DeploymentPlan | None, cfg: TrainConfig,
          seed: int, progress_every: int = 0) -> TrainResult:
    """PPO training of the shared association policy on a fixed deployment.

    Each episode is a fresh user drop followed by ``episode_len`` steps of
    mobility/traffic/channel dynamics; all agents share the policy and the
    team reward.  The best policy (trailing-10 mean reward) is kept.
    """
    env = AssociationEnv(scenario, plan, cfg.n_neighbors, cfg.alpha)
    policy = PolicyModel.init(
        env.spec.dim,
        env.n_fleet,
        cfg.hidden,
        _gen(seed, _TAG_POLICY_INIT),
        normalization=env.spec.to_dict(),
        config_hash=config_digest(cfg.to_dict()),
    )
    adam_actor = Adam(policy.actor.params(), cfg.learning_rate)
    adam_critic = Adam(policy.critic.params(), cfg.learning_rate)
    update_rng = _gen(seed, _TAG_UPDATE)

    p = scenario.num_users
    curve = []
    diags = []
    best_score = -math.inf
    best_snap = policy.snapshot()
    aborted = False
    for ep in range(cfg.episodes):
        obs, mask = env.reset(_gen(seed, _TAG_EPISODE, ep))
        act_rng = _gen(seed, _TAG_ACTION, ep)
        obs_buf = np.empty((cfg.episode_len, p, env.spec.dim))
        mask_buf = np.empty((cfg.episode_len, p, env.n_fleet), dtype=bool)
        act_buf = np.empty((cfg.episode_len, p), dtype=np.int64)
        logp_buf = np.empty((cfg.episode_len, p))
        rewards = np.empty(cfg.episode_len)
        for t in range(cfg.episode_len):
            actions, logp = policy.act(obs, mask, rng=act_rng)
            obs_buf[t] = obs
            mask_buf[t] = mask
            act_buf[t] = actions
            logp_buf[t] = logp
            obs, mask, outcome = env.step(actions)
            rewards[t] = outcome.r_alpha
        returns = returns_vector(rewards, cfg.discount)
        batch = RolloutBatch(
            obs=obs_buf.reshape(-1, env.spec.dim),
            mask=mask_buf.reshape(-1, env.n_fleet),
            actions=act_buf.reshape(-1),
            logp_old=logp_buf.reshape(-1),
            returns=np.repeat(returns, p),
        )
        diag = ppo_update(policy, batch, cfg, update_rng, adam_actor, adam_critic)
        diags.append(diag)
        curve.append(float(rewards.mean()))
        if diag.aborted or not policy.finite():
            policy.restore(best_snap)
            aborted = True
            break
        trailing = float(np.mean(curve[-10:]))
        if trailing > best_score:
            best_score = trailing
            best_snap = policy.snapshot()
        if progress_every and (ep + 1) % progress_every == 0:
            print(f"episode {ep + 1}/{cfg.episodes}: mean reward {curve[-1]:.3f}")
    policy.restore(best_snap)
    return TrainResult(
        policy=policy, curve=np.asarray(curve), diagnostics=diags, aborted=aborted
    )


# ---------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    count: int

    @property
    def ci95_half(self) -> float:
        return 1.96 * self.std / math.sqrt(self.count) if self.count else 0.0


@dataclass
class EvalReport:
    metrics: dict[str, MetricSummary]
    per_episode: dict[str, np.ndarray]
    per_step: dict[str, np.ndarray]  # mean over episodes, per step index
    step_loads: np.ndarray  # (T, n_fleet) mean per-AP load
    episodes: int
    episode_len: int
    algorithm: str


def evaluate(scenario: Scenario, plan: DeploymentPlan | None,
             policy: PolicyModel | None, episodes: int, episode_len: int,
             seed: int, alpha: float = 1.0, n_neighbors: int = 5) -> EvalReport:
    """Roll out a policy (greedy actions) or the MAX-SNR baseline (policy=None).

    Episode worlds depend only on (seed, episode index): both algorithms see
    identical mobility, demand, and channel realizations, so per-episode
    metrics pair exactly.
    """
    env = AssociationEnv(scenario, plan, n_neighbors, alpha)
    names = ("utility", "sum_rate_mbps", "qos_fraction", "handover_freq")
    per_episode = {n: np.empty(episodes) for n in names}
    step_sum = {n: np.zeros(episode_len) for n in names}
    loads_acc = np.zeros((episode_len, env.n_fleet))
    p = scenario.num_users
    for ep in range(episodes):
        obs, mask = env.reset(_gen(seed, _TAG_EVAL, ep))
        trace = np.empty((episode_len, p), dtype=np.int64)
        util = np.empty(episode_len)
        rate = np.empty(episode_len)
        qos = np.empty(episode_len)
        ho = np.zeros(episode_len)
        for t in range(episode_len):
            if policy is None:
                obs, mask, out = env.step_max_snr()
            else:
                actions, _ = policy.act(obs, mask, rng=None)
                obs, mask, out = env.step(actions)
            trace[t] = out.serving_fleet
            util[t] = out.r_alpha
            rate[t] = out.delivered_bps / 1e6
            qos[t] = out.qos_fraction
            if t > 0 and p:
                ho[t] = float((trace[t] != trace[t - 1]).mean())
            loads_acc[t] += out.loads_fleet
        per_episode["utility"][ep] = util.mean()
        per_episode["sum_rate_mbps"][ep] = rate.mean()
        per_episode["qos_fraction"][ep] = qos.mean()
        per_episode["handover_freq"][ep] = (
            handover_frequency(trace) if episode_len >= 2 and p else 0.0
        )
        step_sum["utility"] += util
        step_sum["sum_rate_mbps"] += rate
        step_sum["qos_fraction"] += qos
        step_sum["handover_freq"] += ho
    metrics = {
        n: MetricSummary(
            mean=float(per_episode[n].mean()),
            std=float(per_episode[n].std(ddof=1)) if episodes > 1 else 0.0,
            count=episodes,
        )
        for n in names
    }
    return EvalReport(
        metrics=metrics,
        per_episode=per_episode,
        per_step={n: step_sum[n] / episodes for n in names},
        step_loads=loads_acc / episodes,
        episodes=episodes,
        episode_len=episode_len,
        algorithm="max-snr" if policy is None else "marl",
    )
