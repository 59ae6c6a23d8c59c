"""Per-agent observation assembly and normalization.

Each user sees: the latest shared network utility, its RSS/AoA toward every
AP slot in the fleet (undeployed or out-of-cone slots are floored), its own
last delivered rate, its current demand, and for each of the n nearest
neighbours that neighbour's position and previous request.  The layout is
fixed per scenario: 3 + 2 * n_aps local features plus 4 per neighbour slot,
zero-padded (with a separate validity mask) when fewer neighbours exist.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RSS_FLOOR_DBM = -200.0


@dataclass(frozen=True)
class ObservationSpec:
    n_aps: int  # fleet-wide action-slot count (MBS + all MAPs)
    n_neighbors: int
    area_width_m: float
    mean_demand_bps: float

    @property
    def dim(self) -> int:
        return 3 + 2 * self.n_aps + 4 * self.n_neighbors

    @property
    def utility_scale(self) -> float:
        # A fully satisfied network scores about P * ln(mean demand); the
        # caller divides by P so ln(mean demand) is the per-user scale.
        return float(np.log(max(self.mean_demand_bps, 2.0)))

    def to_dict(self) -> dict:
        return {
            "n_aps": self.n_aps,
            "n_neighbors": self.n_neighbors,
            "area_width_m": self.area_width_m,
            "mean_demand_bps": self.mean_demand_bps,
        }


def nearest_neighbors(ue_pos, n_neighbors: int):
    """Indices (P, n) of each user's nearest peers; ties to the lower id, -1 pad."""
    p = ue_pos.shape[0]
    out = np.full((p, n_neighbors), -1, dtype=np.int64)
    if p <= 1 or n_neighbors == 0:
        return out
    diff = ue_pos[:, None, :] - ue_pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    ids = np.broadcast_to(np.arange(p), (p, p))
    order = np.lexsort((ids, dist), axis=1)
    take = min(n_neighbors, p - 1)
    out[:, :take] = order[:, :take]
    return out


def build_observations(
    spec: ObservationSpec,
    ue_pos,
    rss_dbm_fleet,
    aoa_deg_fleet,
    visible_fleet,
    own_rate_bps,
    demand_bps,
    prev_actions,
    r_alpha_prev: float,
):
    """Observation matrix (P, dim) plus the neighbour validity mask (P, n).

    ``rss_dbm_fleet``/``aoa_deg_fleet``/``visible_fleet`` are fleet-indexed
    (n_aps, P); invisible slots are floored / zeroed.
    """
    p = ue_pos.shape[0]
    n_ap = spec.n_aps
    obs = np.zeros((p, spec.dim))
    n_users_scale = max(p, 1)
    obs[:, 0] = r_alpha_prev / (n_users_scale * spec.utility_scale)

    rss = np.where(visible_fleet.astype(bool), rss_dbm_fleet, RSS_FLOOR_DBM)
    rss = np.maximum(rss, RSS_FLOOR_DBM)
    aoa = np.where(visible_fleet.astype(bool), aoa_deg_fleet, 0.0)
    obs[:, 1 : 1 + n_ap] = rss.T / 100.0
    obs[:, 1 + n_ap : 1 + 2 * n_ap] = aoa.T / 180.0
    obs[:, 1 + 2 * n_ap] = np.asarray(own_rate_bps) / spec.mean_demand_bps
    obs[:, 2 + 2 * n_ap] = np.asarray(demand_bps) / spec.mean_demand_bps

    neigh = nearest_neighbors(ue_pos, spec.n_neighbors)
    mask = neigh >= 0
    base = 3 + 2 * n_ap
    if spec.n_neighbors:
        safe = np.where(mask, neigh, 0)
        coords = ue_pos[safe] / spec.area_width_m  # (P, n, 3)
        acts = np.asarray(prev_actions)[safe] / max(n_ap, 1)
        feats = np.concatenate([coords, acts[:, :, None]], axis=2)  # (P, n, 4)
        feats[~mask] = 0.0
        obs[:, base:] = feats.reshape(p, -1)
    return obs, mask
