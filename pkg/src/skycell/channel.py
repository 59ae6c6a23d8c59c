"""Radio propagation: LoS probabilities, path loss, link budgets, SINR, rates.

Three path-loss families are implemented, selected by transmitter kind/band:

* air-to-ground sub-6GHz: elevation-driven LoS probability with a
  frequency-dependent (MHz) free-space-style loss plus per-link-type
  log-normal shadowing;
* air-to-ground mm-wave: building-crossing LoS product with a
  distance-dependent alpha/beta loss.  The LoS product is evaluated exactly
  as printed in the source model, including its known quirk that the
  squared height difference enters the numerator; the ``gamma = 0``
  singularity is resolved to probability 1 (no obstructions).  The product
  is only monotone in distance for equal endpoint heights;
* ground-to-ground ABG: no LoS split, frequency in GHz.

Scalar operations here are the testable closed forms; the vectorized hot
path lives in :mod:`skycell.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .kernels import BAND_SUB6, KIND_MBS, SINR_DB_UNSERVED
from .kernels import constants as kc

LOS = "LoS"
NLOS = "NLoS"

DEFAULT_RSS_FLOOR_DBM = -200.0


@dataclass(frozen=True)
class Sub6AirParams:
    c: float = 0.6
    d: float = 0.11
    theta0_deg: float = 15.0
    shadow_mean_los_db: float = 1.0
    shadow_mean_nlos_db: float = 20.0
    shadow_std_los_db: float = 3.0
    shadow_std_nlos_db: float = 3.0


@dataclass(frozen=True)
class MmwaveAirParams:
    epsilon: float = 15.0
    building_density_per_m: float = 0.002
    alpha_los_db: float = 61.4
    beta_los: float = 2.0
    alpha_nlos_db: float = 72.0
    beta_nlos: float = 2.92
    shadow_std_los_db: float = 3.46
    shadow_std_nlos_db: float = 3.46


@dataclass(frozen=True)
class GroundParams:
    alpha: float = 3.4
    beta_db: float = 19.2
    gamma: float = 2.3
    shadow_std_db: float = 3.0


@dataclass(frozen=True)
class ChannelParams:
    sub6_air: Sub6AirParams = field(default_factory=Sub6AirParams)
    mmwave_air: MmwaveAirParams = field(default_factory=MmwaveAirParams)
    ground: GroundParams = field(default_factory=GroundParams)
    noise_dbm_hz: float = -174.0
    ue_rx_gain_dbi: float = 0.0

    @classmethod
    def from_dict(cls, cfg: dict) -> "ChannelParams":
        def sub(name, klass):
            return klass(**cfg.get(name, {}))

        return cls(
            sub6_air=sub("sub6_air", Sub6AirParams),
            mmwave_air=sub("mmwave_air", MmwaveAirParams),
            ground=sub("ground", GroundParams),
            noise_dbm_hz=float(cfg.get("noise_dbm_hz", -174.0)),
            ue_rx_gain_dbi=float(cfg.get("ue_rx_gain_dbi", 0.0)),
        )

    def packed(self):
        """Flat float64 vector consumed by the kernels."""
        v = np.empty(kc.N_PARAMS)
        s, m, g = self.sub6_air, self.mmwave_air, self.ground
        v[kc.P_SUB6_C] = s.c
        v[kc.P_SUB6_D] = s.d
        v[kc.P_SUB6_THETA0_DEG] = s.theta0_deg
        v[kc.P_SUB6_MU_LOS_DB] = s.shadow_mean_los_db
        v[kc.P_SUB6_MU_NLOS_DB] = s.shadow_mean_nlos_db
        v[kc.P_SUB6_SIG_LOS_DB] = s.shadow_std_los_db
        v[kc.P_SUB6_SIG_NLOS_DB] = s.shadow_std_nlos_db
        v[kc.P_MM_EPSILON] = m.epsilon
        v[kc.P_MM_DENSITY_PER_M] = m.building_density_per_m
        v[kc.P_MM_ALPHA_LOS_DB] = m.alpha_los_db
        v[kc.P_MM_BETA_LOS] = m.beta_los
        v[kc.P_MM_ALPHA_NLOS_DB] = m.alpha_nlos_db
        v[kc.P_MM_BETA_NLOS] = m.beta_nlos
        v[kc.P_MM_SIG_LOS_DB] = m.shadow_std_los_db
        v[kc.P_MM_SIG_NLOS_DB] = m.shadow_std_nlos_db
        v[kc.P_GND_ALPHA] = g.alpha
        v[kc.P_GND_BETA_DB] = g.beta_db
        v[kc.P_GND_GAMMA] = g.gamma
        v[kc.P_GND_SIG_DB] = g.shadow_std_db
        v[kc.P_NOISE_DBM_HZ] = self.noise_dbm_hz
        return v

    def without_shadowing(self) -> "ChannelParams":
        """Copy with every shadowing mean/std zeroed (deterministic forms)."""
        return ChannelParams(
            sub6_air=Sub6AirParams(
                c=self.sub6_air.c,
                d=self.sub6_air.d,
                theta0_deg=self.sub6_air.theta0_deg,
                shadow_mean_los_db=0.0,
                shadow_mean_nlos_db=0.0,
                shadow_std_los_db=0.0,
                shadow_std_nlos_db=0.0,
            ),
            mmwave_air=MmwaveAirParams(
                epsilon=self.mmwave_air.epsilon,
                building_density_per_m=self.mmwave_air.building_density_per_m,
                alpha_los_db=self.mmwave_air.alpha_los_db,
                beta_los=self.mmwave_air.beta_los,
                alpha_nlos_db=self.mmwave_air.alpha_nlos_db,
                beta_nlos=self.mmwave_air.beta_nlos,
                shadow_std_los_db=0.0,
                shadow_std_nlos_db=0.0,
            ),
            ground=GroundParams(
                alpha=self.ground.alpha,
                beta_db=self.ground.beta_db,
                gamma=self.ground.gamma,
                shadow_std_db=0.0,
            ),
            noise_dbm_hz=self.noise_dbm_hz,
            ue_rx_gain_dbi=self.ue_rx_gain_dbi,
        )


# ---------------------------------------------------------------------------
# Scalar closed forms

def los_probability_sub6(theta_deg: float, params: Sub6AirParams) -> float:
    """Elevation-driven LoS probability, clamped to [0, 1]; 0 below theta0."""
    base = theta_deg - params.theta0_deg
    if base < 0.0:
        return 0.0
    if base == 0.0:
        p = params.c if params.d == 0.0 else 0.0
    else:
        p = params.c * base**params.d
    return min(1.0, max(0.0, p))


def _shadow(rng, mean, std):
    if rng is None:
        return mean
    return rng.normal(mean, std)


def pathloss_sub6(d_m: float, f_mhz: float, link: str, params: Sub6AirParams, rng=None) -> float:
    """Air-to-ground sub-6GHz path loss in dB; rng=None uses the mean shadowing."""
    if d_m <= 0:
        raise ValueError("distance must be > 0")
    if f_mhz <= 0:
        raise ValueError("frequency must be > 0")
    if link == LOS:
        chi = _shadow(rng, params.shadow_mean_los_db, params.shadow_std_los_db)
    else:
        chi = _shadow(rng, params.shadow_mean_nlos_db, params.shadow_std_nlos_db)
    return 20.0 * math.log10(d_m) + 20.0 * math.log10(f_mhz) - 27.55 + chi


def los_probability_mmwave(d_m: float, h_t_m: float, h_r_m: float, params: MmwaveAirParams) -> float:
    """Building-crossing LoS probability; exactly 1 when no building crosses."""
    if d_m <= 0:
        raise ValueError("distance must be > 0")
    if h_t_m < 0 or h_r_m < 0:
        raise ValueError("heights must be >= 0")
    return kernels.reference.los_probability_mmwave_scalar(
        d_m, h_t_m, h_r_m, params.epsilon, params.building_density_per_m
    )


def pathloss_mmwave(d_m: float, link: str, params: MmwaveAirParams, rng=None) -> float:
    """Air-to-ground mm-wave path loss in dB."""
    if d_m <= 0:
        raise ValueError("distance must be > 0")
    if link == LOS:
        alpha, beta, std = params.alpha_los_db, params.beta_los, params.shadow_std_los_db
    else:
        alpha, beta, std = params.alpha_nlos_db, params.beta_nlos, params.shadow_std_nlos_db
    return alpha + 10.0 * beta * math.log10(d_m) + _shadow(rng, 0.0, std)


def pathloss_ground(d_m: float, f_ghz: float, params: GroundParams, rng=None) -> float:
    """Ground-to-ground ABG path loss in dB (frequency in GHz)."""
    if d_m <= 0:
        raise ValueError("distance must be > 0")
    if f_ghz <= 0:
        raise ValueError("frequency must be > 0")
    return (
        10.0 * params.alpha * math.log10(d_m)
        + params.beta_db
        + 10.0 * params.gamma * math.log10(f_ghz)
        + _shadow(rng, 0.0, params.shadow_std_db)
    )


def expected_pathloss(p_los: float, pl_los_db: float, pl_nlos_db: float) -> float:
    """LoS-probability mix of the two losses, combined in dB as printed."""
    if not 0.0 <= p_los <= 1.0:
        raise ValueError("p_los must be in [0, 1]")
    return p_los * pl_los_db + (1.0 - p_los) * pl_nlos_db


def antenna_gain(ap, boresight_offset_deg: float) -> float:
    """Transmit gain at an angular offset from the serving-beam boresight.

    The MBS pattern is constant; MAPs use a two-level sectored beam: maximum
    gain inside the half-power beamwidth, floor gain outside.
    """
    if not 0.0 <= boresight_offset_deg <= 180.0:
        raise ValueError("offset must be in [0, 180] degrees")
    if ap.kind == KIND_MBS:
        return ap.antenna_gain_max_dbi
    if boresight_offset_deg <= ap.beamwidth_deg / 2.0:
        return ap.antenna_gain_max_dbi
    return ap.antenna_gain_min_dbi


# ---------------------------------------------------------------------------
# Vectorized network state

@dataclass(frozen=True)
class ApArrays:
    """Active access points flattened into kernel-ready arrays."""

    ids: tuple[int, ...]
    pos: np.ndarray  # (A, 3)
    kind: np.ndarray  # uint8
    band: np.ndarray  # uint8
    tx_dbm: np.ndarray
    gain_dbi: np.ndarray
    gain_min_dbi: np.ndarray
    beamwidth_deg: np.ndarray
    beam_cos_half: np.ndarray
    aperture_deg: np.ndarray
    carrier_ghz: np.ndarray
    bw_hz: np.ndarray
    capacity: np.ndarray  # int64

    @property
    def n(self) -> int:
        return len(self.ids)

    @classmethod
    def build(cls, aps_with_pos: Iterable[tuple[object, np.ndarray]]) -> "ApArrays":
        """From (AccessPointConfig-like, position(3,)) pairs."""
        aps = list(aps_with_pos)
        n = len(aps)
        pos = np.zeros((n, 3))
        kind = np.zeros(n, dtype=np.uint8)
        band = np.zeros(n, dtype=np.uint8)
        tx = np.zeros(n)
        gmax = np.zeros(n)
        gmin = np.zeros(n)
        bwd = np.zeros(n)
        ap_deg = np.zeros(n)
        car = np.zeros(n)
        bw = np.zeros(n)
        cap = np.zeros(n, dtype=np.int64)
        ids = []
        for idx, (ap, p) in enumerate(aps):
            ids.append(ap.id)
            pos[idx] = p
            kind[idx] = ap.kind
            band[idx] = ap.band
            tx[idx] = ap.tx_power_dbm
            gmax[idx] = ap.antenna_gain_max_dbi
            gmin[idx] = ap.antenna_gain_min_dbi
            bwd[idx] = ap.beamwidth_deg
            ap_deg[idx] = ap.aperture_deg
            car[idx] = ap.carrier_ghz
            bw[idx] = ap.bandwidth_hz
            cap[idx] = ap.capacity
        return cls(
            ids=tuple(ids),
            pos=pos,
            kind=kind,
            band=band,
            tx_dbm=tx,
            gain_dbi=gmax,
            gain_min_dbi=gmin,
            beamwidth_deg=bwd,
            beam_cos_half=np.cos(np.radians(bwd / 2.0)),
            aperture_deg=ap_deg,
            carrier_ghz=car,
            bw_hz=bw,
            capacity=cap,
        )


@dataclass(frozen=True)
class ChannelRealization:
    """Frozen per-link randomness: LoS uniforms and shadowing normals."""

    los_u: np.ndarray  # (A, P) in [0, 1)
    shadow_z: np.ndarray  # (A, P) standard normal

    @classmethod
    def draw(cls, rng: np.random.Generator, n_ap: int, n_ue: int) -> "ChannelRealization":
        return cls(
            los_u=rng.random((n_ap, n_ue)),
            shadow_z=rng.standard_normal((n_ap, n_ue)),
        )

    @classmethod
    def nominal(cls, n_ap: int, n_ue: int) -> "ChannelRealization":
        """All links LoS (u = 0 < p whenever p > 0), shadowing at the mean."""
        return cls(los_u=np.zeros((n_ap, n_ue)), shadow_z=np.zeros((n_ap, n_ue)))

    def rows(self, idx) -> "ChannelRealization":
        return ChannelRealization(los_u=self.los_u[idx], shadow_z=self.shadow_z[idx])


@dataclass(frozen=True)
class LinkStats:
    """Association-independent per-pair quantities."""

    dist_m: np.ndarray
    aoa_deg: np.ndarray  # elevation angle of arrival at the UE
    in_cov: np.ndarray  # uint8
    los: np.ndarray  # uint8
    pathloss_db: np.ndarray
    rss_dbm: np.ndarray  # boresight-gain RSS
    snr_db: np.ndarray  # RSS over the AP's full-band noise floor

    def rows(self, idx) -> "LinkStats":
        return LinkStats(
            dist_m=self.dist_m[idx],
            aoa_deg=self.aoa_deg[idx],
            in_cov=self.in_cov[idx],
            los=self.los[idx],
            pathloss_db=self.pathloss_db[idx],
            rss_dbm=self.rss_dbm[idx],
            snr_db=self.snr_db[idx],
        )


@dataclass(frozen=True)
class RadioState:
    """Per-pair link budgets plus association-aware SINR and rates."""

    links: LinkStats
    serving: np.ndarray  # (P,) int64, -1 = unassociated
    sinr_db: np.ndarray  # (A, P) hypothetical SINR of every pair
    rate_bps: np.ndarray  # (A, P)
    bandwidth_hz: np.ndarray  # (A, P)
    served_sinr_db: np.ndarray  # (P,)
    served_rate_bps: np.ndarray  # (P,)
    served_bw_hz: np.ndarray  # (P,)


def compute_link_stats(aps: ApArrays, ue_pos, params: ChannelParams,
                       realization: ChannelRealization) -> LinkStats:
    dist, elev, in_cov, los, pl, rss = kernels.link_matrices(
        aps.pos,
        aps.kind,
        aps.band,
        aps.tx_dbm,
        aps.gain_dbi,
        aps.aperture_deg,
        aps.carrier_ghz,
        ue_pos,
        params.ue_rx_gain_dbi,
        params.packed(),
        realization.los_u,
        realization.shadow_z,
    )
    noise_floor = params.noise_dbm_hz + 10.0 * np.log10(aps.bw_hz)
    snr = rss - noise_floor[:, None]
    return LinkStats(
        dist_m=dist,
        aoa_deg=elev,
        in_cov=in_cov,
        los=los,
        pathloss_db=pl,
        rss_dbm=rss,
        snr_db=snr,
    )


def _beam_interference(aps: ApArrays, ue_pos, links: LinkStats, serving,
                       params: ChannelParams):
    """Per-source-AP interference power at every UE, in mW.

    ``raw[s, j]`` sums the emissions of AP ``s``'s active beams received at
    UE ``j``, excluding beams whose target is ``j`` itself.  Sub-6GHz PSD
    scaling is applied later (it depends on the victim's allocation).
    """
    n_ap, n_ue = links.rss_dbm.shape
    raw = np.zeros((n_ap, n_ue))
    served = np.where(serving >= 0)[0]
    if served.size == 0:
        return raw
    diff = ue_pos[None, :, :] - aps.pos[:, None, :]
    norm = np.maximum(np.linalg.norm(diff, axis=2), 1e-12)
    unit = diff / norm[:, :, None]
    for s in range(n_ap):
        targets = served[serving[served] == s]
        if targets.size == 0:
            continue
        if aps.kind[s] == KIND_MBS:
            gain = np.full((targets.size, n_ue), aps.gain_dbi[s])
        else:
            cos = unit[s, targets] @ unit[s].T  # (n_targets, n_ue)
            gain = np.where(cos >= aps.beam_cos_half[s], aps.gain_dbi[s], aps.gain_min_dbi[s])
        p_dbm = aps.tx_dbm[s] + gain + params.ue_rx_gain_dbi - links.pathloss_db[s][None, :]
        p_mw = 10.0 ** (p_dbm / 10.0)
        # a beam never interferes with its own target
        p_mw[np.arange(targets.size), targets] = 0.0
        raw[s] = p_mw.sum(axis=0)
    return raw


def compute_radio_state(aps: ApArrays, ue_pos, params: ChannelParams,
                        realization: ChannelRealization, serving=None,
                        links: LinkStats | None = None) -> RadioState:
    """Full per-pair radio state under a given association.

    ``serving`` maps each UE to its AP row (-1 when unassociated); with
    ``serving=None`` no beams are active, so SINR reduces to SNR.  Entries for
    non-serving pairs are hypothetical: the rate UE j would get from AP i if
    it joined i, holding everyone else's beams fixed.
    """
    n_ue = ue_pos.shape[0]
    if serving is None:
        serving = np.full(n_ue, kernels.UNSERVED, dtype=np.int64)
    serving = np.asarray(serving, dtype=np.int64)
    if links is None:
        links = compute_link_stats(aps, ue_pos, params, realization)
    n_ap = aps.n

    raw_i = _beam_interference(aps, ue_pos, links, serving, params)
    load = np.bincount(serving[serving >= 0], minlength=n_ap)

    noise_mw_hz = 10.0 ** (params.noise_dbm_hz / 10.0)
    s_mw = 10.0 ** (links.rss_dbm / 10.0)
    bw = np.empty((n_ap, n_ue))
    i_mw = np.empty((n_ap, n_ue))
    for i in range(n_ap):
        same_band = np.where(aps.band == aps.band[i])[0]
        if aps.band[i] == BAND_SUB6:
            # equal split among current users; joining adds one share
            joiners = load[i] + (serving != i).astype(np.int64)
            bw[i] = aps.bw_hz[i] / np.maximum(joiners, 1)
            acc = np.zeros(n_ue)
            for s in same_band:
                if s == i:
                    continue  # orthogonal intra-cell split
                acc += raw_i[s] * np.minimum(1.0, bw[i] / aps.bw_hz[s])
            i_mw[i] = acc
        else:
            bw[i] = aps.bw_hz[i]
            i_mw[i] = raw_i[same_band].sum(axis=0)

    sinr = s_mw / (noise_mw_hz * bw + i_mw)
    sinr_db = 10.0 * np.log10(sinr)
    rate = bw * np.log2(1.0 + sinr)
    rate[links.in_cov == 0] = 0.0

    served_sinr, served_rate, served_bw = kernels.served_sinr_rate(
        links.rss_dbm,
        links.pathloss_db,
        links.in_cov,
        serving,
        aps.pos,
        aps.kind,
        aps.band,
        aps.tx_dbm,
        aps.gain_dbi,
        aps.gain_min_dbi,
        aps.beam_cos_half,
        aps.bw_hz,
        ue_pos,
        params.ue_rx_gain_dbi,
        params.noise_dbm_hz,
    )
    return RadioState(
        links=links,
        serving=serving,
        sinr_db=sinr_db,
        rate_bps=rate,
        bandwidth_hz=bw,
        served_sinr_db=served_sinr,
        served_rate_bps=served_rate,
        served_bw_hz=served_bw,
    )


def link_budget_rows(aps: ApArrays, state: RadioState):
    """Per-link budget table rows for the debug CSV dump."""
    rows = []
    links = state.links
    n_ap, n_ue = links.rss_dbm.shape
    for i in range(n_ap):
        for j in range(n_ue):
            rows.append(
                {
                    "ap_id": aps.ids[i],
                    "ue_id": j,
                    "distance_m": links.dist_m[i, j],
                    "los": int(links.los[i, j]),
                    "pathloss_db": links.pathloss_db[i, j],
                    "rss_dbm": links.rss_dbm[i, j],
                    "sinr_db": state.sinr_db[i, j],
                    "rate_mbps": state.rate_bps[i, j] / 1e6,
                }
            )
    return rows
