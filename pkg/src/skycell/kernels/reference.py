"""NumPy implementation of the hot link-evaluation kernels.

This is the import-time fallback when the compiled extension is missing and
the ground truth the extension is parity-tested against.  All functions take
well-formed contiguous arrays (the wrappers in ``skycell.kernels`` coerce
inputs) and are deterministic given their inputs: randomness enters only
through the pre-drawn ``los_u`` / ``shadow_z`` arrays.
"""
import numpy as np

from .constants import (
    BAND_SUB6,
    KIND_MBS,
    P_GND_ALPHA,
    P_GND_BETA_DB,
    P_GND_GAMMA,
    P_GND_SIG_DB,
    P_MM_ALPHA_LOS_DB,
    P_MM_ALPHA_NLOS_DB,
    P_MM_BETA_LOS,
    P_MM_BETA_NLOS,
    P_MM_DENSITY_PER_M,
    P_MM_EPSILON,
    P_MM_SIG_LOS_DB,
    P_MM_SIG_NLOS_DB,
    P_SUB6_C,
    P_SUB6_D,
    P_SUB6_MU_LOS_DB,
    P_SUB6_MU_NLOS_DB,
    P_SUB6_SIG_LOS_DB,
    P_SUB6_SIG_NLOS_DB,
    P_SUB6_THETA0_DEG,
    SINR_DB_UNSERVED,
    UNSERVED,
)

BACKEND_NAME = "python"

_MIN_DISTANCE_M = 1e-6


def los_probability_mmwave_scalar(d, h_t, h_r, epsilon, density):
    """Building-crossing LoS probability, evaluated as printed in the model.

    ``gamma = floor(density * d)`` buildings cross the link; gamma <= 0 means
    an unobstructed link (probability exactly 1).  The product over building
    indices is clamped to [0, 1] after multiplication.
    """
    gamma = int(np.floor(density * d))
    if gamma <= 0:
        return 1.0
    h_max = max(h_t, h_r)
    dh2 = (h_t - h_r) ** 2
    denom = 2.0 * epsilon * epsilon * gamma * gamma
    prod = 1.0
    for n in range(gamma + 1):
        prod *= 1.0 - np.exp(-(gamma * h_max - (n + 0.5) * dh2) / denom)
    return float(min(1.0, max(0.0, prod)))


def _los_probability_sub6_row(elev_deg, c, d, theta0):
    base = elev_deg - theta0
    p = np.zeros_like(elev_deg)
    pos = base > 0.0
    p[pos] = c * np.power(base[pos], d)
    # 0^0 == 1 by convention, so d == 0 yields c at theta == theta0 too.
    p[~pos] = c if d == 0.0 else 0.0
    p[base < 0.0] = 0.0
    return np.clip(p, 0.0, 1.0)


def _los_probability_mmwave_row(d3, h_t, h_r_row, epsilon, density):
    gamma = np.floor(density * d3).astype(np.int64)
    p = np.ones_like(d3)
    gmax = int(gamma.max()) if gamma.size else 0
    if gmax <= 0:
        return p
    h_max = np.maximum(h_t, h_r_row)
    dh2 = (h_t - h_r_row) ** 2
    blocked = gamma > 0
    g = gamma[blocked].astype(np.float64)
    denom = 2.0 * epsilon * epsilon * g * g
    prod = np.ones(g.shape)
    for n in range(gmax + 1):
        active = n <= gamma[blocked]
        factor = 1.0 - np.exp(-(g * h_max[blocked] - (n + 0.5) * dh2[blocked]) / denom)
        prod = np.where(active, prod * factor, prod)
    p[blocked] = np.clip(prod, 0.0, 1.0)
    return p


def link_matrices(
    ap_pos,
    ap_kind,
    ap_band,
    ap_tx_dbm,
    ap_gain_dbi,
    ap_aperture_deg,
    ap_carrier_ghz,
    ue_pos,
    ue_rx_gain_dbi,
    params,
    los_u,
    shadow_z,
):
    """Geometry, LoS state, path loss and boresight RSS for every AP-UE pair.

    Returns ``(dist_m, elev_deg, in_cov, los, pl_db, rss_dbm)`` where the
    matrices are shaped (n_ap, n_ue).  ``rss_dbm`` assumes the serving beam is
    aligned (maximum gain); consumers mask it with ``in_cov`` where needed.
    """
    n_ap = ap_pos.shape[0]
    n_ue = ue_pos.shape[0]
    dx = ue_pos[None, :, 0] - ap_pos[:, None, 0]
    dy = ue_pos[None, :, 1] - ap_pos[:, None, 1]
    horiz = np.hypot(dx, dy)
    alt = ap_pos[:, None, 2] - ue_pos[None, :, 2]
    dist = np.maximum(np.sqrt(horiz * horiz + alt * alt), _MIN_DISTANCE_M)
    elev = np.degrees(np.arctan2(alt, horiz))

    in_cov = np.zeros((n_ap, n_ue), dtype=np.uint8)
    los = np.zeros((n_ap, n_ue), dtype=np.uint8)
    pl = np.zeros((n_ap, n_ue))

    log_d = np.log10(dist)
    for i in range(n_ap):
        if ap_kind[i] == KIND_MBS:
            in_cov[i, :] = 1
            los[i, :] = 1
            pl[i, :] = (
                10.0 * params[P_GND_ALPHA] * log_d[i]
                + params[P_GND_BETA_DB]
                + 10.0 * params[P_GND_GAMMA] * np.log10(ap_carrier_ghz[i])
                + params[P_GND_SIG_DB] * shadow_z[i]
            )
            continue
        if ap_aperture_deg[i] >= 180.0:
            in_cov[i, :] = 1
        else:
            reach = np.maximum(alt[i], 0.0) * np.tan(np.radians(ap_aperture_deg[i] / 2.0))
            in_cov[i, :] = (alt[i] >= 0.0) & (horiz[i] <= reach)
        if ap_band[i] == BAND_SUB6:
            p_los = _los_probability_sub6_row(
                elev[i], params[P_SUB6_C], params[P_SUB6_D], params[P_SUB6_THETA0_DEG]
            )
            los[i] = los_u[i] < p_los
            chi = np.where(
                los[i],
                params[P_SUB6_MU_LOS_DB] + params[P_SUB6_SIG_LOS_DB] * shadow_z[i],
                params[P_SUB6_MU_NLOS_DB] + params[P_SUB6_SIG_NLOS_DB] * shadow_z[i],
            )
            f_mhz = ap_carrier_ghz[i] * 1000.0
            pl[i] = 20.0 * log_d[i] + 20.0 * np.log10(f_mhz) - 27.55 + chi
        else:
            p_los = _los_probability_mmwave_row(
                dist[i],
                ap_pos[i, 2],
                ue_pos[:, 2],
                params[P_MM_EPSILON],
                params[P_MM_DENSITY_PER_M],
            )
            los[i] = los_u[i] < p_los
            pl[i] = np.where(
                los[i],
                params[P_MM_ALPHA_LOS_DB]
                + 10.0 * params[P_MM_BETA_LOS] * log_d[i]
                + params[P_MM_SIG_LOS_DB] * shadow_z[i],
                params[P_MM_ALPHA_NLOS_DB]
                + 10.0 * params[P_MM_BETA_NLOS] * log_d[i]
                + params[P_MM_SIG_NLOS_DB] * shadow_z[i],
            )

    rss = ap_tx_dbm[:, None] + ap_gain_dbi[:, None] + ue_rx_gain_dbi - pl
    return dist, elev, in_cov, los, pl, rss


def greedy_max_snr(snr_db, in_cov, capacity):
    """Greedy MAX-SNR association.

    Users are processed in descending order of their best covered SNR; each
    takes the covered AP with the highest SNR that still has capacity.  Ties
    break toward the lowest AP id, then the lowest UE id.  Returns a serving
    vector with -1 for users no AP could take.
    """
    n_ap, n_ue = snr_db.shape
    serving = np.full(n_ue, UNSERVED, dtype=np.int64)
    if n_ue == 0:
        return serving
    masked = np.where(in_cov.astype(bool), snr_db, -np.inf)
    best = masked.max(axis=0) if n_ap else np.full(n_ue, -np.inf)
    order = np.lexsort((np.arange(n_ue), -best))
    load = np.zeros(n_ap, dtype=np.int64)
    for j in order:
        if not np.isfinite(best[j]):
            continue
        feasible = np.where(in_cov[:, j].astype(bool) & (load < capacity))[0]
        if feasible.size == 0:
            continue
        i = feasible[np.argmax(snr_db[feasible, j])]
        serving[j] = i
        load[i] += 1
    return serving


def resolve_requests(requests, snr_db, in_cov, capacity):
    """Grant per-UE connection requests under per-AP capacity.

    Each AP admits its requesters in descending-SNR order (ties to the lower
    UE id) up to its capacity.  Requests outside [0, n_ap) or toward an AP
    whose coverage cone excludes the UE are rejected.
    """
    n_ap, n_ue = snr_db.shape
    serving = np.full(n_ue, UNSERVED, dtype=np.int64)
    valid = (requests >= 0) & (requests < n_ap)
    valid &= np.array(
        [bool(in_cov[requests[j], j]) if valid[j] else False for j in range(n_ue)]
    )
    req_snr = np.array(
        [snr_db[requests[j], j] if valid[j] else -np.inf for j in range(n_ue)]
    )
    order = np.lexsort((np.arange(n_ue), -req_snr))
    load = np.zeros(n_ap, dtype=np.int64)
    for j in order:
        if not valid[j]:
            continue
        i = requests[j]
        if load[i] < capacity[i]:
            serving[j] = i
            load[i] += 1
    return serving


def served_sinr_rate(
    rss_dbm,
    pl_db,
    in_cov,
    serving,
    ap_pos,
    ap_kind,
    ap_band,
    ap_tx_dbm,
    ap_gain_dbi,
    ap_gain_min_dbi,
    ap_beam_cos_half,
    ap_bw_hz,
    ue_pos,
    ue_rx_gain_dbi,
    noise_dbm_hz,
):
    """SINR, achievable rate and allocated bandwidth of each served link.

    Sub-6GHz APs split their band equally among served users (orthogonal, no
    intra-cell interference); mm-wave APs reuse the full band per beam, so
    every other active same-band beam interferes through the two-level
    directive pattern.  Cross-band interference is zero.  Unassociated users
    get rate 0 and the finite SINR sentinel.
    """
    n_ap, n_ue = rss_dbm.shape
    sinr_db = np.full(n_ue, SINR_DB_UNSERVED)
    rate = np.zeros(n_ue)
    bw_eff = np.zeros(n_ue)
    if n_ue == 0:
        return sinr_db, rate, bw_eff

    load = np.bincount(serving[serving >= 0], minlength=n_ap) if n_ap else np.zeros(0)
    served = np.where(serving >= 0)[0]
    if served.size == 0:
        return sinr_db, rate, bw_eff

    # Unit direction from each AP to each UE, for beam-offset gains.
    diff = ue_pos[None, :, :] - ap_pos[:, None, :]
    norm = np.linalg.norm(diff, axis=2)
    safe = np.maximum(norm, _MIN_DISTANCE_M)
    unit = diff / safe[:, :, None]

    noise_mw_hz = 10.0 ** (noise_dbm_hz / 10.0)
    for j in served:
        i = int(serving[j])
        if ap_band[i] == BAND_SUB6:
            bw = ap_bw_hz[i] / load[i]
        else:
            bw = ap_bw_hz[i]
        bw_eff[j] = bw
        s_mw = 10.0 ** (rss_dbm[i, j] / 10.0)
        i_mw = 0.0
        for k in served:
            if k == j:
                continue
            src = int(serving[k])
            if ap_band[src] != ap_band[i]:
                continue
            if src == i and ap_band[i] == BAND_SUB6:
                continue
            if ap_kind[src] == KIND_MBS:
                gain = ap_gain_dbi[src]
            else:
                cos_off = float(np.dot(unit[src, k], unit[src, j]))
                gain = (
                    ap_gain_dbi[src]
                    if cos_off >= ap_beam_cos_half[src]
                    else ap_gain_min_dbi[src]
                )
            p_mw = 10.0 ** ((ap_tx_dbm[src] + gain + ue_rx_gain_dbi - pl_db[src, j]) / 10.0)
            if ap_band[i] == BAND_SUB6 and bw < ap_bw_hz[src]:
                p_mw *= bw / ap_bw_hz[src]
            i_mw += p_mw
        sinr = s_mw / (noise_mw_hz * bw + i_mw)
        sinr_db[j] = 10.0 * np.log10(sinr)
        rate[j] = bw * np.log2(1.0 + sinr) if in_cov[i, j] else 0.0
    return sinr_db, rate, bw_eff
