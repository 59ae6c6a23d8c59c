# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot link-evaluation kernels.

Mirrors ``skycell.kernels.reference`` exactly (same parameter-vector layout,
same tie-breaking, same sentinels); the parity test suite keeps the two in
lock step.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, exp, floor, fmax, fmin, hypot, log2, log10, pow, sqrt, tan

cnp.import_array()

cdef double PI = 3.141592653589793238462643383279502884

# Must match skycell/kernels/constants.py.
cdef enum:
    P_SUB6_C = 0
    P_SUB6_D = 1
    P_SUB6_THETA0_DEG = 2
    P_SUB6_MU_LOS_DB = 3
    P_SUB6_MU_NLOS_DB = 4
    P_SUB6_SIG_LOS_DB = 5
    P_SUB6_SIG_NLOS_DB = 6
    P_MM_EPSILON = 7
    P_MM_DENSITY_PER_M = 8
    P_MM_ALPHA_LOS_DB = 9
    P_MM_BETA_LOS = 10
    P_MM_ALPHA_NLOS_DB = 11
    P_MM_BETA_NLOS = 12
    P_MM_SIG_LOS_DB = 13
    P_MM_SIG_NLOS_DB = 14
    P_GND_ALPHA = 15
    P_GND_BETA_DB = 16
    P_GND_GAMMA = 17
    P_GND_SIG_DB = 18
    P_NOISE_DBM_HZ = 19

cdef int KIND_MBS = 0
cdef int BAND_SUB6 = 0
cdef double SINR_DB_UNSERVED = -300.0
cdef double MIN_DISTANCE_M = 1e-6

BACKEND_NAME = "cython"


cdef double _los_prob_mmwave(double d, double h_t, double h_r,
                             double epsilon, double density) nogil:
    cdef long gamma = <long>floor(density * d)
    cdef double h_max, dh2, denom, prod
    cdef long n
    if gamma <= 0:
        return 1.0
    h_max = fmax(h_t, h_r)
    dh2 = (h_t - h_r) * (h_t - h_r)
    denom = 2.0 * epsilon * epsilon * <double>gamma * <double>gamma
    prod = 1.0
    for n in range(gamma + 1):
        prod *= 1.0 - exp(-((<double>gamma) * h_max - (n + 0.5) * dh2) / denom)
    return fmin(1.0, fmax(0.0, prod))


cdef double _los_prob_sub6(double elev_deg, double c, double d, double theta0) nogil:
    cdef double base = elev_deg - theta0
    cdef double p
    if base < 0.0:
        return 0.0
    if base == 0.0:
        p = c if d == 0.0 else 0.0
    else:
        p = c * pow(base, d)
    return fmin(1.0, fmax(0.0, p))


def link_matrices(double[:, ::1] ap_pos, unsigned char[::1] ap_kind,
                  unsigned char[::1] ap_band, double[::1] ap_tx_dbm,
                  double[::1] ap_gain_dbi, double[::1] ap_aperture_deg,
                  double[::1] ap_carrier_ghz, double[:, ::1] ue_pos,
                  double ue_rx_gain_dbi, double[::1] params,
                  double[:, ::1] los_u, double[:, ::1] shadow_z):
    cdef Py_ssize_t n_ap = ap_pos.shape[0]
    cdef Py_ssize_t n_ue = ue_pos.shape[0]
    dist_arr = np.empty((n_ap, n_ue))
    elev_arr = np.empty((n_ap, n_ue))
    cov_arr = np.zeros((n_ap, n_ue), dtype=np.uint8)
    los_arr = np.zeros((n_ap, n_ue), dtype=np.uint8)
    pl_arr = np.empty((n_ap, n_ue))
    rss_arr = np.empty((n_ap, n_ue))
    cdef double[:, ::1] dist = dist_arr
    cdef double[:, ::1] elev = elev_arr
    cdef unsigned char[:, ::1] cov = cov_arr
    cdef unsigned char[:, ::1] los = los_arr
    cdef double[:, ::1] pl = pl_arr
    cdef double[:, ::1] rss = rss_arr

    cdef Py_ssize_t i, j
    cdef double dx, dy, horiz, alt, d3, log_d, theta, reach, p_los, chi, f_mhz
    cdef double tan_half
    cdef int is_los

    with nogil:
        for i in range(n_ap):
            tan_half = 0.0
            if ap_kind[i] != KIND_MBS and ap_aperture_deg[i] < 180.0:
                tan_half = tan(ap_aperture_deg[i] / 2.0 * PI / 180.0)
            for j in range(n_ue):
                dx = ue_pos[j, 0] - ap_pos[i, 0]
                dy = ue_pos[j, 1] - ap_pos[i, 1]
                horiz = hypot(dx, dy)
                alt = ap_pos[i, 2] - ue_pos[j, 2]
                d3 = sqrt(horiz * horiz + alt * alt)
                if d3 < MIN_DISTANCE_M:
                    d3 = MIN_DISTANCE_M
                dist[i, j] = d3
                log_d = log10(d3)
                theta = atan2(alt, horiz) * 180.0 / PI
                elev[i, j] = theta

                if ap_kind[i] == KIND_MBS:
                    cov[i, j] = 1
                    los[i, j] = 1
                    pl[i, j] = (10.0 * params[P_GND_ALPHA] * log_d
                                + params[P_GND_BETA_DB]
                                + 10.0 * params[P_GND_GAMMA] * log10(ap_carrier_ghz[i])
                                + params[P_GND_SIG_DB] * shadow_z[i, j])
                else:
                    if ap_aperture_deg[i] >= 180.0:
                        cov[i, j] = 1
                    elif alt >= 0.0 and horiz <= alt * tan_half:
                        cov[i, j] = 1
                    else:
                        cov[i, j] = 0
                    if ap_band[i] == BAND_SUB6:
                        p_los = _los_prob_sub6(theta, params[P_SUB6_C],
                                               params[P_SUB6_D],
                                               params[P_SUB6_THETA0_DEG])
                        is_los = los_u[i, j] < p_los
                        los[i, j] = <unsigned char>is_los
                        if is_los:
                            chi = params[P_SUB6_MU_LOS_DB] + params[P_SUB6_SIG_LOS_DB] * shadow_z[i, j]
                        else:
                            chi = params[P_SUB6_MU_NLOS_DB] + params[P_SUB6_SIG_NLOS_DB] * shadow_z[i, j]
                        f_mhz = ap_carrier_ghz[i] * 1000.0
                        pl[i, j] = 20.0 * log_d + 20.0 * log10(f_mhz) - 27.55 + chi
                    else:
                        p_los = _los_prob_mmwave(d3, ap_pos[i, 2], ue_pos[j, 2],
                                                 params[P_MM_EPSILON],
                                                 params[P_MM_DENSITY_PER_M])
                        is_los = los_u[i, j] < p_los
                        los[i, j] = <unsigned char>is_los
                        if is_los:
                            pl[i, j] = (params[P_MM_ALPHA_LOS_DB]
                                        + 10.0 * params[P_MM_BETA_LOS] * log_d
                                        + params[P_MM_SIG_LOS_DB] * shadow_z[i, j])
                        else:
                            pl[i, j] = (params[P_MM_ALPHA_NLOS_DB]
                                        + 10.0 * params[P_MM_BETA_NLOS] * log_d
                                        + params[P_MM_SIG_NLOS_DB] * shadow_z[i, j])
                rss[i, j] = ap_tx_dbm[i] + ap_gain_dbi[i] + ue_rx_gain_dbi - pl[i, j]

    return dist_arr, elev_arr, cov_arr, los_arr, pl_arr, rss_arr


def greedy_max_snr(double[:, ::1] snr_db, unsigned char[:, ::1] in_cov,
                   long[::1] capacity):
    cdef Py_ssize_t n_ap = snr_db.shape[0]
    cdef Py_ssize_t n_ue = snr_db.shape[1]
    serving_arr = np.full(n_ue, -1, dtype=np.int64)
    cdef long[::1] serving = serving_arr
    if n_ue == 0:
        return serving_arr
    best_arr = np.empty(n_ue)
    cdef double[::1] best = best_arr
    load_arr = np.zeros(n_ap, dtype=np.int64)
    cdef long[::1] load = load_arr

    cdef Py_ssize_t i, j, idx
    cdef double b, s
    cdef long pick
    with nogil:
        for j in range(n_ue):
            b = -1e308
            for i in range(n_ap):
                if in_cov[i, j] and snr_db[i, j] > b:
                    b = snr_db[i, j]
            best[j] = b

    # Descending best SNR, ties toward the lower UE id.
    order = np.lexsort((np.arange(n_ue), -best_arr))
    cdef long[::1] order_v = np.ascontiguousarray(order, dtype=np.int64)
    with nogil:
        for idx in range(n_ue):
            j = order_v[idx]
            if best[j] <= -1e308:
                continue
            pick = -1
            s = -1e308
            for i in range(n_ap):
                if in_cov[i, j] and load[i] < capacity[i] and snr_db[i, j] > s:
                    s = snr_db[i, j]
                    pick = i
            if pick >= 0:
                serving[j] = pick
                load[pick] += 1
    return serving_arr


def resolve_requests(long[::1] requests, double[:, ::1] snr_db,
                     unsigned char[:, ::1] in_cov, long[::1] capacity):
    cdef Py_ssize_t n_ap = snr_db.shape[0]
    cdef Py_ssize_t n_ue = snr_db.shape[1]
    serving_arr = np.full(n_ue, -1, dtype=np.int64)
    cdef long[::1] serving = serving_arr
    if n_ue == 0:
        return serving_arr
    valid_arr = np.zeros(n_ue, dtype=np.uint8)
    req_snr_arr = np.full(n_ue, -np.inf)
    cdef unsigned char[::1] valid = valid_arr
    cdef double[::1] req_snr = req_snr_arr
    load_arr = np.zeros(n_ap, dtype=np.int64)
    cdef long[::1] load = load_arr

    cdef Py_ssize_t j, idx
    cdef long i
    with nogil:
        for j in range(n_ue):
            i = requests[j]
            if 0 <= i < <long>n_ap and in_cov[i, j]:
                valid[j] = 1
                req_snr[j] = snr_db[i, j]

    order = np.lexsort((np.arange(n_ue), -req_snr_arr))
    cdef long[::1] order_v = np.ascontiguousarray(order, dtype=np.int64)
    with nogil:
        for idx in range(n_ue):
            j = order_v[idx]
            if not valid[j]:
                continue
            i = requests[j]
            if load[i] < capacity[i]:
                serving[j] = i
                load[i] += 1
    return serving_arr


def served_sinr_rate(double[:, ::1] rss_dbm, double[:, ::1] pl_db,
                     unsigned char[:, ::1] in_cov, long[::1] serving,
                     double[:, ::1] ap_pos, unsigned char[::1] ap_kind,
                     unsigned char[::1] ap_band, double[::1] ap_tx_dbm,
                     double[::1] ap_gain_dbi, double[::1] ap_gain_min_dbi,
                     double[::1] ap_beam_cos_half, double[::1] ap_bw_hz,
                     double[:, ::1] ue_pos, double ue_rx_gain_dbi,
                     double noise_dbm_hz):
    cdef Py_ssize_t n_ap = rss_dbm.shape[0]
    cdef Py_ssize_t n_ue = rss_dbm.shape[1]
    sinr_arr = np.full(n_ue, SINR_DB_UNSERVED)
    rate_arr = np.zeros(n_ue)
    bw_arr = np.zeros(n_ue)
    cdef double[::1] sinr_db = sinr_arr
    cdef double[::1] rate = rate_arr
    cdef double[::1] bw_eff = bw_arr
    if n_ue == 0:
        return sinr_arr, rate_arr, bw_arr

    load_arr = np.zeros(n_ap, dtype=np.int64)
    cdef long[::1] load = load_arr
    # Unit directions AP -> UE.
    unit_arr = np.empty((n_ap, n_ue, 3))
    cdef double[:, :, ::1] unit = unit_arr

    cdef Py_ssize_t i, j, k
    cdef long src, srv
    cdef double dx, dy, dz, nrm, bw, s_mw, i_mw, gain, cos_off, p_mw, sinr
    cdef double noise_mw_hz = 10.0 ** (noise_dbm_hz / 10.0)

    with nogil:
        for j in range(n_ue):
            if serving[j] >= 0:
                load[serving[j]] += 1
        for i in range(n_ap):
            for j in range(n_ue):
                dx = ue_pos[j, 0] - ap_pos[i, 0]
                dy = ue_pos[j, 1] - ap_pos[i, 1]
                dz = ue_pos[j, 2] - ap_pos[i, 2]
                nrm = sqrt(dx * dx + dy * dy + dz * dz)
                if nrm < MIN_DISTANCE_M:
                    nrm = MIN_DISTANCE_M
                unit[i, j, 0] = dx / nrm
                unit[i, j, 1] = dy / nrm
                unit[i, j, 2] = dz / nrm

        for j in range(n_ue):
            srv = serving[j]
            if srv < 0:
                continue
            if ap_band[srv] == BAND_SUB6:
                bw = ap_bw_hz[srv] / <double>load[srv]
            else:
                bw = ap_bw_hz[srv]
            bw_eff[j] = bw
            s_mw = 10.0 ** (rss_dbm[srv, j] / 10.0)
            i_mw = 0.0
            for k in range(n_ue):
                if k == j:
                    continue
                src = serving[k]
                if src < 0:
                    continue
                if ap_band[src] != ap_band[srv]:
                    continue
                if src == srv and ap_band[srv] == BAND_SUB6:
                    continue
                if ap_kind[src] == KIND_MBS:
                    gain = ap_gain_dbi[src]
                else:
                    cos_off = (unit[src, k, 0] * unit[src, j, 0]
                               + unit[src, k, 1] * unit[src, j, 1]
                               + unit[src, k, 2] * unit[src, j, 2])
                    if cos_off >= ap_beam_cos_half[src]:
                        gain = ap_gain_dbi[src]
                    else:
                        gain = ap_gain_min_dbi[src]
                p_mw = 10.0 ** ((ap_tx_dbm[src] + gain + ue_rx_gain_dbi - pl_db[src, j]) / 10.0)
                if ap_band[srv] == BAND_SUB6 and bw < ap_bw_hz[src]:
                    p_mw *= bw / ap_bw_hz[src]
                i_mw += p_mw
            sinr = s_mw / (noise_mw_hz * bw + i_mw)
            sinr_db[j] = 10.0 * log10(sinr)
            if in_cov[srv, j]:
                rate[j] = bw * log2(1.0 + sinr)
            else:
                rate[j] = 0.0
    return sinr_arr, rate_arr, bw_arr
