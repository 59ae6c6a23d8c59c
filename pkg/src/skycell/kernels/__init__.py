"""Hot-path kernels with a compiled core and a NumPy fallback.

The compiled extension (``skycell.kernels._core``) is preferred when it
imports; otherwise the NumPy reference implementation is used.  Set
``SKYCELL_KERNELS=python`` (or ``cython``) to force a backend, e.g. for the
benchmark in ``benchmarks/bench_kernels.py``.
"""
import os

import numpy as np

from . import reference
from .constants import (  # noqa: F401  (re-exported)
    BAND_MMWAVE,
    BAND_SUB6,
    KIND_MAP,
    KIND_MBS,
    N_PARAMS,
    SINR_DB_UNSERVED,
    UNSERVED,
)

_FORCED = os.environ.get("SKYCELL_KERNELS", "").strip().lower()

if _FORCED in ("python", "reference"):
    _impl = reference
elif _FORCED == "cython":
    from . import _core as _impl  # hard failure when explicitly requested
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = reference

BACKEND = _impl.BACKEND_NAME


def available_backends():
    """Map backend name -> implementation module, for benchmarks and tests."""
    backends = {"python": reference}
    try:
        from . import _core

        backends["cython"] = _core
    except ImportError:
        pass
    return backends


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _u8(a):
    return np.ascontiguousarray(a, dtype=np.uint8)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


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
    impl=None,
):
    impl = impl or _impl
    return impl.link_matrices(
        _f64(ap_pos),
        _u8(ap_kind),
        _u8(ap_band),
        _f64(ap_tx_dbm),
        _f64(ap_gain_dbi),
        _f64(ap_aperture_deg),
        _f64(ap_carrier_ghz),
        _f64(ue_pos),
        float(ue_rx_gain_dbi),
        _f64(params),
        _f64(los_u),
        _f64(shadow_z),
    )


def greedy_max_snr(snr_db, in_cov, capacity, impl=None):
    impl = impl or _impl
    return impl.greedy_max_snr(_f64(snr_db), _u8(in_cov), _i64(capacity))


def resolve_requests(requests, snr_db, in_cov, capacity, impl=None):
    impl = impl or _impl
    return impl.resolve_requests(
        _i64(requests), _f64(snr_db), _u8(in_cov), _i64(capacity)
    )


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
    impl=None,
):
    impl = impl or _impl
    return impl.served_sinr_rate(
        _f64(rss_dbm),
        _f64(pl_db),
        _u8(in_cov),
        _i64(serving),
        _f64(ap_pos),
        _u8(ap_kind),
        _u8(ap_band),
        _f64(ap_tx_dbm),
        _f64(ap_gain_dbi),
        _f64(ap_gain_min_dbi),
        _f64(ap_beam_cos_half),
        _f64(ap_bw_hz),
        _f64(ue_pos),
        float(ue_rx_gain_dbi),
        float(noise_dbm_hz),
    )
