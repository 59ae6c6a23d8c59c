"""Baseline user association, QoS accounting, and network utility metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ApArrays, RadioState

# min(D, R) is floored here before the utility so starved users contribute
# log(1) = 0 instead of blowing up; applied uniformly to every algorithm.
RATE_FLOOR_BPS = 1.0


@dataclass(frozen=True)
class AssociationMatrix:
    """Binary association encoded as a serving vector (-1 = unassociated)."""

    serving: np.ndarray  # (P,) int64
    n_aps: int

    @property
    def n_users(self) -> int:
        return self.serving.shape[0]

    @property
    def x(self) -> np.ndarray:
        """Dense binary matrix (n_aps, n_users)."""
        m = np.zeros((self.n_aps, self.n_users), dtype=np.int8)
        served = np.where(self.serving >= 0)[0]
        m[self.serving[served], served] = 1
        return m

    def served_by(self, ap_index: int) -> np.ndarray:
        return np.where(self.serving == ap_index)[0]

    @property
    def unassociated(self) -> np.ndarray:
        return np.where(self.serving < 0)[0]

    def loads(self) -> np.ndarray:
        served = self.serving[self.serving >= 0]
        return np.bincount(served, minlength=self.n_aps)


@dataclass(frozen=True)
class QosReport:
    kappa: np.ndarray  # (P,) in [0, 1]
    satisfied: np.ndarray  # (P,) bool, kappa >= per-user target
    satisfied_fraction: float


def max_snr_association(aps: ApArrays, snr_db, in_cov) -> AssociationMatrix:
    """Greedy MAX-SNR association under coverage and per-AP capacity.

    Users are processed in descending order of their best covered SNR; each
    takes its best feasible AP.  Users left without a feasible AP stay
    unassociated and are visible through ``AssociationMatrix.unassociated``.
    """
    serving = kernels.greedy_max_snr(snr_db, in_cov, aps.capacity)
    return AssociationMatrix(serving=serving, n_aps=aps.n)


def qos_vector(served_rate_bps, demand_bps, serving) -> np.ndarray:
    """Per-user QoS satisfaction: served fraction of demand, capped at 1.

    Zero-demand users are trivially satisfied; unassociated users score 0.
    """
    demand = np.asarray(demand_bps, dtype=float)
    rate = np.asarray(served_rate_bps, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(demand > 0.0, rate / np.where(demand > 0.0, demand, 1.0), 1.0)
    kappa = np.minimum(1.0, ratio)
    kappa[np.asarray(serving) < 0] = 0.0
    return kappa


def qos_satisfaction(ue_index: int, radio: RadioState, demand_bps) -> float:
    """QoS satisfaction of one user under the given radio state."""
    kappa = qos_vector(radio.served_rate_bps, demand_bps, radio.serving)
    return float(kappa[ue_index])


def qos_report(radio: RadioState, demand_bps, qos_target: float) -> QosReport:
    kappa = qos_vector(radio.served_rate_bps, demand_bps, radio.serving)
    satisfied = kappa >= qos_target - 1e-12
    frac = float(satisfied.mean()) if kappa.size else 1.0
    return QosReport(kappa=kappa, satisfied=satisfied, satisfied_fraction=frac)


def alpha_fair_utility(x: float, alpha: float) -> float:
    """The alpha-fair utility: x^(1-alpha)/(1-alpha), or ln(x) at alpha = 1."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if x <= 0.0:
        if alpha >= 1.0:
            raise ValueError("utility undefined for x <= 0 when alpha >= 1")
        if x < 0.0:
            raise ValueError("utility argument must be >= 0")
    if alpha == 1.0:
        return math.log(x)
    return x ** (1.0 - alpha) / (1.0 - alpha)


def _utility_vec(x, alpha):
    if alpha == 1.0:
        return np.log(x)
    return np.power(x, 1.0 - alpha) / (1.0 - alpha)


def network_utility(radio: RadioState, demand_bps, alpha: float) -> float:
    """Total network utility: sum over served users of U_alpha(min(D, R)).

    Delivered rate is floored at ``RATE_FLOOR_BPS`` so starved users are
    well-defined for alpha >= 1; unassociated users contribute the floor
    utility (0 at alpha = 1).
    """
    return network_utility_from_rates(radio.served_rate_bps, demand_bps, radio.serving, alpha)


def network_utility_from_rates(served_rate_bps, demand_bps, serving, alpha: float) -> float:
    serving = np.asarray(serving)
    if serving.size == 0:
        return 0.0
    delivered = np.minimum(np.asarray(demand_bps, dtype=float), np.asarray(served_rate_bps, dtype=float))
    delivered = np.where(serving >= 0, delivered, 0.0)
    floored = np.maximum(delivered, RATE_FLOOR_BPS)
    return float(_utility_vec(floored, alpha).sum())


def sum_delivered_rate(served_rate_bps, demand_bps, serving) -> float:
    """Network sum rate in bit/s, demand-capped, over associated users."""
    delivered = np.minimum(np.asarray(demand_bps, dtype=float), np.asarray(served_rate_bps, dtype=float))
    return float(np.where(np.asarray(serving) >= 0, delivered, 0.0).sum())


def handover_frequency(serving_trace) -> float:
    """Mean serving-AP change rate per user per step over a trace.

    ``serving_trace`` is (T, P); a change is counted whenever a user's
    serving AP (including the unassociated sentinel) differs between
    consecutive steps, averaged over the T-1 transitions and all users.
    """
    trace = np.asarray(serving_trace)
    if trace.ndim != 2 or trace.shape[0] < 2:
        raise ValueError("handover_frequency needs a (T >= 2, P) trace")
    if trace.shape[1] == 0:
        return 0.0
    changes = trace[1:] != trace[:-1]
    return float(changes.mean())
