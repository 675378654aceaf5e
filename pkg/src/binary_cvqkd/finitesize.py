"""Finite-size terms of the key-length formula.

Counts are real-valued throughout: simulation mode equates every tally with
its expectation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mathkit import LambdaRange, binary_entropy, inv_kl_first_upper, inv_kl_upper


@dataclass(frozen=True)
class SecurityParams:
    eps_sec: float
    eps_cor: float
    eps: float
    s: int

    def __post_init__(self):
        for name in ("eps_sec", "eps_cor", "eps"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {val!r}")
        if self.s < 1:
            raise ValueError("s must be a positive integer")
        total = math.sqrt(2.0) * math.sqrt(self.eps + 2.0 ** (-self.s)) + self.eps_cor
        if abs(total - self.eps_sec) > 1e-12 * self.eps_sec:
            raise ValueError("eps_sec must equal sqrt(2)*sqrt(eps + 2^-s) + eps_cor")

    @classmethod
    def from_eps_sec(cls, eps_sec: float) -> "SecurityParams":
        """Split eps_sec evenly: eps_cor = eps_sec/2 and eps = 2^-s = eps_sec^2/16.

        When eps_sec^2/16 is not a power of two, s is rounded up and eps_cor
        absorbs the slack so the composition identity still holds.
        """
        if not 0 < eps_sec < 1:
            raise ValueError("eps_sec must lie in (0, 1)")
        s = math.ceil(-math.log2(eps_sec * eps_sec / 16.0) - 1e-9)
        eps = 2.0 ** (-s)
        eps_cor = eps_sec - math.sqrt(2.0) * math.sqrt(2.0 * eps)
        return cls(eps_sec=eps_sec, eps_cor=eps_cor, eps=eps, s=s)


@dataclass(frozen=True)
class KeyRatePoint:
    distance_km: float
    eta: float
    key_rate: float
    n_fin: float
    h_ec: float
    e_qber: float
    u_bound: float
    b_value: float
    opt_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_fin < 0:
            raise ValueError("n_fin must be non-negative")


def delta1(
    eps: float,
    N: float,
    kappa,
    gamma,
    p: tuple[float, float, float],
    lam: LambdaRange,
):
    """Azuma deviation term for the per-round martingale sum.

    ``kappa`` and ``gamma`` may be arrays of equal shape.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    kappa = np.asarray(kappa, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(kappa < 0) or np.any(gamma < 0):
        raise ValueError("kappa and gamma must be non-negative")
    p_sig, p_test, p_trash = p
    upper = np.maximum(1.0 / p_sig, kappa * lam.max_val / p_test)
    lower = np.minimum(kappa * lam.min_val / p_test, -gamma / p_trash)
    out = (upper - lower) * math.sqrt(0.5 * N * math.log(1.0 / eps))
    return float(out) if out.ndim == 0 else out


def delta2(eps: float, n_trash: float, q_minus: float) -> float:
    """Chernoff-Hoeffding margin on the trash-round tally of |-> outcomes."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < q_minus < 1:
        raise ValueError("q_minus must lie in (0, 1)")
    if eps >= 1.0 or n_trash <= 0:
        return 0.0
    if math.log2(eps) <= n_trash * math.log2(q_minus):
        return (1.0 - q_minus) * n_trash
    x = inv_kl_first_upper(q_minus, -math.log2(eps) / n_trash)
    return (x - q_minus) * n_trash


def sampling_bound(n_total: float, n_sample: float, eps: float, m_observed: float) -> float:
    """Upper confidence bound on the population count from a sample without replacement."""
    if not 0 < n_sample <= n_total:
        raise ValueError("need 0 < n_sample <= n_total")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if not 0 <= m_observed <= n_sample:
        raise ValueError("m_observed must lie in [0, n_sample]")
    if m_observed >= n_sample:
        return float(n_total)
    target = -math.log2(eps) / n_sample
    return n_total * inv_kl_upper(m_observed / n_sample, target)


def e_qber_bound(n_suc: float, n_smp_suc: float, e_obs: float, eps_cor: float) -> float:
    """Upper bound on the sifted-key bit error rate (failure probability eps_cor/2)."""
    if n_suc <= 0:
        raise ValueError("n_suc must be positive")
    eps = min(eps_cor / 2.0, 1.0)
    total = sampling_bound(n_suc + n_smp_suc, n_smp_suc, eps, e_obs)
    return (total - e_obs) / n_suc


def phase_error_upper(
    b_value: float,
    delta1_val: float,
    delta2_val: float,
    f_hat: float,
    n_trash: float,
    p: tuple[float, float, float],
    N: float,
    kappa: float,
    gamma: float,
    q_minus: float,
) -> float:
    """Upper bound U on the number of phase errors among successful signal rounds."""
    p_sig, p_test, p_trash = p
    return (
        p_sig * (N * b_value + delta1_val)
        - (p_sig / p_test) * kappa * f_hat
        + (p_sig / p_trash) * gamma * (q_minus * n_trash + delta2_val)
    )


def key_length(n_suc: float, u: float, s: int) -> float:
    if n_suc <= 0:
        return 0.0
    rate = min(max(u, 0.0) / n_suc, 0.5)
    return max(n_suc - math.ceil(n_suc * binary_entropy(rate)) - s, 0.0)


def ec_cost(n_suc: float, e_qber: float, f_ec: float) -> float:
    if not 0 <= f_ec <= 1:
        raise ValueError("f_ec must lie in [0, 1]")
    e = min(max(e_qber, 0.0), 0.5)
    return n_suc * (f_ec * binary_entropy(e) + (1.0 - f_ec))


def net_gain(n_fin: float, h_ec: float, N: float, N_smp: float) -> float:
    return (n_fin - h_ec) / (N + N_smp)


def asymptotic_rate(
    b_value: float,
    kappa: float,
    gamma: float,
    p_plus: float,
    p_minus: float,
    fid_mean: float,
    q_minus: float,
    p_sig: float,
    f_ec: float,
) -> tuple[float, float, float]:
    """Per-pulse rate in the N -> infinity limit.

    Returns (rate, e_ph, e_bit); the phase-error rate is clamped to [0, 0.5].
    """
    acc = p_plus + p_minus
    if acc <= 0:
        return 0.0, 0.5, 0.5
    e_ph = min(max((b_value - kappa * fid_mean + gamma * q_minus) / acc, 0.0), 0.5)
    e_bit = p_minus / acc
    rate = p_sig * (acc * (1.0 - binary_entropy(e_ph) - f_ec * binary_entropy(e_bit)) - (1.0 - f_ec) * acc)
    return rate, e_ph, e_bit
