"""Protocol parameters, the Gaussian channel model and expected round statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mathkit import TestFunctionSpec, erfc

HOMODYNE = "homodyne"
HETERODYNE = "heterodyne"
_KIND_ALIASES = {"homodyne": HOMODYNE, "hom": HOMODYNE, "heterodyne": HETERODYNE, "het": HETERODYNE}


def normalize_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown protocol kind {kind!r}") from None


@dataclass(frozen=True)
class ProtocolParams:
    """Parameters of one protocol run.

    ``N = math.inf`` selects the asymptotic limit. ``N_smp`` defaults to
    N/100 when left as ``None``.
    """

    protocol_kind: str
    mu: float
    beta: float
    x_th: float
    p_sig: float = 0.9
    p_test: float = 0.05
    p_trash: float = 0.05
    test_fn: TestFunctionSpec = field(default_factory=TestFunctionSpec)
    s: int = 104
    N: float = math.inf
    N_smp: float | None = None
    f_ec: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "protocol_kind", normalize_kind(self.protocol_kind))
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not 0 <= self.beta < math.sqrt(self.mu):
            raise ValueError(f"beta must lie in [0, sqrt(mu)), got {self.beta!r}")
        if not self.x_th > 0:
            raise ValueError(f"x_th must be positive, got {self.x_th!r}")
        for name in ("p_sig", "p_test", "p_trash"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {val!r}")
        if abs(self.p_sig + self.p_test + self.p_trash - 1.0) > 1e-12:
            raise ValueError("p_sig + p_test + p_trash must equal 1")
        if self.s < 1:
            raise ValueError("s must be a positive integer")
        if not self.N >= 1:
            raise ValueError("N must be at least 1")
        if self.N_smp is None:
            object.__setattr__(self, "N_smp", 0.0 if math.isinf(self.N) else self.N / 100)
        if self.N_smp < 0:
            raise ValueError("N_smp must be non-negative")
        if not 0 <= self.f_ec <= 1:
            raise ValueError("f_ec must lie in [0, 1]")

    @property
    def asymptotic(self) -> bool:
        return math.isinf(self.N)


@dataclass(frozen=True)
class ChannelModel:
    eta: float
    xi: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not self.xi >= 0:
            raise ValueError(f"xi must be non-negative, got {self.xi!r}")

    @classmethod
    def from_distance(cls, distance_km: float, xi: float = 0.0, att_db_per_km: float = 0.2):
        if distance_km < 0:
            raise ValueError("distance must be non-negative")
        return cls(eta=transmissivity(distance_km, att_db_per_km), xi=xi)


def transmissivity(distance_km: float, att_db_per_km: float = 0.2) -> float:
    return 10.0 ** (-att_db_per_km * distance_km / 10.0)


@dataclass(frozen=True)
class ExpectedStats:
    n_suc: float
    n_test: float
    n_trash: float
    n_smp_suc: float
    f_hat: float
    e_obs: float
    p_plus: float
    p_minus: float


def success_probs(params: ProtocolParams, chan: ChannelModel) -> tuple[float, float]:
    """Probabilities of accepted rounds with coinciding / differing bits."""
    amp = math.sqrt(chan.eta * params.mu)
    if params.protocol_kind == HOMODYNE:
        scale = math.sqrt(2.0 / (1.0 + chan.xi))
    else:
        scale = math.sqrt(2.0 / (2.0 + chan.xi))
    p_plus = 0.5 * erfc((params.x_th - amp) * scale)
    p_minus = 0.5 * erfc((params.x_th + amp) * scale)
    return p_plus, p_minus


def fidelity_mean(params: ProtocolParams, chan: ChannelModel) -> float:
    """Mean test-function value per test round for the model state.

    Closed form valid only when beta = sqrt(eta mu).
    """
    if not math.isclose(params.beta, math.sqrt(chan.eta * params.mu), rel_tol=1e-9, abs_tol=1e-15):
        raise ValueError("closed-form fidelity mean requires beta = sqrt(eta * mu)")
    m, r = params.test_fn.m, params.test_fn.r
    half = chan.xi / 2.0
    return (1.0 - (-1) ** (m + 1) * (half / (1.0 + r * (1.0 + half))) ** (m + 1)) / (1.0 + half)


def expected_fidelity_sum(params: ProtocolParams, chan: ChannelModel) -> float:
    """E[F_hat] = p_test N times the per-round mean (finite N only)."""
    if params.asymptotic:
        raise ValueError("fidelity sum is unbounded in asymptotic mode; use fidelity_mean")
    return params.p_test * params.N * fidelity_mean(params, chan)


def trash_minus_prob(mu: float) -> float:
    if not mu > 0:
        raise ValueError("mu must be positive")
    return -0.5 * math.expm1(-2.0 * mu)


def expected_stats(params: ProtocolParams, chan: ChannelModel) -> ExpectedStats:
    """Expected round counts for a finite-N run.

    In asymptotic mode every count is reported per round (N = 1).
    """
    p_plus, p_minus = success_probs(params, chan)
    n = 1.0 if params.asymptotic else float(params.N)
    n_smp = 0.0 if params.asymptotic else float(params.N_smp)
    acc = p_plus + p_minus
    f_hat = params.p_test * n * fidelity_mean(params, chan)
    return ExpectedStats(
        n_suc=params.p_sig * n * acc,
        n_test=params.p_test * n,
        n_trash=params.p_trash * n,
        n_smp_suc=acc * n_smp,
        f_hat=f_hat,
        e_obs=p_minus * n_smp,
        p_plus=p_plus,
        p_minus=p_minus,
    )
