"""Independent checks in a truncated photon-number basis.

Operators on the qubit (A) x oscillator (C) space are indexed as
``a * (n_max + 1) + n`` with ``a`` the computational-basis bit of A.
The phase-error operator is accumulated from its integral form over
quadrature nodes, which is independent of the closed-form block kernels
used by :mod:`dualbound`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channelstats as cs
from . import dualbound as db
from . import finitesize as fs
from .mathkit import (
    TestFunctionSpec,
    coherent_amplitudes,
    gauss_legendre_panels,
    hermite_functions,
    lambda_range,
    lambda_test,
    uniform_breaks,
)

TRUNCATION_ALLOWANCE = 1e-6
_PLUS = np.array([1.0, 1.0]) / math.sqrt(2.0)
_MINUS = np.array([1.0, -1.0]) / math.sqrt(2.0)
_KET0 = np.array([1.0, 0.0])
_KET1 = np.array([0.0, 1.0])


@dataclass(frozen=True)
class FockOperator:
    dim: int
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.shape != (self.dim, self.dim):
            raise ValueError(f"entries must be {self.dim}x{self.dim}")
        if not np.allclose(a, a.conj().T, rtol=0, atol=1e-10):
            raise ValueError("operator is not Hermitian")

    def max_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[-1])


@dataclass(frozen=True)
class McReport:
    trials: int
    violations: int
    bound_eps: float
    passed: bool

    @classmethod
    def from_counts(cls, trials: int, violations: int, bound_eps: float) -> "McReport":
        slack = 3.0 * math.sqrt(bound_eps / trials)
        return cls(trials, violations, bound_eps, violations / trials <= bound_eps + slack)

    @property
    def rate(self) -> float:
        return self.violations / self.trials


# ---------------------------------------------------------------------------
# operator construction


def _parity_masks(n_max):
    odd = (np.arange(n_max + 1) % 2).astype(float)
    return odd, 1.0 - odd


def _twisted_vectors(th, amp_o, amp_e):
    """Projected images of u_+ and u_- for each node; columns are nodes.

    ``amp_o`` / ``amp_e`` hold the parity-split C components, shape (n+1, k).
    """
    c = np.cos(th / 2.0)
    s = np.sin(th / 2.0)
    vp = np.kron(_PLUS[:, None], amp_o * c) + np.kron(_MINUS[:, None], amp_e * s)
    vm = np.kron(_MINUS[:, None], amp_o * c) - np.kron(_PLUS[:, None], amp_e * s)
    return vp, vm


def _hom_phase_error(mu, beta, x_th, n_max, qc):
    reach = math.sqrt(2.0 * n_max + 1.0)
    breaks = uniform_breaks(x_th, x_th + reach + qc.domain_half_width, qc.panel_width)
    x, w = gauss_legendre_panels(breaks, qc.panel_order)
    odd, even = _parity_masks(n_max)
    h = hermite_functions(n_max, x)
    vp, vm = _twisted_vectors(db.theta(mu, beta, x, "hom"), h * odd[:, None], h * even[:, None])
    return (vp * (2.0 * w)) @ vp.T + (vm * (2.0 * w)) @ vm.T


def _het_phase_error(mu, beta, x_th, n_max, qc):
    reach = math.sqrt(2.0 * n_max + 1.0)
    breaks = uniform_breaks(x_th, x_th + reach + qc.domain_half_width, qc.panel_width)
    om, w_om = gauss_legendre_panels(breaks, qc.panel_order)
    # <x|omega_r> is negligible beyond |x - omega_r| ~ 5.5 at double precision
    t_breaks = uniform_breaks(-5.5, 5.5 + beta, qc.panel_width)
    t, w_t = gauss_legendre_panels(t_breaks, qc.panel_order)
    odd, even = _parity_masks(n_max)
    th = db.theta(mu, beta, om, "het")
    norm = (2.0 / math.pi) ** 0.25
    dim = 2 * (n_max + 1)
    out = np.zeros((dim, dim))
    for omega, wo, ang in zip(om, w_om, th):
        x = omega + t
        # O(x) maps |0>|omega_r> to |0>|x><x|omega_r> and |1>|omega_r> to |1>|x-beta><x-beta|omega_r>
        f0 = hermite_functions(n_max, x) * (norm * np.exp(-((x - omega) ** 2)))
        f1 = hermite_functions(n_max, x - beta) * (norm * np.exp(-((x - beta - omega) ** 2)))
        c, s = math.cos(ang / 2.0), math.sin(ang / 2.0)
        for u, proj_first in (((c * _PLUS + s * _MINUS), True), ((c * _MINUS - s * _PLUS), False)):
            vec = np.kron(_KET0[:, None] * u[0], f0) + np.kron(_KET1[:, None] * u[1], f1)
            vec = _project(vec, n_max, odd, even, proj_first)
            out += (vec * (2.0 * wo * w_t)) @ vec.T
    return out


def _project(vec, n_max, odd, even, first):
    """Apply the sector projector to column vectors without forming it."""
    top, bot = vec[: n_max + 1], vec[n_max + 1 :]
    p_coef = (top + bot) / math.sqrt(2.0)
    m_coef = (top - bot) / math.sqrt(2.0)
    if first:
        p_coef, m_coef = p_coef * odd[:, None], m_coef * even[:, None]
    else:
        p_coef, m_coef = p_coef * even[:, None], m_coef * odd[:, None]
    return np.vstack(((p_coef + m_coef) / math.sqrt(2.0), (p_coef - m_coef) / math.sqrt(2.0)))


def oracle_quadrature() -> db.QuadratureConfig:
    """Node layout for the dense builds, deliberately unlike the dualbound default."""
    return db.QuadratureConfig(domain_half_width=6.5, panel_width=0.25, panel_order=16)


def build_phase_error_op(
    params: cs.ProtocolParams, kind: str | None = None, n_max: int = 40, qc: db.QuadratureConfig | None = None
) -> FockOperator:
    kind = cs.normalize_kind(kind or params.protocol_kind)
    return phase_error_op_for(kind, params.mu, params.beta, params.x_th, n_max, qc)


def phase_error_op_for(kind, mu, beta, x_th, n_max=40, qc=None) -> FockOperator:
    if beta * beta > mu:
        raise ValueError("beta^2 must not exceed mu")
    qc = qc or oracle_quadrature()
    kind = cs.normalize_kind(kind)
    build = _hom_phase_error if kind == cs.HOMODYNE else _het_phase_error
    mat = build(mu, beta, x_th, n_max, qc)
    return FockOperator(2 * (n_max + 1), 0.5 * (mat + mat.T))


def build_fidelity_ops(beta: float, n_max: int) -> tuple[FockOperator, FockOperator]:
    """Pi_fid = |0><0| x |beta><beta| + |1><1| x |-beta><-beta| and Pi_trash = |-><-| x I."""
    plus_b = coherent_amplitudes(beta, n_max)
    minus_b = coherent_amplitudes(-beta, n_max)
    v0 = np.kron(_KET0, plus_b)
    v1 = np.kron(_KET1, minus_b)
    fid = np.outer(v0, v0) + np.outer(v1, v1)
    trash = np.kron(np.outer(_MINUS, _MINUS), np.eye(n_max + 1))
    dim = 2 * (n_max + 1)
    return FockOperator(dim, fid), FockOperator(dim, trash)


def combined_operator(m_ph: FockOperator, pi_fid: FockOperator, pi_trash: FockOperator, kappa, gamma) -> FockOperator:
    return FockOperator(m_ph.dim, m_ph.entries + kappa * pi_fid.entries - gamma * pi_trash.entries)


# ---------------------------------------------------------------------------
# coefficient oracle


def oracle_coefficients(m_ph: FockOperator, beta: float) -> db.DualCoefficients:
    """Dual coefficients read off a dense operator by Gram-Schmidt.

    Per sector the orthonormal frame is seeded with the parity halves of
    |beta> attached to the qubit states of that sector; each further vector
    is the normalised new component of M applied to the previous ones.
    """
    n_max = m_ph.dim // 2 - 1
    amp = coherent_amplitudes(beta, n_max)
    odd, even = _parity_masks(n_max)
    psi_o, psi_e = amp * odd, amp * even
    c_odd, c_even = float(psi_o @ psi_o), float(psi_e @ psi_e)
    c_odd, c_even = c_odd / (c_odd + c_even), c_even / (c_odd + c_even)
    mat = m_ph.entries
    sectors = []
    for q_odd, q_even in ((_PLUS, _MINUS), (_MINUS, _PLUS)):
        e2 = np.kron(q_odd, psi_o)
        e2 /= np.linalg.norm(e2)
        e3 = np.kron(q_even, psi_e)
        e3 /= np.linalg.norm(e3)
        p_odd = np.kron(np.outer(q_odd, q_odd), np.diag(odd))
        p_even = np.kron(np.outer(q_even, q_even), np.diag(even))
        me2, me3 = mat @ e2, mat @ e3
        lam_oo, lam_ee, lam_x = e2 @ me2, e3 @ me3, e2 @ me3

        def unit(v):
            nrm = float(np.linalg.norm(v))
            return (v / nrm if nrm > 1e-13 else np.zeros_like(v)), nrm

        e1, sig_oo = unit(p_odd @ me2 - lam_oo * e2)
        e4, sig_eo = unit(p_even @ me2 - lam_x * e3)
        sig_x = float(e1 @ me3)
        sig_ee = float(e4 @ me3)
        _, del_oe = unit(p_odd @ me3 - lam_x * e2 - sig_x * e1)
        _, del_ee = unit(p_even @ me3 - lam_ee * e3 - sig_ee * e4)
        sectors.append(
            dict(
                lambda_oo=float(lam_oo), lambda_ee=float(lam_ee), lambda_x=float(lam_x),
                sigma_oo=sig_oo, sigma_eo=sig_eo, sigma_x=sig_x, sigma_ee=sig_ee,
                delta_oe=del_oe, delta_ee=del_ee,
            )
        )
    c_odd = 1.0 - c_even
    return db._pack(c_odd, c_even, sectors[0], sectors[1])


# ---------------------------------------------------------------------------
# certification


def verify_operator_inequality(
    params: cs.ProtocolParams, kappa: float, gamma: float, kind: str | None = None, n_max: int = 40,
    *, m_ph: FockOperator | None = None, b_coeffs: db.DualCoefficients | None = None,
) -> tuple[float, float, float]:
    """Return (lambda_max of the truncated combined operator, B, B - lambda_max)."""
    if kappa < 0 or gamma < 0:
        raise ValueError("kappa and gamma must be non-negative")
    kind = cs.normalize_kind(kind or params.protocol_kind)
    m_ph = m_ph or build_phase_error_op(params, kind, n_max)
    pi_fid, pi_trash = build_fidelity_ops(params.beta, m_ph.dim // 2 - 1)
    lhs = combined_operator(m_ph, pi_fid, pi_trash, kappa, gamma).max_eigenvalue()
    coeffs = b_coeffs or db.coefficients(params)
    b_value = db.dual_bound(coeffs, kappa, gamma, kind)
    return lhs, b_value, b_value - lhs


# ---------------------------------------------------------------------------
# fidelity test function


def husimi(rho: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """<omega|rho|omega> for complex amplitudes ``omega`` (any shape)."""
    dim = rho.shape[0]
    n = np.arange(dim)
    log_fact = np.array([math.lgamma(k + 1.0) for k in n])
    flat = omega.ravel()
    # <n|omega> = e^{-|omega|^2/2} omega^n / sqrt(n!)
    powers = flat[:, None] ** n[None, :]
    amps = powers * np.exp(-0.5 * np.abs(flat)[:, None] ** 2 - 0.5 * log_fact[None, :])
    vals = np.einsum("kn,nm,km->k", amps.conj(), rho, amps).real
    return vals.reshape(omega.shape)


def verify_fidelity_bound(
    rho, beta: float, spec: TestFunctionSpec, qc: db.QuadratureConfig | None = None, *, angles: int = 128,
) -> tuple[float, float]:
    """Return (E_rho[Lambda(|omega - beta|^2)], <beta|rho|beta>).

    The expectation is taken over the heterodyne density (1/pi)<omega|rho|omega>
    in polar coordinates around beta: Gauss-Legendre in nu = |omega - beta|^2
    and the trapezoid rule in angle.
    """
    rho = rho.entries if isinstance(rho, FockOperator) else np.asarray(rho)
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ValueError("rho must have unit trace")
    if np.linalg.eigvalsh(rho)[0] < -1e-10:
        raise ValueError("rho must be positive semidefinite")
    qc = qc or db.QuadratureConfig()
    dim = rho.shape[0]
    nu_max = 60.0 + 4.0 * dim + 4.0 * beta * beta
    nu, w_nu = gauss_legendre_panels(uniform_breaks(0.0, nu_max, 1.0), qc.panel_order)
    phi = 2.0 * math.pi * np.arange(angles) / angles
    omega = beta + np.sqrt(nu)[:, None] * np.exp(1j * phi)[None, :]
    ang_mean = husimi(rho, omega).mean(axis=1)
    # d^2 omega / pi = (1/2) d nu d phi / pi, and the angle mean absorbs 2 pi
    lhs = float(np.sum(w_nu * np.asarray(lambda_test(spec, nu)) * ang_mean))
    amp = coherent_amplitudes(beta, dim - 1).astype(complex)
    rhs = float((amp.conj() @ rho @ amp).real)
    return lhs, rhs


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None, n_max: int | None = None) -> FockOperator:
    """Normalised G G^dagger with complex Gaussian G, embedded in n_max + 1 levels."""
    if not 1 <= dim <= 8:
        raise ValueError("dim must lie in [1, 8]")
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    size = dim if n_max is None else n_max + 1
    out = np.zeros((size, size), dtype=complex)
    out[:dim, :dim] = rho
    return FockOperator(size, 0.5 * (out + out.conj().T))


# ---------------------------------------------------------------------------
# concentration inequalities by Monte Carlo


def mc_validate_hypergeometric(N: int, M: int, n: int, eps: float, trials: int, seed: int) -> McReport:
    """Sampling without replacement: how often the upper bound on M falls below M."""
    if not (0 <= M <= N and 0 < n <= N):
        raise ValueError("need 0 <= M <= N and 0 < n <= N")
    rng = np.random.default_rng(seed)
    if M == 0:
        draws = np.zeros(trials, dtype=np.int64)
    elif M == N:
        draws = np.full(trials, n, dtype=np.int64)
    else:
        draws = rng.hypergeometric(M, N - M, n, size=trials)
    values, counts = np.unique(draws, return_counts=True)
    violations = 0
    for m_obs, cnt in zip(values, counts):
        if fs.sampling_bound(N, n, eps, float(m_obs)) < M:
            violations += int(cnt)
    return McReport.from_counts(trials, violations, eps)


class DeterministicProcess:
    """Increments fixed in advance; a_i = b_i."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.lower = self.upper = self.values

    def simulate(self, rng, trials):
        inc = np.broadcast_to(self.values, (trials, self.values.size))
        return inc, inc


class CoinProcess:
    """Independent fair +/-1 steps."""

    def __init__(self, rounds: int):
        self.lower = np.full(rounds, -1.0)
        self.upper = np.full(rounds, 1.0)

    def simulate(self, rng, trials):
        steps = 2.0 * rng.integers(0, 2, size=(trials, self.lower.size)) - 1.0
        return steps, np.zeros_like(steps)


class RoundProcess:
    """Per-round contribution of signal, test and trash rounds to the phase-error tally.

    Signal rounds add N_ph/p_sig with a phase error w.p. ``e_ph``; test rounds
    add kappa*Lambda(nu)/p_test with nu exponential of mean ``nu_mean``; trash
    rounds add -gamma*Q/p_trash with Q Bernoulli(q_minus).
    """

    def __init__(self, rounds, p, kappa, gamma, e_ph, q_minus, spec=TestFunctionSpec(), nu_mean=1.0):
        self.p = tuple(p)
        self.kappa, self.gamma, self.e_ph, self.q_minus = kappa, gamma, e_ph, q_minus
        self.spec, self.nu_mean = spec, nu_mean
        lam = lambda_range(spec)
        p_sig, p_test, p_trash = self.p
        hi = max(1.0 / p_sig, kappa * lam.max_val / p_test)
        lo = min(kappa * lam.min_val / p_test, -gamma / p_trash)
        self.lower = np.full(rounds, lo)
        self.upper = np.full(rounds, hi)
        nu, w = gauss_legendre_panels(uniform_breaks(0.0, 80.0 * nu_mean, 0.5 * nu_mean), 20)
        self.test_mean = float(np.sum(w * lambda_test(spec, nu) * np.exp(-nu / nu_mean) / nu_mean))

    def conditional_mean(self) -> float:
        return self.e_ph + self.kappa * self.test_mean - self.gamma * self.q_minus

    def simulate(self, rng, trials):
        rounds = self.lower.size
        p_sig, p_test, p_trash = self.p
        kind = rng.choice(3, size=(trials, rounds), p=self.p)
        ph = rng.random((trials, rounds)) < self.e_ph
        nu = rng.exponential(self.nu_mean, size=(trials, rounds))
        q = rng.random((trials, rounds)) < self.q_minus
        inc = np.where(
            kind == 0,
            ph / p_sig,
            np.where(kind == 1, self.kappa * lambda_test(self.spec, nu) / p_test, -self.gamma * q / p_trash),
        )
        return inc, np.full_like(inc, self.conditional_mean())


class AdaptiveCoinProcess:
    """+/-1 steps whose bias follows the running sum (a genuine martingale-difference setting)."""

    def __init__(self, rounds: int, strength: float = 0.4):
        self.strength = strength
        self.lower = np.full(rounds, -1.0)
        self.upper = np.full(rounds, 1.0)

    def simulate(self, rng, trials):
        rounds = self.lower.size
        inc = np.empty((trials, rounds))
        means = np.empty((trials, rounds))
        total = np.zeros(trials)
        for i in range(rounds):
            p_up = 0.5 + self.strength * np.tanh(total / math.sqrt(i + 1.0))
            means[:, i] = 2.0 * p_up - 1.0
            inc[:, i] = np.where(rng.random(trials) < p_up, 1.0, -1.0)
            total += inc[:, i]
        return inc, means


def azuma_threshold(lower, upper, eps: float) -> float:
    span = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    return math.sqrt(float(np.sum(span * span)) * math.log(1.0 / eps) / 2.0)


def mc_validate_azuma(process, eps: float, trials: int, seed: int, *, chunk: int = 20000) -> McReport:
    """How often the centred sum reaches the Azuma threshold t(eps)."""
    rng = np.random.default_rng(seed)
    t = azuma_threshold(process.lower, process.upper, eps)
    violations = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        inc, means = process.simulate(rng, size)
        if np.any(inc < process.lower - 1e-12) or np.any(inc > process.upper + 1e-12):
            raise ValueError("process produced an increment outside its stated bounds")
        dev = np.sum(inc - means, axis=1)
        # a zero threshold is reached only by a strictly positive deviation
        violations += int(np.sum(dev >= t if t > 0 else dev > 1e-9))
        done += size
    return McReport.from_counts(trials, violations, eps)


def mc_validate_bernoulli_trash(mu: float, n_trash: int, eps: float, trials: int, seed: int) -> McReport:
    """Binomial |-> tally on trash rounds against q_minus*n + delta2(eps; n)."""
    q = cs.trash_minus_prob(mu)
    rng = np.random.default_rng(seed)
    tally = rng.binomial(n_trash, q, size=trials)
    limit = q * n_trash + fs.delta2(eps, n_trash, q)
    return McReport.from_counts(trials, int(np.sum(tally >= limit)), eps)


# ---------------------------------------------------------------------------
# round simulator for the expected statistics


@dataclass(frozen=True)
class SimulatedRates:
    """Per-round frequencies and their standard errors."""

    p_plus: float
    p_minus: float
    fid_mean: float
    sig_frac: float
    test_frac: float
    trash_frac: float
    stderr: dict


def simulate_rounds(params: cs.ProtocolParams, chan: cs.ChannelModel, rounds: int, seed: int) -> SimulatedRates:
    """Sample the model channel round by round.

    The receiver sees a displaced thermal state of mean photon number xi/2
    centred on +/- sqrt(eta mu).
    """
    rng = np.random.default_rng(seed)
    amp = math.sqrt(chan.eta * params.mu)
    kind = rng.choice(3, size=rounds, p=(params.p_sig, params.p_test, params.p_trash))
    bit = rng.integers(0, 2, size=rounds)
    centre = np.where(bit == 0, amp, -amp)
    n_th = chan.xi / 2.0
    if params.protocol_kind == cs.HOMODYNE:
        x = centre + rng.normal(scale=math.sqrt((1.0 + chan.xi) / 4.0), size=rounds)
    else:
        x = centre + rng.normal(scale=math.sqrt((1.0 + n_th) / 2.0), size=rounds)
    # acceptance on |x| > x_th; the sign of x is Bob's bit guess
    accepted = np.abs(x) > params.x_th
    agree = accepted & (np.sign(x) == np.sign(centre))
    differ = accepted & (np.sign(x) != np.sign(centre))
    sig = kind == 0
    n_sig = int(sig.sum())
    p_plus = float(agree[sig].mean())
    p_minus = float(differ[sig].mean())
    test = kind == 1
    d = rng.normal(scale=math.sqrt((1.0 + n_th) / 2.0), size=(int(test.sum()), 2))
    nu = d[:, 0] ** 2 + d[:, 1] ** 2
    vals = np.asarray(lambda_test(params.test_fn, nu))
    stderr = {
        "p_plus": math.sqrt(p_plus * (1 - p_plus) / n_sig),
        "p_minus": math.sqrt(p_minus * (1 - p_minus) / n_sig),
        "fid_mean": float(vals.std(ddof=1) / math.sqrt(vals.size)),
    }
    for name, prob in (("sig_frac", params.p_sig), ("test_frac", params.p_test), ("trash_frac", params.p_trash)):
        stderr[name] = math.sqrt(prob * (1 - prob) / rounds)
    return SimulatedRates(
        p_plus=p_plus,
        p_minus=p_minus,
        fid_mean=float(vals.mean()),
        sig_frac=n_sig / rounds,
        test_frac=float(test.mean()),
        trash_frac=float((kind == 2).mean()),
        stderr=stderr,
    )


# ---------------------------------------------------------------------------
# certification suite


@dataclass(frozen=True)
class CheckRecord:
    check: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"check={self.check} status={status} value={self.value!r} tolerance={self.tolerance!r} {self.detail}".rstrip()


def certify_operator_grid(
    kinds=("homodyne", "heterodyne"),
    settings=((0.04, 0.3), (0.2, 0.7)),
    grid=(0.1, 1.0, 10.0),
    eta: float = 0.1,
    n_max: int = 40,
) -> list[CheckRecord]:
    records = []
    for kind in kinds:
        for mu, x_th in settings:
            params = cs.ProtocolParams(kind, mu, math.sqrt(eta * mu), x_th)
            m_ph = build_phase_error_op(params, kind, n_max)
            coeffs = db.coefficients(params)
            for kappa in grid:
                for gamma in grid:
                    lhs, b_value, margin = verify_operator_inequality(
                        params, kappa, gamma, kind, n_max, m_ph=m_ph, b_coeffs=coeffs
                    )
                    records.append(
                        CheckRecord(
                            "operator_inequality",
                            margin,
                            -TRUNCATION_ALLOWANCE,
                            margin >= -TRUNCATION_ALLOWANCE,
                            f"kind={params.protocol_kind} mu={mu!r} x_th={x_th!r} kappa={kappa!r} "
                            f"gamma={gamma!r} lhs={lhs!r} b={b_value!r} n_max={n_max}",
                        )
                    )
    return records


def certify_fidelity(samples: int = 20, seed: int = 7) -> list[CheckRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for m in (1, 3):
        spec = TestFunctionSpec(m=m)
        for beta in (0.0, 0.6, 1.2):
            worst = -math.inf
            for _ in range(samples):
                rho = random_density_matrix(int(rng.integers(1, 9)), rng)
                lhs, rhs = verify_fidelity_bound(rho, beta, spec)
                worst = max(worst, lhs - rhs)
            records.append(
                CheckRecord("fidelity_bound", worst, 1e-8, worst <= 1e-8, f"m={m} beta={beta!r} samples={samples}")
            )
    return records


def certify_concentration(trials: int = 100_000, seed: int = 11) -> list[CheckRecord]:
    reports = {
        "hypergeometric": mc_validate_hypergeometric(10_000, 500, 1_000, 0.01, trials, seed),
        "azuma_rounds": mc_validate_azuma(
            RoundProcess(50, (0.8, 0.1, 0.1), 1.0, 1.0, 0.05, cs.trash_minus_prob(0.2)), 0.01, trials, seed + 1
        ),
        "bernoulli_trash": mc_validate_bernoulli_trash(0.5, 10_000, 0.01, trials, seed + 2),
    }
    return [
        CheckRecord(f"mc_{name}", rep.rate, rep.bound_eps, rep.passed, f"trials={rep.trials} violations={rep.violations}")
        for name, rep in reports.items()
    ]


def run_certification(
    *, n_max: int = 40, fidelity_samples: int = 20, mc_trials: int = 100_000, seed: int = 11
) -> list[CheckRecord]:
    records = certify_operator_grid(n_max=n_max)
    records += certify_fidelity(fidelity_samples, seed)
    records += certify_concentration(mc_trials, seed)
    return records


def write_certification(path, records) -> None:
    lines = [r.line() for r in records]
    failed = sum(not r.passed for r in records)
    lines.append(f"summary checks={len(records)} failed={failed} truncation_allowance={TRUNCATION_ALLOWANCE!r}")
    lines.append("note truncation error of the dense operators is assessed empirically by n_max doubling")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
