import math

import numpy as np
import pytest
from scipy import integrate

from binary_cvqkd import channelstats as cs
from binary_cvqkd import dualbound as db
from binary_cvqkd import fockcheck as fc
from binary_cvqkd.mathkit import TestFunctionSpec, coherent_amplitudes, coherent_wavefunction, hermite_functions

BETA = math.sqrt(0.004)


@pytest.fixture(scope="module")
def ops30():
    return {kind: fc.phase_error_op_for(kind, 0.04, BETA, 0.3, n_max=30) for kind in ("hom", "het")}


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_phase_error_op_is_povm_element(kind, ops30):
    evals = np.linalg.eigvalsh(ops30[kind].entries)
    assert evals[0] >= -1e-8
    assert evals[-1] <= 1 + 1e-8


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_phase_error_op_vanishes_for_far_threshold(kind):
    op = fc.phase_error_op_for(kind, 0.04, BETA, 40.0, n_max=15)
    assert np.abs(op.entries).max() < 1e-12


def test_phase_error_op_validation():
    with pytest.raises(ValueError):
        fc.phase_error_op_for("hom", 0.01, 0.2, 0.3)
    with pytest.raises(ValueError):
        fc.FockOperator(2, np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        fc.FockOperator(3, np.eye(2))
    p = cs.ProtocolParams("het", 0.04, BETA, 0.3)
    op = fc.build_phase_error_op(p, n_max=12)
    assert op.dim == 26


def _hom_bilinear_oracle(mu, beta, x_th, left, right):
    """<left|M_ph|right> from the position-space integrand with closed-form wavefunctions.

    ``left``/``right`` map the qubit bit to the real amplitude of |beta> or |-beta>.
    """
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)

    def parts(state, x):
        # Pi_odd / Pi_even act as (g(x) -/+ g(-x)) / 2 in position space
        odd = np.zeros(2)
        even = np.zeros(2)
        for bit, (coef, amp) in state.items():
            g, g_ref = coherent_wavefunction(amp, x), coherent_wavefunction(amp, -x)
            ket = np.eye(2)[bit] * coef
            odd += ket * (g - g_ref) / 2
            even += ket * (g + g_ref) / 2
        return odd, even

    def overlaps(state, x):
        th = float(db.theta(mu, beta, x, "hom"))
        c, s = math.cos(th / 2), math.sin(th / 2)
        odd, even = parts(state, x)
        vp = c * (plus @ odd) + s * (minus @ even)
        vm = c * (minus @ odd) - s * (plus @ even)
        return vp, vm

    def integrand(x):
        lp, lm = overlaps(left, x)
        rp, rm = overlaps(right, x)
        return 2.0 * (lp * rp + lm * rm)

    return integrate.quad(integrand, x_th, x_th + 12.0, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


@pytest.mark.parametrize("mu", [0.004, 0.04])
def test_homodyne_matrix_elements_match_integrand_oracle(mu):
    beta, n_max = BETA, 40
    op = fc.phase_error_op_for("hom", mu, beta, 0.3, n_max=n_max)
    amp_p, amp_m = coherent_amplitudes(beta, n_max), coherent_amplitudes(-beta, n_max)
    r2 = 1 / math.sqrt(2)
    phi_plus = {0: (r2, beta), 1: (r2, -beta)}
    phi_minus = {0: (r2, beta), 1: (-r2, -beta)}

    def vec(state):
        out = np.zeros(2 * (n_max + 1))
        for bit, (coef, amp) in state.items():
            out[bit * (n_max + 1) : (bit + 1) * (n_max + 1)] += coef * (amp_p if amp > 0 else amp_m)
        return out

    for left, right in ((phi_plus, phi_plus), (phi_minus, phi_minus), (phi_minus, phi_plus)):
        dense = vec(left) @ op.entries @ vec(right)
        assert dense == pytest.approx(_hom_bilinear_oracle(mu, beta, 0.3, left, right), abs=1e-10)


def test_fidelity_operators():
    n_max = 25
    fid, trash = fc.build_fidelity_ops(0.7, n_max)
    assert np.trace(trash.entries) == pytest.approx(n_max + 1)
    assert np.allclose(trash.entries @ trash.entries, trash.entries, atol=1e-14)
    evals = np.linalg.eigvalsh(fid.entries)
    assert np.allclose(evals[-2:], 1.0, atol=1e-10)
    assert np.allclose(evals[:-2], 0.0, atol=1e-10)
    amp_p, amp_m = coherent_amplitudes(0.7, n_max), coherent_amplitudes(-0.7, n_max)
    phi_plus = np.concatenate([amp_p, amp_m]) / math.sqrt(2)
    assert phi_plus @ fid.entries @ phi_plus == pytest.approx(1.0, abs=1e-10)


def test_hermite_basis_reproduces_coherent_wavefunction():
    x = np.linspace(-5.0, 5.0, 201)
    h = hermite_functions(40, x)
    for beta in (0.0, 0.5, 1.0, 1.5, 2.0):
        assert np.allclose(coherent_amplitudes(beta, 40) @ h, coherent_wavefunction(beta, x), atol=1e-8, rtol=0)


def test_operator_inequality_examples(ops30):
    for kind in ("hom", "het"):
        p = cs.ProtocolParams(kind, 0.04, BETA, 0.3)
        coeffs = db.coefficients(p)
        _, b_value, margin = fc.verify_operator_inequality(p, 0.0, 50.0, n_max=30, m_ph=ops30[kind], b_coeffs=coeffs)
        assert margin >= 0 and b_value >= 1
        for kappa in (0.1, 1.0, 10.0):
            for gamma in (0.1, 1.0, 10.0):
                _, _, margin = fc.verify_operator_inequality(p, kappa, gamma, n_max=30, m_ph=ops30[kind], b_coeffs=coeffs)
                assert margin >= -fc.TRUNCATION_ALLOWANCE
    with pytest.raises(ValueError):
        fc.verify_operator_inequality(p, -1.0, 0.0)


def test_fidelity_bound_paper_cases():
    vac = np.zeros((6, 6))
    vac[0, 0] = 1.0
    lhs, rhs = fc.verify_fidelity_bound(vac, 0.0, TestFunctionSpec(1, 0.412))
    assert lhs == pytest.approx(1.0, abs=1e-10) and rhs == pytest.approx(1.0, abs=1e-14)
    one = np.zeros((6, 6))
    one[1, 1] = 1.0
    lhs, rhs = fc.verify_fidelity_bound(one, 0.0, TestFunctionSpec(1, 0.412))
    assert lhs == pytest.approx(0.0, abs=1e-10) and rhs == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        fc.verify_fidelity_bound(2 * vac, 0.0, TestFunctionSpec())


@pytest.mark.slow
@pytest.mark.parametrize("m", [1, 3])
def test_fidelity_bound_on_random_states(m):
    rng = np.random.default_rng(100 + m)
    spec = TestFunctionSpec(m, 0.412)
    for _ in range(100):
        rho = fc.random_density_matrix(int(rng.integers(1, 9)), rng, rank=3)
        lhs, rhs = fc.verify_fidelity_bound(rho, 0.6, spec)
        assert lhs <= rhs + 1e-8


def test_random_density_matrix():
    rng = np.random.default_rng(0)
    rho = fc.random_density_matrix(5, rng, rank=2, n_max=9)
    evals = np.linalg.eigvalsh(rho.entries)
    assert rho.dim == 10
    assert np.trace(rho.entries).real == pytest.approx(1.0)
    assert np.sum(evals > 1e-12) == 2 and evals[0] > -1e-14
    with pytest.raises(ValueError):
        fc.random_density_matrix(9, rng)


def test_mc_report_slack():
    assert fc.McReport.from_counts(10**4, 100, 0.01).passed
    assert not fc.McReport.from_counts(10**4, 200, 0.01).passed
    assert fc.McReport.from_counts(10**4, 200, 0.01).rate == 0.02


def test_hypergeometric_trivial_cases():
    assert fc.mc_validate_hypergeometric(1000, 0, 100, 0.01, 1000, 1).violations == 0
    assert fc.mc_validate_hypergeometric(1000, 300, 1000, 0.01, 1000, 1).violations == 0
    with pytest.raises(ValueError):
        fc.mc_validate_hypergeometric(100, 200, 10, 0.01, 10, 1)


def test_hypergeometric_tail_bound():
    rep = fc.mc_validate_hypergeometric(10**4, 500, 10**3, 0.01, 10**5, 1)
    assert rep.passed, rep


def test_azuma_trivial_processes():
    det = fc.DeterministicProcess(np.linspace(-1, 1, 50))
    assert fc.mc_validate_azuma(det, 0.01, 1000, 2).violations == 0
    eps = math.exp(-4.5)
    assert fc.azuma_threshold(-np.ones(400), np.ones(400), eps) == pytest.approx(3 * math.sqrt(400))
    rep = fc.mc_validate_azuma(fc.CoinProcess(400), eps, 10**5, 3)
    assert rep.passed, rep


def test_azuma_round_and_adaptive_processes():
    proc = fc.RoundProcess(200, (0.8, 0.1, 0.1), 0.5, 0.2, 0.02, 0.3)
    assert np.all(proc.lower < 0) and np.all(proc.upper > 0)
    assert fc.mc_validate_azuma(proc, 0.01, 10**5, 4).passed
    assert fc.mc_validate_azuma(fc.AdaptiveCoinProcess(100), 0.01, 10**5, 5).passed


def test_round_process_mean_matches_simulation():
    proc = fc.RoundProcess(50, (0.8, 0.1, 0.1), 0.5, 0.2, 0.02, 0.3)
    inc, means = proc.simulate(np.random.default_rng(6), 20000)
    assert inc.mean() == pytest.approx(proc.conditional_mean(), abs=4 * inc.std() / math.sqrt(inc.size))


def test_azuma_rejects_out_of_bound_increments():
    class Liar(fc.CoinProcess):
        def simulate(self, rng, trials):
            inc, means = super().simulate(rng, trials)
            return 2 * inc, means

    with pytest.raises(ValueError):
        fc.mc_validate_azuma(Liar(10), 0.1, 100, 0)


def test_bernoulli_trash_cases():
    assert fc.mc_validate_bernoulli_trash(1e-12, 1000, 0.01, 1000, 7).violations == 0
    q = cs.trash_minus_prob(0.5)
    assert fc.mc_validate_bernoulli_trash(0.5, 10, q**10 / 2, 10**4, 8).violations == 0
    assert fc.mc_validate_bernoulli_trash(0.5, 10**4, 0.01, 10**5, 9).passed


def test_certification_records():
    rec = fc.CheckRecord("demo", -2e-7, 1e-6, True, "x")
    assert "status=PASS" in rec.line() and rec.line().startswith("check=demo")
    records = fc.certify_operator_grid(("hom",), settings=((0.04, 0.3),), grid=(1.0,), n_max=20)
    assert records and all(r.passed for r in records)
