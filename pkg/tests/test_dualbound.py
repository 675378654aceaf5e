import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binary_cvqkd import channelstats as cs
from binary_cvqkd import dualbound as db
from binary_cvqkd import fockcheck
from binary_cvqkd.mathkit import coherent_amplitudes

BETA = math.sqrt(0.004)
SCALARS = ("lambda_oo", "lambda_ee", "lambda_cross", "lambda_cross_alt", "sigma_oo", "sigma_eo",
           "sigma_eo_alt", "sigma_cross", "sigma_cross_alt", "sigma_ee", "sigma_ee_alt",
           "delta_oe", "delta_oe_alt", "delta_ee", "delta_ee_alt")


@pytest.fixture(scope="module")
def hom_coeffs():
    return db.coefficients_for("hom", 0.04, BETA, 0.3)


@pytest.fixture(scope="module")
def het_coeffs():
    return db.coefficients_for("het", 0.04, BETA, 0.3)


@pytest.fixture(scope="module")
def dense_ops():
    return {kind: fockcheck.phase_error_op_for(kind, 0.04, BETA, 0.3) for kind in ("hom", "het")}


def test_theta_properties():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=20) * 3
    for kind in ("hom", "het"):
        assert db.theta(0.04, 0.1, 0.0, kind) == 0.0
        assert np.allclose(db.theta(0.04, 0.1, xs, kind), -db.theta(0.04, 0.1, -xs, kind), atol=0)
        assert db.theta(0.09, 0.3, 50.0, kind) == pytest.approx(math.pi / 2, abs=1e-12)
        assert np.all(np.abs(db.theta(0.3, 0.2, xs, kind)) < math.pi / 2)
    with pytest.raises(ValueError):
        db.theta(0.04, 0.1, 1.0, "balanced")


def test_parity_weights_closed_form():
    c_odd, c_even = db.parity_weights(1.0)
    assert c_odd == pytest.approx(math.exp(-1) * math.sinh(1), rel=1e-14)
    assert c_even == pytest.approx(math.exp(-1) * math.cosh(1), rel=1e-14)
    for beta in (1e-3, 0.2, 1.0, 3.0):
        assert sum(db.parity_weights(beta)) == pytest.approx(1.0, abs=1e-12)


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        db.QuadratureConfig(fock_cutoff=5)
    with pytest.raises(ValueError):
        db.QuadratureConfig(rel_tol=0)
    fine = db.QuadratureConfig().refined()
    assert fine.fock_cutoff == 80 and fine.panel_width == 0.25


def test_coefficient_ranges(hom_coeffs, het_coeffs):
    for c in (hom_coeffs, het_coeffs):
        assert c.c_odd + c.c_even == pytest.approx(1.0, abs=1e-12)
        assert 0 <= c.lambda_oo <= 2 and 0 <= c.lambda_ee <= 2
        for name in ("sigma_oo", "sigma_eo", "sigma_eo_alt", "delta_oe", "delta_oe_alt", "delta_ee", "delta_ee_alt"):
            assert getattr(c, name) >= 0


def test_coefficients_vanish_for_far_threshold():
    for kind in ("hom", "het"):
        c = db.coefficients_for(kind, 0.04, BETA, 40.0)
        assert max(abs(getattr(c, k)) for k in SCALARS) < 1e-12


def test_coefficient_convergence_gate():
    for kind in ("hom", "het"):
        db.coefficients_for(kind, 0.04, BETA, 0.3, check_convergence=True)
    coarse = db.QuadratureConfig(domain_half_width=2.0)
    for kind in ("hom", "het"):
        with pytest.raises(db.ConvergenceError):
            db.coefficients_for(kind, 0.04, BETA, 0.3, coarse, check_convergence=True)


def test_coefficient_argument_validation():
    with pytest.raises(ValueError):
        db.coefficients_for("hom", 0.04, 0.0, 0.3)
    with pytest.raises(ValueError):
        db.coefficients_for("hom", 0.04, BETA, 0.3, method="spectral")


def _assert_scalars_close(got, ref, rel):
    for name in SCALARS:
        g, r = getattr(got, name), getattr(ref, name)
        assert abs(g - r) <= rel * max(abs(r), 1e-3), name


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_fock_route_matches_dense_oracle(kind, dense_ops):
    oracle = fockcheck.oracle_coefficients(dense_ops[kind], BETA)
    fock = db.coefficients_for(kind, 0.04, BETA, 0.3, method="fock")
    _assert_scalars_close(fock, oracle, 1e-6)
    assert fock.c_even == pytest.approx(oracle.c_even, abs=1e-12)


def test_heterodyne_position_route_matches_dense_oracle(het_coeffs, dense_ops):
    _assert_scalars_close(het_coeffs, fockcheck.oracle_coefficients(dense_ops["het"], BETA), 1e-6)


def test_homodyne_position_route_approaches_fock_route():
    # truncation error of the photon-number route shrinks as the cutoff grows
    pos = db.coefficients_for("hom", 0.04, BETA, 0.3)
    gaps = []
    for cutoff in (40, 80, 160):
        fock = db.coefficients_for("hom", 0.04, BETA, 0.3, db.QuadratureConfig(fock_cutoff=cutoff), method="fock")
        gaps.append(max(abs(getattr(fock, k) - getattr(pos, k)) for k in SCALARS))
    assert gaps[0] > gaps[1] > gaps[2]


def test_structural_pattern(hom_coeffs, het_coeffs):
    zero = db.DualCoefficients(0.4, 0.6, *([0.0] * 15))
    m0, m1 = db.assemble_matrices(zero, 0.0, 0.0, "hom")
    assert np.array_equal(m0.entries, np.diag([1.0, 1, 0, 0, 1, 1]))
    allowed = np.zeros((6, 6), bool)
    for i, j in [(0, 3), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5)]:
        allowed[i, j] = allowed[j, i] = True
    allowed[np.diag_indices(6)] = True
    for coeffs, kind in ((hom_coeffs, "hom"), (het_coeffs, "het")):
        for mat in db.assemble_matrices(coeffs, 0.7, 0.2, kind):
            assert np.all(mat.entries[~allowed] == 0.0)
            assert np.array_equal(mat.entries, mat.entries.T)


def test_diagonal_entry_and_linearity(het_coeffs):
    kappa, gamma = 1.3, 0.4
    m0, _ = db.assemble_matrices(het_coeffs, kappa, gamma, "het")
    assert m0.entries[3, 3] == pytest.approx(kappa * het_coeffs.c_even + het_coeffs.lambda_ee - gamma, rel=1e-14)
    mats = [np.stack([m.entries for m in db.assemble_matrices(het_coeffs, k, gamma, "het")]) for k in (0.0, 1.0, 2.0)]
    assert np.allclose(mats[1] - mats[0], mats[2] - mats[1], atol=1e-14)


def test_assemble_rejects_negative_multipliers(hom_coeffs):
    with pytest.raises(ValueError):
        db.assemble_matrices(hom_coeffs, -1.0, 0.0, "hom")
    with pytest.raises(ValueError):
        db.dual_bound(hom_coeffs, 0.0, -1.0, "hom")


def test_six_d_matrix_validation():
    with pytest.raises(ValueError):
        db.SixDMatrix(np.zeros((5, 5)))
    bad = np.zeros((6, 6))
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        db.SixDMatrix(bad)


def test_max_eigenvalue_known_spectra():
    assert db.max_eigenvalue(np.diag([3.0, 1, 0, -2, 0, 0])) == pytest.approx(3.0, abs=1e-14)
    flip = np.zeros((6, 6))
    flip[0, 1] = flip[1, 0] = 1.0
    assert db.max_eigenvalue(db.SixDMatrix(flip)) == pytest.approx(1.0, abs=1e-14)


def _shifted_power_oracle(a):
    # repeated squaring of the positive-shifted matrix isolates the top eigenvector
    shift = np.abs(a).sum()
    b = a + shift * np.eye(len(a))
    for _ in range(60):
        b = b @ b
        b /= np.abs(b).max()
    v = b[:, np.argmax(np.linalg.norm(b, axis=0))]
    v = v / np.linalg.norm(v)
    for _ in range(50):
        v = a @ v + shift * v
        v /= np.linalg.norm(v)
    return float(v @ a @ v)


def test_max_eigenvalue_against_power_oracle():
    rng = np.random.default_rng(42)
    for _ in range(50):
        a = rng.normal(size=(6, 6))
        a = (a + a.T) / 2
        assert db.max_eigenvalue(a) == pytest.approx(_shifted_power_oracle(a), abs=1e-10)


def test_bound_at_least_one(hom_coeffs, het_coeffs):
    rng = np.random.default_rng(1)
    for coeffs, kind in ((hom_coeffs, "hom"), (het_coeffs, "het")):
        for k, g in 10 ** rng.uniform(-3, 3, size=(30, 2)):
            assert db.dual_bound(coeffs, k, g, kind) >= 1 - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 50), st.floats(0, 50), st.sampled_from(["hom", "het"]))
def test_bound_convex(k1, g1, k2, g2, kind):
    coeffs = db.coefficients_for(kind, 0.04, BETA, 0.3)
    ev = db.BoundEvaluator(coeffs, kind)
    mid = ev((k1 + k2) / 2, (g1 + g2) / 2)
    assert mid <= (ev(k1, g1) + ev(k2, g2)) / 2 + 1e-11 * (1 + k1 + k2 + g1 + g2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100), st.sampled_from(["hom", "het"]))
def test_bound_non_increasing_in_gamma(k, g1, g2, kind):
    coeffs = db.coefficients_for(kind, 0.04, BETA, 0.3)
    lo, hi = sorted((g1, g2))
    assert db.dual_bound(coeffs, k, hi, kind) <= db.dual_bound(coeffs, k, lo, kind) + 1e-12 * (1 + k)


def test_evaluator_many_matches_single(het_coeffs):
    ev = db.BoundEvaluator(het_coeffs, "het")
    ks, gs = np.geomspace(1e-3, 1e3, 17), np.geomspace(1e-4, 1e2, 17)
    assert np.allclose(ev.many(ks, gs), [ev(k, g) for k, g in zip(ks, gs)], rtol=0, atol=1e-12)


def test_homodyne_example_bounds_dense_operator(hom_coeffs, dense_ops):
    p = cs.ProtocolParams("hom", 0.04, BETA, 0.3)
    lhs, b_value, margin = fockcheck.verify_operator_inequality(p, 1.0, 0.1, m_ph=dense_ops["hom"], b_coeffs=hom_coeffs)
    assert b_value >= lhs - 1e-4
    assert margin == pytest.approx(b_value - lhs)


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_bound_tight_when_fidelity_term_dominates(kind, dense_ops):
    coeffs = db.coefficients_for(kind, 0.04, BETA, 0.3, method="fock")
    p = cs.ProtocolParams(kind, 0.04, BETA, 0.3)
    lhs, b_value, _ = fockcheck.verify_operator_inequality(p, 10.0, 1.0, m_ph=dense_ops[kind], b_coeffs=coeffs)
    assert 0 <= b_value - lhs <= 1e-4


def _sector_frame(m, q_odd, q_even, n_max):
    amp = coherent_amplitudes(BETA, n_max)
    odd = (np.arange(n_max + 1) % 2).astype(float)
    even = 1.0 - odd

    def unit(v):
        return v / np.linalg.norm(v)

    e2 = unit(np.kron(q_odd, amp * odd))
    e3 = unit(np.kron(q_even, amp * even))
    p_odd = np.kron(np.outer(q_odd, q_odd), np.diag(odd))
    p_even = np.kron(np.outer(q_even, q_even), np.diag(even))
    e1 = unit(p_odd @ m @ e2 - (e2 @ m @ e2) * e2)
    e4 = unit(p_even @ m @ e2 - (e3 @ m @ e2) * e3)
    f5 = p_odd @ m @ e3
    f5 = unit(f5 - (e2 @ f5) * e2 - (e1 @ f5) * e1)
    f6 = p_even @ m @ e3
    f6 = unit(f6 - (e3 @ f6) * e3 - (e4 @ f6) * e4)
    return np.stack([f5, e1, e2, e3, e4, f6], axis=1)


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_sector_matrices_are_relaxed_compressions(kind, dense_ops):
    # every entry not replaced by the relaxation equals the exact compression
    n_max = 40
    m = dense_ops[kind].entries
    pi_fid, pi_trash = fockcheck.build_fidelity_ops(BETA, n_max)
    kappa, gamma = 1.0, 0.1
    total = m + kappa * pi_fid.entries - gamma * pi_trash.entries
    coeffs = db.coefficients_for(kind, 0.04, BETA, 0.3, method="fock")
    plus, minus = np.array([1.0, 1.0]) / math.sqrt(2), np.array([1.0, -1.0]) / math.sqrt(2)
    kept = [(2, 2), (3, 3), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (0, 3), (3, 5), (0, 2), (2, 5)]
    for mat, (q_odd, q_even) in zip(db.assemble_matrices(coeffs, kappa, gamma, kind), ((plus, minus), (minus, plus))):
        frame = _sector_frame(m, q_odd, q_even, n_max)
        exact = frame.T @ total @ frame
        for i, j in kept:
            assert mat.entries[i, j] == pytest.approx(exact[i, j], abs=1e-8), (i, j)
        assert np.linalg.eigvalsh(mat.entries)[-1] >= np.linalg.eigvalsh(exact)[-1] - 1e-10


@pytest.mark.parametrize("kind", ["hom", "het"])
def test_operator_inequality_on_log_grid(kind, dense_ops):
    p = cs.ProtocolParams(kind, 0.04, BETA, 0.3)
    coeffs = db.coefficients(p)
    for kappa in np.geomspace(1e-2, 1e3, 6):
        for gamma in np.geomspace(1e-2, 1e2, 5):
            lhs, b_value, _ = fockcheck.verify_operator_inequality(
                p, kappa, gamma, m_ph=dense_ops[kind], b_coeffs=coeffs
            )
            assert lhs <= b_value + 1e-6 + fockcheck.TRUNCATION_ALLOWANCE
