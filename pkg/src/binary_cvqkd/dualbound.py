"""Dual bound B(kappa, gamma) on the phase-error operator.

The combined operator ``M_ph + kappa*Pi_fid - gamma*Pi_trash`` is bounded by
the larger top eigenvalue of two 6x6 matrices, one per parity sector
pairing. Their entries are kappa/gamma-independent scalars
(:class:`DualCoefficients`) obtained from the vectors ``M_X|beta>`` where
``M_X`` runs over the parity blocks of the phase-error operator.

Two evaluation routes are provided:

``position``
    Blocks act on wavefunctions directly: step-function multipliers for the
    homodyne receiver; multipliers plus a translation by beta and its adjoint
    for the heterodyne receiver. No photon-number cutoff is involved, so the
    scalars are those of the untruncated operator.
``fock``
    Blocks are assembled as (n_max+1)-square matrices in the photon-number
    basis and the same scalars follow by matrix-vector algebra. Products
    such as ``||M_oo beta||^2`` converge slowly in n_max because the
    acceptance step makes the block kernels discontinuous, so this route is
    meant for cross-checking against dense truncated operators at equal
    cutoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import erfc

from . import kernels
from .channelstats import HOMODYNE, ProtocolParams, normalize_kind
from .mathkit import (
    coherent_amplitudes,
    coherent_wavefunction,
    gauss_legendre_panels,
    hermite_functions,
    uniform_breaks,
)

SQRT_ARG_FLOOR = -1e-10


class ConvergenceError(RuntimeError):
    """Raised when refining the quadrature moves a coefficient past rel_tol."""


class NumericalError(ArithmeticError):
    """Raised for square-root arguments that are negative beyond round-off."""


@dataclass(frozen=True)
class QuadratureConfig:
    fock_cutoff: int = 40
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    domain_half_width: float = 6.5
    panel_width: float = 0.5
    panel_order: int = 20

    def __post_init__(self):
        if self.fock_cutoff < 10:
            raise ValueError("fock_cutoff must be at least 10")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (self.domain_half_width > 0 and self.panel_width > 0):
            raise ValueError("domain and panel widths must be positive")
        if self.panel_order < 4:
            raise ValueError("panel_order must be at least 4")

    def refined(self) -> "QuadratureConfig":
        return QuadratureConfig(
            fock_cutoff=2 * self.fock_cutoff,
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            domain_half_width=self.domain_half_width + 1.0,
            panel_width=self.panel_width / 2,
            panel_order=self.panel_order,
        )


@dataclass(frozen=True)
class DualCoefficients:
    c_odd: float
    c_even: float
    lambda_oo: float
    lambda_ee: float
    lambda_cross: float
    lambda_cross_alt: float
    sigma_oo: float
    sigma_eo: float
    sigma_eo_alt: float
    sigma_cross: float
    sigma_cross_alt: float
    sigma_ee: float
    sigma_ee_alt: float
    delta_oe: float
    delta_oe_alt: float
    delta_ee: float
    delta_ee_alt: float

    def __post_init__(self):
        if abs(self.c_odd + self.c_even - 1.0) > 1e-12:
            raise ValueError("c_odd + c_even must equal 1")
        for name in ("sigma_oo", "sigma_eo", "sigma_eo_alt", "delta_oe", "delta_oe_alt", "delta_ee", "delta_ee_alt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SixDMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (6, 6):
            raise ValueError("SixDMatrix needs a 6x6 array")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12):
            raise ValueError("SixDMatrix must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)


def theta(mu: float, beta: float, x, kind: str):
    """Rotation angle of the receiver's virtual qubit at outcome x."""
    kind = normalize_kind(kind)
    slope = 4.0 * beta if kind == HOMODYNE else 2.0 * beta
    out = np.arctan(np.exp(-2.0 * (mu - beta * beta)) * np.sinh(slope * np.asarray(x, dtype=float)))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Coefficient extraction shared by both routes


def _safe_sqrt(arg: float, name: str) -> float:
    if arg >= 0:
        return math.sqrt(arg)
    if arg >= SQRT_ARG_FLOOR:
        return 0.0
    raise NumericalError(f"negative square-root argument {arg:.3e} for {name}")


def _ratio(num: float, den: float) -> float:
    # A vanishing normaliser means the Gram-Schmidt direction does not exist.
    return num / den if den > 1e-13 else 0.0


def _sector_scalars(c_odd, c_even, dot, psi_o, psi_e, a, b, c, d):
    """Matrix scalars for one sector pairing.

    a = M_oo psi_o, b = M_ee psi_e, c = M_(o<-e) psi_e, d = M_(e<-o) psi_o
    with M_(e<-o) the adjoint of M_(o<-e).
    """
    root = math.sqrt(c_odd * c_even)
    lam_oo = dot(psi_o, a) / c_odd
    lam_ee = dot(psi_e, b) / c_even
    lam_x = dot(psi_o, c) / root
    sig_oo = _safe_sqrt(dot(a, a) / c_odd - lam_oo**2, "sigma_oo")
    sig_eo = _safe_sqrt(dot(d, d) / c_odd - lam_x**2, "sigma_eo")
    sig_x = _ratio(dot(a, c) / root - lam_oo * lam_x, sig_oo)
    sig_ee = _ratio(dot(d, b) / root - lam_x * lam_ee, sig_eo)
    del_oe = _safe_sqrt(dot(c, c) / c_even - lam_x**2 - sig_x**2, "delta_oe")
    del_ee = _safe_sqrt(dot(b, b) / c_even - lam_ee**2 - sig_ee**2, "delta_ee")
    return dict(
        lambda_oo=lam_oo, lambda_ee=lam_ee, lambda_x=lam_x, sigma_oo=sig_oo,
        sigma_eo=sig_eo, sigma_x=sig_x, sigma_ee=sig_ee, delta_oe=del_oe, delta_ee=del_ee,
    )


def _pack(c_odd, c_even, s0, s1) -> DualCoefficients:
    return DualCoefficients(
        c_odd=c_odd,
        c_even=c_even,
        lambda_oo=s0["lambda_oo"],
        lambda_ee=s0["lambda_ee"],
        lambda_cross=s0["lambda_x"],
        lambda_cross_alt=s1["lambda_x"],
        sigma_oo=s0["sigma_oo"],
        sigma_eo=s0["sigma_eo"],
        sigma_eo_alt=s1["sigma_eo"],
        sigma_cross=s0["sigma_x"],
        sigma_cross_alt=s1["sigma_x"],
        sigma_ee=s0["sigma_ee"],
        sigma_ee_alt=s1["sigma_ee"],
        delta_oe=s0["delta_oe"],
        delta_oe_alt=s1["delta_oe"],
        delta_ee=s0["delta_ee"],
        delta_ee_alt=s1["delta_ee"],
    )


def parity_weights(beta: float) -> tuple[float, float]:
    """Odd and even photon-number weights of |beta>."""
    b2 = beta * beta
    c_odd = -0.5 * math.expm1(-2.0 * b2)
    return c_odd, 1.0 - c_odd


# Signs of (S multiplier, translation T, adjoint T^dagger) in each heterodyne
# block, and of the hom weight (1 +/- cos or +/- sin).
_BLOCKS = {
    # name: (output parity, input parity, het (diag, s_sin, t, t_dag), hom weight)
    "a": (-1, "o", (1, 0, 1, 1), "1+cos"),
    "b": (1, "e", (1, 0, -1, -1), "1-cos"),
    "c0": (-1, "e", (0, 1, -1, 1), "+sin"),
    "d0": (1, "o", (0, 1, 1, -1), "+sin"),
    "c1": (-1, "e", (0, -1, -1, 1), "-sin"),
    "d1": (1, "o", (0, -1, 1, -1), "-sin"),
}


def _hom_weight(label: str, th):
    return {"1+cos": 1 + np.cos(th), "1-cos": 1 - np.cos(th), "+sin": np.sin(th), "-sin": -np.sin(th)}[label]


class _HetKernels:
    """Gaussian smoothings of the heterodyne acceptance region.

    ``diag(z)``: accepted-weight multiplier; ``sin_part(z)``: multiplier
    carrying sin(theta); ``shift(z)``: kernel of the translation term.
    """

    def __init__(self, mu, beta, x_th, qc: QuadratureConfig, reach: float):
        self.mu, self.beta, self.x_th = mu, beta, x_th
        top = x_th + max(reach, 0.0) + qc.domain_half_width
        breaks = uniform_breaks(x_th, top, qc.panel_width)
        self.w_nodes, self.w_weights = gauss_legendre_panels(breaks, qc.panel_order)
        th = theta(mu, beta, self.w_nodes, "het")
        self.sin_w = np.sin(th) * self.w_weights
        self.cos_w = np.cos(th) * self.w_weights
        self.norm = math.sqrt(2.0 / math.pi)

    def diag(self, z):
        return 0.5 * erfc(math.sqrt(2.0) * (self.x_th - z))

    def sin_part(self, z):
        g = np.exp(-2.0 * (z[:, None] - self.w_nodes[None, :]) ** 2)
        return self.norm * g @ self.sin_w

    def shift(self, z):
        centre = z - 0.5 * self.beta
        g = np.exp(-2.0 * (centre[:, None] - self.w_nodes[None, :]) ** 2)
        return 0.5 * self.norm * math.exp(-0.5 * self.beta**2) * (g @ self.cos_w)


def _position_route(kind, mu, beta, x_th, qc: QuadratureConfig) -> DualCoefficients:
    c_odd, c_even = parity_weights(beta)
    if kind == HOMODYNE:
        half = max(x_th, beta) + qc.domain_half_width
    else:
        half = 2.0 * beta + qc.domain_half_width
    breaks = uniform_breaks(-half, half, qc.panel_width, extra=(-x_th, 0.0, x_th))
    y, wy = gauss_legendre_panels(breaks, qc.panel_order)

    def psi(par, z):
        g_plus = coherent_wavefunction(beta, z)
        g_minus = coherent_wavefunction(-beta, z)
        return 0.5 * (g_plus - g_minus) if par == "o" else 0.5 * (g_plus + g_minus)

    neg_y = -y
    if kind == HOMODYNE:
        def inner(par, weight, z):
            th = theta(mu, beta, z, kind)
            return np.where(z >= x_th, _hom_weight(weight, th), 0.0) * psi(par, z)
    else:
        het = _HetKernels(mu, beta, x_th, qc, reach=half + beta)
        tables = {}
        for sign, z in ((1.0, y), (-1.0, neg_y)):
            tables[sign] = dict(
                diag=het.diag(z), sin=het.sin_part(z), t=het.shift(z), td=het.shift(z + beta),
            )

        def inner(par, signs, z):
            tab = tables[1.0] if z is y else tables[-1.0]
            d, s, t, td = signs
            here = psi(par, z)
            out = (d * tab["diag"] + s * tab["sin"]) * here
            if t:
                out = out + t * tab["t"] * psi(par, z - beta)
            if td:
                out = out + td * tab["td"] * psi(par, z + beta)
            return out

    vecs = {}
    for name, (out_par, in_par, het_signs, hom_w) in _BLOCKS.items():
        spec = hom_w if kind == HOMODYNE else het_signs
        vecs[name] = 0.5 * (inner(in_par, spec, y) + out_par * inner(in_par, spec, neg_y))

    def dot(u, v):
        return float(np.sum(wy * u * v))

    psi_o, psi_e = psi("o", y), psi("e", y)
    s0 = _sector_scalars(c_odd, c_even, dot, psi_o, psi_e, vecs["a"], vecs["b"], vecs["c0"], vecs["d0"])
    s1 = _sector_scalars(c_odd, c_even, dot, psi_o, psi_e, vecs["a"], vecs["b"], vecs["c1"], vecs["d1"])
    return _pack(c_odd, c_even, s0, s1)


def fock_blocks(kind, mu, beta, x_th, qc: QuadratureConfig) -> dict[str, np.ndarray]:
    """Parity blocks of the phase-error operator in the truncated Fock basis.

    Keys: ``oo``, ``ee``, ``oe`` (odd <- even, + sector pairing) and
    ``oe_alt`` (odd <- even, - sector pairing). Each is (n+1)x(n+1).
    """
    kind = normalize_kind(kind)
    n_max = qc.fock_cutoff
    odd = (np.arange(n_max + 1) % 2).astype(bool)
    p_od = np.diag(odd.astype(float))
    p_ev = np.diag((~odd).astype(float))
    reach = math.sqrt(2.0 * n_max + 1.0)
    if kind == HOMODYNE:
        breaks = uniform_breaks(x_th, x_th + reach + qc.domain_half_width, qc.panel_width)
        y, wy = gauss_legendre_panels(breaks, qc.panel_order)
        th = theta(mu, beta, y, kind)
        h = hermite_functions(n_max, y)

        def gram(weight):
            return (h * (wy * weight)) @ h.T

        sin_block = gram(np.sin(th))
        return {
            "oo": p_od @ gram(1 + np.cos(th)) @ p_od,
            "ee": p_ev @ gram(1 - np.cos(th)) @ p_ev,
            "oe": p_od @ sin_block @ p_ev,
            "oe_alt": -(p_od @ sin_block @ p_ev),
        }
    half = reach + beta + qc.domain_half_width
    breaks = uniform_breaks(-half, half, qc.panel_width)
    y, wy = gauss_legendre_panels(breaks, qc.panel_order)
    het = _HetKernels(mu, beta, x_th, qc, reach=half)
    h = hermite_functions(n_max, y)
    h_shift = hermite_functions(n_max, y - beta)
    diag = (h * (wy * het.diag(y))) @ h.T
    sin_part = (h * (wy * het.sin_part(y))) @ h.T
    tr = (h * (wy * het.shift(y))) @ h_shift.T
    return {
        "oo": p_od @ (diag + tr + tr.T) @ p_od,
        "ee": p_ev @ (diag - tr - tr.T) @ p_ev,
        "oe": p_od @ (sin_part - tr + tr.T) @ p_ev,
        "oe_alt": p_od @ (-sin_part - tr + tr.T) @ p_ev,
    }


def _fock_route(kind, mu, beta, x_th, qc: QuadratureConfig) -> DualCoefficients:
    blocks = fock_blocks(kind, mu, beta, x_th, qc)
    n_max = qc.fock_cutoff
    amp = coherent_amplitudes(beta, n_max)
    odd = np.arange(n_max + 1) % 2 == 1
    psi_o = np.where(odd, amp, 0.0)
    psi_e = np.where(odd, 0.0, amp)
    c_odd, c_even = parity_weights(beta)

    def dot(u, v):
        return float(u @ v)

    a = blocks["oo"] @ psi_o
    b = blocks["ee"] @ psi_e
    s0 = _sector_scalars(c_odd, c_even, dot, psi_o, psi_e, a, b, blocks["oe"] @ psi_e, blocks["oe"].T @ psi_o)
    s1 = _sector_scalars(
        c_odd, c_even, dot, psi_o, psi_e, a, b, blocks["oe_alt"] @ psi_e, blocks["oe_alt"].T @ psi_o
    )
    return _pack(c_odd, c_even, s0, s1)


_ROUTES = {"position": _position_route, "fock": _fock_route}


def coefficients_for(
    kind: str,
    mu: float,
    beta: float,
    x_th: float,
    qc: QuadratureConfig | None = None,
    method: str = "position",
    check_convergence: bool = False,
) -> DualCoefficients:
    """Coefficients for explicit (kind, mu, beta, x_th)."""
    kind = normalize_kind(kind)
    qc = qc or QuadratureConfig()
    if not beta > 0:
        raise ValueError("coefficients need beta > 0 (both parity sectors populated)")
    if not mu > 0 or not x_th >= 0:
        raise ValueError("mu must be positive and x_th non-negative")
    try:
        route = _ROUTES[method]
    except KeyError:
        raise ValueError(f"unknown coefficient route {method!r}") from None
    out = route(kind, mu, beta, x_th, qc)
    if check_convergence:
        fine = route(kind, mu, beta, x_th, qc.refined())
        for key, val in out.as_dict().items():
            ref = getattr(fine, key)
            if abs(val - ref) > qc.rel_tol * max(abs(ref), 1.0):
                raise ConvergenceError(f"{key} moved from {val!r} to {ref!r} under refinement")
    return out


def coefficients(
    params: ProtocolParams,
    qc: QuadratureConfig | None = None,
    method: str = "position",
    check_convergence: bool = False,
) -> DualCoefficients:
    """Coefficients for a protocol configuration; independent of kappa and gamma."""
    return coefficients_for(
        params.protocol_kind, params.mu, params.beta, params.x_th, qc, method, check_convergence
    )


# ---------------------------------------------------------------------------
# 6x6 matrices


def bound_stack(coeffs: DualCoefficients, kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split both matrices as base + kappa*K - gamma*G; arrays of shape (2,6,6)."""
    kind = normalize_kind(kind)
    c = coeffs
    root = math.sqrt(c.c_odd * c.c_even)
    if kind == HOMODYNE:
        lam1, sx1, sig_eo1, see1 = -c.lambda_cross, -c.sigma_cross, c.sigma_eo, -c.sigma_ee
        doe1, dee1 = c.delta_oe, c.delta_ee
    else:
        lam1, sx1, sig_eo1, see1 = c.lambda_cross_alt, c.sigma_cross_alt, c.sigma_eo_alt, c.sigma_ee_alt
        doe1, dee1 = c.delta_oe_alt, c.delta_ee_alt
    rows = (
        (c.lambda_cross, c.sigma_cross, c.sigma_eo, c.sigma_ee, c.delta_oe, c.delta_ee),
        (lam1, sx1, sig_eo1, see1, doe1, dee1),
    )
    base = np.zeros((2, 6, 6))
    for s, (lam_x, sig_x, sig_eo, sig_ee, del_oe, del_ee) in enumerate(rows):
        m = base[s]
        m[0, 0] = m[1, 1] = m[4, 4] = m[5, 5] = 1.0
        m[2, 2] = c.lambda_oo
        m[3, 3] = c.lambda_ee
        m[0, 3] = m[3, 0] = del_oe
        m[1, 2] = m[2, 1] = c.sigma_oo
        m[1, 3] = m[3, 1] = sig_x
        m[2, 3] = m[3, 2] = lam_x
        m[2, 4] = m[4, 2] = sig_eo
        m[3, 4] = m[4, 3] = sig_ee
        m[3, 5] = m[5, 3] = del_ee
    kdir = np.zeros((2, 6, 6))
    kdir[:, 2, 2] = c.c_odd
    kdir[:, 3, 3] = c.c_even
    kdir[:, 2, 3] = kdir[:, 3, 2] = root
    gdir = np.zeros((2, 6, 6))
    gdir[0, [3, 4, 5], [3, 4, 5]] = 1.0
    gdir[1, [0, 1, 2], [0, 1, 2]] = 1.0
    return base, kdir, gdir


def assemble_matrices(
    coeffs: DualCoefficients, kappa: float, gamma: float, kind: str
) -> tuple[SixDMatrix, SixDMatrix]:
    if kappa < 0 or gamma < 0:
        raise ValueError("kappa and gamma must be non-negative")
    base, kdir, gdir = bound_stack(coeffs, kind)
    mats = base + kappa * kdir - gamma * gdir
    return SixDMatrix(mats[0]), SixDMatrix(mats[1])


def max_eigenvalue(mat: SixDMatrix | np.ndarray) -> float:
    entries = mat.entries if isinstance(mat, SixDMatrix) else np.asarray(mat, dtype=float)
    return float(kernels.max_eigenvalue(entries))


class BoundEvaluator:
    """Fast repeated evaluation of B(kappa, gamma) for fixed coefficients."""

    def __init__(self, coeffs: DualCoefficients, kind: str):
        self.coeffs = coeffs
        self.kind = normalize_kind(kind)
        self.base, self.kdir, self.gdir = bound_stack(coeffs, kind)

    def __call__(self, kappa: float, gamma: float) -> float:
        return float(kernels.bound_pairs(self.base, self.kdir, self.gdir, [kappa], [gamma])[0])

    def many(self, kappas, gammas) -> np.ndarray:
        return kernels.bound_pairs(self.base, self.kdir, self.gdir, kappas, gammas)


def dual_bound(coeffs: DualCoefficients, kappa: float, gamma: float, kind: str) -> float:
    """B(kappa, gamma): the larger top eigenvalue of the two sector matrices."""
    if kappa < 0 or gamma < 0:
        raise ValueError("kappa and gamma must be non-negative")
    return BoundEvaluator(coeffs, kind)(kappa, gamma)
