"""Special functions, entropies and quadrature helpers shared by the engine.

All entropies and divergences use base-2 logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class TestFunctionSpec:
    """Parameters (m, r) of the fidelity test function.

    m must be odd and positive, r strictly positive.
    """

    m: int = 1
    r: float = 0.4120

    __test__ = False  # not a pytest class despite the name

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1 or self.m % 2 == 0:
            raise ValueError(f"m must be a positive odd integer, got {self.m!r}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"r must be a positive finite real, got {self.r!r}")


@dataclass(frozen=True)
class LambdaRange:
    max_val: float
    min_val: float
    argmax: float
    argmin: float

    def __post_init__(self):
        if self.max_val < self.min_val:
            raise ValueError("max_val must not be below min_val")


def laguerre_assoc(n: int, k: int, x):
    """Associated Laguerre polynomial L_n^{(k)}(x) by three-term recurrence.

    Accepts scalar or array ``x``.
    """
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + k - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 + k - x) * cur - (j + k) * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


def laguerre_coefficients(n: int, k: int) -> np.ndarray:
    """Power-series coefficients (ascending) of L_n^{(k)}."""
    return np.array(
        [(-1) ** j * math.comb(n + k, n - j) / math.factorial(j) for j in range(n + 1)],
        dtype=float,
    )


def lambda_test(spec: TestFunctionSpec, nu):
    """Test function e^{-r nu} (1+r) L_m^{(1)}((1+r) nu) for nu >= 0."""
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0):
        raise ValueError("nu must be non-negative")
    r = spec.r
    out = np.exp(-r * nu_arr) * (1.0 + r) * laguerre_assoc(spec.m, 1, (1.0 + r) * nu_arr)
    return out if np.ndim(out) else float(out)


def lambda_range(spec: TestFunctionSpec) -> LambdaRange:
    """Global maximum and minimum of the test function over nu >= 0.

    The derivative is e^{-r nu} times a degree-m polynomial, so the extrema
    are among its real non-negative roots, the endpoint nu = 0, and the
    limit value 0 at infinity.
    """
    m, r = spec.m, spec.r
    s = 1.0 + r
    # d/dnu [e^{-r nu} L(s nu)] = e^{-r nu} [-r L(s nu) + s L'(s nu)]
    lag = laguerre_coefficients(m, 1) * s ** np.arange(m + 1)
    dlag = npoly.polyder(laguerre_coefficients(m, 1)) * s ** np.arange(m) * s
    poly = npoly.polyadd(-r * lag, dlag)
    candidates = [0.0]
    for root in npoly.polyroots(poly):
        if abs(root.imag) <= 1e-9 * max(1.0, abs(root.real)) and root.real > 0:
            candidates.append(_polish_root(poly, root.real))
    nus = np.array(candidates)
    vals = np.atleast_1d(lambda_test(spec, nus))
    i_max = int(np.argmax(vals))
    i_min = int(np.argmin(vals))
    max_val, argmax = float(vals[i_max]), float(nus[i_max])
    min_val, argmin = float(vals[i_min]), float(nus[i_min])
    # Supremum/infimum may be the vanishing tail.
    if max_val < 0.0:
        max_val, argmax = 0.0, math.inf
    if min_val > 0.0:
        min_val, argmin = 0.0, math.inf
    return LambdaRange(max_val, min_val, argmax, argmin)


def _polish_root(coeffs: np.ndarray, x: float) -> float:
    d = npoly.polyder(coeffs)
    for _ in range(4):
        fx = npoly.polyval(x, coeffs)
        dx = npoly.polyval(x, d)
        if dx == 0.0:
            break
        x -= fx / dx
    return x


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def kl_divergence(x: float, y: float) -> float:
    """Binary KL divergence D(x||y) in bits; x in [0,1], y in (0,1)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    if not 0.0 < y < 1.0:
        raise ValueError(f"y must lie in (0, 1), got {y!r}")
    out = 0.0
    if x > 0.0:
        # x log(x/y) written via log1p to keep accuracy when y is close to x
        out -= x * math.log1p((y - x) / x)
    if x < 1.0:
        step = (x - y) / (1.0 - x)
        # log1p loses the argument to rounding once y sits within an ulp of 1
        if step > -0.5:
            out -= (1.0 - x) * math.log1p(step)
        else:
            out += (1.0 - x) * (math.log(1.0 - x) - math.log(1.0 - y))
    return max(out, 0.0) / math.log(2.0)


def inv_kl_upper(x: float, target: float) -> float:
    """Largest y in [x, 1) with D(x||y) <= target, by bisection.

    The returned value is the upper end of the final bracket, so it never
    underestimates the exact root. Returns 1.0 when the root is closer to 1
    than the bracket resolution.
    """
    if not 0.0 <= x < 1.0:
        raise ValueError(f"x must lie in [0, 1), got {x!r}")
    if target < 0 or math.isnan(target):
        raise ValueError(f"target must be non-negative, got {target!r}")
    if target == 0.0:
        return x
    if x == 0.0:
        # closed form D(0||y) = -log2(1-y)
        return -math.expm1(-target * math.log(2.0))
    lo, hi = x, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mid >= 1.0 or kl_divergence(x, mid) > target:
            hi = mid
        else:
            lo = mid
    return hi


def inv_kl_first_upper(y: float, target: float) -> float:
    """Largest x in [y, 1] with D(x||y) <= target, by bisection.

    Returns 1.0 when even D(1||y) = -log2(y) does not exceed the target.
    """
    if not 0.0 < y < 1.0:
        raise ValueError(f"y must lie in (0, 1), got {y!r}")
    if target < 0 or math.isnan(target):
        raise ValueError(f"target must be non-negative, got {target!r}")
    if target == 0.0:
        return y
    if kl_divergence(1.0, y) <= target:
        return 1.0
    lo, hi = y, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_divergence(mid, y) > target:
            hi = mid
        else:
            lo = mid
    return hi


def erfc(x: float) -> float:
    """Complementary error function (libm)."""
    return math.erfc(x)


# ---------------------------------------------------------------------------
# Quadrature and oscillator-basis helpers


def gauss_legendre_panels(breaks, order: int = 24):
    """Composite Gauss-Legendre nodes and weights over consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) < 0):
        raise ValueError("breaks must be a non-decreasing 1-D sequence")
    xg, wg = leggauss(order)
    a = breaks[:-1][:, None]
    b = breaks[1:][:, None]
    nodes = 0.5 * (b - a) * xg[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wg[None, :]
    return nodes.ravel(), weights.ravel()


def uniform_breaks(lo: float, hi: float, width: float, extra=()) -> np.ndarray:
    """Panel breakpoints of roughly ``width`` on [lo, hi], forced through ``extra``."""
    pts = set(np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / width)) + 1)).tolist())
    pts.update(float(e) for e in extra if lo < e < hi)
    return np.array(sorted(pts))


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Position wavefunctions <x|n> for n = 0..n_max, shape (n_max+1, len(x)).

    Quadrature x has vacuum variance 1/4, so <x|0> = (2/pi)^{1/4} e^{-x^2}.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = math.sqrt(2.0) * x
    out = np.empty((n_max + 1, x.size))
    out[0] = (2.0 / math.pi) ** 0.25 * np.exp(-x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * q * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def coherent_amplitudes(alpha: float, n_max: int) -> np.ndarray:
    """Fock amplitudes <n|alpha> for real alpha, n = 0..n_max."""
    n = np.arange(n_max + 1)
    log_fact = np.array([math.lgamma(k + 1.0) for k in n])
    if alpha == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    mag = np.exp(-0.5 * alpha * alpha + n * math.log(abs(alpha)) - 0.5 * log_fact)
    return mag * np.sign(alpha) ** n


def coherent_wavefunction(alpha: float, x):
    """<x|alpha> for real alpha."""
    x = np.asarray(x, dtype=float)
    return (2.0 / math.pi) ** 0.25 * np.exp(-((x - alpha) ** 2))
