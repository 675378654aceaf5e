"""Parameter search for the key rate.

The inner problem minimises the phase-error bound over the dual variables
(kappa, gamma); the outer problem maximises the key rate over the source and
receiver settings. Both use a deterministic Nelder-Mead simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import channelstats as cs
from . import dualbound as db
from . import finitesize as fs
from .mathkit import TestFunctionSpec, lambda_range

KAPPA_RANGE = (1e-4, 1e4)
# small gamma matters at long distance, where its optimum scales with eta
GAMMA_RANGE = (1e-12, 1e4)
# p_test = p_trash = ASYMPTOTIC_P_AUX in the N -> infinity limit
ASYMPTOTIC_P_AUX = 1e-12
PENALTY = 1e6


@dataclass(frozen=True)
class NMResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool


def nelder_mead(
    fn,
    x0,
    step,
    *,
    reflection: float = 1.0,
    expansion: float = 2.0,
    contraction: float = 0.5,
    shrink: float = 0.5,
    xtol: float = 1e-5,
    max_evals: int = 1000,
) -> NMResult:
    """Minimise ``fn`` from ``x0`` with an axis-aligned initial simplex.

    Converged when every vertex lies within ``xtol`` of the best one.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    pts = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += steps[i]
        pts.append(v)
    simplex = np.array(pts)
    fvals = np.array([fn(v) for v in simplex], dtype=float)
    evals = n + 1
    converged = False

    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) < xtol:
            converged = True
            break
        if evals >= max_evals:
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + reflection * (centroid - worst)
        fr = fn(xr)
        evals += 1
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[0]:
            xe = centroid + expansion * (xr - centroid)
            fe = fn(xe)
            evals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + contraction * (xr - centroid)
            fc = fn(xc)
            evals += 1
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + contraction * (worst - centroid)
            fc = fn(xc)
            evals += 1
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + shrink * (simplex[1:] - simplex[0])
        for i in range(1, n + 1):
            fvals[i] = fn(simplex[i])
        evals += n

    best = int(np.argmin(fvals))
    return NMResult(simplex[best].copy(), float(fvals[best]), evals, converged)


# ---------------------------------------------------------------------------
# inner problem


@dataclass(frozen=True)
class InnerResult:
    kappa: float
    gamma: float
    u_value: float
    b_value: float
    converged: bool


class _LogBox:
    """Map between (kappa, gamma) and log coordinates of the free axes.

    A zero lower bound is replaced by ``hi * 1e-10`` for the log search; zero
    itself is tried separately. Degenerate ranges freeze that axis.
    """

    def __init__(self, kappa_range, gamma_range):
        self.ranges = []
        for lo, hi in (kappa_range, gamma_range):
            lo, hi = float(lo), float(hi)
            if not 0 <= lo <= hi or not math.isfinite(hi):
                raise ValueError(f"invalid range ({lo}, {hi})")
            self.ranges.append((lo, hi))
        self.free = [i for i, (lo, hi) in enumerate(self.ranges) if hi > lo]
        self.log_lo = np.array([math.log(lo if lo > 0 else hi * 1e-10) for lo, hi in self.ranges])
        self.log_hi = np.array([math.log(hi) if hi > 0 else 0.0 for _, hi in self.ranges])

    def point(self, z) -> tuple[float, float]:
        out = [lo for lo, _ in self.ranges]
        for j, i in enumerate(self.free):
            out[i] = math.exp(min(max(z[j], self.log_lo[i]), self.log_hi[i]))
        return out[0], out[1]

    def excess(self, z) -> float:
        return sum(
            max(self.log_lo[i] - z[j], 0.0) + max(z[j] - self.log_hi[i], 0.0)
            for j, i in enumerate(self.free)
        )

    def axes(self, points: int) -> list[np.ndarray]:
        out = []
        for i, (lo, hi) in enumerate(self.ranges):
            if i in self.free:
                out.append(np.exp(np.linspace(self.log_lo[i], self.log_hi[i], points)))
            else:
                out.append(np.array([lo]))
        return out

    def to_z(self, kappa: float, gamma: float) -> np.ndarray:
        vals = (kappa, gamma)
        return np.array([math.log(max(vals[i], math.exp(self.log_lo[i]))) for i in self.free])


def inner_optimize(
    objective,
    kappa_range=KAPPA_RANGE,
    gamma_range=GAMMA_RANGE,
    tol: float | None = None,
    *,
    grid_points: int = 33,
    max_evals: int = 2000,
    restarts: int = 6,
) -> InnerResult:
    """Minimise ``objective(kappa, gamma)`` over a box.

    A log-spaced grid picks the start, then Nelder-Mead runs in log
    coordinates and restarts until a pass improves by no more than ``tol``.
    If ``objective`` has a ``many(kappas, gammas)`` method the grid is
    evaluated in one batch. ``objective.bound(kappa, gamma)``, when present,
    fills ``b_value``.
    """
    box = _LogBox(kappa_range, gamma_range)
    ka, ga = box.axes(grid_points)
    kk, gg = (m.ravel() for m in np.meshgrid(ka, ga, indexing="ij"))
    many = getattr(objective, "many", None)
    if many is not None:
        grid_vals = np.asarray(many(kk, gg), dtype=float)
    else:
        grid_vals = np.array([objective(k, g) for k, g in zip(kk, gg)], dtype=float)
    i0 = int(np.nanargmin(grid_vals))
    best = (float(grid_vals[i0]), float(kk[i0]), float(gg[i0]))
    if tol is None:
        tol = 1e-10 * max(1.0, abs(best[0]))

    converged = True
    if box.free:

        def fz(z):
            k, g = box.point(z)
            val = float(objective(k, g))
            exc = box.excess(z)
            return val + (1.0 + abs(val)) * exc if exc > 0 else val

        spacing = [
            (box.log_hi[i] - box.log_lo[i]) / max(grid_points - 1, 1) for i in box.free
        ]
        z = box.to_z(best[1], best[2])
        f_cur = best[0]
        budget = max_evals
        converged = False
        for _ in range(restarts):
            res = nelder_mead(fz, z, spacing, xtol=1e-9, max_evals=budget)
            budget -= res.evaluations
            improved = f_cur - res.fun
            if res.fun < f_cur:
                z, f_cur = res.x, res.fun
            if res.converged and improved <= tol:
                converged = True
                break
            if budget <= 0:
                break
            spacing = [max(s * 0.1, 1e-6) for s in spacing]
        k, g = box.point(z)
        if f_cur < best[0]:
            best = (f_cur, k, g)

    # zero is outside the log search; compare the boundary values explicitly
    candidates = [best]
    for k, g in ((0.0, best[2]), (best[1], 0.0), (0.0, 0.0)):
        if (k == 0.0 and box.ranges[0][0] == 0.0 or k != 0.0) and (
            g == 0.0 and box.ranges[1][0] == 0.0 or g != 0.0
        ):
            if (k, g) != (best[1], best[2]):
                candidates.append((float(objective(k, g)), k, g))
    u, k, g = min(candidates, key=lambda c: c[0])
    bound = getattr(objective, "bound", None)
    b_value = float(bound(k, g)) if bound is not None else math.nan
    return InnerResult(kappa=k, gamma=g, u_value=u, b_value=b_value, converged=converged)


class PhaseErrorObjective:
    """U(kappa, gamma) for one outer point, finite-size form."""

    def __init__(self, evaluator: db.BoundEvaluator, *, eps, N, f_hat, n_trash, p, q_minus, lam):
        self.evaluator = evaluator
        self.eps, self.N, self.f_hat, self.n_trash = eps, N, f_hat, n_trash
        self.p, self.q_minus, self.lam = p, q_minus, lam
        self.d2 = fs.delta2(eps / 2.0, n_trash, q_minus)

    def _u(self, b, kappa, gamma):
        d1 = fs.delta1(self.eps / 2.0, self.N, kappa, gamma, self.p, self.lam)
        return fs.phase_error_upper(
            b, d1, self.d2, self.f_hat, self.n_trash, self.p, self.N, kappa, gamma, self.q_minus
        )

    def bound(self, kappa, gamma) -> float:
        return self.evaluator(kappa, gamma)

    def __call__(self, kappa, gamma) -> float:
        return float(self._u(self.evaluator(kappa, gamma), kappa, gamma))

    def many(self, kappas, gammas) -> np.ndarray:
        kappas = np.asarray(kappas, dtype=float)
        gammas = np.asarray(gammas, dtype=float)
        return self._u(self.evaluator.many(kappas, gammas), kappas, gammas)


class AsymptoticObjective:
    """Per-pulse u = p_sig (B - kappa mu_F + gamma q_minus)."""

    def __init__(self, evaluator: db.BoundEvaluator, *, p_sig, fid_mean, q_minus):
        self.evaluator = evaluator
        self.p_sig, self.fid_mean, self.q_minus = p_sig, fid_mean, q_minus

    def bound(self, kappa, gamma) -> float:
        return self.evaluator(kappa, gamma)

    def __call__(self, kappa, gamma) -> float:
        b = self.evaluator(kappa, gamma)
        return self.p_sig * (b - kappa * self.fid_mean + gamma * self.q_minus)

    def many(self, kappas, gammas) -> np.ndarray:
        kappas = np.asarray(kappas, dtype=float)
        gammas = np.asarray(gammas, dtype=float)
        b = self.evaluator.many(kappas, gammas)
        return self.p_sig * (b - kappas * self.fid_mean + gammas * self.q_minus)


# ---------------------------------------------------------------------------
# outer problem


@dataclass(frozen=True)
class OuterResult:
    params: tuple
    inner: InnerResult | None
    key_rate: float
    evaluations: int
    detail: object = None


def outer_optimize(rate_fn, seeds, budget: int = 600, *, step=0.3, starts: int = 3, xtol: float = 1e-5) -> OuterResult:
    """Maximise ``rate_fn`` by Nelder-Mead restarted from the best seeds.

    ``rate_fn(x)`` returns a rate or a ``(rate, detail)`` pair; ``detail`` is
    either an InnerResult or carries one as ``detail.inner``. Points where it
    raises ``ValueError`` or ``ArithmeticError``, or returns a non-finite
    value, are penalised. The reported rate is clipped at zero.
    """
    seeds = [np.atleast_1d(np.asarray(s, dtype=float)) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    cache: dict[bytes, tuple[float, object]] = {}
    count = 0

    def evaluate(x):
        nonlocal count
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            count += 1
            try:
                out = rate_fn(np.asarray(x, dtype=float))
            except (ValueError, ArithmeticError):
                out = (-PENALTY, None)
            if not isinstance(out, tuple):
                out = (out, None)
            rate = float(out[0])
            cache[key] = (rate if math.isfinite(rate) else -PENALTY, out[1])
        return cache[key]

    def neg(x):
        return -evaluate(x)[0]

    scored = sorted(((neg(s), i) for i, s in enumerate(seeds)), key=lambda t: (t[0], t[1]))
    best_x, best_f = seeds[scored[0][1]], scored[0][0]
    per_start = max(budget // max(starts, 1), 4 * (best_x.size + 1))
    for _, idx in scored[:starts]:
        res = nelder_mead(neg, seeds[idx], step, xtol=xtol, max_evals=per_start)
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    # polish from the winner with a fresh, smaller simplex
    res = nelder_mead(neg, best_x, np.asarray(step, dtype=float) * 0.2, xtol=xtol, max_evals=per_start)
    if res.fun < best_f:
        best_x, best_f = res.x, res.fun
    rate, detail = evaluate(best_x)
    inner = detail if isinstance(detail, InnerResult) else getattr(detail, "inner", None)
    return OuterResult(
        params=tuple(float(v) for v in best_x),
        inner=inner,
        key_rate=max(rate, 0.0),
        evaluations=count,
        detail=detail,
    )


# ---------------------------------------------------------------------------
# key-rate model


@dataclass(frozen=True)
class PointEvaluation:
    """Full pipeline output at one setting; ``raw_rate`` is unclipped."""

    raw_rate: float
    point: fs.KeyRatePoint
    inner: InnerResult


@dataclass
class KeyRateModel:
    """Key rate of one protocol at one distance as a function of its settings.

    ``N = math.inf`` selects the asymptotic limit, where p_sig is pinned near
    one and only (mu, x_th) are searched.
    """

    protocol_kind: str
    chan: cs.ChannelModel
    distance_km: float = math.nan
    N: float = math.inf
    eps_sec: float = 2.0 ** -50
    f_ec: float = 0.95
    nsmp_ratio: float = 0.01
    test_fn: TestFunctionSpec = field(default_factory=TestFunctionSpec)
    qc: db.QuadratureConfig = field(default_factory=db.QuadratureConfig)
    fixed: dict = field(default_factory=dict)
    inner_grid: int = 33

    def __post_init__(self):
        self.protocol_kind = cs.normalize_kind(self.protocol_kind)
        unknown = set(self.fixed) - {"mu", "x_th", "p_sig", "p_test", "kappa", "gamma"}
        if unknown:
            raise ValueError(f"unknown fixed parameters {sorted(unknown)}")

    @property
    def asymptotic(self) -> bool:
        return math.isinf(self.N)

    @cached_property
    def security(self) -> fs.SecurityParams:
        return fs.SecurityParams.from_eps_sec(self.eps_sec)

    @cached_property
    def lam(self):
        return lambda_range(self.test_fn)

    def params(self, mu, x_th, p_sig, p_test) -> cs.ProtocolParams:
        if self.asymptotic:
            p_sig, p_test, p_trash = 1.0 - 2 * ASYMPTOTIC_P_AUX, ASYMPTOTIC_P_AUX, ASYMPTOTIC_P_AUX
        else:
            p_trash = 1.0 - p_sig - p_test
        return cs.ProtocolParams(
            self.protocol_kind,
            mu,
            math.sqrt(self.chan.eta * mu),
            x_th,
            p_sig,
            p_test,
            p_trash,
            self.test_fn,
            self.security.s,
            self.N,
            0.0 if self.asymptotic else self.nsmp_ratio * self.N,
            self.f_ec,
        )

    def _inner_ranges(self):
        kr = (self.fixed["kappa"],) * 2 if "kappa" in self.fixed else KAPPA_RANGE
        gr = (self.fixed["gamma"],) * 2 if "gamma" in self.fixed else GAMMA_RANGE
        return kr, gr

    def evaluate(self, mu, x_th, p_sig=None, p_test=None) -> PointEvaluation:
        params = self.params(mu, x_th, p_sig, p_test)
        evaluator = db.BoundEvaluator(db.coefficients(params, self.qc), params.protocol_kind)
        q_minus = cs.trash_minus_prob(mu)
        stats = cs.expected_stats(params, self.chan)
        p = (params.p_sig, params.p_test, params.p_trash)
        kr, gr = self._inner_ranges()
        opt = {"mu": mu, "x_th": x_th, "p_sig": params.p_sig, "p_test": params.p_test, "p_trash": params.p_trash}

        if self.asymptotic:
            fid = cs.fidelity_mean(params, self.chan)
            obj = AsymptoticObjective(evaluator, p_sig=params.p_sig, fid_mean=fid, q_minus=q_minus)
            inner = inner_optimize(obj, kr, gr, grid_points=self.inner_grid)
            rate, e_ph, e_bit = fs.asymptotic_rate(
                inner.b_value, inner.kappa, inner.gamma, stats.p_plus, stats.p_minus,
                fid, q_minus, params.p_sig, self.f_ec,
            )
            n_suc = stats.n_suc
            h_ec = fs.ec_cost(n_suc, e_bit, self.f_ec) if n_suc > 0 else 0.0
            n_fin = max(rate + h_ec, 0.0)
            opt.update(kappa=inner.kappa, gamma=inner.gamma)
            point = fs.KeyRatePoint(
                self.distance_km, self.chan.eta, max(rate, 0.0), n_fin, h_ec, e_bit,
                inner.u_value, inner.b_value, opt,
            )
            return PointEvaluation(rate, point, inner)

        sec = self.security
        if stats.n_suc <= 0 or stats.n_smp_suc <= 0:
            raise ArithmeticError("no successful rounds")
        e_qber = fs.e_qber_bound(stats.n_suc, stats.n_smp_suc, stats.e_obs, sec.eps_cor)
        h_ec = fs.ec_cost(stats.n_suc, e_qber, self.f_ec)
        obj = PhaseErrorObjective(
            evaluator, eps=sec.eps, N=params.N, f_hat=stats.f_hat, n_trash=stats.n_trash,
            p=p, q_minus=q_minus, lam=self.lam,
        )
        inner = inner_optimize(obj, kr, gr, grid_points=self.inner_grid)
        n_fin = fs.key_length(stats.n_suc, inner.u_value, sec.s)
        gain = fs.net_gain(n_fin, h_ec, params.N, params.N_smp)
        # unclamped surrogate keeps a slope where the clipped key length is flat at zero
        ratio = min(max(inner.u_value, 0.0) / stats.n_suc, 0.5)
        raw_fin = stats.n_suc * (1.0 - fs.binary_entropy(ratio)) - sec.s
        raw = gain if n_fin > 0 else fs.net_gain(raw_fin, h_ec, params.N, params.N_smp)
        opt.update(kappa=inner.kappa, gamma=inner.gamma)
        point = fs.KeyRatePoint(
            self.distance_km, self.chan.eta, max(gain, 0.0), n_fin, h_ec, e_qber,
            inner.u_value, inner.b_value, opt,
        )
        return PointEvaluation(raw, point, inner)

    # search coordinates: log mu, log x_th and, in finite mode, log p_test, log p_trash
    def _free(self) -> list[str]:
        out = [n for n in ("mu", "x_th") if n not in self.fixed]
        if not self.asymptotic:
            if "p_test" not in self.fixed:
                out.append("p_test")
            if "p_sig" not in self.fixed:
                out.append("p_trash")
        return out

    def _settings(self, z) -> dict:
        vals = dict(zip(self._free(), (float(v) for v in np.exp(np.asarray(z, dtype=float)))))
        s = {k: vals.get(k, self.fixed.get(k)) for k in ("mu", "x_th", "p_test")}
        if self.asymptotic:
            s["p_sig"] = None
            return s
        s["p_sig"] = self.fixed["p_sig"] if "p_sig" in self.fixed else 1.0 - s["p_test"] - vals["p_trash"]
        if not (s["p_sig"] > 0 and s["p_test"] > 0 and s["p_sig"] + s["p_test"] < 1):
            raise ValueError("probabilities out of range")
        return s

    def seeds(self) -> list[np.ndarray]:
        free = self._free()
        axes = []
        for n in ("mu", "x_th"):
            axes.append((0.02, 0.05, 0.2) if n == "mu" else (0.3, 0.7, 1.2))
        p_sigs = (self.fixed["p_sig"],) if "p_sig" in self.fixed else (0.5, 0.8, 0.95)
        out = []
        for mu in axes[0]:
            for x_th in axes[1]:
                for ps in (None,) if self.asymptotic else p_sigs:
                    start = {"mu": mu, "x_th": x_th}
                    if ps is not None:
                        p_test = self.fixed.get("p_test", (1.0 - ps) / 2)
                        start["p_test"] = p_test
                        start["p_trash"] = 1.0 - ps - p_test
                        if start["p_trash"] <= 0:
                            continue
                    z = np.array([math.log(start[n]) for n in free])
                    if not any(np.array_equal(z, o) for o in out):
                        out.append(z)
        return out

    def rate(self, z):
        s = self._settings(z)
        ev = self.evaluate(s["mu"], s["x_th"], s["p_sig"], s["p_test"])
        return ev.raw_rate, ev

    def optimize(self, budget: int = 600) -> tuple[PointEvaluation, int]:
        """Best setting found; returns the evaluation and the outer evaluation count."""
        free = self._free()
        if not free:
            s = self._settings([])
            return self.evaluate(s["mu"], s["x_th"], s["p_sig"], s["p_test"]), 1
        res = outer_optimize(self.rate, self.seeds(), budget, step=0.3)
        if res.detail is None:
            raise ArithmeticError("no feasible setting found")
        return res.detail, res.evaluations
