"""Batch front end: distance sweeps from a flat key = value configuration."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import channelstats as cs
from . import dualbound as db
from . import fockcheck
from .finitesize import KeyRatePoint
from .mathkit import TestFunctionSpec
from .optimizer import KeyRateModel

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

CSV_COLUMNS = (
    "distance_km", "eta", "key_rate", "plob", "mu", "x_th", "p_sig", "p_test", "p_trash",
    "kappa", "gamma", "b_value", "u_bound", "e_qber", "n_fin", "h_ec",
)
FIXABLE = ("mu", "x_th", "p_sig", "p_test", "kappa", "gamma")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    protocol: str = cs.HOMODYNE
    mode: str = "asymptotic"
    N: float = 1e12
    xi: float = 0.0
    eps_sec: float = 2.0 ** -50
    distances: tuple[float, float, float] = (10.0, 50.0, 10.0)
    att_db_per_km: float = 0.2
    f_ec: float = 0.95
    nsmp_ratio: float = 0.01
    m: int = 1
    r: float = 0.4120
    fixed_params: dict = field(default_factory=dict)
    outer_budget: int = 600
    inner_grid: int = 33
    n_max: int = 40
    output_path: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "protocol", cs.normalize_kind(self.protocol))
        except ValueError as exc:
            raise ConfigError(f"protocol: {exc}") from None
        if self.mode not in ("finite", "asymptotic"):
            raise ConfigError(f"mode: expected finite or asymptotic, got {self.mode!r}")
        start, stop, step = self.distances
        if not step > 0:
            raise ConfigError("distances: step_km must be positive")
        if stop < start or start < 0:
            raise ConfigError("distances: need 0 <= start_km <= stop_km")
        if self.mode == "finite" and not self.N >= 1:
            raise ConfigError("N: finite mode requires N >= 1")
        if not 0 < self.eps_sec < 1:
            raise ConfigError("eps_sec: must lie in (0, 1)")
        if self.xi < 0:
            raise ConfigError("xi: must be non-negative")
        if not 0 <= self.f_ec <= 1:
            raise ConfigError("f_ec: must lie in [0, 1]")
        if not self.nsmp_ratio > 0:
            raise ConfigError("nsmp_ratio: must be positive")
        if self.att_db_per_km < 0:
            raise ConfigError("att_db_per_km: must be non-negative")
        if self.outer_budget < 10 or self.inner_grid < 3 or self.n_max < 10:
            raise ConfigError("outer_budget, inner_grid and n_max are too small")
        try:
            TestFunctionSpec(self.m, self.r)
        except ValueError as exc:
            raise ConfigError(f"m/r: {exc}") from None
        bad = set(self.fixed_params) - set(FIXABLE)
        if bad:
            raise ConfigError(f"unknown fixed parameter(s): {sorted(bad)}")

    def distance_grid(self) -> list[float]:
        start, stop, step = self.distances
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]


_FLOAT_KEYS = {"N", "xi", "eps_sec", "att_db_per_km", "f_ec", "nsmp_ratio", "r"}
_INT_KEYS = {"m", "outer_budget", "inner_grid", "n_max"}


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    fixed: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        try:
            if key in ("protocol", "mode", "output_path"):
                values[key] = val
            elif key == "distances":
                parts = [float(p) for p in val.replace(",", " ").split()]
                if len(parts) != 3:
                    raise ValueError("expected start, stop, step")
                values[key] = tuple(parts)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in FIXABLE:
                fixed[key] = float(val)
            else:
                raise ConfigError(f"{key}: unknown configuration key")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return RunConfig(**values, fixed_params=fixed)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def plob_bound(eta: float) -> float:
    """-log2(1 - eta), the repeaterless secret-key capacity of a pure-loss channel."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    return -math.log1p(-eta) / math.log(2.0)


def _plob_or_inf(eta: float) -> float:
    return math.inf if eta >= 1 else plob_bound(eta)


def _model(config: RunConfig, distance: float) -> KeyRateModel:
    chan = cs.ChannelModel.from_distance(distance, config.xi, config.att_db_per_km)
    return KeyRateModel(
        config.protocol,
        chan,
        distance,
        N=math.inf if config.mode == "asymptotic" else config.N,
        eps_sec=config.eps_sec,
        f_ec=config.f_ec,
        nsmp_ratio=config.nsmp_ratio,
        test_fn=TestFunctionSpec(config.m, config.r),
        fixed=dict(config.fixed_params),
        inner_grid=config.inner_grid,
    )


def _failed_point(distance: float, eta: float) -> KeyRatePoint:
    nan = math.nan
    opt = {k: nan for k in ("mu", "x_th", "p_sig", "p_test", "p_trash", "kappa", "gamma")}
    return KeyRatePoint(distance, eta, 0.0, 0.0, nan, nan, nan, nan, opt)


def scan_point(config: RunConfig, distance: float) -> tuple[KeyRatePoint, bool]:
    """Optimised point at one distance; the flag is False when the row failed."""
    eta = cs.transmissivity(distance, config.att_db_per_km)
    try:
        model = _model(config, distance)
        evaluation, _ = model.optimize(config.outer_budget)
    except (ValueError, ArithmeticError, db.ConvergenceError):
        return _failed_point(distance, eta), False
    return evaluation.point, True


def _scan_job(args):
    return scan_point(*args)


def run_scan(config: RunConfig, threads: int = 1) -> list[KeyRatePoint]:
    jobs = [(config, d) for d in config.distance_grid()]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_scan_job, jobs))
    else:
        results = [_scan_job(j) for j in jobs]
    return [point for point, _ in results]


def point_row(point: KeyRatePoint) -> dict:
    opt = point.opt_params
    return {
        "distance_km": point.distance_km,
        "eta": point.eta,
        "key_rate": point.key_rate,
        "plob": _plob_or_inf(point.eta),
        "mu": opt.get("mu", math.nan),
        "x_th": opt.get("x_th", math.nan),
        "p_sig": opt.get("p_sig", math.nan),
        "p_test": opt.get("p_test", math.nan),
        "p_trash": opt.get("p_trash", math.nan),
        "kappa": opt.get("kappa", math.nan),
        "gamma": opt.get("gamma", math.nan),
        "b_value": point.b_value,
        "u_bound": point.u_bound,
        "e_qber": point.e_qber,
        "n_fin": point.n_fin,
        "h_ec": point.h_ec,
    }


def emit_csv(rows, path) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for point in rows:
                data = point_row(point)
                writer.writerow([repr(float(data[c])) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binary-cvqkd", description="Key-rate sweeps for binary-modulation CV-QKD.")
    ap.add_argument("--config", required=True, help="flat key = value run configuration")
    ap.add_argument("--output", help="CSV output path (overrides output_path)")
    ap.add_argument("--verify", action="store_true", help="run the certification suite first and abort on failure")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for the distance sweep")
    ap.add_argument("--seed", type=int, default=11, help="seed for the Monte Carlo checks of --verify")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.output:
            config = replace(config, output_path=args.output)
        if not config.output_path:
            raise ConfigError("output_path: not set and no --output given")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verify:
        records = fockcheck.run_certification(n_max=config.n_max, seed=args.seed)
        cert_path = f"{config.output_path}.cert.txt"
        try:
            fockcheck.write_certification(cert_path, records)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        if not all(r.passed for r in records):
            print(f"certification failed; see {cert_path}", file=sys.stderr)
            return EXIT_NUMERIC

    points = run_scan(config, args.threads)
    try:
        emit_csv(points, config.output_path)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
