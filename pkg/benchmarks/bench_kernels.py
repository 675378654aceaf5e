"""Time the compiled kernels against the numpy fallback.

Run from the repository root after building the extension:

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from binary_cvqkd import _pykernels
from binary_cvqkd import dualbound as db

try:
    from binary_cvqkd import _kernels
except ImportError:
    _kernels = None


def _workload():
    coeffs = db.coefficients_for("het", 0.04, math.sqrt(0.004), 0.3)
    base, kdir, gdir = db.bound_stack(coeffs, "het")
    ks, gs = (m.ravel() for m in np.meshgrid(np.geomspace(1e-4, 1e4, 33), np.geomspace(1e-12, 1e4, 33)))
    single = base[0] + 0.5 * kdir[0] - 0.1 * gdir[0]
    return base, kdir, gdir, ks, gs, single


def _best(stmt, repeat, number):
    return min(timeit.repeat(stmt, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    base, kdir, gdir, ks, gs, single = _workload()
    backends = [("python", _pykernels)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled extension not built; timing the fallback only")

    rows = []
    for name, mod in backends:
        t_eig = _best(lambda: mod.max_eigenvalue(single), args.repeat, 2000)
        t_single = _best(lambda: mod.bound_pairs(base, kdir, gdir, ks[:1], gs[:1]), args.repeat, 2000)
        t_grid = _best(lambda: mod.bound_pairs(base, kdir, gdir, ks, gs), args.repeat, 20)
        rows.append((name, t_eig, t_single, t_grid))

    print(f"{'backend':<10}{'max_eig 6x6':>16}{'B(k,g) single':>16}{'B on 33x33 grid':>18}")
    for name, t_eig, t_single, t_grid in rows:
        print(f"{name:<10}{t_eig * 1e6:>13.2f} us{t_single * 1e6:>13.2f} us{t_grid * 1e3:>15.3f} ms")
    if len(rows) == 2:
        py, cy = rows
        print(
            "speed-up  "
            + "".join(f"{p / c:>15.1f}x" for p, c in zip(py[1:3], cy[1:3]))
            + f"{py[3] / cy[3]:>17.1f}x"
        )
        gap = np.max(np.abs(_kernels.bound_pairs(base, kdir, gdir, ks, gs) - _pykernels.bound_pairs(base, kdir, gdir, ks, gs)))
        print(f"max |compiled - python| on the grid: {gap:.2e}")


if __name__ == "__main__":
    main()
