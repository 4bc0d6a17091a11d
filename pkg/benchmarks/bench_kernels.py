"""Time the numba and pure-numpy flavours of each hot kernel.

    python3 benchmarks/bench_kernels.py --sizes 4800 100000 1000000
"""
import argparse
import json
import math
import timeit

import numpy as np

from qkdvoa import _accel, kernels


def _cases(n, rng):
    x = rng.standard_normal(n)
    phases = math.pi + 0.01 * rng.standard_normal(n)
    return {
        "ou_filter": (x, math.exp(-1.0 / 300.0), 0.3),
        "attenuation_db": (phases, 0.5, 0.5, 0.0, kernels.TRANSMITTANCE_FLOOR),
    }


def bench(sizes, repeat, number):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        for name, args in _cases(n, rng).items():
            fast, slow = kernels.KERNELS[name]
            fast(*args)  # compile outside the timed region
            row = {"kernel": name, "n": n}
            for label, fn in (("numba", fast), ("numpy", slow)):
                t = min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number
                row[f"{label}_us"] = t * 1e6
            row["speedup"] = row["numpy_us"] / row["numba_us"]
            rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4800, 100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=10)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args(argv)
    if not _accel.NUMBA_INSTALLED:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = bench(args.sizes, args.repeat, args.number)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':<16}{'n':>10}{'numba [us]':>14}{'numpy [us]':>14}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<16}{r['n']:>10}{r['numba_us']:>14.1f}{r['numpy_us']:>14.1f}{r['speedup']:>10.2f}")


if __name__ == "__main__":
    main()
