"""Compare the compiled and pure-Python kernels.

Run with ``python benchmarks/bench_kernels.py``. Each case is timed with
both backends on identical inputs; the ratio column is python / cython.
"""
import argparse
import timeit

import numpy as np

from pxem import _pykernels
from pxem.datasets import load_finney
from pxem.engine import StopRule, run_em, run_px_em
from pxem.robit import RobitData, RobitModel

try:
    from pxem import _ckernels
except ImportError:
    _ckernels = None


def _with_backend(mod, fn):
    import pxem.robit as robit
    saved = robit.kernels
    robit.kernels = mod
    try:
        return fn()
    finally:
        robit.kernels = saved


def cases(finney, xs):
    beta = np.array([-4.0, 7.0, 6.0])
    eta = finney.x @ beta
    model = RobitModel(finney)
    rule = StopRule(max_iter=200)
    return {
        "t_logcdf x10k": lambda k: [k.t_logcdf(x, 2.0) for x in xs],
        "robit E step (39 rows)": lambda k: k.robit_rows(eta, finney.y, 2.0),
        "EM, 200 iterations": lambda k: _with_backend(k, lambda: run_em(model, np.zeros(3), rule)),
        "PX-EM fit": lambda k: _with_backend(k, lambda: run_px_em(model, np.zeros(3))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; reinstall without PXEM_NO_EXT")
    finney = RobitData(*load_finney(), 2.0)
    xs = np.random.default_rng(0).standard_t(2.0, size=10_000) * 3
    print(f"{'case':<26}{'python s':>12}{'cython s':>12}{'ratio':>9}")
    for name, fn in cases(finney, xs).items():
        t = {}
        for label, mod in (("python", _pykernels), ("cython", _ckernels)):
            number = 1
            t[label] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        print(f"{name:<26}{t['python']:>12.5f}{t['cython']:>12.5f}{t['python'] / t['cython']:>9.1f}")


if __name__ == "__main__":
    main()
