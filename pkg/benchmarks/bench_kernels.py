"""Compare the compiled pointwise kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 256 512] [--components 2 7] [--repeat 20]

Each kernel runs on identical random input under both backends; the table
reports the best-of-repeat time per call and the maximum difference between
the two outputs.
"""
import argparse
import timeit

import numpy as np

from nlss import _kernels_py
from nlss.nonlinearity import _triple_table

try:
    from nlss import _kernels as _compiled
except ImportError:
    _compiled = None


def cases(rng, n, ncomp):
    u = rng.standard_normal((ncomp, n, n)) + 1j * rng.standard_normal((ncomp, n, n))
    # the triple sum needs an odd component count 2 Jmax + 1; even counts are rounded down
    Jmax = (ncomp - 1) // 2
    triples = _triple_table(Jmax)
    return {
        "density": lambda m: m.density(u),
        "coupling_closed": lambda m: m.coupling_closed(u),
        "coupling_triples": lambda m: m.coupling_triples(u[: 2 * Jmax + 1], triples),
        "phase_rotate": lambda m: _rotated(m, u),
    }


def _rotated(module, u):
    v = u.copy()
    module.phase_rotate(v, 1e-3)
    return v


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[256, 512])
    ap.add_argument("--components", type=int, nargs="+", default=[3, 7])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>6}{'comps':>7}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}{'max diff':>11}")
    for n in args.n:
        for ncomp in args.components:
            for name, call in cases(rng, n, ncomp).items():
                t_py = best_time(lambda: call(_kernels_py), args.repeat)
                if _compiled is None:
                    print(f"{name:<18}{n:>6}{ncomp:>7}{1e3 * t_py:>11.3f}{'-':>11}{'-':>9}{'-':>11}")
                    continue
                t_c = best_time(lambda: call(_compiled), args.repeat)
                diff = float(np.max(np.abs(np.asarray(call(_compiled)) - np.asarray(call(_kernels_py)))))
                print(f"{name:<18}{n:>6}{ncomp:>7}{1e3 * t_py:>11.3f}{1e3 * t_c:>11.3f}"
                      f"{t_py / t_c:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
