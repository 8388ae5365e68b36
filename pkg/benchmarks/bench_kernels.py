"""Time the compiled and pure-Python relaxation sweeps on the same inputs.

    python benchmarks/bench_kernels.py [--n1 4096] [--n2 128] [--sweeps 5]

Prints seconds per sweep for each backend, the speedup, and the largest
difference between the two results (they share the same arithmetic and
should agree to rounding).
"""
import argparse
import time

import numpy as np

from seglab import kernels


def _inputs(shape, d=2, seed=0):
    rng = np.random.default_rng(seed)
    u = np.ascontiguousarray(rng.random((d,) + shape))
    a = np.ones((d, d)) - np.eye(d)
    return u, a, np.zeros(d), np.zeros((d, d))


def _time(fn, u0, *args, sweeps):
    u = u0.copy()
    t = time.perf_counter()
    fn(u, *args, sweeps)
    return (time.perf_counter() - t) / sweeps, u


def bench(dim, n, sweeps, beta=1e3, omega=1.5):
    shape = (n + 1,) * dim
    u0, a, lam, b = _inputs(shape)
    h = [1.0 / n] * dim
    args = (*h, a, beta, 1.0, 1e-12, 0, lam, b, omega)
    name = f"sweep_{dim}d"
    py = getattr(kernels.get_backend("python"), name)
    try:
        cy = getattr(kernels.get_backend("cython"), name)
    except ImportError:
        cy = None
    t_py, u_py = _time(py, u0, *args, sweeps=sweeps)
    row = {"kernel": name, "nodes": int(np.prod(shape)), "python_s": t_py}
    if cy is not None:
        t_cy, u_cy = _time(cy, u0, *args, sweeps=sweeps)
        row.update(cython_s=t_cy, speedup=t_py / t_cy, max_diff=float(np.max(np.abs(u_py - u_cy))))
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n1", type=int, default=4096, help="cells in the 1D benchmark")
    ap.add_argument("--n2", type=int, default=128, help="cells per axis in the 2D benchmark")
    ap.add_argument("--sweeps", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}")
    for dim, n in ((1, args.n1), (2, args.n2)):
        r = bench(dim, n, args.sweeps)
        line = f"{r['kernel']}  nodes={r['nodes']:>7}  python {r['python_s'] * 1e3:9.3f} ms/sweep"
        if "cython_s" in r:
            line += (f"  cython {r['cython_s'] * 1e3:8.4f} ms/sweep  speedup {r['speedup']:7.1f}x"
                     f"  max|diff| {r['max_diff']:.1e}")
        else:
            line += "  (compiled extension not built)"
        print(line)


if __name__ == "__main__":
    main()
