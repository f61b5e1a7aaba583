"""Compare the compiled and pure-Python Metropolis kernels.

Run with ``python benchmarks/bench_sampler.py``. Both backends consume the
same random streams, so besides timing the script checks that they return
identical samples.
"""
import argparse
import time

import numpy as np

from nqstate import _backend
from nqstate.states import RbmState
from nqstate.vmc import _streams


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_rbm(kern, psi, streams, exchange, thin):
    v0 = np.zeros(psi.n_visible, dtype=np.int8)
    v0[::2] = 1
    return lambda: kern.rbm_metropolis(
        np.ascontiguousarray(psi.visible_bias.real), np.ascontiguousarray(psi.hidden_bias.real),
        np.ascontiguousarray(psi.hidden_bias.imag), np.ascontiguousarray(psi.weights.real),
        np.ascontiguousarray(psi.weights.imag), v0, False, *streams, exchange, 0, thin)


def bench_table(kern, log_prob, n, streams, exchange, thin):
    return lambda: kern.table_metropolis(log_prob, n, 0, *streams, exchange, 0, thin)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sites", type=int, default=20)
    parser.add_argument("--alpha", type=int, default=2, help="hidden units per site")
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    if "cython" not in _backend.available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    py, cy = _backend.get_kernels("python"), _backend.get_kernels("cython")
    rng = np.random.default_rng(0)
    n = args.sites
    psi = RbmState.random(n, args.alpha * n, rng, scale=0.2)
    print(f"{'kernel':<22}{'move':<10}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}  identical")
    for move in ("flip", "exchange"):
        streams = _streams(np.random.default_rng(1), n, args.steps, move)
        t_py, r_py = _time(bench_rbm(py, psi, streams, move == "exchange", n), args.repeat)
        t_cy, r_cy = _time(bench_rbm(cy, psi, streams, move == "exchange", n), args.repeat)
        same = np.array_equal(r_py[0], r_cy[0]) and r_py[1] == r_cy[1]
        print(f"{f'rbm N={n} M={psi.n_hidden}':<22}{move:<10}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>10.1f}  {same}")
    nt = min(n, 14)
    table = np.random.default_rng(2).standard_normal(2**nt)
    for move in ("flip", "exchange"):
        streams = _streams(np.random.default_rng(3), nt, args.steps, move)
        t_py, r_py = _time(bench_table(py, table, nt, streams, move == "exchange", nt), args.repeat)
        t_cy, r_cy = _time(bench_table(cy, table, nt, streams, move == "exchange", nt), args.repeat)
        same = np.array_equal(r_py[0], r_cy[0]) and r_py[1] == r_cy[1]
        print(f"{f'table N={nt}':<22}{move:<10}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>10.1f}  {same}")


if __name__ == "__main__":
    main()
