"""Compiled vs pure-Python sweep kernel: wall time per sweep and agreement.

    python3 benchmarks/bench_kernels.py [--N 64] [--count 200] [--model toda --potential "x^4+x^2/2"]

Both backends run the same chain from the same seed; the trace series they
produce must coincide to rounding, so the timing compares identical work.
"""

import argparse
import time

import numpy as np

from gge_spectra import GGEConfig, sample_mcmc
from gge_spectra.kernels import available_backends
from gge_spectra.sampling import TracePower


def _time(cfg, count, backend, repeats):
    best, batch = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        batch = sample_mcmc(cfg, count, thin=1, burn_in=0, rng_seed=7, observables=[TracePower(2)],
                            backend=backend, adapt_every=0)
        best = min(best, time.perf_counter() - t0)
    return best, batch.series["TracePower(2)"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--model", default="toda")
    ap.add_argument("--potential", default="x^4+x^2/2")
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--count", type=int, default=200, help="sweeps per timing run")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    cfg = GGEConfig(args.model, 1.0, args.potential, args.N)
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; only the Python backend is available")
    res = {}
    for be in backends:
        # the python kernel is slow; fewer sweeps keep the run short
        count = args.count if be == "compiled" else max(2, args.count // 20)
        t, series = _time(cfg, count, be, args.repeats)
        res[be] = (t / count, series)
        print(f"{be:>9}: {1e3 * t / count:9.3f} ms/sweep  ({args.N} sites, {count} sweeps)")
    if len(res) == 2:
        n = len(res["python"][1])
        diff = np.max(np.abs(res["compiled"][1][:n] - res["python"][1]))
        print(f"speed-up: {res['python'][0] / res['compiled'][0]:.1f}x   max |series difference| = {diff:.2e}")


if __name__ == "__main__":
    main()
