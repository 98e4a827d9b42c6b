"""Benchmark the jitted kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--repeat N]

Each workload runs on both backends (results are asserted equal) and the
best-of-N wall times are reported.  The numba column excludes compilation:
a warmup call happens before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from projrel import backends
from projrel.ahk import erdos_renyi_model, bipartite_model, kernel_spec
from projrel.backends import _numpy as np_impl
from projrel.extend import _triple_bits, _undirected_bitperms
from projrel.stats import eq7_exhaustive_check
from projrel.core import Signature

SIG = Signature.single_binary()


def _bench(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    er = kernel_spec(erdos_renyi_model())
    bip = kernel_spec(bipartite_model())
    masks6 = np.arange(1 << 15, dtype=np.uint64)
    bp6 = _undirected_bitperms(6)
    masks7 = np.arange(1 << 21, dtype=np.uint64)
    tb7 = _triple_bits(7)

    nb = backends._load_numba()
    if nb is None:
        raise SystemExit("numba backend unavailable; nothing to compare")

    def canon(impl):
        return lambda: impl.canonicalize_masks(masks6, bp6)

    def census(impl):
        return lambda: impl.triangle_census(masks7, tb7)

    def sample(impl):
        return lambda: impl.sample_worlds_packed(
            3, 100_000, np.uint64(7), *backends._model_args(bip)
        )

    def phat(impl):
        return lambda: impl.sample_phat_census(
            2, 30, 10_000, np.uint64(11), *backends._model_args(er)
        )

    yield "canonicalize 32768 worlds x 720 perms (n=6)", canon(np_impl), canon(nb)
    yield "triple census over 2^21 worlds (n=7)", census(np_impl), census(nb)
    yield "sample 1e5 size-3 worlds (block model)", sample(np_impl), sample(nb)
    yield "subsample census 1e4 x C(30,2) (edge model)", phat(np_impl), phat(nb)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    # eq7 scan warms both paths and doubles as a correctness gate
    assert eq7_exhaustive_check(SIG, 3, 2) == -1

    print(f"{'workload':<48} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, np_fn, nb_fn in workloads():
        ref = np_fn()
        got = nb_fn()  # warmup + compile
        assert np.array_equal(np.asarray(ref), np.asarray(got)), name
        t_np = _bench(np_fn, args.repeat)
        t_nb = _bench(nb_fn, args.repeat)
        print(f"{name:<48} {t_np:>9.3f}s {t_nb:>9.3f}s {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
