"""Kernel backends: numba-accelerated hot loops with a pure-numpy fallback.

The backend is selected per call:

* ``PROJREL_BACKEND=numpy``  forces the pure-numpy implementations,
* ``PROJREL_BACKEND=numba``  forces the jitted implementations,
* ``PROJREL_BACKEND=auto``   (default) uses numba only when the workload is
  large enough to amortize JIT compilation, numpy otherwise.

Both implementations are bit-identical: they share the same counter-based
uniform streams and the same integer encodings, and the test suite pins
exact equality between them.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy as np_impl

ENV_BACKEND = "PROJREL_BACKEND"

# workloads below this many elementary operations stay on the numpy path
AUTO_THRESHOLD = 4_000_000

_numba_impl = None
_numba_failed = False


def _load_numba():
    global _numba_impl, _numba_failed
    if _numba_impl is None and not _numba_failed:
        try:
            from . import _numba as nb_impl

            _numba_impl = nb_impl
        except ImportError:
            _numba_failed = True
    return _numba_impl


def backend_name(op_size: int | None = None) -> str:
    """Resolve the backend for a workload of roughly ``op_size`` operations."""
    choice = os.environ.get(ENV_BACKEND, "auto").lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        return "numba" if _load_numba() is not None else "numpy"
    if choice != "auto":
        raise ValueError(f"unknown {ENV_BACKEND} value {choice!r}")
    if op_size is not None and op_size < AUTO_THRESHOLD:
        return "numpy"
    return "numba" if _load_numba() is not None else "numpy"


def _impl(op_size: int | None):
    if backend_name(op_size) == "numba":
        return _load_numba()
    return np_impl


def set_num_threads(threads: int) -> None:
    """Bound the thread count of numba parallel regions (numpy path is serial)."""
    mod = _load_numba()
    if mod is not None:
        mod.set_num_threads(threads)


def canonicalize_masks(masks: np.ndarray, bitperms: np.ndarray) -> np.ndarray:
    """Minimal packed image of each mask under all bit permutations.

    ``bitperms[p, b]`` is the destination bit position of source bit b.
    """
    size = masks.size * bitperms.shape[0] * bitperms.shape[1]
    return _impl(size).canonicalize_masks(
        np.ascontiguousarray(masks, dtype=np.uint64),
        np.ascontiguousarray(bitperms, dtype=np.int64),
    )


def triangle_census(masks: np.ndarray, triple_bits: np.ndarray) -> np.ndarray:
    """Per mask, how many of the given bit-triples have 0, 1, 2, 3 bits set."""
    size = masks.size * triple_bits.shape[0] * 4
    return _impl(size).triangle_census(
        np.ascontiguousarray(masks, dtype=np.uint64),
        np.ascontiguousarray(triple_bits, dtype=np.int64),
    )


def eq7_scan(
    total: int,
    tuple_bits: np.ndarray,
    subset_bits: np.ndarray,
    canon_idx: np.ndarray,
    iso_size: np.ndarray,
    class_members: np.ndarray,
    class_offsets: np.ndarray,
    kfact: int,
) -> int:
    """Scan all ``total`` packed worlds, verifying that iso-averaging the
    unordered census reproduces the ordered census; returns the first
    violating world index, or -1."""
    size = total * (tuple_bits.shape[0] + subset_bits.shape[0]) * tuple_bits.shape[1]
    return int(
        _impl(size).eq7_scan(
            total,
            np.ascontiguousarray(tuple_bits, dtype=np.int64),
            np.ascontiguousarray(subset_bits, dtype=np.int64),
            np.ascontiguousarray(canon_idx, dtype=np.int64),
            np.ascontiguousarray(iso_size, dtype=np.int64),
            np.ascontiguousarray(class_members, dtype=np.int64),
            np.ascontiguousarray(class_offsets, dtype=np.int64),
            kfact,
        )
    )


def _seed64(seed: int) -> np.uint64:
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF)


def _model_args(spec):
    return (
        spec.code,
        spec.has_global,
        spec.f1_cell,
        spec.fparams,
        spec.r_start,
        spec.r_len,
        spec.r_out,
        spec.c_lhs,
        spec.c_op,
        spec.c_rhs_isconst,
        spec.c_rhs_idx,
        spec.c_rhs_const,
    )


def sample_worlds_packed(spec, n: int, count: int, seed: int) -> np.ndarray:
    """``count`` packed worlds of size n sampled from a kernel model spec."""
    size = count * (n + n * (n - 1) // 2) * 12
    return _impl(size).sample_worlds_packed(n, count, _seed64(seed), *_model_args(spec))


def sample_phat_census(spec, k: int, n: int, count: int, seed: int) -> np.ndarray:
    """Unordered k-sample census over labeled k-worldlet ids, per sampled world."""
    import math

    size = count * math.comb(n, k) * 12
    return _impl(size).sample_phat_census(k, n, count, _seed64(seed), *_model_args(spec))


def sample_outdegree(
    spec, n: int, v_lo: float, v_hi: float, count: int, seed: int
) -> np.ndarray:
    """Out-degree of node 1 conditioned on its latent lying in [v_lo, v_hi]."""
    size = count * n * 12
    return _impl(size).sample_outdegree(n, v_lo, v_hi, count, _seed64(seed), *_model_args(spec))
