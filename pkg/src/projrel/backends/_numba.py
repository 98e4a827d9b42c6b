"""Numba-jitted kernel implementations (default path for large workloads).

Semantics mirror ``_numpy`` exactly; tests pin bit-for-bit agreement.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import NumbaWarning, njit, prange
from numba import set_num_threads as _numba_set_num_threads

# the sandboxed TBB is older than numba wants; the workqueue layer is fine
warnings.filterwarnings("ignore", message=".*TBB.*", category=NumbaWarning)

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TAG_TUPLE = np.uint64(1)
_TAG_STREAM = np.uint64(2)
_INV53 = 2.0**-53
_ONE = np.uint64(1)


def set_num_threads(threads: int) -> None:
    _numba_set_num_threads(max(1, int(threads)))


@njit(cache=True)
def _mix(x):
    x ^= x >> np.uint64(30)
    x = x * _M1
    x ^= x >> np.uint64(27)
    x = x * _M2
    x ^= x >> np.uint64(31)
    return x


@njit(cache=True)
def _absorb(h, v):
    return _mix(h + _GOLD + v)


@njit(cache=True)
def _substream(seed, j):
    return _absorb(_absorb(_mix(seed), _TAG_STREAM), j)


@njit(cache=True)
def _tkey0(seed):
    h = _absorb(_mix(seed), _TAG_TUPLE)
    return _absorb(h, np.uint64(0))


@njit(cache=True)
def _tkey1(seed, c1):
    h = _absorb(_mix(seed), _TAG_TUPLE)
    h = _absorb(h, np.uint64(1))
    return _absorb(h, c1)


@njit(cache=True)
def _tkey2(seed, c1, c2):
    h = _absorb(_mix(seed), _TAG_TUPLE)
    h = _absorb(h, np.uint64(2))
    h = _absorb(h, c1)
    return _absorb(h, c2)


@njit(cache=True)
def _unif(key):
    return (key >> np.uint64(11)) * _INV53


# ---------------------------------------------------------------------------
# combinatorial kernels


@njit(cache=True, parallel=True)
def canonicalize_masks(masks, bitperms):
    nperms, nbits = bitperms.shape
    out = np.empty_like(masks)
    for i in prange(masks.size):
        m = masks[i]
        best = m
        for p in range(nperms):
            img = np.uint64(0)
            for b in range(nbits):
                if (m >> np.uint64(b)) & _ONE:
                    img |= _ONE << np.uint64(bitperms[p, b])
            if img < best:
                best = img
        out[i] = best
    return out


@njit(cache=True, parallel=True)
def triangle_census(masks, triple_bits):
    n_tri = triple_bits.shape[0]
    out = np.zeros((masks.size, 4), dtype=np.int32)
    for i in prange(masks.size):
        m = masks[i]
        for u in range(n_tri):
            e = (
                np.int64((m >> np.uint64(triple_bits[u, 0])) & _ONE)
                + np.int64((m >> np.uint64(triple_bits[u, 1])) & _ONE)
                + np.int64((m >> np.uint64(triple_bits[u, 2])) & _ONE)
            )
            out[i, e] += 1
    return out


@njit(cache=True)
def eq7_scan(
    total,
    tuple_bits,
    subset_bits,
    canon_idx,
    iso_size,
    class_members,
    class_offsets,
    kfact,
):
    n_tuples, nbits = tuple_bits.shape
    n_subsets = subset_bits.shape[0]
    n_ids = 1 << nbits
    n_class = class_offsets.size - 1
    cnt_ord = np.zeros(n_ids, dtype=np.int64)
    class_sums = np.zeros(n_class, dtype=np.int64)
    touched_ids = np.empty(n_tuples, dtype=np.int64)
    touched_cls = np.empty(n_subsets, dtype=np.int64)
    for w in range(total):
        wm = np.uint64(w)
        nti = 0
        for t in range(n_tuples):
            idv = 0
            for b in range(nbits):
                idv |= np.int64((wm >> np.uint64(tuple_bits[t, b])) & _ONE) << b
            if cnt_ord[idv] == 0:
                touched_ids[nti] = idv
                nti += 1
            cnt_ord[idv] += 1
        ntc = 0
        for u in range(n_subsets):
            idv = 0
            for b in range(nbits):
                idv |= np.int64((wm >> np.uint64(subset_bits[u, b])) & _ONE) << b
            c = canon_idx[idv]
            if class_sums[c] == 0:
                touched_cls[ntc] = c
                ntc += 1
            class_sums[c] += 1
        ok = True
        for x in range(nti):
            if class_sums[canon_idx[touched_ids[x]]] == 0:
                ok = False
        if ok:
            for x in range(ntc):
                c = touched_cls[x]
                lhs = kfact * class_sums[c]
                for mi in range(class_offsets[c], class_offsets[c + 1]):
                    idv = class_members[mi]
                    if lhs != iso_size[idv] * cnt_ord[idv]:
                        ok = False
                        break
                if not ok:
                    break
        for x in range(nti):
            cnt_ord[touched_ids[x]] = 0
        for x in range(ntc):
            class_sums[touched_cls[x]] = 0
        if not ok:
            return w
    return -1


# ---------------------------------------------------------------------------
# model evaluation


@njit(cache=True)
def _cdf_eval(x, xs, ys):
    n = xs.size
    if x < xs[0]:
        return ys[0]
    j = 0
    for t in range(n):
        if xs[t] <= x:
            j = t
        else:
            break
    if xs[j] == x or j == n - 1:
        return ys[j]
    return ys[j] + (x - xs[j]) / (xs[j + 1] - xs[j]) * (ys[j + 1] - ys[j])


@njit(cache=True)
def _comp(idx, has_global, u0, u1, u2, u12):
    if has_global:
        if idx == 0:
            return u0
        elif idx == 1:
            return u1
        elif idx == 2:
            return u2
        return u12
    if idx == 0:
        return u1
    elif idx == 1:
        return u2
    return u12


@njit(cache=True)
def _f2(
    code,
    has_global,
    fparams,
    r_start,
    r_len,
    r_out,
    c_lhs,
    c_op,
    c_isconst,
    c_rhs_idx,
    c_rhs_const,
    u0,
    u1,
    u2,
    u12,
):
    if code == 1:
        if u12 < fparams[0]:
            if u1 < u2:
                return 1
            if u2 < u1:
                return 2
        return 0
    if code == 2:
        nblocks = int(fparams[0])
        b1 = 0
        while b1 < nblocks - 1 and u1 >= fparams[1 + b1]:
            b1 += 1
        b2 = 0
        while b2 < nblocks - 1 and u2 >= fparams[1 + b2]:
            b2 += 1
        prob = fparams[nblocks + b1 * nblocks + b2]
        if u12 < prob:
            return 3
        return 0
    if code == 3:
        nk = int(fparams[0])
        fv = _cdf_eval(u12, fparams[1 : 1 + nk], fparams[1 + nk : 1 + 2 * nk])
        out = 0
        if u1 >= fv:
            out += 1
        if u2 >= fv:
            out += 2
        return out
    for r in range(r_start.size):
        ok = True
        for ci in range(r_start[r], r_start[r] + r_len[r]):
            lhs = _comp(c_lhs[ci], has_global, u0, u1, u2, u12)
            if c_isconst[ci]:
                rhs = c_rhs_const[ci]
            else:
                rhs = _comp(c_rhs_idx[ci], has_global, u0, u1, u2, u12)
            op = c_op[ci]
            if op == 0:
                ok = lhs < rhs
            elif op == 1:
                ok = lhs <= rhs
            elif op == 2:
                ok = lhs > rhs
            else:
                ok = lhs >= rhs
            if not ok:
                break
        if ok:
            return r_out[r]
    return 0


@njit(cache=True, parallel=True)
def sample_worlds_packed(
    n,
    count,
    seed,
    code,
    has_global,
    f1_cell,
    fparams,
    r_start,
    r_len,
    r_out,
    c_lhs,
    c_op,
    c_rhs_isconst,
    c_rhs_idx,
    c_rhs_const,
):
    out = np.zeros(count, dtype=np.uint64)
    base = np.uint64(0)
    if f1_cell & 1:
        for i in range(1, n + 1):
            base |= _ONE << np.uint64(n * n - 1 - ((i - 1) * n + (i - 1)))
    seed_u = np.uint64(seed)
    for s in prange(count):
        sj = _substream(seed_u, np.uint64(s))
        u0 = _unif(_tkey0(sj)) if has_global else 0.0
        un = np.empty(n, dtype=np.float64)
        for i in range(n):
            un[i] = _unif(_tkey1(sj, np.uint64(i + 1)))
        packed = base
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                u12 = _unif(_tkey2(sj, np.uint64(i), np.uint64(j)))
                cell = _f2(
                    code,
                    has_global,
                    fparams,
                    r_start,
                    r_len,
                    r_out,
                    c_lhs,
                    c_op,
                    c_rhs_isconst,
                    c_rhs_idx,
                    c_rhs_const,
                    u0,
                    un[i - 1],
                    un[j - 1],
                    u12,
                )
                if cell & 1:
                    packed |= _ONE << np.uint64(n * n - 1 - ((i - 1) * n + (j - 1)))
                if cell & 2:
                    packed |= _ONE << np.uint64(n * n - 1 - ((j - 1) * n + (i - 1)))
        out[s] = packed
    return out


@njit(cache=True)
def _pair_index(i, j, n):
    return (i - 1) * n - (i - 1) * i // 2 + (j - i - 1)


@njit(cache=True, parallel=True)
def sample_phat_census(
    k,
    n,
    count,
    seed,
    code,
    has_global,
    f1_cell,
    fparams,
    r_start,
    r_len,
    r_out,
    c_lhs,
    c_op,
    c_rhs_isconst,
    c_rhs_idx,
    c_rhs_const,
):
    loop = f1_cell & 1
    n_ids = 1 << (k * k)
    out = np.zeros((count, n_ids), dtype=np.int32)
    seed_u = np.uint64(seed)
    npairs = n * (n - 1) // 2
    for s in prange(count):
        sj = _substream(seed_u, np.uint64(s))
        u0 = _unif(_tkey0(sj)) if has_global else 0.0
        un = np.empty(n, dtype=np.float64)
        pc = np.empty(npairs, dtype=np.int64)
        for i in range(n):
            un[i] = _unif(_tkey1(sj, np.uint64(i + 1)))
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                u12 = _unif(_tkey2(sj, np.uint64(i), np.uint64(j)))
                pc[_pair_index(i, j, n)] = _f2(
                    code,
                    has_global,
                    fparams,
                    r_start,
                    r_len,
                    r_out,
                    c_lhs,
                    c_op,
                    c_rhs_isconst,
                    c_rhs_idx,
                    c_rhs_const,
                    u0,
                    un[i - 1],
                    un[j - 1],
                    u12,
                )
        if k == 2:
            base = (1 << 3 | 1 << 0) if loop else 0
            for i in range(1, n + 1):
                for j in range(i + 1, n + 1):
                    cell = pc[_pair_index(i, j, n)]
                    idv = base | ((cell & 1) << 2) | (((cell >> 1) & 1) << 1)
                    out[s, idv] += 1
        else:
            base = (1 << 8 | 1 << 4 | 1 << 0) if loop else 0
            for a in range(1, n + 1):
                for b in range(a + 1, n + 1):
                    for c in range(b + 1, n + 1):
                        cab = pc[_pair_index(a, b, n)]
                        cac = pc[_pair_index(a, c, n)]
                        cbc = pc[_pair_index(b, c, n)]
                        idv = (
                            base
                            | ((cab & 1) << 7)
                            | (((cab >> 1) & 1) << 5)
                            | ((cac & 1) << 6)
                            | (((cac >> 1) & 1) << 2)
                            | ((cbc & 1) << 3)
                            | (((cbc >> 1) & 1) << 1)
                        )
                        out[s, idv] += 1
    return out


@njit(cache=True, parallel=True)
def sample_outdegree(
    n,
    v_lo,
    v_hi,
    count,
    seed,
    code,
    has_global,
    f1_cell,
    fparams,
    r_start,
    r_len,
    r_out,
    c_lhs,
    c_op,
    c_rhs_isconst,
    c_rhs_idx,
    c_rhs_const,
):
    out = np.zeros(count, dtype=np.int32)
    seed_u = np.uint64(seed)
    for s in prange(count):
        sj = _substream(seed_u, np.uint64(s))
        u0 = _unif(_tkey0(sj)) if has_global else 0.0
        v = v_lo + (v_hi - v_lo) * _unif(_tkey1(sj, np.uint64(1)))
        deg = 0
        for j in range(2, n + 1):
            uj = _unif(_tkey1(sj, np.uint64(j)))
            u1j = _unif(_tkey2(sj, np.uint64(1), np.uint64(j)))
            cell = _f2(
                code,
                has_global,
                fparams,
                r_start,
                r_len,
                r_out,
                c_lhs,
                c_op,
                c_rhs_isconst,
                c_rhs_idx,
                c_rhs_const,
                u0,
                v,
                uj,
                u1j,
            )
            deg += cell & 1
        out[s] = deg
    return out
