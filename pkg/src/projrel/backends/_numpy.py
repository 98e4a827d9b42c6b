"""Pure-numpy kernel implementations (fallback path).

Bit-for-bit equivalent to the numba backend: the same splitmix64 chains,
the same encodings, the same tie rules.  Vectorized over samples/worlds.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64
_GOLD = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_TAG_TUPLE = U64(1)
_TAG_STREAM = U64(2)
_INV53 = 2.0**-53


def set_num_threads(threads: int) -> None:
    pass  # numpy path is single-threaded


def _mix(x):
    with np.errstate(over="ignore"):
        x = x ^ (x >> U64(30))
        x = x * _M1
        x = x ^ (x >> U64(27))
        x = x * _M2
        x = x ^ (x >> U64(31))
    return x


def _absorb(h, v):
    with np.errstate(over="ignore"):
        return _mix(h + _GOLD + v)


def _substreams(seed: int, count: int):
    h = _absorb(_mix(U64(seed & 0xFFFFFFFFFFFFFFFF)), _TAG_STREAM)
    return _absorb(np.full(count, h, dtype=np.uint64), np.arange(count, dtype=np.uint64))


def _tuple_keys(seeds, comps):
    h = _absorb(_mix(seeds), _TAG_TUPLE)
    h = _absorb(h, U64(len(comps)))
    for c in comps:
        h = _absorb(h, U64(c))
    return h


def _uniform(keys):
    return (keys >> U64(11)).astype(np.float64) * _INV53


def _latents(seeds, comps):
    return _uniform(_tuple_keys(seeds, comps))


# ---------------------------------------------------------------------------
# combinatorial kernels


def canonicalize_masks(masks, bitperms):
    nperms, nbits = bitperms.shape
    best = masks.copy()
    for p in range(nperms):
        out = np.zeros_like(masks)
        for b in range(nbits):
            out |= ((masks >> U64(b)) & U64(1)) << U64(int(bitperms[p, b]))
        np.minimum(best, out, out=best)
    return best


def triangle_census(masks, triple_bits):
    n = masks.size
    counts = np.zeros((n, 4), dtype=np.int32)
    one = U64(1)
    for u in range(triple_bits.shape[0]):
        e = (
            ((masks >> U64(int(triple_bits[u, 0]))) & one)
            + ((masks >> U64(int(triple_bits[u, 1]))) & one)
            + ((masks >> U64(int(triple_bits[u, 2]))) & one)
        ).astype(np.int64)
        for c in range(4):
            counts[:, c] += e == c
    return counts


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
    del class_members, class_offsets  # the dense check below covers every id
    nbits = tuple_bits.shape[1]
    n_ids = 1 << nbits
    n_class = int(canon_idx.max()) + 1
    weights = (U64(1) << np.arange(nbits, dtype=np.uint64))[None, None, :]
    tb = tuple_bits.astype(np.uint64)[None, :, :]
    sb = subset_bits.astype(np.uint64)[None, :, :]
    chunk = 2048
    rows = None
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        masks = np.arange(start, stop, dtype=np.uint64)[:, None, None]
        c = stop - start
        if rows is None or rows.size != c:
            rows = np.arange(c)
        ord_ids = (((masks >> tb) & U64(1)) * weights).sum(axis=2).astype(np.int64)
        un_ids = (((masks >> sb) & U64(1)) * weights).sum(axis=2).astype(np.int64)
        cnt_ord = np.bincount(
            (rows[:, None] * n_ids + ord_ids).ravel(), minlength=c * n_ids
        ).reshape(c, n_ids)
        class_sums = np.bincount(
            (rows[:, None] * n_class + canon_idx[un_ids]).ravel(),
            minlength=c * n_class,
        ).reshape(c, n_class)
        lhs = kfact * class_sums[:, canon_idx]
        rhs = iso_size[None, :] * cnt_ord
        bad = (lhs != rhs).any(axis=1)
        if bad.any():
            return start + int(np.argmax(bad))
    return -1


# ---------------------------------------------------------------------------
# model evaluation


def _degree_cdf(x, xs, ys):
    j = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 1)
    xj = xs[j]
    yj = ys[j]
    flat = (xj == x) | (j >= xs.size - 1) | (x < xs[0])
    jn = np.minimum(j + 1, xs.size - 1)
    dx = xs[jn] - xj
    dx = np.where(dx == 0, 1.0, dx)
    interp = yj + (x - xj) / dx * (ys[jn] - yj)
    return np.where(flat, yj, interp)


def _eval_f2(code, has_global, fparams, rules, u0, u1, u2, u12):
    if code == 1:  # random-orientation edge with probability p
        p = fparams[0]
        out = np.zeros(u1.shape, dtype=np.int64)
        edge = u12 < p
        out[edge & (u1 < u2)] = 1
        out[edge & (u2 < u1)] = 2
        return out
    if code == 2:  # block model: symmetric edge with block-pair probability
        nblocks = int(fparams[0])
        bounds = fparams[1:nblocks]
        bmat = fparams[nblocks : nblocks + nblocks * nblocks].reshape(nblocks, nblocks)
        b1 = np.searchsorted(bounds, u1, side="right")
        b2 = np.searchsorted(bounds, u2, side="right")
        return np.where(u12 < bmat[b1, b2], 3, 0).astype(np.int64)
    if code == 3:  # degree model driven by a cdf on normalized degrees
        nk = int(fparams[0])
        xs = fparams[1 : 1 + nk]
        ys = fparams[1 + nk : 1 + 2 * nk]
        fv = _degree_cdf(u12, xs, ys)
        return ((u1 >= fv) * 1 + (u2 >= fv) * 2).astype(np.int64)
    if code == 4:  # rule table
        r_start, r_len, r_out, c_lhs, c_op, c_isconst, c_rhs_idx, c_rhs_const = rules
        comps = [u0, u1, u2, u12] if has_global else [u1, u2, u12]
        out = np.zeros(u1.shape, dtype=np.int64)
        fired = np.zeros(u1.shape, dtype=bool)
        for r in range(r_start.size):
            ok = ~fired
            for ci in range(int(r_start[r]), int(r_start[r]) + int(r_len[r])):
                lhs = comps[int(c_lhs[ci])]
                rhs = (
                    c_rhs_const[ci] if c_isconst[ci] else comps[int(c_rhs_idx[ci])]
                )
                op = int(c_op[ci])
                if op == 0:
                    ok = ok & (lhs < rhs)
                elif op == 1:
                    ok = ok & (lhs <= rhs)
                elif op == 2:
                    ok = ok & (lhs > rhs)
                else:
                    ok = ok & (lhs >= rhs)
            out[ok] = r_out[r]
            fired |= ok
        return out
    raise ValueError(f"unknown model code {code}")


def _unpack_rules(r_start, r_len, r_out, c_lhs, c_op, c_isconst, c_rhs_idx, c_rhs_const):
    return (r_start, r_len, r_out, c_lhs, c_op, c_isconst, c_rhs_idx, c_rhs_const)


def _pair_bit(i, j, n):
    return n * n - 1 - ((i - 1) * n + (j - 1))


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
    rules = _unpack_rules(
        r_start, r_len, r_out, c_lhs, c_op, c_rhs_isconst, c_rhs_idx, c_rhs_const
    )
    seeds = _substreams(seed, count)
    u0 = _latents(seeds, ()) if has_global else np.zeros(count)
    u_nodes = np.empty((n, count))
    for i in range(1, n + 1):
        u_nodes[i - 1] = _latents(seeds, (i,))
    packed = np.zeros(count, dtype=np.uint64)
    if f1_cell & 1:
        loops = U64(0)
        for i in range(1, n + 1):
            loops |= U64(1) << U64(_pair_bit(i, i, n))
        packed |= loops
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            u12 = _latents(seeds, (i, j))
            cell = _eval_f2(
                code, has_global, fparams, rules, u0, u_nodes[i - 1], u_nodes[j - 1], u12
            )
            packed |= (cell.astype(np.uint64) & U64(1)) << U64(_pair_bit(i, j, n))
            packed |= ((cell.astype(np.uint64) >> U64(1)) & U64(1)) << U64(
                _pair_bit(j, i, n)
            )
    return packed


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
    rules = _unpack_rules(
        r_start, r_len, r_out, c_lhs, c_op, c_rhs_isconst, c_rhs_idx, c_rhs_const
    )
    seeds = _substreams(seed, count)
    u0 = _latents(seeds, ()) if has_global else np.zeros(count)
    u_nodes = np.empty((n, count))
    for i in range(1, n + 1):
        u_nodes[i - 1] = _latents(seeds, (i,))
    rows = np.arange(count)
    loop = 1 if (f1_cell & 1) else 0
    if k == 2:
        out = np.zeros((count, 16), dtype=np.int32)
        base = (1 << 3 | 1 << 0) if loop else 0
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                u12 = _latents(seeds, (i, j))
                cell = _eval_f2(
                    code, has_global, fparams, rules, u0, u_nodes[i - 1], u_nodes[j - 1], u12
                )
                ids = base | ((cell & 1) << 2) | (((cell >> 1) & 1) << 1)
                np.add.at(out, (rows, ids), 1)
        return out
    if k == 3:
        npairs = n * (n - 1) // 2
        pc = np.empty((npairs, count), dtype=np.int64)
        pidx = {}
        p = 0
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                u12 = _latents(seeds, (i, j))
                pc[p] = _eval_f2(
                    code, has_global, fparams, rules, u0, u_nodes[i - 1], u_nodes[j - 1], u12
                )
                pidx[(i, j)] = p
                p += 1
        out = np.zeros((count, 512), dtype=np.int32)
        base = (1 << 8 | 1 << 4 | 1 << 0) if loop else 0
        for a in range(1, n + 1):
            for b in range(a + 1, n + 1):
                for c in range(b + 1, n + 1):
                    cab = pc[pidx[(a, b)]]
                    cac = pc[pidx[(a, c)]]
                    cbc = pc[pidx[(b, c)]]
                    ids = (
                        base
                        | ((cab & 1) << 7)
                        | (((cab >> 1) & 1) << 5)
                        | ((cac & 1) << 6)
                        | (((cac >> 1) & 1) << 2)
                        | ((cbc & 1) << 3)
                        | (((cbc >> 1) & 1) << 1)
                    )
                    np.add.at(out, (rows, ids), 1)
        return out
    raise ValueError(f"phat census supports k in {{2, 3}}, got {k}")


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
    del f1_cell  # self-loops never count toward out-degree here
    rules = _unpack_rules(
        r_start, r_len, r_out, c_lhs, c_op, c_rhs_isconst, c_rhs_idx, c_rhs_const
    )
    seeds = _substreams(seed, count)
    u0 = _latents(seeds, ()) if has_global else np.zeros(count)
    v = v_lo + (v_hi - v_lo) * _latents(seeds, (1,))
    deg = np.zeros(count, dtype=np.int32)
    for j in range(2, n + 1):
        uj = _latents(seeds, (j,))
        u1j = _latents(seeds, (1, j))
        cell = _eval_f2(code, has_global, fparams, rules, u0, v, uj, u1j)
        deg += (cell & 1).astype(np.int32)
    return deg
