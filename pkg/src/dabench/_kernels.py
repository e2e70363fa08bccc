"""numba kernels for the parallel-trial annealing step.

Chain state lives in 2D arrays (one row per chain) owned by the caller; each
kernel call advances every chain in a contiguous block by ``steps`` steps.
At the start of a call chain ``c`` reseeds the thread-local generator with
``seeds[c]``, so a chain's trajectory depends only on its seed sequence and
never on which thread ran it.

Two step implementations share the same transition law:

* ``exact``: one uniform draw per variable in index order, the accepted
  set is materialised, and one member is picked.
* ``binned``: integer models only. Variables are kept sorted into buckets by
  their current flip delta, and the number of accepted members of a bucket
  is drawn as ``Binomial(count, p)``. Picking a bucket in proportion to its
  accepted count and then a uniform member of the bucket has the same law as
  a uniform pick from the per-variable accepted set, at O(buckets) cost per
  step instead of O(n).

Acceptance probabilities below ``exp(-SKIP_EXPONENT)`` (~4e-18, under the
2**-53 resolution of a double uniform) are treated as zero in the binned path.
"""

from __future__ import annotations

import math

import numba
import numpy as np

SKIP_EXPONENT = 40.0
_MASK32 = np.uint64(0xFFFFFFFF)


def chunk_seeds(chain_seeds: np.ndarray, chunk: int) -> np.ndarray:
    """splitmix64 of (chain seed, chunk index), reduced to 32 bits."""
    with np.errstate(over="ignore"):
        z = chain_seeds.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        z = z + np.uint64(chunk + 1) * np.uint64(0xD1B54A32D192ED03)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z & _MASK32).astype(np.int64)


@numba.njit(cache=True, nogil=True)
def select_from_uniforms(dE, e_off, T, u, u_pick, weighted, buf, pbuf):
    """Accepted-set selection for given draws; returns index or -1."""
    n = dE.shape[0]
    k = 0
    wsum = 0.0
    for i in range(n):
        z = dE[i] - e_off
        if z <= 0:
            p = 1.0
        else:
            t = z / T
            p = math.exp(-t) if t < 745.0 else 0.0
        if u[i] < p:
            buf[k] = i
            pbuf[k] = p
            wsum += p
            k += 1
    if k == 0:
        return -1
    if not weighted:
        j = int(u_pick * k)
        if j >= k:
            j = k - 1
        return buf[j]
    r = u_pick * wsum
    acc = 0.0
    for j in range(k):
        acc += pbuf[j]
        if r < acc:
            return buf[j]
    return buf[k - 1]


@numba.njit(cache=True, nogil=True)
def _flip_update(i, x, dE, indptr, indices, data):
    """Flip bit i and update neighbour deltas; returns the applied delta."""
    d = dE[i]
    step = 1 - 2 * x[i]
    x[i] = 1 - x[i]
    for p in range(indptr[i], indptr[i + 1]):
        j = indices[p]
        dE[j] += (1 - 2 * x[j]) * data[p] * step
    dE[i] = -d
    return d


@numba.njit(cache=True, nogil=True)
def _resync(x, dE, diag, indptr, indices, data):
    n = x.shape[0]
    e = diag[0] * 0
    for i in range(n):
        f = diag[i]
        for p in range(indptr[i], indptr[i + 1]):
            f += data[p] * x[indices[p]]
        dE[i] = (1 - 2 * x[i]) * f
        if x[i] == 1:
            e += diag[i]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j < i and x[j] == 1:
                    e += data[p]
    return e


@numba.njit(cache=True, nogil=True)
def advance_exact(indptr, indices, data, diag, x, dE, energy, e_off, best_x, best_e, dirty,
                  n_acc, temps, decay, steps, offset_inc, seeds, weighted, target, resync):
    C, n = x.shape
    buf = np.empty(n, dtype=np.int64)
    pbuf = np.empty(n, dtype=np.float64)
    u = np.empty(n, dtype=np.float64)
    for c in range(C):
        np.random.seed(seeds[c])
        xc = x[c]
        dEc = dE[c]
        if resync:
            energy[c] = _resync(xc, dEc, diag, indptr, indices, data)
        T = temps[c]
        for _ in range(steps):
            for i in range(n):
                u[i] = np.random.random()
            u_pick = np.random.random()
            k = select_from_uniforms(dEc, e_off[c], T, u, u_pick, weighted, buf, pbuf)
            if k < 0:
                e_off[c] += offset_inc
            else:
                if dEc[k] > 0 and dirty[c]:
                    best_x[c, :] = xc
                    dirty[c] = 0
                energy[c] += _flip_update(k, xc, dEc, indptr, indices, data)
                e_off[c] = 0.0
                n_acc[c] += 1
                if energy[c] < best_e[c]:
                    best_e[c] = energy[c]
                    dirty[c] = 1
            T *= decay
            if best_e[c] <= target:
                break
        if dirty[c]:
            best_x[c, :] = xc
            dirty[c] = 0
        temps[c] = T


@numba.njit(cache=True, nogil=True)
def _move(j, b, nb, order, pos, start):
    while b < nb:
        last = start[b + 1] - 1
        pj = pos[j]
        other = order[last]
        order[last] = j
        order[pj] = other
        pos[other] = pj
        pos[j] = last
        start[b + 1] -= 1
        b += 1
    while b > nb:
        first = start[b]
        pj = pos[j]
        other = order[first]
        order[first] = j
        order[pj] = other
        pos[other] = pj
        pos[j] = first
        start[b] += 1
        b -= 1


@numba.njit(cache=True, nogil=True)
def build_buckets(dE, vmin, nbuckets, order, pos, start):
    """Counting-sort variables by delta into bucket ``dE - vmin``."""
    n = dE.shape[0]
    counts = np.zeros(nbuckets + 1, dtype=np.int64)
    for i in range(n):
        counts[dE[i] - vmin + 1] += 1
    for b in range(nbuckets):
        counts[b + 1] += counts[b]
    start[:] = counts
    fill = counts[:nbuckets].copy()
    for i in range(n):
        b = dE[i] - vmin
        order[fill[b]] = i
        pos[i] = fill[b]
        fill[b] += 1


@numba.njit(cache=True, nogil=True)
def select_binned(start, order, vmin, e_off, T, weighted, acc):
    """Draw one accepted variable from the bucket structure, or -1."""
    nb = start.shape[0] - 1
    total = 0
    wsum = 0.0
    hi = -1
    for b in range(nb):
        cnt = start[b + 1] - start[b]
        if cnt == 0:
            acc[b] = 0
            continue
        z = (vmin + b) - e_off
        if z <= 0:
            a = cnt
            p = 1.0
        else:
            t = z / T
            if t > SKIP_EXPONENT:
                break
            p = math.exp(-t)
            a = np.random.binomial(cnt, p)
        acc[b] = a
        total += a
        wsum += a * p
        hi = b
    if total == 0:
        return -1
    if not weighted:
        r = np.random.randint(0, total)
        for b in range(hi + 1):
            a = acc[b]
            if a == 0:
                continue
            if r < a:
                cnt = start[b + 1] - start[b]
                return order[start[b] + np.random.randint(0, cnt)]
            r -= a
    else:
        r = np.random.random() * wsum
        for b in range(hi + 1):
            a = acc[b]
            if a == 0:
                continue
            z = (vmin + b) - e_off
            p = 1.0 if z <= 0 else math.exp(-z / T)
            w = a * p
            if r < w:
                cnt = start[b + 1] - start[b]
                return order[start[b] + np.random.randint(0, cnt)]
            r -= w
    # float round-off in the weighted scan; fall back to the last populated bucket
    for b in range(hi, -1, -1):
        if acc[b] > 0:
            cnt = start[b + 1] - start[b]
            return order[start[b] + np.random.randint(0, cnt)]
    return -1


@numba.njit(cache=True, nogil=True)
def advance_binned(indptr, indices, data, diag, x, dE, energy, e_off, best_x, best_e, dirty,
                   n_acc, temps, decay, steps, offset_inc, seeds, weighted, target,
                   order, pos, start, vmin):
    C, n = x.shape
    nb = start.shape[1] - 1
    acc = np.zeros(nb, dtype=np.int64)
    for c in range(C):
        np.random.seed(seeds[c])
        xc = x[c]
        dEc = dE[c]
        oc = order[c]
        pc = pos[c]
        sc = start[c]
        T = temps[c]
        for _ in range(steps):
            k = select_binned(sc, oc, vmin, e_off[c], T, weighted, acc)
            if k < 0:
                e_off[c] += offset_inc
            else:
                d = dEc[k]
                if d > 0 and dirty[c]:
                    best_x[c, :] = xc
                    dirty[c] = 0
                step = 1 - 2 * xc[k]
                xc[k] = 1 - xc[k]
                for p in range(indptr[k], indptr[k + 1]):
                    j = indices[p]
                    old = dEc[j]
                    new = old + (1 - 2 * xc[j]) * data[p] * step
                    dEc[j] = new
                    _move(j, old - vmin, new - vmin, oc, pc, sc)
                dEc[k] = -d
                _move(k, d - vmin, -d - vmin, oc, pc, sc)
                energy[c] += d
                e_off[c] = 0.0
                n_acc[c] += 1
                if energy[c] < best_e[c]:
                    best_e[c] = energy[c]
                    dirty[c] = 1
            T *= decay
            if best_e[c] <= target:
                break
        if dirty[c]:
            best_x[c, :] = xc
            dirty[c] = 0
        temps[c] = T


@numba.njit(cache=True, nogil=True)
def greedy_descent(x, dE, indptr, indices, data):
    """Strict first-improvement descent: flip the lowest index with a negative
    delta, rescan from index 0, stop when no delta is negative. Returns the
    number of flips."""
    n = x.shape[0]
    flips = 0
    i = 0
    while i < n:
        if dE[i] < 0:
            _flip_update(i, x, dE, indptr, indices, data)
            flips += 1
            i = 0
        else:
            i += 1
    return flips


@numba.njit(cache=True, nogil=True)
def greedy_restarts(diag, indptr, indices, data, restarts, seed, x, dE):
    """``restarts`` independent random-start greedy descents; returns the
    total number of flips. ``x``/``dE`` are scratch and end with the last
    descent's local optimum."""
    np.random.seed(seed)
    n = x.shape[0]
    total = 0
    for _ in range(restarts):
        for i in range(n):
            x[i] = 1 if np.random.random() < 0.5 else 0
        _resync(x, dE, diag, indptr, indices, data)
        total += greedy_descent(x, dE, indptr, indices, data)
    return total
