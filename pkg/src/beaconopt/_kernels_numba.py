"""Numba twins of the kernels in ``_kernels_numpy.py`` (same contracts)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _logdet(block):
    d = block.shape[0]
    if d == 1:
        return np.log(block[0, 0])
    if d == 2:
        return np.log(block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0])
    if d == 3:
        det = (
            block[0, 0] * (block[1, 1] * block[2, 2] - block[1, 2] * block[2, 1])
            - block[0, 1] * (block[1, 0] * block[2, 2] - block[1, 2] * block[2, 0])
            + block[0, 2] * (block[1, 0] * block[2, 1] - block[1, 1] * block[2, 0])
        )
        return np.log(det)
    chol = np.linalg.cholesky(block)
    acc = 0.0
    for t in range(d):
        acc += np.log(chol[t, t])
    return 2.0 * acc


@njit(cache=True)
def _total_logdet(blocks):
    acc = 0.0
    for i in range(blocks.shape[0]):
        acc += _logdet(blocks[i])
    return acc


@njit(cache=True)
def _add_beacon(blocks, edge_pos, edge_dir, edge_w, edge_ptr, j):
    d = blocks.shape[1]
    for e in range(edge_ptr[j], edge_ptr[j + 1]):
        i = edge_pos[e]
        w = edge_w[e]
        for r in range(d):
            for c in range(d):
                blocks[i, r, c] += w * edge_dir[e, r] * edge_dir[e, c]


@njit(cache=True)
def beacon_gains(inv_blocks, edge_pos, edge_dir, edge_w, edge_ptr, active):
    m = edge_ptr.shape[0] - 1
    d = inv_blocks.shape[1]
    gains = np.empty(m)
    for j in range(m):
        if not active[j]:
            gains[j] = -1.0
            continue
        g = 0.0
        for e in range(edge_ptr[j], edge_ptr[j + 1]):
            i = edge_pos[e]
            quad = 0.0
            for r in range(d):
                row = 0.0
                for c in range(d):
                    row += inv_blocks[i, r, c] * edge_dir[e, c]
                quad += edge_dir[e, r] * row
            g += np.log1p(edge_w[e] * quad)
        gains[j] = g if g > 0.0 else 0.0
    return gains


@njit(cache=True)
def subset_objective(base_blocks, edge_pos, edge_dir, edge_w, edge_ptr, subset):
    blocks = base_blocks.copy()
    for s in range(subset.shape[0]):
        _add_beacon(blocks, edge_pos, edge_dir, edge_w, edge_ptr, subset[s])
    return _total_logdet(blocks)


@njit(cache=True)
def brute_force_search(base_blocks, edge_pos, edge_dir, edge_w, edge_ptr, m, k):
    # Depth-first over lexicographic combinations: level t holds the blocks
    # after applying comb[0..t-1], so successive subsets rebuild only the
    # suffix that changed.
    n, d, _ = base_blocks.shape
    stack = np.empty((k + 1, n, d, d))
    stack[0] = base_blocks
    comb = np.arange(k, dtype=np.int64)
    best = comb.copy()
    best_val = -np.inf
    evals = 0
    rebuild_from = 0
    while True:
        for depth in range(rebuild_from, k):
            stack[depth + 1] = stack[depth]
            _add_beacon(stack[depth + 1], edge_pos, edge_dir, edge_w, edge_ptr, comb[depth])
        val = _total_logdet(stack[k])
        evals += 1
        if val > best_val:
            best_val = val
            best[:] = comb
        pivot = k - 1
        while pivot >= 0 and comb[pivot] == m - k + pivot:
            pivot -= 1
        if pivot < 0:
            break
        comb[pivot] += 1
        for t in range(pivot + 1, k):
            comb[t] = comb[t - 1] + 1
        rebuild_from = pivot
    return best, best_val, evals
