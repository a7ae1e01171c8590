"""Pure-numpy kernels for the information objective.

Shared data layout (the "design"): per-edge rank-one contributions in CSR
order grouped by beacon index (0-based, id - 1):

    edge_ptr  (m+1,) int64   edges of beacon j live in [ptr[j], ptr[j+1])
    edge_pos  (E,)   int64   position index of each edge
    edge_dir  (E,d)  float   unit direction of each edge
    edge_w    (E,)   float   scalar weight of each edge (>= 0)

Blocks are (n, d, d) symmetric positive definite information matrices.
The numba twin in ``_kernels_numba.py`` implements the same contracts.
"""

from __future__ import annotations

import itertools

import numpy as np

_ENUM_CHUNK = 8192


def _batch_logdet(blocks: np.ndarray) -> np.ndarray:
    """log det over the last two axes; closed form for d <= 3."""
    d = blocks.shape[-1]
    if d == 1:
        det = blocks[..., 0, 0]
    elif d == 2:
        det = (
            blocks[..., 0, 0] * blocks[..., 1, 1]
            - blocks[..., 0, 1] * blocks[..., 1, 0]
        )
    elif d == 3:
        a, b, c = blocks[..., 0, 0], blocks[..., 0, 1], blocks[..., 0, 2]
        e, f, g = blocks[..., 1, 0], blocks[..., 1, 1], blocks[..., 1, 2]
        h, i, j = blocks[..., 2, 0], blocks[..., 2, 1], blocks[..., 2, 2]
        det = a * (f * j - g * i) - b * (e * j - g * h) + c * (e * i - f * h)
    else:
        _, logdet = np.linalg.slogdet(blocks)
        return logdet
    return np.log(det)


def beacon_gains(inv_blocks, edge_pos, edge_dir, edge_w, edge_ptr, active):
    """Marginal log-det gain of every beacon against the current inverses.

    gain[j] = sum over edges e of beacon j of log1p(w_e * u_e^T inv[pos_e] u_e),
    clamped to >= 0.  Inactive beacons get the sentinel -1.0.
    """
    m = edge_ptr.shape[0] - 1
    gains = np.zeros(m)
    if edge_pos.shape[0]:
        inv_e = inv_blocks[edge_pos]
        quad = np.einsum("ei,eij,ej->e", edge_dir, inv_e, edge_dir)
        terms = np.log1p(edge_w * quad)
        per_beacon = np.repeat(np.arange(m), np.diff(edge_ptr))
        gains = np.bincount(per_beacon, weights=terms, minlength=m)
        np.maximum(gains, 0.0, out=gains)
    gains[~active] = -1.0
    return gains


def subset_objective(base_blocks, edge_pos, edge_dir, edge_w, edge_ptr, subset):
    """Total log det after adding the subset's contributions to the base."""
    blocks = base_blocks.copy()
    for j in subset:
        lo, hi = edge_ptr[j], edge_ptr[j + 1]
        for e in range(lo, hi):
            u = edge_dir[e]
            blocks[edge_pos[e]] += edge_w[e] * np.outer(u, u)
    return float(np.sum(_batch_logdet(blocks)))


def brute_force_search(base_blocks, edge_pos, edge_dir, edge_w, edge_ptr, m, k):
    """Exhaustive search over all k-subsets of beacon indices.

    Returns (best subset indices, best objective, evaluation count).  Ties
    resolve to the lexicographically smallest subset because enumeration is
    lexicographic and replacement requires strict improvement.
    """
    n, d, _ = base_blocks.shape
    # per-beacon stacked contribution, flattened for one matmul per chunk
    contrib = np.zeros((m, n * d * d))
    for j in range(m):
        block = np.zeros((n, d, d))
        for e in range(edge_ptr[j], edge_ptr[j + 1]):
            u = edge_dir[e]
            block[edge_pos[e]] += edge_w[e] * np.outer(u, u)
        contrib[j] = block.reshape(-1)

    best_val = -np.inf
    best = np.arange(k, dtype=np.int64)
    evals = 0
    combos = itertools.combinations(range(m), k)
    while True:
        chunk = np.array(list(itertools.islice(combos, _ENUM_CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        onehot = np.zeros((chunk.shape[0], m))
        onehot[np.arange(chunk.shape[0])[:, None], chunk] = 1.0
        blocks = (onehot @ contrib).reshape(-1, n, d, d)
        blocks += base_blocks
        vals = np.sum(_batch_logdet(blocks), axis=1)
        evals += vals.shape[0]
        pick = int(np.argmax(vals))
        if vals[pick] > best_val:
            best_val = float(vals[pick])
            best = chunk[pick].copy()
    return best, best_val, evals
