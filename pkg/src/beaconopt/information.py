"""D-optimal information objective over beacon subsets.

The objective of a subset S is the log determinant of the posterior
information matrix: prior information (inverse prior covariances, one
block per position) plus one rank-one contribution per in-range edge to a
selected beacon.  Independence of the position priors makes the matrix
block diagonal, so the objective is the sum of per-position d x d log
determinants and adding one beacon is a handful of rank-one updates.

Two weighting modes are supported for an edge (i, j) with noise variance
``s2`` and residual ``r = true_range - measured_range``:

    expected    w = 1 / s2          (exact Gaussian-range information)
    one-sample  w = r**2 / s2**2    (outer product of the observed
                                     log-likelihood gradient)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .scenario import DEGENERATE_RANGE, MeasurementGraph, Scenario

FIM_MODES = ("expected", "one-sample")

# Sherman-Morrison updates accumulate roundoff; rebuild the cached inverse
# and log det from scratch after this many rank-one updates per block.
REFACTOR_INTERVAL = 64

GAIN_CLAMP = 1e-9


def _chol_logdet(block: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(np.linalg.cholesky(block)))))


@dataclass(frozen=True)
class EdgeContribution:
    """Rank-one information contribution of one edge: weight * u u^T."""

    position_index: int
    beacon_id: int
    direction: np.ndarray
    weight: float

    def matrix(self) -> np.ndarray:
        return self.weight * np.outer(self.direction, self.direction)


@dataclass(frozen=True)
class InfoBlock:
    """One position's d x d information block with its cached log det."""

    matrix: np.ndarray
    log_det: float


def edge_contribution(
    i: int,
    j: int,
    truth,
    candidates,
    measurements,
    noise,
    mode: str = "expected",
) -> EdgeContribution:
    """Direction and weight of edge (i, j) evaluated at the ground truth."""
    if mode not in FIM_MODES:
        raise ValueError(f"unknown FIM mode {mode!r}")
    truth = np.asarray(truth, dtype=float)
    site = {c.id: c.position for c in candidates}[j]
    delta = truth[i] - site
    dist = float(np.linalg.norm(delta))
    if dist <= DEGENERATE_RANGE:
        raise ValueError(f"edge ({i}, {j}) is degenerate: coincident points")
    s2 = noise.variance(i, j)
    if mode == "expected":
        weight = 1.0 / s2
    else:
        if measurements is None:
            raise ValueError("one-sample mode requires measurements")
        residual = dist - measurements.ranges[(i, j)]
        weight = residual * residual / (s2 * s2)
    return EdgeContribution(i, j, delta / dist, weight)


@dataclass(frozen=True)
class InfoDesign:
    """Immutable per-trial contribution table in kernel (CSR) layout."""

    dimension: int
    n_positions: int
    n_candidates: int
    fim_mode: str
    prior_blocks: np.ndarray  # (n, d, d) inverse prior covariances
    prior_logdets: np.ndarray  # (n,)
    edge_ptr: np.ndarray  # (m+1,) int64, edges grouped by beacon index
    edge_pos: np.ndarray  # (E,) int64
    edge_dir: np.ndarray  # (E, d)
    edge_weight: np.ndarray  # (E,)

    def beacon_edges(self, beacon_id: int) -> slice:
        j = beacon_id - 1
        if not 0 <= j < self.n_candidates:
            raise ValueError(f"unknown beacon id {beacon_id}")
        return slice(int(self.edge_ptr[j]), int(self.edge_ptr[j + 1]))


def build_design(
    scenario: Scenario,
    graph: MeasurementGraph,
    truth,
    measurements=None,
    mode: str = "expected",
) -> InfoDesign:
    if mode not in FIM_MODES:
        raise ValueError(f"unknown FIM mode {mode!r}")
    n, d, m = scenario.n_positions, scenario.dimension, scenario.n_candidates
    prior_blocks = np.empty((n, d, d))
    prior_logdets = np.empty(n)
    for i, spec in enumerate(scenario.positions):
        prior_blocks[i] = np.linalg.inv(spec.prior_covariance)
        prior_blocks[i] = 0.5 * (prior_blocks[i] + prior_blocks[i].T)
        prior_logdets[i] = _chol_logdet(prior_blocks[i])

    by_beacon = {j: [] for j in range(1, m + 1)}
    for (i, j) in graph.edges():
        by_beacon[j].append(
            edge_contribution(
                i, j, truth, scenario.candidates, measurements, scenario.noise, mode
            )
        )
    counts = [len(by_beacon[j]) for j in range(1, m + 1)]
    edge_ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=edge_ptr[1:])
    total = int(edge_ptr[-1])
    edge_pos = np.zeros(total, dtype=np.int64)
    edge_dir = np.zeros((total, d))
    edge_weight = np.zeros(total)
    e = 0
    for j in range(1, m + 1):
        for contrib in by_beacon[j]:
            edge_pos[e] = contrib.position_index
            edge_dir[e] = contrib.direction
            edge_weight[e] = contrib.weight
            e += 1
    for a in (prior_blocks, prior_logdets, edge_ptr, edge_pos, edge_dir, edge_weight):
        a.setflags(write=False)
    return InfoDesign(d, n, m, mode, prior_blocks, prior_logdets,
                      edge_ptr, edge_pos, edge_dir, edge_weight)


@dataclass
class InfoState:
    """Mutable selection state: blocks, cached inverses and log dets.

    Not thread-safe under mutation; ``copy()`` before sharing.
    """

    design: InfoDesign
    blocks: np.ndarray
    inv_blocks: np.ndarray
    log_dets: np.ndarray
    selected: list = field(default_factory=list)
    _updates: np.ndarray = None

    def __post_init__(self):
        if self._updates is None:
            self._updates = np.zeros(self.design.n_positions, dtype=np.int64)

    @property
    def fim_mode(self) -> str:
        return self.design.fim_mode

    def copy(self) -> "InfoState":
        return InfoState(
            self.design,
            self.blocks.copy(),
            self.inv_blocks.copy(),
            self.log_dets.copy(),
            list(self.selected),
            self._updates.copy(),
        )

    def block(self, i: int) -> InfoBlock:
        return InfoBlock(self.blocks[i].copy(), float(self.log_dets[i]))


def init_state(
    scenario: Scenario,
    graph: MeasurementGraph,
    truth,
    measurements=None,
    mode: str = "expected",
) -> InfoState:
    """Empty-selection state: blocks are the inverse prior covariances."""
    design = build_design(scenario, graph, truth, measurements, mode)
    return state_from_design(design)


def state_from_design(design: InfoDesign) -> InfoState:
    blocks = design.prior_blocks.copy()
    inv_blocks = np.linalg.inv(blocks)
    inv_blocks = 0.5 * (inv_blocks + np.transpose(inv_blocks, (0, 2, 1)))
    return InfoState(design, blocks, inv_blocks, design.prior_logdets.copy())


def objective(state: InfoState) -> float:
    """Sum of per-block log dets; equals the stacked-matrix log det."""
    return float(np.sum(state.log_dets))


def normalized_objective(state: InfoState) -> float:
    """Objective shifted so the empty selection scores exactly zero."""
    return float(np.sum(state.log_dets) - np.sum(state.design.prior_logdets))


def marginal_gain(state: InfoState, beacon_id: int) -> float:
    """Gain of adding one beacon, via the matrix determinant lemma.

    log det(A + w u u^T) = log det A + log(1 + w u^T A^-1 u), applied to
    each block the beacon touches.
    """
    if beacon_id in state.selected:
        raise ValueError(f"beacon {beacon_id} already selected")
    sl = state.design.beacon_edges(beacon_id)
    gain = 0.0
    for e in range(sl.start, sl.stop):
        i = state.design.edge_pos[e]
        u = state.design.edge_dir[e]
        quad = float(u @ state.inv_blocks[i] @ u)
        gain += math.log1p(state.design.edge_weight[e] * quad)
    if -GAIN_CLAMP <= gain < 0.0:
        gain = 0.0
    return gain


def apply_selection(state: InfoState, beacon_id: int) -> InfoState:
    """Add a beacon: rank-one updates to its blocks, in place.

    Cached inverses follow by Sherman-Morrison and are refactorized every
    ``REFACTOR_INTERVAL`` updates per block.  Returns the mutated state.
    """
    if beacon_id in state.selected:
        raise ValueError(f"beacon {beacon_id} already selected")
    design = state.design
    sl = design.beacon_edges(beacon_id)
    for e in range(sl.start, sl.stop):
        i = int(design.edge_pos[e])
        u = design.edge_dir[e]
        w = float(design.edge_weight[e])
        state.blocks[i] += w * np.outer(u, u)
        inv_u = state.inv_blocks[i] @ u
        denom = 1.0 + w * float(u @ inv_u)
        state.inv_blocks[i] -= (w / denom) * np.outer(inv_u, inv_u)
        state.log_dets[i] += math.log(denom)
        state._updates[i] += 1
        if state._updates[i] >= REFACTOR_INTERVAL:
            state.blocks[i] = 0.5 * (state.blocks[i] + state.blocks[i].T)
            state.inv_blocks[i] = np.linalg.inv(state.blocks[i])
            state.log_dets[i] = _chol_logdet(state.blocks[i])
            state._updates[i] = 0
    state.selected.append(beacon_id)
    return state


def evaluate_subset(state: InfoState, beacon_ids) -> float:
    """Normalized objective of ``state.selected + beacon_ids`` without
    mutating the state; duplicate ids are rejected."""
    ids = [int(j) for j in beacon_ids]
    if len(set(ids)) != len(ids) or set(ids) & set(state.selected):
        raise ValueError("duplicate beacon ids in subset")
    design = state.design
    idx = np.array([j - 1 for j in ids], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= design.n_candidates):
        raise ValueError("unknown beacon id in subset")
    total = backend.subset_objective(
        state.blocks, design.edge_pos, design.edge_dir,
        design.edge_weight, design.edge_ptr, idx,
    )
    return float(total - np.sum(design.prior_logdets))
