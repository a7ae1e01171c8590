"""Evolution-strategy search over stacked beacon coordinates.

A (mu/mu_w, lambda) CMA-ES explores R^(d*K); every candidate vector is
snapped to K distinct sites from the discrete candidate set before
evaluation, so the optimizer sees the true discrete objective landscape
through the snap.  Strategy constants follow the standard tutorial
defaults (Hansen); the problem dimension d*K stays small, so the
covariance is eigendecomposed every generation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import backend
from .information import InfoState
from .rng import stream
from .scenario import MeasurementGraph, Scenario
from .selection import SelectionResult, _check_budget

_STAGNATION_WINDOW = 20
_MAX_RESTARTS = 3
_CONDITION_LIMIT = 1e14


@dataclass
class EsConfig:
    """Search settings; ``population_size`` and ``initial_step`` default to
    4 + floor(3 ln N) and 0.3x the candidate bounding-box diagonal."""

    population_size: int | None = None
    initial_step: float | None = None
    max_evaluations: int = 4000
    stagnation_tolerance: float = 1e-8
    seed: int = 0

    def resolve(self, n_dims: int, box_diagonal: float) -> tuple:
        lam = self.population_size or 4 + int(3 * math.log(n_dims))
        lam = max(lam, 4)
        sigma0 = self.initial_step if self.initial_step is not None else 0.3 * box_diagonal
        sigma0 = max(float(sigma0), 1e-6)
        if self.max_evaluations < lam:
            raise ValueError("max_evaluations must be at least one generation")
        if self.stagnation_tolerance <= 0:
            raise ValueError("stagnation_tolerance must be positive")
        return lam, sigma0


@dataclass
class EsState:
    """Distribution parameters of one CMA-ES run."""

    mean: np.ndarray
    step_size: float
    covariance: np.ndarray
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int = 0


class _Strategy:
    """Constant weights and learning rates for dimension N."""

    def __init__(self, n_dims: int, lam: int):
        self.lam = lam
        self.mu = lam // 2
        w = np.log(lam / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / np.sum(w)
        self.mueff = float(np.sum(self.weights) ** 2 / np.sum(self.weights**2))
        n = n_dims
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(
            1 - self.c1,
            2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff),
        )
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))


def snap_to_candidates(a, candidates) -> list:
    """Map a stacked coordinate vector to K distinct beacon ids.

    Slot t takes the nearest remaining candidate to a[t*d:(t+1)*d]; a site
    claimed by an earlier slot is skipped, ties go to the lowest id.
    """
    sites = np.array([c.position for c in sorted(candidates, key=lambda c: c.id)])
    m, d = sites.shape
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size % d != 0:
        raise ValueError(f"vector of length {a.size} is not a stack of {d}-vectors")
    k = a.size // d
    if k > m:
        raise ValueError(f"cannot snap {k} slots onto {m} candidates")
    taken = np.zeros(m, dtype=bool)
    out = []
    for t in range(k):
        point = a[t * d : (t + 1) * d]
        dist = np.linalg.norm(sites - point, axis=1)
        dist[taken] = np.inf
        idx = int(np.argmin(dist))  # first min: lowest id on ties
        taken[idx] = True
        out.append(idx + 1)
    return out


def cmaes_select(
    scenario: Scenario,
    graph: MeasurementGraph,
    info_state: InfoState,
    k: int,
    config: EsConfig,
) -> SelectionResult:
    """Maximize the normalized information objective of snapped subsets.

    Halts on the evaluation cap or when the best value improves by less
    than ``stagnation_tolerance`` over 20 consecutive generations.  A
    covariance that loses positive definiteness triggers a restart from a
    fresh random mean (at most 3 restarts).
    """
    design = info_state.design
    m = design.n_candidates
    _check_budget(k, m)
    k = int(k)
    sites = scenario.candidate_positions()
    d = scenario.dimension
    n_dims = d * k
    box_diag = float(np.linalg.norm(sites.max(axis=0) - sites.min(axis=0)))
    lam, sigma0 = config.resolve(n_dims, box_diag)
    strat = _Strategy(n_dims, lam)
    rng = stream(config.seed, "cmaes")
    base_score = float(np.sum(design.prior_logdets))

    def evaluate(vec):
        ids = snap_to_candidates(vec, scenario.candidates)
        idx = np.array([j - 1 for j in ids], dtype=np.int64)
        value = backend.subset_objective(
            info_state.blocks, design.edge_pos, design.edge_dir,
            design.edge_weight, design.edge_ptr, idx,
        )
        return float(value - base_score), ids

    def fresh_state():
        start = sites[rng.choice(m, size=k, replace=False)].reshape(-1)
        return EsState(
            mean=start.astype(float),
            step_size=sigma0,
            covariance=np.eye(n_dims),
            path_sigma=np.zeros(n_dims),
            path_cov=np.zeros(n_dims),
        )

    t0 = time.perf_counter()
    es = fresh_state()
    best_value, best_ids = evaluate(es.mean)
    evaluations = 1
    trace = [best_value]
    restarts = 0
    stagnant = 0
    last_window_best = best_value
    halt = "max_evaluations"
    while evaluations + lam <= config.max_evaluations:
        eigvals, eigvecs = np.linalg.eigh(es.covariance)
        if (
            not np.all(np.isfinite(eigvals))
            or eigvals[0] <= 0
            or eigvals[-1] / eigvals[0] > _CONDITION_LIMIT
        ):
            if restarts >= _MAX_RESTARTS:
                halt = "restart_budget"
                break
            restarts += 1
            es = fresh_state()
            stagnant = 0
            continue
        scales = np.sqrt(eigvals)
        z = rng.standard_normal((lam, n_dims))
        y = (z * scales) @ eigvecs.T
        xs = es.mean + es.step_size * y
        scores = np.empty(lam)
        snapped = []
        for p in range(lam):
            scores[p], ids = evaluate(xs[p])
            snapped.append(ids)
        evaluations += lam
        order = np.argsort(-scores, kind="stable")
        if scores[order[0]] > best_value:
            best_value = float(scores[order[0]])
            best_ids = snapped[order[0]]

        sel = order[: strat.mu]
        old_mean = es.mean
        es.mean = strat.weights @ xs[sel]
        y_mean = (es.mean - old_mean) / es.step_size
        inv_sqrt = eigvecs @ ((eigvecs / scales).T)
        es.path_sigma = (1 - strat.cs) * es.path_sigma + math.sqrt(
            strat.cs * (2 - strat.cs) * strat.mueff
        ) * (inv_sqrt @ y_mean)
        es.generation += 1
        ps_norm = float(np.linalg.norm(es.path_sigma))
        hsig = ps_norm / math.sqrt(
            1 - (1 - strat.cs) ** (2 * es.generation)
        ) / strat.chi_n < 1.4 + 2 / (n_dims + 1)
        es.path_cov = (1 - strat.cc) * es.path_cov + hsig * math.sqrt(
            strat.cc * (2 - strat.cc) * strat.mueff
        ) * y_mean
        rank_mu = (strat.weights[:, None] * y[sel]).T @ y[sel]
        c1a = strat.c1 * (1 - (1 - hsig**2) * strat.cc * (2 - strat.cc))
        es.covariance = (
            (1 - c1a - strat.cmu) * es.covariance
            + strat.c1 * np.outer(es.path_cov, es.path_cov)
            + strat.cmu * rank_mu
        )
        es.covariance = 0.5 * (es.covariance + es.covariance.T)
        es.step_size *= math.exp(
            (strat.cs / strat.damps) * (ps_norm / strat.chi_n - 1)
        )
        trace.append(best_value)

        if best_value - last_window_best < config.stagnation_tolerance:
            stagnant += 1
            if stagnant >= _STAGNATION_WINDOW:
                halt = "stagnation"
                break
        else:
            stagnant = 0
            last_window_best = best_value
    wall = time.perf_counter() - t0
    return SelectionResult(
        "cmaes",
        list(best_ids),
        trace,
        wall,
        evaluations,
        metadata={
            "generations": es.generation,
            "restarts": restarts,
            "halt": halt,
            "population_size": lam,
            "initial_step": sigma0,
        },
    )
