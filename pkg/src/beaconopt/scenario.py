"""Problem instances for beacon placement: positions with Gaussian priors,
candidate beacon sites, the cutoff-induced bipartite measurement graph, and
simulation of ground truth and noisy range measurements.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

# Edges shorter than this are dropped: the unit direction (and hence the
# rank-one information contribution) is undefined at coincident points.
DEGENERATE_RANGE = 1e-9


class ScenarioError(ValueError):
    """Invalid scenario data; the message names the offending field."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PositionSpec:
    """One position to localize, with its Gaussian prior.

    ``prior_covariance`` accepts a full SPD matrix or a scalar isotropic
    variance, which is expanded to ``variance * I``.
    """

    prior_mean: np.ndarray
    prior_covariance: np.ndarray

    def __post_init__(self):
        mean = _readonly(np.atleast_1d(self.prior_mean))
        if mean.ndim != 1:
            raise ScenarioError("prior_mean must be a vector")
        d = mean.shape[0]
        cov = np.asarray(self.prior_covariance, dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(d)
        if cov.shape != (d, d):
            raise ScenarioError(
                f"prior_covariance shape {cov.shape} does not match dimension {d}"
            )
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
            raise ScenarioError("prior_covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ScenarioError("prior_covariance is not positive definite") from exc
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_covariance", _readonly(cov))

    @property
    def dimension(self) -> int:
        return self.prior_mean.shape[0]


@dataclass(frozen=True)
class BeaconCandidate:
    """Candidate beacon site with a 1-based integer id."""

    id: int
    position: np.ndarray

    def __post_init__(self):
        pos = _readonly(np.atleast_1d(self.position))
        if pos.ndim != 1:
            raise ScenarioError("candidate position must be a vector")
        if int(self.id) < 1:
            raise ScenarioError(f"candidate id {self.id} must be >= 1")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class NoiseModel:
    """Range noise variances, either one constant or a per-edge table.

    In table mode, pairs absent from the table fall back to
    ``constant_variance``.
    """

    mode: str = "constant"
    constant_variance: float = 25.0
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("constant", "per-edge-table"):
            raise ScenarioError(f"noise.mode {self.mode!r} unknown")
        if not self.constant_variance > 0:
            raise ScenarioError("noise.constant_variance must be positive")
        table = {(int(i), int(j)): float(v) for (i, j), v in self.table.items()}
        for key, var in table.items():
            if not var > 0:
                raise ScenarioError(f"noise.table variance for edge {key} must be positive")
        object.__setattr__(self, "table", table)

    def variance(self, i: int, j: int) -> float:
        if self.mode == "per-edge-table":
            return self.table.get((i, j), self.constant_variance)
        return self.constant_variance


@dataclass(frozen=True)
class Scenario:
    """Full problem instance: priors, candidate sites, noise, cutoff, budget."""

    dimension: int
    positions: tuple
    candidates: tuple
    noise: NoiseModel
    cutoff: float
    budget: int

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        d = int(self.dimension)
        if d < 1:
            raise ScenarioError("dimension must be >= 1")
        if len(self.positions) < 1:
            raise ScenarioError("positions must be non-empty")
        for idx, p in enumerate(self.positions):
            if p.dimension != d:
                raise ScenarioError(f"positions[{idx}].mean has wrong dimension")
        ids = [c.id for c in self.candidates]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ScenarioError("candidates ids must be unique and contiguous from 1")
        for idx, c in enumerate(self.candidates):
            if c.position.shape[0] != d:
                raise ScenarioError(f"candidates[{idx}].position has wrong dimension")
        if not self.cutoff > 0:
            raise ScenarioError("cutoff must be positive")
        if not 1 <= int(self.budget) <= len(self.candidates):
            raise ScenarioError(
                f"budget {self.budget} outside [1, {len(self.candidates)}]"
            )
        object.__setattr__(self, "dimension", d)
        object.__setattr__(self, "budget", int(self.budget))
        object.__setattr__(self, "cutoff", float(self.cutoff))

    @property
    def n_positions(self) -> int:
        return len(self.positions)

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    def prior_means(self) -> np.ndarray:
        return np.array([p.prior_mean for p in self.positions])

    def candidate_positions(self) -> np.ndarray:
        return np.array([c.position for c in self.candidates])


@dataclass(frozen=True)
class MeasurementGraph:
    """Bipartite adjacency between positions and beacons within the cutoff.

    ``neighbourhood[i]`` is the sorted tuple of beacon ids measurable from
    position ``i``; ``edge_variance[(i, j)]`` is that edge's noise variance.
    """

    n_positions: int
    n_candidates: int
    neighbourhood: dict
    edge_variance: dict

    def edges(self) -> list:
        return sorted(self.edge_variance.keys())

    @property
    def n_edges(self) -> int:
        return len(self.edge_variance)

    def beacon_degree(self, beacon_id: int) -> int:
        return sum(1 for ids in self.neighbourhood.values() if beacon_id in ids)

    def beacon_degrees(self) -> dict:
        degrees = {j: 0 for j in range(1, self.n_candidates + 1)}
        for ids in self.neighbourhood.values():
            for j in ids:
                degrees[j] += 1
        return degrees

    def subgraph(self, beacon_ids) -> "MeasurementGraph":
        """Restriction to the given beacons; everything else is dropped."""
        keep = set(int(j) for j in beacon_ids)
        neigh = {
            i: tuple(j for j in ids if j in keep)
            for i, ids in self.neighbourhood.items()
        }
        variance = {(i, j): v for (i, j), v in self.edge_variance.items() if j in keep}
        return MeasurementGraph(self.n_positions, self.n_candidates, neigh, variance)


@dataclass(frozen=True)
class MeasurementSet:
    """Sampled ground truth and one noisy range per graph edge."""

    ground_truth: np.ndarray
    ranges: dict

    @property
    def n_edges(self) -> int:
        return len(self.ranges)


def build_graph(scenario: Scenario, truth=None) -> MeasurementGraph:
    """Connect each position to every candidate within the cutoff radius.

    The edge-defining point is the ground truth when ``truth`` is given
    (what physically limits the radio at simulation time) and the prior
    mean otherwise (design-time planning).  Coincident position/beacon
    pairs are dropped with a warning.
    """
    if truth is None:
        points = scenario.prior_means()
    else:
        points = np.asarray(truth, dtype=float)
        if points.shape != (scenario.n_positions, scenario.dimension):
            raise ScenarioError(
                f"truth shape {points.shape} does not match scenario "
                f"({scenario.n_positions}, {scenario.dimension})"
            )
    sites = scenario.candidate_positions()
    if sites.size and sites.shape[1] != points.shape[1]:
        raise ScenarioError("positions and candidates have mismatched dimensions")

    # all-pairs distances; n*m stays small in practice
    diff = points[:, None, :] - sites[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))

    neighbourhood = {}
    edge_variance = {}
    for i in range(scenario.n_positions):
        ids = []
        for idx in range(scenario.n_candidates):
            j = scenario.candidates[idx].id
            r = dist[i, idx]
            if r > scenario.cutoff:
                continue
            if r < DEGENERATE_RANGE:
                warnings.warn(
                    f"dropping degenerate edge ({i}, {j}): position and beacon coincide",
                    stacklevel=2,
                )
                continue
            ids.append(j)
            edge_variance[(i, j)] = scenario.noise.variance(i, j)
        neighbourhood[i] = tuple(sorted(ids))
    return MeasurementGraph(
        scenario.n_positions, scenario.n_candidates, neighbourhood, edge_variance
    )


def sample_ground_truth(scenario: Scenario, seed: int) -> np.ndarray:
    """Draw one ground truth position per prior, deterministically in seed."""
    rng = stream(seed, "ground-truth")
    out = np.empty((scenario.n_positions, scenario.dimension))
    for i, spec in enumerate(scenario.positions):
        chol = np.linalg.cholesky(spec.prior_covariance)
        out[i] = spec.prior_mean + chol @ rng.standard_normal(scenario.dimension)
    return out


def sample_measurements(
    graph: MeasurementGraph, truth, candidates, seed: int
) -> MeasurementSet:
    """Draw one noisy range per edge: true distance plus N(0, variance)."""
    truth = np.asarray(truth, dtype=float)
    if truth.shape[0] != graph.n_positions:
        raise ScenarioError(
            f"truth has {truth.shape[0]} rows, graph expects {graph.n_positions}"
        )
    sites = {c.id: c.position for c in candidates}
    rng = stream(seed, "ranges")
    ranges = {}
    for (i, j) in graph.edges():
        true_range = float(np.linalg.norm(truth[i] - sites[j]))
        sigma = math.sqrt(graph.edge_variance[(i, j)])
        ranges[(i, j)] = true_range + sigma * rng.standard_normal()
    return MeasurementSet(ground_truth=_readonly(truth), ranges=ranges)


# ---------------------------------------------------------------------------
# Serialization


def scenario_to_dict(scenario: Scenario) -> dict:
    cutoff = scenario.cutoff
    noise = {"mode": scenario.noise.mode, "constant_variance": scenario.noise.constant_variance}
    if scenario.noise.table:
        noise["table"] = [
            [i, j, v] for (i, j), v in sorted(scenario.noise.table.items())
        ]
    return {
        "dimension": scenario.dimension,
        "budget": scenario.budget,
        "cutoff": None if math.isinf(cutoff) else cutoff,
        "noise": noise,
        "positions": [
            {
                "mean": p.prior_mean.tolist(),
                "covariance": p.prior_covariance.tolist(),
            }
            for p in scenario.positions
        ],
        "candidates": [
            {"id": c.id, "position": c.position.tolist()} for c in scenario.candidates
        ],
    }


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ScenarioError(f"missing field {where}{key}")
    return data[key]


def scenario_from_dict(data: dict) -> Scenario:
    dimension = _require(data, "dimension", "")
    budget = _require(data, "budget", "")
    cutoff = _require(data, "cutoff", "")
    if cutoff is None:
        cutoff = math.inf
    noise_data = _require(data, "noise", "")
    table = {}
    for entry in noise_data.get("table", []):
        if len(entry) != 3:
            raise ScenarioError("noise.table entries must be [i, j, variance] triples")
        table[(entry[0], entry[1])] = entry[2]
    noise = NoiseModel(
        mode=_require(noise_data, "mode", "noise."),
        constant_variance=_require(noise_data, "constant_variance", "noise."),
        table=table,
    )
    positions = []
    for idx, p in enumerate(_require(data, "positions", "")):
        where = f"positions[{idx}]."
        try:
            positions.append(
                PositionSpec(
                    prior_mean=_require(p, "mean", where),
                    prior_covariance=_require(p, "covariance", where),
                )
            )
        except ScenarioError as exc:
            raise ScenarioError(f"positions[{idx}]: {exc}") from exc
    candidates = []
    for idx, c in enumerate(_require(data, "candidates", "")):
        where = f"candidates[{idx}]."
        candidates.append(
            BeaconCandidate(
                id=_require(c, "id", where), position=_require(c, "position", where)
            )
        )
    return Scenario(
        dimension=dimension,
        positions=tuple(positions),
        candidates=tuple(candidates),
        noise=noise,
        cutoff=cutoff,
        budget=budget,
    )


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_measurements_csv(measurements: MeasurementSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "range"])
        for (i, j) in sorted(measurements.ranges):
            writer.writerow([i, j, repr(measurements.ranges[(i, j)])])


def load_measurements_csv(path) -> dict:
    ranges = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ranges[(int(row["i"]), int(row["j"]))] = float(row["range"])
    return ranges
