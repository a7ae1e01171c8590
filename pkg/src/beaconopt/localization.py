"""Position estimation from selected-beacon range measurements.

Each position is an independent small nonlinear least squares problem:
a Gaussian prior term (MAP only) plus one squared range residual per
incident measurement.  Problems are solved by Newton iteration with an
adaptive Levenberg shift, since the exact Hessian of the range term is
indefinite far from the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import MeasurementGraph, MeasurementSet, Scenario

_DAMPING_MODES = ("none", "adaptive-levenberg")
_LAMBDA_INIT = 1e-3
_LAMBDA_MAX = 1e12
_PERTURB = 1e-6


@dataclass
class SolveOptions:
    gradient_tolerance: float = 1e-9
    step_tolerance: float = 1e-12
    max_iterations: int = 100
    damping: str = "adaptive-levenberg"

    def __post_init__(self):
        if self.gradient_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.damping not in _DAMPING_MODES:
            raise ValueError(f"damping must be one of {_DAMPING_MODES}")


@dataclass
class LocalizationResult:
    estimates: np.ndarray
    converged: list
    iterations: list
    final_gradient_norms: list
    status: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimates": self.estimates.tolist(),
            "converged": list(self.converged),
            "iterations": list(self.iterations),
            "final_gradient_norms": list(self.final_gradient_norms),
            "status": list(self.status),
        }


def incident_measurements(
    graph: MeasurementGraph, measurements: MeasurementSet, candidates, i: int
):
    """Anchor positions, measured ranges and variances incident to position i."""
    sites = {c.id: c.position for c in candidates}
    ids = graph.neighbourhood.get(i, ())
    if not ids:
        d = next(iter(sites.values())).shape[0] if sites else 0
        return np.zeros((0, d)), np.zeros(0), np.ones(0)
    anchors = np.array([sites[j] for j in ids], dtype=float)
    ranges = np.array([measurements.ranges[(i, j)] for j in ids], dtype=float)
    variances = np.array([graph.edge_variance[(i, j)] for j in ids], dtype=float)
    return anchors, ranges, variances


def map_objective(x, position_spec, anchors, ranges, variances) -> float:
    """Prior Mahalanobis term plus weighted squared range residuals."""
    x = np.asarray(x, dtype=float)
    delta = x - position_spec.prior_mean
    value = float(delta @ np.linalg.solve(position_spec.prior_covariance, delta))
    value += _range_objective(x, anchors, ranges, variances)
    return value


def _range_objective(x, anchors, ranges, variances) -> float:
    if len(ranges) == 0:
        return 0.0
    dists = np.linalg.norm(x - anchors, axis=1)
    res = dists - ranges
    return float(np.sum(res * res / variances))


def _terms(x, prior, anchors, ranges, variances):
    """Objective, gradient and Hessian of the (optionally MAP) problem.

    ``prior`` is (inverse covariance, mean) or None for the MLE problem.
    """
    d = x.shape[0]
    f = 0.0
    g = np.zeros(d)
    H = np.zeros((d, d))
    if prior is not None:
        P, mean = prior
        delta = x - mean
        f += float(delta @ P @ delta)
        g += 2.0 * P @ delta
        H += 2.0 * P
    if len(ranges):
        diffs = x - anchors
        dists = np.linalg.norm(diffs, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            units = diffs / dists[:, None]
            res = dists - ranges
            w = 2.0 / variances
            f += float(np.sum(0.5 * w * res * res))
            g += (w * res) @ units
            eye = np.eye(d)
            for t in range(len(ranges)):
                uu = np.outer(units[t], units[t])
                H += w[t] * (uu + (res[t] / dists[t]) * (eye - uu))
    return f, g, H


def _solve_single(x0, prior, anchors, ranges, variances, options):
    x = np.array(x0, dtype=float)
    lam = _LAMBDA_INIT if options.damping == "adaptive-levenberg" else 0.0
    f, g, H = _terms(x, prior, anchors, ranges, variances)
    iterations = 0
    status = "max_iterations"
    converged = False
    for _ in range(options.max_iterations):
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            # coincident anchor: nudge off the singularity and retry
            x = x + _PERTURB / math.sqrt(x.shape[0])
            f, g, H = _terms(x, prior, anchors, ranges, variances)
            iterations += 1
            continue
        gnorm = float(np.linalg.norm(g))
        if gnorm <= options.gradient_tolerance:
            converged, status = True, "converged"
            break
        iterations += 1
        accepted = False
        while True:
            try:
                step = np.linalg.solve(H + lam * np.eye(x.shape[0]), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = x + step
                f_trial = _objective_only(trial, prior, anchors, ranges, variances)
                if options.damping == "none" or (
                    np.isfinite(f_trial) and f_trial <= f
                ):
                    accepted = True
                    break
            if options.damping == "none":
                break
            lam = max(lam, 1e-12) * 10.0
            if lam > _LAMBDA_MAX:
                break
        if not accepted:
            status = "stalled"
            break
        x = trial
        f = f_trial
        if options.damping == "adaptive-levenberg":
            lam = max(lam / 3.0, 1e-15)
        f, g, H = _terms(x, prior, anchors, ranges, variances)
        if float(np.linalg.norm(step)) <= options.step_tolerance:
            converged, status = True, "converged"
            break
    else:
        status = "max_iterations"
    gnorm = float(np.linalg.norm(g)) if np.all(np.isfinite(g)) else float("inf")
    if not converged and gnorm <= options.gradient_tolerance:
        converged, status = True, "converged"
    return x, converged, iterations, gnorm, status


def _objective_only(x, prior, anchors, ranges, variances) -> float:
    f = 0.0
    if prior is not None:
        P, mean = prior
        delta = x - mean
        f += float(delta @ P @ delta)
    if len(ranges):
        dists = np.linalg.norm(x - anchors, axis=1)
        res = dists - ranges
        f += float(np.sum(res * res / variances))
    return f


def map_solve(
    scenario: Scenario,
    graph: MeasurementGraph,
    measurements: MeasurementSet,
    init=None,
    options: SolveOptions | None = None,
) -> LocalizationResult:
    """Per-position MAP estimation on the given (possibly restricted) graph.

    ``init`` defaults to the sampled ground truth, which avoids the local
    minima of the nonconvex range terms.  A position with no incident
    measurements has the prior mean as its exact optimum and is returned
    in closed form.
    """
    options = options or SolveOptions()
    if init is None:
        init = measurements.ground_truth
    init = np.asarray(init, dtype=float)
    if init.shape != (scenario.n_positions, scenario.dimension):
        raise ValueError("init has wrong shape")
    estimates = np.empty_like(init)
    converged, iterations, gnorms, status = [], [], [], []
    for i, spec in enumerate(scenario.positions):
        anchors, ranges, variances = incident_measurements(
            graph, measurements, scenario.candidates, i
        )
        if len(ranges) == 0:
            estimates[i] = spec.prior_mean
            converged.append(True)
            iterations.append(0)
            gnorms.append(0.0)
            status.append("converged")
            continue
        prior = (np.linalg.inv(spec.prior_covariance), spec.prior_mean)
        x, ok, its, gn, st = _solve_single(
            init[i], prior, anchors, ranges, variances, options
        )
        estimates[i] = x
        converged.append(ok)
        iterations.append(its)
        gnorms.append(gn)
        status.append(st)
    return LocalizationResult(estimates, converged, iterations, gnorms, status)


def mle_solve(
    scenario: Scenario,
    graph: MeasurementGraph,
    measurements: MeasurementSet,
    init=None,
    options: SolveOptions | None = None,
) -> LocalizationResult:
    """Prior-free estimation; positions with fewer than d measurements are
    flagged underdetermined and left at their initialization."""
    options = options or SolveOptions()
    if init is None:
        init = measurements.ground_truth
    init = np.asarray(init, dtype=float)
    if init.shape != (scenario.n_positions, scenario.dimension):
        raise ValueError("init has wrong shape")
    estimates = np.empty_like(init)
    converged, iterations, gnorms, status = [], [], [], []
    for i in range(scenario.n_positions):
        anchors, ranges, variances = incident_measurements(
            graph, measurements, scenario.candidates, i
        )
        if len(ranges) < scenario.dimension:
            estimates[i] = init[i]
            converged.append(False)
            iterations.append(0)
            gnorms.append(float("inf"))
            status.append("underdetermined")
            continue
        x, ok, its, gn, st = _solve_single(
            init[i], None, anchors, ranges, variances, options
        )
        estimates[i] = x
        converged.append(ok)
        iterations.append(its)
        gnorms.append(gn)
        status.append(st)
    return LocalizationResult(estimates, converged, iterations, gnorms, status)


def rmse(estimates, ground_truth) -> float:
    """Root mean squared position error over all positions."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(ground_truth, dtype=float)
    if estimates.shape != truth.shape or estimates.shape[0] < 1:
        raise ValueError(
            f"shape mismatch: estimates {estimates.shape} vs truth {truth.shape}"
        )
    err = estimates - truth
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))
