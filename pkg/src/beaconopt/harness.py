"""Experiment orchestration: trial generation, algorithm comparison,
RMSE/runtime statistics and CSV/JSON exports.

A trial is one realization of (ground truth, candidate sites if
resampling, noisy measurements).  Every algorithm in a trial sees the
identical realization, so per-trial comparisons are paired.  All
randomness derives from the master seed keyed by (setting, trial,
purpose); adding or removing an algorithm never changes another's inputs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .cmaes import EsConfig, cmaes_select
from .information import evaluate_subset, init_state
from .localization import map_solve, rmse
from .rng import derive_seed, stream
from .scenario import (
    BeaconCandidate,
    NoiseModel,
    PositionSpec,
    Scenario,
    ScenarioError,
    build_graph,
    load_scenario,
    sample_ground_truth,
    sample_measurements,
)
from .selection import (
    ALGORITHMS,
    BRUTE_FORCE_CAP,
    brute_force_select,
    certify_bound,
    coverage_greedy_select,
    greedy_select,
    measurement_greedy_select,
    random_select,
)

DEFAULT_ALGORITHMS = ("random", "greedy", "measurement_greedy", "coverage_greedy")

RECORD_FIELDS = (
    "setting",
    "trial",
    "algorithm",
    "k",
    "cutoff",
    "prior_sigma",
    "f_norm",
    "rmse_m",
    "runtime_s",
    "converged_all",
)

SUMMARY_FIELDS = (
    "setting",
    "algorithm",
    "rmse_mean_m",
    "rmse_std_m",
    "runtime_mean_s",
    "runtime_std_s",
    "trials",
)

TRACE_FIELDS = ("setting", "trial", "algorithm", "step", "f_norm")


# ---------------------------------------------------------------------------
# Synthetic scenario generation


def _trajectory_waypoints(kind: str, dimension: int) -> np.ndarray:
    """Waypoints in the unit box; scaled by the extent afterwards."""
    if kind == "line":
        pts = np.linspace([0.1] * dimension, [0.9] * dimension, 2)
        return np.asarray(pts)
    if dimension < 2:
        raise ScenarioError(f"trajectory {kind!r} needs dimension >= 2")
    if kind == "serpentine":
        xy = [
            (0.08, 0.12), (0.92, 0.12), (0.92, 0.37), (0.08, 0.37),
            (0.08, 0.63), (0.92, 0.63), (0.92, 0.88), (0.08, 0.88),
        ]
    elif kind == "loop":
        xy = [(0.15, 0.15), (0.85, 0.15), (0.85, 0.85), (0.15, 0.85), (0.15, 0.15)]
    else:
        raise ScenarioError(f"unknown trajectory kind {kind!r}")
    pts = np.zeros((len(xy), dimension))
    pts[:, 0] = [p[0] for p in xy]
    pts[:, 1] = [p[1] for p in xy]
    if dimension > 2:
        # ramp the extra axes along the path so 3D instances are not planar
        for axis in range(2, dimension):
            pts[:, axis] = np.linspace(0.2, 0.8, len(xy))
    return pts


def _resample_polyline(waypoints: np.ndarray, n: int) -> np.ndarray:
    seg = np.diff(waypoints, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    targets = np.linspace(0.0, cum[-1], n)
    out = np.empty((n, waypoints.shape[1]))
    for idx, t in enumerate(targets):
        s = min(np.searchsorted(cum, t, side="right") - 1, len(lengths) - 1)
        frac = 0.0 if lengths[s] == 0 else (t - cum[s]) / lengths[s]
        out[idx] = waypoints[s] + frac * seg[s]
    return out


def generate_synthetic_scenario(
    n: int,
    m: int,
    d: int,
    extent,
    trajectory_kind: str,
    seed: int,
    prior_sigma: float = 8.0,
    budget: int = 5,
    cutoff: float = 250.0,
    noise_variance: float = 25.0,
) -> Scenario:
    """Factory-style instance: a piecewise-linear route across the extent
    box with uniformly placed candidate sites.

    ``prior_sigma`` is the isotropic prior variance (m^2) shared by all
    positions; ``extent`` is a scalar or per-axis box size in meters.
    """
    extent = np.broadcast_to(np.atleast_1d(np.asarray(extent, dtype=float)), (d,))
    if np.any(extent <= 0):
        raise ScenarioError("extent must be positive")
    waypoints = _trajectory_waypoints(trajectory_kind, d) * extent
    means = _resample_polyline(waypoints, n)
    rng = stream(seed, "synthetic-candidates")
    sites = rng.uniform(np.zeros(d), extent, size=(m, d))
    positions = tuple(PositionSpec(mean, float(prior_sigma)) for mean in means)
    candidates = tuple(
        BeaconCandidate(j + 1, sites[j]) for j in range(m)
    )
    return Scenario(
        dimension=d,
        positions=positions,
        candidates=candidates,
        noise=NoiseModel("constant", float(noise_variance)),
        cutoff=float(cutoff),
        budget=int(budget),
    )


def candidate_box(scenario: Scenario):
    sites = scenario.candidate_positions()
    return sites.min(axis=0), sites.max(axis=0)


def resample_candidates(scenario: Scenario, low, high, seed: int) -> Scenario:
    """Fresh uniform candidate sites in [low, high], same everything else."""
    rng = stream(seed, "synthetic-candidates")
    sites = rng.uniform(np.asarray(low, float), np.asarray(high, float),
                        size=(scenario.n_candidates, scenario.dimension))
    candidates = tuple(
        BeaconCandidate(j + 1, sites[j]) for j in range(scenario.n_candidates)
    )
    return replace(scenario, candidates=candidates)


def apply_overrides(
    scenario: Scenario, budget=None, cutoff=None, prior_sigma=None
) -> Scenario:
    """Copy of the scenario with swept parameters replaced.  Overriding
    ``prior_sigma`` resets every prior to that isotropic variance."""
    changes = {}
    if budget is not None:
        changes["budget"] = int(budget)
    if cutoff is not None:
        changes["cutoff"] = float(cutoff)
    if prior_sigma is not None:
        changes["positions"] = tuple(
            PositionSpec(p.prior_mean, float(prior_sigma)) for p in scenario.positions
        )
    return replace(scenario, **changes) if changes else scenario


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SyntheticSpec:
    """Generation parameters for the synthetic environment."""

    n: int = 30
    m: int = 50
    dimension: int = 2
    extent: tuple = (400.0, 300.0)
    trajectory: str = "serpentine"
    prior_sigma: float = 8.0
    budget: int = 5
    cutoff: float = 250.0
    noise_variance: float = 25.0

    def with_overrides(self, overrides: dict) -> "SyntheticSpec":
        allowed = {"budget", "cutoff", "prior_sigma"}
        unknown = set(overrides) - allowed
        if unknown:
            raise ScenarioError(f"unknown sweep override keys {sorted(unknown)}")
        return replace(self, **overrides)


@dataclass(frozen=True)
class SweepSetting:
    name: str
    overrides: dict = field(default_factory=dict)


def default_sweep() -> list:
    """Baseline plus one-at-a-time budget/cutoff/prior sweeps."""
    sweep = [SweepSetting("baseline", {})]
    sweep += [SweepSetting(f"K-{k}", {"budget": k}) for k in (10, 15)]
    sweep += [SweepSetting(f"C-{c}", {"cutoff": float(c)}) for c in (150, 300, 450)]
    sweep += [
        SweepSetting(f"sigma-{s}", {"prior_sigma": float(s)}) for s in (5, 10, 15)
    ]
    return sweep


@dataclass
class ExperimentConfig:
    base: SyntheticSpec | None = None
    scenario_path: str | None = None
    sweep: list = field(default_factory=lambda: [SweepSetting("baseline", {})])
    trials: int = 50
    algorithms: tuple = DEFAULT_ALGORITHMS
    master_seed: int = 0
    resample_candidates: bool = True
    fim_mode: str = "expected"
    brute_force_cap: int = BRUTE_FORCE_CAP
    es: EsConfig = field(default_factory=EsConfig)
    deterministic_timing: bool = False

    def __post_init__(self):
        if self.base is None and self.scenario_path is None:
            self.base = SyntheticSpec()
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")
        self.algorithms = tuple(self.algorithms)
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ScenarioError(f"unknown algorithms {sorted(unknown)}")
        names = [s.name for s in self.sweep]
        if len(set(names)) != len(names):
            raise ScenarioError("sweep setting names must be unique")
        for setting in self.sweep:
            for key, value in setting.overrides.items():
                if key in ("budget", "cutoff", "prior_sigma") and not value > 0:
                    raise ScenarioError(f"sweep override {key} must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs = {}
        if data.get("base") is not None:
            base = dict(data["base"])
            if "extent" in base:
                base["extent"] = tuple(np.atleast_1d(base["extent"]).tolist())
            kwargs["base"] = SyntheticSpec(**base)
        if data.get("scenario_path") is not None:
            kwargs["scenario_path"] = data["scenario_path"]
        if "sweep" in data:
            kwargs["sweep"] = [
                SweepSetting(entry["name"], dict(entry.get("overrides", {})))
                for entry in data["sweep"]
            ]
        for key in (
            "trials",
            "master_seed",
            "resample_candidates",
            "fim_mode",
            "brute_force_cap",
            "deterministic_timing",
        ):
            if key in data:
                kwargs[key] = data[key]
        if "algorithms" in data:
            kwargs["algorithms"] = tuple(data["algorithms"])
        if "es" in data:
            kwargs["es"] = EsConfig(**data["es"])
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# Trials


@dataclass
class AlgorithmOutcome:
    algorithm: str
    selected: list = field(default_factory=list)
    f_norm: float = float("nan")
    rmse_m: float = float("nan")
    runtime_s: float = float("nan")
    evaluations: int = 0
    converged_all: bool = False
    trace: list = field(default_factory=list)
    error: str | None = None


@dataclass
class TrialRecord:
    setting: str
    trial: int
    k: int
    cutoff: float
    prior_sigma: float
    outcomes: dict


def _mean_prior_variance(scenario: Scenario) -> float:
    return float(np.mean(np.diag(scenario.positions[0].prior_covariance)))


def run_trial(
    scenario: Scenario,
    trial_seed: int,
    algorithms=DEFAULT_ALGORITHMS,
    fim_mode: str = "expected",
    es_config: EsConfig | None = None,
    brute_force_cap: int = BRUTE_FORCE_CAP,
    setting: str = "adhoc",
    trial: int = 0,
) -> TrialRecord:
    """One realization, every algorithm on the identical instance.

    Selection wall time excludes the MAP solve; a per-algorithm failure is
    recorded on its outcome instead of aborting the trial.
    """
    truth = sample_ground_truth(scenario, derive_seed(trial_seed, "truth"))
    graph = build_graph(scenario, truth)
    measurements = sample_measurements(
        graph, truth, scenario.candidates, derive_seed(trial_seed, "measure")
    )
    design_state = init_state(scenario, graph, truth, measurements, fim_mode)
    k = scenario.budget
    outcomes = {}
    for name in algorithms:
        outcome = AlgorithmOutcome(algorithm=name)
        try:
            if name == "greedy":
                result = greedy_select(design_state, graph, k)
            elif name == "brute_force":
                result = brute_force_select(design_state, graph, k, brute_force_cap)
            elif name == "measurement_greedy":
                result = measurement_greedy_select(graph, k)
            elif name == "coverage_greedy":
                result = coverage_greedy_select(graph, k)
            elif name == "random":
                result = random_select(graph, k, derive_seed(trial_seed, "random"))
            elif name == "cmaes":
                es = replace(
                    es_config or EsConfig(), seed=derive_seed(trial_seed, "cmaes")
                )
                result = cmaes_select(scenario, graph, design_state, k, es)
            else:
                raise ValueError(f"unknown algorithm {name!r}")
            outcome.selected = list(result.selected)
            outcome.runtime_s = result.wall_time
            outcome.evaluations = result.evaluations
            outcome.trace = list(result.objective_trace)
            outcome.f_norm = evaluate_subset(design_state, result.selected)
            solution = map_solve(
                scenario, graph.subgraph(result.selected), measurements
            )
            outcome.rmse_m = rmse(solution.estimates, truth)
            outcome.converged_all = bool(all(solution.converged))
        except Exception as exc:  # captured per-algorithm, trial continues
            outcome.error = f"{type(exc).__name__}: {exc}"
        outcomes[name] = outcome
    return TrialRecord(
        setting=setting,
        trial=trial,
        k=k,
        cutoff=scenario.cutoff,
        prior_sigma=_mean_prior_variance(scenario),
        outcomes=outcomes,
    )


# ---------------------------------------------------------------------------
# Experiment runner


def _setting_scenario(config: ExperimentConfig, setting: SweepSetting, trial: int):
    if config.base is not None:
        spec = config.base.with_overrides(setting.overrides)
        if config.resample_candidates:
            gen_seed = derive_seed(config.master_seed, setting.name, trial, "candidates")
        else:
            gen_seed = derive_seed(config.master_seed, setting.name, "candidates")
        return generate_synthetic_scenario(
            spec.n, spec.m, spec.dimension, spec.extent, spec.trajectory,
            gen_seed, spec.prior_sigma, spec.budget, spec.cutoff,
            spec.noise_variance,
        )
    scenario = load_scenario(config.scenario_path)
    scenario = apply_overrides(scenario, **setting.overrides)
    if config.resample_candidates:
        low, high = candidate_box(scenario)
        gen_seed = derive_seed(config.master_seed, setting.name, trial, "candidates")
        scenario = resample_candidates(scenario, low, high, gen_seed)
    return scenario


def _record_rows(record: TrialRecord, algorithms, deterministic_timing: bool):
    rows = []
    for name in algorithms:
        outcome = record.outcomes[name]
        rows.append(
            {
                "setting": record.setting,
                "trial": record.trial,
                "algorithm": name,
                "k": record.k,
                "cutoff": record.cutoff,
                "prior_sigma": record.prior_sigma,
                "f_norm": outcome.f_norm,
                "rmse_m": outcome.rmse_m,
                "runtime_s": 0.0 if deterministic_timing else outcome.runtime_s,
                "converged_all": outcome.converged_all,
            }
        )
    return rows


@dataclass
class ExperimentRun:
    records: list  # row dicts in RECORD_FIELDS order
    summary: list  # row dicts in SUMMARY_FIELDS order
    traces: list  # row dicts in TRACE_FIELDS order
    failures: int


def run_experiment(
    config: ExperimentConfig, out_dir=None, resume: bool = True, fmt: str = "csv"
) -> ExperimentRun:
    """Execute trials x settings x algorithms and aggregate statistics.

    With ``out_dir`` set, writes records/summary (and traces) files there;
    completed (setting, trial) pairs found in an existing records file are
    skipped, so interrupted runs resume where they stopped.
    """
    existing = {}
    records_path = os.path.join(out_dir, "records.csv") if out_dir else None
    if resume and records_path and os.path.exists(records_path):
        for row in _read_records_csv(records_path):
            existing.setdefault((row["setting"], row["trial"]), {})[
                row["algorithm"]
            ] = row

    rows = []
    traces = []
    failures = 0
    for setting in config.sweep:
        for trial in range(config.trials):
            have = existing.get((setting.name, trial), {})
            reusable = all(
                name in have and math.isfinite(have[name]["rmse_m"])
                for name in config.algorithms
            )
            if reusable:
                rows.extend(have[name] for name in config.algorithms)
                continue
            scenario = _setting_scenario(config, setting, trial)
            trial_seed = derive_seed(config.master_seed, setting.name, trial, "trial")
            record = run_trial(
                scenario,
                trial_seed,
                config.algorithms,
                config.fim_mode,
                config.es,
                config.brute_force_cap,
                setting=setting.name,
                trial=trial,
            )
            failures += sum(
                1 for o in record.outcomes.values() if o.error is not None
            )
            rows.extend(_record_rows(record, config.algorithms, config.deterministic_timing))
            for name in config.algorithms:
                for step, value in enumerate(record.outcomes[name].trace):
                    traces.append(
                        {
                            "setting": setting.name,
                            "trial": trial,
                            "algorithm": name,
                            "step": step,
                            "f_norm": value,
                        }
                    )
    summary = summarize(rows, config)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        export("records", rows, os.path.join(out_dir, f"records.{fmt}"), fmt)
        export("summary", summary, os.path.join(out_dir, f"summary.{fmt}"), fmt)
        if fmt != "json":
            export("summary", summary, os.path.join(out_dir, "summary.json"), "json")
        if traces:
            export("traces", traces, os.path.join(out_dir, f"traces.{fmt}"), fmt)
    return ExperimentRun(rows, summary, traces, failures)


def summarize(rows, config: ExperimentConfig | None = None) -> list:
    """Per (setting, algorithm) RMSE/runtime statistics over finite rows.

    Sample standard deviation; a single trial reports std 0.  Cells with
    fewer completed trials than requested keep their reduced count, which
    flags partial failures.
    """
    groups = {}
    order = []
    for row in rows:
        key = (row["setting"], row["algorithm"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        if math.isfinite(row["rmse_m"]):
            groups[key].append(row)
    summary = []
    for setting, algorithm in order:
        good = groups[(setting, algorithm)]
        count = len(good)
        rmses = np.array([r["rmse_m"] for r in good])
        times = np.array([r["runtime_s"] for r in good])
        summary.append(
            {
                "setting": setting,
                "algorithm": algorithm,
                "rmse_mean_m": float(np.mean(rmses)) if count else float("nan"),
                "rmse_std_m": float(np.std(rmses, ddof=1)) if count > 1 else 0.0,
                "runtime_mean_s": float(np.mean(times)) if count else float("nan"),
                "runtime_std_s": float(np.std(times, ddof=1)) if count > 1 else 0.0,
                "trials": count,
            }
        )
    return summary


# ---------------------------------------------------------------------------
# Bound certification


def certification_report(
    n: int = 10,
    m: int = 20,
    d: int = 3,
    k_values=tuple(range(1, 8)),
    instances: int = 100,
    seed: int = 0,
    fim_mode: str = "expected",
    extent=(100.0, 100.0, 50.0),
    prior_sigma: float = 8.0,
) -> dict:
    """Greedy vs brute force over random instances: suboptimality ratios.

    Small scales only; C(m, max k) subsets are enumerated per instance.
    """
    results = []
    for inst in range(instances):
        scenario = generate_synthetic_scenario(
            n, m, d, extent, "serpentine",
            derive_seed(seed, "certify", inst),
            prior_sigma=prior_sigma, budget=max(k_values),
            cutoff=float("inf"), noise_variance=25.0,
        )
        trial_seed = derive_seed(seed, "certify-trial", inst)
        truth = sample_ground_truth(scenario, derive_seed(trial_seed, "truth"))
        graph = build_graph(scenario, truth)
        measurements = sample_measurements(
            graph, truth, scenario.candidates, derive_seed(trial_seed, "measure")
        )
        state = init_state(scenario, graph, truth, measurements, fim_mode)
        for k in k_values:
            greedy = greedy_select(state, graph, k)
            brute = brute_force_select(state, graph, k)
            cert = certify_bound(greedy, brute)
            results.append(
                {
                    "instance": inst,
                    "k": int(k),
                    "greedy_f_norm": greedy.f_norm,
                    "brute_f_norm": brute.f_norm,
                    "ratio": cert["ratio"],
                    "holds": cert["holds"],
                    "optimal": bool(
                        greedy.f_norm
                        >= brute.f_norm - 1e-9 * max(1.0, abs(brute.f_norm))
                    ),
                }
            )
    ratios = [r["ratio"] for r in results]
    return {
        "instances": instances,
        "k_values": [int(k) for k in k_values],
        "cases": len(results),
        "bound_holds_all": bool(all(r["holds"] for r in results)),
        "min_ratio": min(ratios) if ratios else 1.0,
        "optimal_fraction": (
            sum(1 for r in results if r["optimal"]) / len(results) if results else 1.0
        ),
        "results": results,
    }


# ---------------------------------------------------------------------------
# Export

_FIELD_ORDERS = {
    "records": RECORD_FIELDS,
    "summary": SUMMARY_FIELDS,
    "traces": TRACE_FIELDS,
}


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export(kind: str, rows, path, fmt: str = "csv") -> None:
    """Write rows of one payload kind; output bytes depend only on rows."""
    if kind not in _FIELD_ORDERS:
        raise ValueError(f"unknown export kind {kind!r}")
    fields = _FIELD_ORDERS[kind]
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(fields)
                for row in rows:
                    writer.writerow([_format_cell(row[f]) for f in fields])
        elif fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(
                    [{f: row[f] for f in fields} for row in rows],
                    fh, indent=2, sort_keys=True,
                )
                fh.write("\n")
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_records_csv(path) -> list:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append(
                {
                    "setting": raw["setting"],
                    "trial": int(raw["trial"]),
                    "algorithm": raw["algorithm"],
                    "k": int(raw["k"]),
                    "cutoff": float(raw["cutoff"]),
                    "prior_sigma": float(raw["prior_sigma"]),
                    "f_norm": float(raw["f_norm"]),
                    "rmse_m": float(raw["rmse_m"]),
                    "runtime_s": float(raw["runtime_s"]),
                    "converged_all": raw["converged_all"] == "True",
                }
            )
    return rows


def read_records(path) -> list:
    """Load a records CSV back into row dicts (inverse of export)."""
    return _read_records_csv(path)
