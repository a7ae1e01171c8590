"""Command line interface.

Subcommands: ``generate`` (emit a scenario file), ``select`` (run one
algorithm on one scenario), ``localize`` (MAP-solve a selection),
``experiment`` (full sweep to CSV/JSON), ``certify`` (greedy-vs-brute
bound report).  Exit codes: 0 success, 2 configuration error, 3 partial
experiment failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .cmaes import EsConfig, cmaes_select
from .information import evaluate_subset, init_state
from .localization import map_solve, rmse
from .rng import derive_seed
from .scenario import (
    ScenarioError,
    build_graph,
    load_scenario,
    sample_ground_truth,
    sample_measurements,
    save_scenario,
)
from .selection import (
    brute_force_select,
    coverage_greedy_select,
    greedy_select,
    measurement_greedy_select,
    random_select,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _write_json(payload, path):
    if path is None or path == "-":
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _add_generate(sub):
    p = sub.add_parser("generate", help="emit a synthetic scenario JSON file")
    p.add_argument("--n", type=int, default=30, help="number of positions")
    p.add_argument("--m", type=int, default=50, help="number of candidate beacons")
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--extent", type=float, nargs="+", default=[400.0, 300.0])
    p.add_argument(
        "--trajectory", default="serpentine", choices=["serpentine", "line", "loop"]
    )
    p.add_argument("--prior-sigma", type=float, default=8.0,
                   help="isotropic prior variance (m^2)")
    p.add_argument("--budget", type=int, default=5)
    p.add_argument("--cutoff", type=float, default=250.0)
    p.add_argument("--noise-variance", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _add_select(sub):
    p = sub.add_parser("select", help="run one selection algorithm on a scenario")
    p.add_argument("scenario")
    p.add_argument(
        "--algorithm",
        default="greedy",
        choices=[
            "greedy", "brute_force", "measurement_greedy",
            "coverage_greedy", "random", "cmaes",
        ],
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fim-mode", default="expected", choices=["expected", "one-sample"])
    p.add_argument("--k", type=int, default=None, help="override the scenario budget")
    p.add_argument("--es-max-evaluations", type=int, default=4000)
    p.add_argument("--out", default="-")


def _add_localize(sub):
    p = sub.add_parser("localize", help="MAP-solve positions for a selection")
    p.add_argument("scenario")
    p.add_argument("selection", help="SelectionResult JSON from the select command")
    p.add_argument("--seed", type=int, default=0,
                   help="must match the seed used for select")
    p.add_argument("--out", default="-")


def _add_experiment(sub):
    p = sub.add_parser("experiment", help="run a sweep of trials and export results")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--algorithms", default=None, help="comma separated names")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--fim-mode", default=None, choices=["expected", "one-sample"])
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--full-sweep", action="store_true",
                   help="use the default budget/cutoff/prior sweep")
    p.add_argument("--no-resume", action="store_true")
    p.add_argument("--deterministic-timing", action="store_true",
                   help="report runtime_s as 0.0 so outputs are byte-reproducible")


def _add_certify(sub):
    p = sub.add_parser("certify", help="check the greedy suboptimality bound")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--dimension", type=int, default=3)
    p.add_argument("--k-max", type=int, default=7)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fim-mode", default="expected", choices=["expected", "one-sample"])
    p.add_argument("--full", action="store_true", help="include per-case results")
    p.add_argument("--out", default="-")


def _cmd_generate(args) -> int:
    scenario = harness.generate_synthetic_scenario(
        args.n, args.m, args.dimension, args.extent, args.trajectory, args.seed,
        prior_sigma=args.prior_sigma, budget=args.budget, cutoff=args.cutoff,
        noise_variance=args.noise_variance,
    )
    save_scenario(scenario, args.out)
    return EXIT_OK


def _instance(scenario, seed):
    truth = sample_ground_truth(scenario, derive_seed(seed, "truth"))
    graph = build_graph(scenario, truth)
    measurements = sample_measurements(
        graph, truth, scenario.candidates, derive_seed(seed, "measure")
    )
    return truth, graph, measurements


def _cmd_select(args) -> int:
    scenario = load_scenario(args.scenario)
    k = args.k if args.k is not None else scenario.budget
    truth, graph, measurements = _instance(scenario, args.seed)
    state = init_state(scenario, graph, truth, measurements, args.fim_mode)
    if args.algorithm == "greedy":
        result = greedy_select(state, graph, k)
    elif args.algorithm == "brute_force":
        result = brute_force_select(state, graph, k)
    elif args.algorithm == "measurement_greedy":
        result = measurement_greedy_select(graph, k)
    elif args.algorithm == "coverage_greedy":
        result = coverage_greedy_select(graph, k)
    elif args.algorithm == "random":
        result = random_select(graph, k, derive_seed(args.seed, "random"))
    else:
        es = EsConfig(
            max_evaluations=args.es_max_evaluations,
            seed=derive_seed(args.seed, "cmaes"),
        )
        result = cmaes_select(scenario, graph, state, k, es)
    payload = result.to_dict()
    payload["f_norm"] = evaluate_subset(state, result.selected)
    _write_json(payload, args.out)
    return EXIT_OK


def _cmd_localize(args) -> int:
    scenario = load_scenario(args.scenario)
    with open(args.selection, "r", encoding="utf-8") as fh:
        selected = json.load(fh)["selected"]
    truth, graph, measurements = _instance(scenario, args.seed)
    solution = map_solve(scenario, graph.subgraph(selected), measurements)
    payload = solution.to_dict()
    payload["rmse_m"] = rmse(solution.estimates, truth)
    _write_json(payload, args.out)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = harness.ExperimentConfig.from_dict(json.load(fh))
    else:
        config = harness.ExperimentConfig()
    if args.full_sweep:
        config.sweep = harness.default_sweep()
    if args.trials is not None:
        config.trials = args.trials
    if args.algorithms is not None:
        config.algorithms = tuple(a.strip() for a in args.algorithms.split(","))
    if args.seed is not None:
        config.master_seed = args.seed
    if args.fim_mode is not None:
        config.fim_mode = args.fim_mode
    if args.deterministic_timing:
        config.deterministic_timing = True
    config.__post_init__()  # revalidate after overrides
    run = harness.run_experiment(
        config, out_dir=args.out_dir, resume=not args.no_resume, fmt=args.format
    )
    if run.failures:
        print(f"{run.failures} algorithm runs failed; see records", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_certify(args) -> int:
    report = harness.certification_report(
        n=args.n, m=args.m, d=args.dimension,
        k_values=tuple(range(1, args.k_max + 1)),
        instances=args.instances, seed=args.seed, fim_mode=args.fim_mode,
    )
    if not args.full:
        report.pop("results")
    _write_json(report, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="beaconopt", description="beacon placement optimizer"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_select(sub)
    _add_localize(sub)
    _add_experiment(sub)
    _add_certify(sub)
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "select": _cmd_select,
        "localize": _cmd_localize,
        "experiment": _cmd_experiment,
        "certify": _cmd_certify,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
