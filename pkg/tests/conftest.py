import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from beaconopt import (
    BeaconCandidate,
    NoiseModel,
    PositionSpec,
    Scenario,
    build_graph,
    init_state,
    sample_ground_truth,
    sample_measurements,
)
from beaconopt.rng import derive_seed


def make_scenario(
    n=4,
    m=6,
    d=2,
    seed=0,
    cutoff=float("inf"),
    budget=2,
    prior_var=8.0,
    noise_var=25.0,
    box=100.0,
    isotropic=True,
):
    """Small random instance with optional non-isotropic priors."""
    rng = np.random.default_rng(seed)
    positions = []
    for _ in range(n):
        mean = rng.uniform(0, box, d)
        if isotropic:
            cov = prior_var
        else:
            A = rng.standard_normal((d, d))
            cov = A @ A.T + prior_var * np.eye(d)
        positions.append(PositionSpec(mean, cov))
    candidates = [
        BeaconCandidate(j + 1, rng.uniform(0, box, d)) for j in range(m)
    ]
    return Scenario(
        dimension=d,
        positions=tuple(positions),
        candidates=tuple(candidates),
        noise=NoiseModel("constant", noise_var),
        cutoff=cutoff,
        budget=budget,
    )


def make_instance(scenario, seed=0, mode="expected"):
    """Scenario -> (truth, graph, measurements, empty-selection state)."""
    truth = sample_ground_truth(scenario, derive_seed(seed, "truth"))
    graph = build_graph(scenario, truth)
    measurements = sample_measurements(
        graph, truth, scenario.candidates, derive_seed(seed, "measure")
    )
    state = init_state(scenario, graph, truth, measurements, mode)
    return truth, graph, measurements, state


@pytest.fixture
def small_scenario():
    return make_scenario()
