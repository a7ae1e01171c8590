import itertools
import math

import numpy as np
import pytest

from beaconopt import (
    BeaconCandidate,
    NoiseModel,
    PositionSpec,
    Scenario,
    brute_force_select,
    build_graph,
    certify_bound,
    coverage_greedy_select,
    evaluate_subset,
    greedy_select,
    marginal_gain,
    measurement_greedy_select,
    random_select,
)
from beaconopt.selection import SUBOPTIMALITY_FACTOR

import oracles
from conftest import make_instance, make_scenario


def _graph_with_degrees(degree_by_beacon, n_positions):
    """Bipartite graph stub built directly from an adjacency spec."""
    from beaconopt.scenario import MeasurementGraph

    neighbourhood = {i: [] for i in range(n_positions)}
    variance = {}
    for j, rows in degree_by_beacon.items():
        for i in rows:
            neighbourhood[i].append(j)
            variance[(i, j)] = 25.0
    neighbourhood = {i: tuple(sorted(v)) for i, v in neighbourhood.items()}
    return MeasurementGraph(n_positions, len(degree_by_beacon), neighbourhood, variance)


class TestGreedy:
    def test_budget_equals_m_selects_everything(self):
        s = make_scenario(n=3, m=5, seed=1, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=1)
        result = greedy_select(state, graph, 5)
        assert sorted(result.selected) == [1, 2, 3, 4, 5]
        full = evaluate_subset(state, [1, 2, 3, 4, 5])
        assert result.f_norm == pytest.approx(full, abs=1e-9)

    def test_dominant_beacon_picked_first(self):
        # beacon 2 sees both positions; 1 and 3 see nothing
        positions = (
            PositionSpec([0.0, 0.0], 8.0),
            PositionSpec([10.0, 0.0], 8.0),
        )
        candidates = (
            BeaconCandidate(1, [500.0, 500.0]),
            BeaconCandidate(2, [5.0, 1.0]),
            BeaconCandidate(3, [-500.0, 500.0]),
        )
        s = Scenario(2, positions, candidates, NoiseModel("constant", 25.0), 50.0, 2)
        truth = s.prior_means()
        graph = build_graph(s, truth)
        from beaconopt import init_state, sample_measurements

        ms = sample_measurements(graph, truth, candidates, 0)
        state = init_state(s, graph, truth, ms, "expected")
        result = greedy_select(state, graph, 2)
        assert result.selected[0] == 2

    def test_trace_matches_marginal_gains_and_is_monotone(self):
        s = make_scenario(n=4, m=8, seed=3, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=3)
        result = greedy_select(state, graph, 5)
        replay = state.copy()
        from beaconopt import apply_selection

        last = 0.0
        for step, j in enumerate(result.selected):
            gain = marginal_gain(replay, j)
            apply_selection(replay, j)
            assert result.objective_trace[step] - last == pytest.approx(gain, abs=1e-9)
            assert result.objective_trace[step] >= last - 1e-9
            last = result.objective_trace[step]

    def test_evaluation_budget(self):
        s = make_scenario(n=3, m=10, seed=4, cutoff=90.0, budget=4)
        _, graph, _, state = make_instance(s, seed=4)
        result = greedy_select(state, graph, 4)
        assert result.evaluations <= 4 * 10

    def test_deterministic_rerun(self):
        s = make_scenario(n=4, m=8, seed=5, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=5)
        a = greedy_select(state, graph, 3)
        b = greedy_select(state, graph, 3)
        assert a.selected == b.selected
        assert a.objective_trace == b.objective_trace


class TestBruteForce:
    def test_k1_is_argmax_singleton(self):
        # non-isotropic priors so singleton gains are not degree-tied
        s = make_scenario(n=3, m=6, seed=7, cutoff=90.0, isotropic=False)
        _, graph, _, state = make_instance(s, seed=7)
        result = brute_force_select(state, graph, 1)
        gains = [marginal_gain(state, j) for j in range(1, 7)]
        order = np.sort(gains)
        assert order[-1] - order[-2] > 1e-6, "instance should have a unique argmax"
        assert result.selected == [int(np.argmax(gains)) + 1]
        assert result.f_norm == pytest.approx(max(gains), abs=1e-9)

    def test_k_equals_m_full_set(self):
        s = make_scenario(n=3, m=5, seed=8, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=8)
        assert sorted(brute_force_select(state, graph, 5).selected) == [1, 2, 3, 4, 5]

    @pytest.mark.parametrize("mode", ["expected", "one-sample"])
    def test_matches_naive_enumeration(self, mode):
        s = make_scenario(n=3, m=8, seed=9, cutoff=90.0)
        truth, graph, ms, state = make_instance(s, seed=9, mode=mode)
        result = brute_force_select(state, graph, 3)
        best_ids, best_val = oracles.exhaustive_best_subset(s, graph, truth, ms, mode, 3)
        assert sorted(result.selected) == sorted(best_ids)
        base = oracles.dense_objective(s, graph, truth, ms, mode, set())
        assert result.f_norm == pytest.approx(best_val - base, rel=1e-8)
        assert result.evaluations == math.comb(8, 3)

    def test_cap_refusal_reports_count(self):
        s = make_scenario(n=2, m=20, seed=10, budget=10)
        _, graph, _, state = make_instance(s, seed=10)
        with pytest.raises(ValueError, match=str(math.comb(20, 10))):
            brute_force_select(state, graph, 10, cap=1000)

    def test_dominates_every_other_selector(self):
        for trial in range(5):
            s = make_scenario(n=3, m=8, seed=20 + trial, cutoff=90.0, budget=3)
            _, graph, _, state = make_instance(s, seed=trial)
            brute = brute_force_select(state, graph, 3)
            others = [
                greedy_select(state, graph, 3).selected,
                measurement_greedy_select(graph, 3).selected,
                coverage_greedy_select(graph, 3).selected,
                random_select(graph, 3, trial).selected,
            ]
            for sel in others:
                assert brute.f_norm >= evaluate_subset(state, sel) - 1e-9


class TestMeasurementGreedy:
    def test_equal_degrees_picks_lowest_ids(self):
        graph = _graph_with_degrees({1: [0], 2: [1], 3: [2], 4: [3]}, 4)
        assert measurement_greedy_select(graph, 2).selected == [1, 2]

    def test_degree_ordering_with_ties(self):
        graph = _graph_with_degrees(
            {1: [0, 1, 2, 3, 4], 2: [0, 1, 2], 3: [3, 4, 5], 4: [5]}, 6
        )
        assert measurement_greedy_select(graph, 2).selected == [1, 2]

    def test_total_degree_matches_sort_oracle(self):
        s = make_scenario(n=6, m=9, seed=11, cutoff=60.0)
        _, graph, _, _ = make_instance(s, seed=11)
        k = 4
        result = measurement_greedy_select(graph, k)
        degrees = graph.beacon_degrees()
        achieved = sum(degrees[j] for j in result.selected)
        assert achieved == oracles.top_k_degrees(degrees, k)

    def test_never_evaluates_objective(self):
        s = make_scenario(n=3, m=5, seed=12, cutoff=90.0)
        _, graph, _, _ = make_instance(s, seed=12)
        result = measurement_greedy_select(graph, 3)
        assert result.evaluations == 0
        assert result.objective_trace == []


class TestCoverageGreedy:
    def test_universal_beacon_first(self):
        graph = _graph_with_degrees({1: [0, 1, 2], 2: [0, 1], 3: [2]}, 3)
        result = coverage_greedy_select(graph, 2)
        assert result.selected[0] == 1
        # phase 2 fills by degree: beacon 2 (degree 2) over 3 (degree 1)
        assert result.selected == [1, 2]

    def test_partition_covered_in_phase_one(self):
        graph = _graph_with_degrees({1: [0, 1], 2: [2, 3], 3: [0, 1, 2]}, 4)
        result = coverage_greedy_select(graph, 2)
        assert set(result.selected) == {3, 1} or set(result.selected) == {3, 2}
        covered = set()
        for j in result.selected:
            covered |= {i for i, ids in graph.neighbourhood.items() if j in ids}
        assert covered == {0, 1, 2, 3}

    def test_full_coverage_when_budget_allows(self):
        for trial in range(5):
            s = make_scenario(n=6, m=10, seed=30 + trial, cutoff=70.0, budget=6)
            _, graph, _, _ = make_instance(s, seed=trial)
            subsets = {
                j: {i for i, ids in graph.neighbourhood.items() if j in ids}
                for j in range(1, 11)
            }
            coverable = set().union(*subsets.values()) if subsets else set()
            cover = oracles.greedy_set_cover(coverable, subsets)
            k = max(len(cover), 1)
            result = coverage_greedy_select(graph, min(k, 10))
            covered = set()
            for j in result.selected:
                covered |= subsets[j]
            assert covered >= coverable

    def test_uncoverable_positions_stop_phase_one(self):
        # position 2 has no incident beacon at all
        graph = _graph_with_degrees({1: [0], 2: [1], 3: [0, 1]}, 3)
        result = coverage_greedy_select(graph, 3)
        assert len(result.selected) == 3


class TestRandomSelect:
    def test_full_budget_returns_everything(self):
        s = make_scenario(n=2, m=4, seed=13)
        _, graph, _, _ = make_instance(s, seed=13)
        for seed in range(5):
            assert sorted(random_select(graph, 4, seed).selected) == [1, 2, 3, 4]

    def test_seed_reproducible(self):
        s = make_scenario(n=2, m=10, seed=14, budget=3)
        _, graph, _, _ = make_instance(s, seed=14)
        assert random_select(graph, 3, 42).selected == random_select(graph, 3, 42).selected
        assert random_select(graph, 3, 42).selected != random_select(graph, 3, 43).selected

    def test_pair_frequencies_uniform(self):
        s = make_scenario(n=2, m=5, seed=15, budget=2)
        _, graph, _, _ = make_instance(s, seed=15)
        counts = {}
        draws = 10**5
        for seed in range(draws):
            pair = tuple(sorted(random_select(graph, 2, seed).selected))
            counts[pair] = counts.get(pair, 0) + 1
        assert len(counts) == 10
        p = 1.0 / 10.0
        sigma = math.sqrt(draws * p * (1 - p))
        for pair, c in counts.items():
            assert abs(c - draws * p) < 3 * sigma, (pair, c)


class TestCertifyBound:
    def test_equal_results_ratio_one(self):
        s = make_scenario(n=3, m=6, seed=16, cutoff=90.0, budget=2)
        _, graph, _, state = make_instance(s, seed=16)
        greedy = greedy_select(state, graph, 2)
        cert = certify_bound(greedy, greedy)
        assert cert == {"ratio": 1.0, "holds": True}

    def test_zero_optimum_vacuous(self):
        s = make_scenario(n=2, m=3, seed=17, cutoff=1e-6, budget=2)
        _, graph, _, state = make_instance(s, seed=17)
        greedy = greedy_select(state, graph, 2)
        brute = brute_force_select(state, graph, 2)
        assert brute.f_norm == 0.0
        assert certify_bound(greedy, brute)["holds"] is True

    def test_mismatched_instances_rejected(self):
        s = make_scenario(n=3, m=6, seed=18, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=18)
        g2 = greedy_select(state, graph, 2)
        g3 = greedy_select(state, graph, 3)
        with pytest.raises(ValueError, match="budget"):
            certify_bound(g2, g3)
        b2 = brute_force_select(state, graph, 2)
        fake = type(b2)("brute_force", b2.selected, [b2.f_norm - 5.0], 0.0, 1)
        with pytest.raises(ValueError, match="instance"):
            certify_bound(g2, fake)

    def test_bound_holds_on_small_sweep(self):
        for trial in range(10):
            s = make_scenario(n=4, m=8, seed=40 + trial, cutoff=90.0, budget=3)
            _, graph, _, state = make_instance(s, seed=trial, mode="one-sample")
            for k in (1, 2, 3):
                greedy = greedy_select(state, graph, k)
                brute = brute_force_select(state, graph, k)
                cert = certify_bound(greedy, brute)
                assert cert["holds"], (trial, k, cert)
                assert cert["ratio"] >= SUBOPTIMALITY_FACTOR - 1e-9


class TestResultShape:
    def test_to_dict_schema(self):
        s = make_scenario(n=3, m=5, seed=19, cutoff=90.0)
        _, graph, _, state = make_instance(s, seed=19)
        payload = greedy_select(state, graph, 2).to_dict()
        assert set(payload) == {
            "algorithm", "selected", "objective_trace", "wall_time_s", "evaluations",
        }
        assert payload["algorithm"] == "greedy"
        assert len(payload["selected"]) == 2
