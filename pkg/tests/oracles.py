"""Independent reference implementations used as test oracles.

Everything here recomputes quantities from first principles (dense
assembly, exhaustive enumeration, finite differences, naive loops) and
deliberately shares no code path with the library internals it checks.
"""

import itertools
import math

import numpy as np


def dense_information_matrix(scenario, graph, truth, measurements, mode, selected):
    """Assemble the full (n*d) x (n*d) information matrix of a selection."""
    n, d = scenario.n_positions, scenario.dimension
    big = np.zeros((n * d, n * d))
    for i, spec in enumerate(scenario.positions):
        big[i * d : (i + 1) * d, i * d : (i + 1) * d] = np.linalg.inv(
            spec.prior_covariance
        )
    sites = {c.id: c.position for c in scenario.candidates}
    for (i, j), s2 in graph.edge_variance.items():
        if j not in selected:
            continue
        delta = np.asarray(truth)[i] - sites[j]
        dist = np.linalg.norm(delta)
        u = delta / dist
        if mode == "expected":
            w = 1.0 / s2
        else:
            r = dist - measurements.ranges[(i, j)]
            w = r * r / (s2 * s2)
        big[i * d : (i + 1) * d, i * d : (i + 1) * d] += w * np.outer(u, u)
    return big


def dense_objective(scenario, graph, truth, measurements, mode, selected):
    """log det of the dense stacked information matrix."""
    big = dense_information_matrix(scenario, graph, truth, measurements, mode, selected)
    sign, logdet = np.linalg.slogdet(big)
    assert sign > 0
    return logdet


def dense_normalized_objective(scenario, graph, truth, measurements, mode, selected):
    return dense_objective(
        scenario, graph, truth, measurements, mode, selected
    ) - dense_objective(scenario, graph, truth, measurements, mode, set())


def exhaustive_best_subset(scenario, graph, truth, measurements, mode, k):
    """Best k-subset by recomputing the dense objective per subset."""
    ids = [c.id for c in scenario.candidates]
    best_val, best = -np.inf, None
    for combo in itertools.combinations(sorted(ids), k):
        val = dense_objective(scenario, graph, truth, measurements, mode, set(combo))
        if val > best_val:
            best_val, best = val, combo
    return list(best), best_val


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for t in range(x.size):
        e = np.zeros_like(x)
        e[t] = h
        g[t] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    d = x.size
    H = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            ea = np.zeros(d)
            eb = np.zeros(d)
            ea[a] = h
            eb[b] = h
            H[a, b] = (
                f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)
            ) / (4 * h * h)
    return H


def naive_map_objective(x, prior_mean, prior_cov, anchors, ranges, variances):
    """Direct transcription of the MAP cost."""
    x = np.asarray(x, dtype=float)
    delta = x - np.asarray(prior_mean)
    total = float(delta @ np.linalg.inv(prior_cov) @ delta)
    for a, dr, s2 in zip(anchors, ranges, variances):
        total += (np.linalg.norm(x - np.asarray(a)) - dr) ** 2 / s2
    return total


def naive_rmse(estimates, truth):
    n = len(estimates)
    acc = 0.0
    for e, t in zip(estimates, truth):
        acc += sum((float(a) - float(b)) ** 2 for a, b in zip(e, t))
    return math.sqrt(acc / n)


def greedy_set_cover(universe, subsets):
    """Classic greedy set cover; subsets is {label: set}.  Lowest label on
    ties.  Returns the chosen labels (may not cover uncoverable items)."""
    uncovered = set(universe)
    chosen = []
    while uncovered:
        best, gain = None, 0
        for label in sorted(subsets):
            if label in chosen:
                continue
            new = len(subsets[label] & uncovered)
            if new > gain:
                best, gain = label, new
        if best is None:
            break
        chosen.append(best)
        uncovered -= subsets[best]
    return chosen


def top_k_degrees(degrees, k):
    """Total degree of the k highest-degree beacons (sort oracle)."""
    return sum(sorted(degrees.values(), reverse=True)[:k])


def sequential_nearest_snap(vector, sites, d):
    """Per-slot nearest-available assignment by explicit sorted scan."""
    vector = np.asarray(vector, dtype=float)
    k = vector.size // d
    taken = set()
    out = []
    for t in range(k):
        point = vector[t * d : (t + 1) * d]
        order = sorted(
            range(len(sites)), key=lambda idx: (np.linalg.norm(sites[idx] - point), idx)
        )
        for idx in order:
            if idx not in taken:
                taken.add(idx)
                out.append(idx + 1)
                break
    return out


def naive_summary(rows):
    """Mean/std per (setting, algorithm) straight off the row dicts."""
    groups = {}
    for row in rows:
        if not math.isfinite(row["rmse_m"]):
            continue
        groups.setdefault((row["setting"], row["algorithm"]), []).append(row)
    out = {}
    for key, grp in groups.items():
        rmses = [r["rmse_m"] for r in grp]
        times = [r["runtime_s"] for r in grp]
        c = len(grp)
        mean = sum(rmses) / c
        std = math.sqrt(sum((v - mean) ** 2 for v in rmses) / (c - 1)) if c > 1 else 0.0
        tmean = sum(times) / c
        tstd = (
            math.sqrt(sum((v - tmean) ** 2 for v in times) / (c - 1)) if c > 1 else 0.0
        )
        out[key] = {
            "rmse_mean_m": mean,
            "rmse_std_m": std,
            "runtime_mean_s": tmean,
            "runtime_std_s": tstd,
            "trials": c,
        }
    return out
