"""Benchmark metrics, landscape scans, and the orchestration sweep."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qopt_bench.bench import (
    BenchProtocol,
    InsufficientDataError,
    LipschitzStats,
    aggregate_method,
    aggregates_table,
    centroid_gap,
    is_converged,
    iterations_to_tolerance,
    landscape_scan,
    lipschitz_estimate,
    load_grid,
    load_runs_jsonl,
    run_benchmark,
    run_lipschitz,
    runs_table,
    save_grid,
    save_report_json,
    save_runs_jsonl,
    scan_directions,
    step_ratios,
)
from qopt_bench.optimizers import RunRecord
from qopt_bench.problems import GroundTruth, brute_force
from qopt_bench.simulator import Evaluator


def synth(theta0, f0, steps, failed=False):
    """RunRecord with a hand-built trajectory; steps = [(theta, f), ...]."""
    return RunRecord(
        method="bfgs",
        hyper={},
        seed=0,
        theta0=np.atleast_1d(np.asarray(theta0, dtype=float)),
        f0=float(f0),
        thetas=[np.atleast_1d(np.asarray(t, dtype=float)) for t, _ in steps],
        fs=[float(f) for _, f in steps],
        grad_norms=[float("nan")] * len(steps),
        qcalls=list(range(1, len(steps) + 1)),
        wallclock=[0.0] * len(steps),
        failed=failed,
    )


TRUTH2 = GroundTruth(n_vertices=1, optimal_value=-2.0, optimal_assignments=(0, 1))


class TestConvergence:
    def test_three_percent_arithmetic_fails(self):
        r = synth([0.0], 0.0, [([1.0], -1.93)])
        assert not is_converged(r, TRUTH2, rho=0.03)

    def test_three_percent_arithmetic_passes(self):
        r = synth([0.0], 0.0, [([1.0], -1.95)])
        assert is_converged(r, TRUTH2, rho=0.03)

    def test_touch_once_then_diverge_counts(self):
        r = synth([0.0], 0.0, [([1.0], -2.0), ([2.0], 50.0)])
        assert is_converged(r, TRUTH2, rho=0.03)
        assert iterations_to_tolerance(r, TRUTH2, rho=0.03) == 1

    def test_empty_history_not_converged(self):
        assert not is_converged(synth([0.0], -2.0, []), TRUTH2)

    def test_starting_point_does_not_count(self):
        r = synth([0.0], -2.0, [([1.0], 0.0)])
        assert not is_converged(r, TRUTH2, rho=0.03)

    def test_cap_limits_window(self):
        r = synth([0.0], 0.0, [([1.0], 0.0), ([2.0], -2.0)])
        assert is_converged(r, TRUTH2)
        assert not is_converged(r, TRUTH2, cap=1)

    @settings(max_examples=40)
    @given(
        fs=st.lists(st.floats(-4, 4), min_size=1, max_size=8),
        rho1=st.floats(0.01, 0.2),
        extra=st.floats(0.001, 0.5),
    )
    def test_monotone_in_rho(self, fs, rho1, extra):
        r = synth([0.0], 0.0, [([float(k + 1)], f) for k, f in enumerate(fs)])
        if is_converged(r, TRUTH2, rho=rho1):
            assert is_converged(r, TRUTH2, rho=rho1 + extra)

    def test_rho_must_be_positive(self):
        with pytest.raises(ValueError):
            is_converged(synth([0.0], 0.0, []), TRUTH2, rho=0.0)


class TestLipschitz:
    def test_linear_trajectory_exact_slope(self):
        # f(x) = 3x sampled at unit steps: every ratio is exactly 3.
        r = synth([0.0], 0.0, [([1.0], 3.0), ([2.0], 6.0), ([3.0], 9.0)])
        assert run_lipschitz(r) == 3.0

    def test_tiny_steps_skipped(self):
        r = synth([0.0], 0.0, [([0.0], 5.0), ([2.0], 6.0)])
        # first pair has zero parameter motion -> skipped, not inf
        assert step_ratios(r) == [0.5]

    def test_two_run_statistics_by_hand(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        r_a = synth([0.0], -8.0, [([1.0], -10.0)])  # slope 2
        r_b = synth([0.0], -6.0, [([1.0], -10.0)])  # slope 4
        stats = lipschitz_estimate([r_a, r_b], truth, stop_rho=0.01)
        assert stats.average == 3.0
        assert stats.std == 1.0
        assert stats.median == 3.0
        assert stats.iqr == pytest.approx(1.0)  # type-7 quartiles: 3.5 - 2.5
        assert stats.n_used == 2 and stats.n_total == 2

    def test_filter_aborts_below_half(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        good = synth([0.0], -8.0, [([1.0], -10.0)])
        bad1 = synth([0.0], -8.0, [([1.0], -5.0)])
        bad2 = synth([0.0], -8.0, [([1.0], -5.0)])
        with pytest.raises(InsufficientDataError) as err:
            lipschitz_estimate([good, bad1, bad2], truth, stop_rho=0.01)
        assert "1/3" in str(err.value)

    def test_exactly_half_is_enough(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        good = synth([0.0], -8.0, [([1.0], -10.0)])
        bad = synth([0.0], -8.0, [([1.0], -5.0)])
        stats = lipschitz_estimate([good, bad], truth, stop_rho=0.01)
        assert stats.n_used == 1 and stats.n_total == 2

    def test_failed_runs_never_pass_filter(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        good = synth([0.0], -8.0, [([1.0], -10.0)])
        crashed = synth([0.0], -8.0, [([1.0], -10.0)], failed=True)
        stats = lipschitz_estimate([good, crashed], truth, stop_rho=0.01)
        assert stats.n_used == 1

    def test_pooled_variant_differs(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        # run A ratios {1, 5}; run B ratios {2, 2}; both end at the optimum
        r_a = synth([0.0], -4.0, [([1.0], -5.0), ([2.0], -10.0)])
        r_b = synth([0.0], -6.0, [([1.0], -8.0), ([2.0], -10.0)])
        per_run = lipschitz_estimate([r_a, r_b], truth, stop_rho=0.01)
        pooled = lipschitz_estimate([r_a, r_b], truth, stop_rho=0.01, pooled=True)
        assert per_run.average == 3.5  # mean of {5, 2}
        assert pooled.average == 2.5  # mean of {1, 5, 2, 2}
        assert per_run.n_used == 2  # runs
        assert pooled.n_used == 4  # individual step ratios

    def test_scale_covariance_power_of_two_exact(self):
        truth = GroundTruth(1, -10.0, (0, 1))
        runs = [
            synth([0.0], -4.0, [([1.0], -5.0), ([2.0], -10.0)]),
            synth([0.0], -6.0, [([1.0], -8.0), ([2.0], -10.0)]),
        ]
        c = 4.0
        scaled_truth = GroundTruth(1, -10.0 * c, (0, 1))
        scaled_runs = [
            synth([0.0], r.f0 * c, [(t, f * c) for t, f in zip(r.thetas, r.fs)])
            for r in runs
        ]
        base = lipschitz_estimate(runs, truth, stop_rho=0.01)
        scaled = lipschitz_estimate(scaled_runs, scaled_truth, stop_rho=0.01)
        assert scaled.average == c * base.average
        assert scaled.std == c * base.std
        assert scaled.median == c * base.median
        assert scaled.iqr == c * base.iqr

    @settings(max_examples=30)
    @given(
        c=st.floats(0.01, 50.0),
        fs=st.lists(st.floats(-5, 5), min_size=2, max_size=6),
    )
    def test_scale_covariance_property(self, c, fs):
        truth = GroundTruth(1, -1.0, (0, 1))
        steps = [([float(k + 1)], f) for k, f in enumerate(fs)]
        r = synth([0.0], 1.0, steps)
        scaled = synth([0.0], c * 1.0, [(t, c * f) for (t, f) in steps])
        base = lipschitz_estimate([r], truth, stop_rho=1e9)
        after = lipschitz_estimate(
            [scaled], GroundTruth(1, -c, (0, 1)), stop_rho=1e9
        )
        for name in ("average", "std", "median", "iqr"):
            assert getattr(after, name) == pytest.approx(
                c * getattr(base, name), rel=1e-12, abs=1e-300
            )

    def test_stats_validation(self):
        with pytest.raises(ValueError):
            LipschitzStats(average=-1.0, std=0.0, median=0.0, iqr=0.0, n_used=1, n_total=1)
        with pytest.raises(ValueError):
            LipschitzStats.from_samples([], n_total=0)


class TestCentroidGap:
    def test_identical_clouds_zero(self):
        assert centroid_gap([1.0, 3.0], [1.0, 3.0]) == 0.0

    def test_spec_example(self):
        assert centroid_gap([1.0, 3.0], [2.0, 4.0]) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            centroid_gap([], [1.0])


class TestLandscape:
    def test_zero_directions_constant_grid(self, graph3):
        center = np.array([0.37, -0.24])
        grid = landscape_scan(graph3, center, np.zeros(2), np.zeros(2), grid=4)
        want = Evaluator.for_graph(graph3).expectation(center)
        assert np.allclose(grid, want, rtol=0, atol=1e-12)

    def test_single_cell_is_lower_corner(self, graph3):
        center = np.array([0.37, -0.24])
        d1 = np.array([0.1, 0.0])
        d2 = np.array([0.0, 0.2])
        grid = landscape_scan(graph3, center, d1, d2, grid=1)
        want = Evaluator.for_graph(graph3).expectation(center - d1 - d2)
        assert grid.shape == (1, 1)
        assert grid[0, 0] == pytest.approx(want, rel=1e-12)

    def test_swap_symmetry_transposes(self, graph3):
        center = np.array([0.1, 0.3])
        d1, d2 = scan_directions(2, seed=3)
        a = landscape_scan(graph3, center, d1, d2, grid=7)
        b = landscape_scan(graph3, center, d2, d1, grid=7)
        assert np.allclose(a, b.T, rtol=1e-10)

    def test_directions_are_unit_and_seeded(self):
        d1, d2 = scan_directions(4, seed=9)
        e1, e2 = scan_directions(4, seed=9)
        assert np.array_equal(d1, e1) and np.array_equal(d2, e2)
        assert np.linalg.norm(d1) == pytest.approx(1.0)
        assert np.linalg.norm(d2) == pytest.approx(1.0)
        assert not np.allclose(d1, d2)

    def test_grid_round_trip(self, tmp_path):
        grid = np.array([[1.5, -2.25], [0.125, 3.0]])
        path = tmp_path / "grid.txt"
        save_grid(path, grid, meta={"center": "0.1,0.2"})
        back, meta = load_grid(path)
        assert np.array_equal(back, grid)
        assert meta["schema_version"] == "1"
        assert meta["center"] == "0.1,0.2"

    def test_golden_scan_checksum(self, graph5, golden_dir):
        import hashlib
        import os

        with open(os.path.join(golden_dir, "scan_n5.txt")) as fh:
            want = dict(
                ln.strip().split(maxsplit=1)
                for ln in fh
                if ln.strip() and not ln.startswith("#")
            )
        d1, d2 = scan_directions(2, seed=5)
        grid = landscape_scan(graph5, np.array([0.37, -0.24]), d1, d2, grid=24)
        text = "\n".join(" ".join(f"{v:.10e}" for v in row) for row in grid)
        digest = hashlib.sha256(text.encode()).hexdigest()
        assert digest == want["sha256"]
        assert float(np.mean(grid)) == pytest.approx(float(want["mean"]), rel=1e-12)
        assert grid[12, 12] == pytest.approx(float(want["center_cell"]), rel=1e-12)


PROTO = BenchProtocol(restarts=2, shots=None, sample_shots=8, lp_cap=5, max_iterations=5)


@pytest.fixture(scope="module")
def small_reports(graph3):
    return run_benchmark([graph3], ["bfgs", "spsa"], PROTO, seed=4)


class TestRunBenchmark:
    def test_report_shape(self, small_reports, graph3):
        (report,) = small_reports
        assert report.n_vertices == 3
        assert report.optimal_value == brute_force(graph3).optimal_value
        assert set(report.aggregates) == {"bfgs", "spsa"}
        agg = report.aggregates["bfgs"]
        assert 0.0 <= agg.convergence_ratio <= 1.0
        assert agg.n_restarts == 2
        assert agg.mean_hamming is not None

    def test_zero_iteration_protocol(self, graph3):
        proto = BenchProtocol(restarts=1, shots=None, sample_shots=8, max_iterations=0)
        (report,) = run_benchmark([graph3], ["bfgs"], proto, seed=1)
        agg = report.aggregates["bfgs"]
        assert agg.convergence_ratio == 0.0
        cap_recs, tol_recs = report.records["bfgs"]
        assert all(r.iterations == 0 for r in cap_recs + tol_recs)
        assert agg.lipschitz is None and agg.lipschitz_note is not None

    def test_replay_determinism(self, small_reports, graph3):
        again = run_benchmark([graph3], ["bfgs", "spsa"], PROTO, seed=4)
        d1 = json.dumps([r.to_dict(include_timing=False) for r in small_reports], sort_keys=True)
        d2 = json.dumps([r.to_dict(include_timing=False) for r in again], sort_keys=True)
        assert d1 == d2

    def test_worker_count_invariance(self, small_reports, graph3, tmp_path):
        parallel = run_benchmark([graph3], ["bfgs", "spsa"], PROTO, seed=4, workers=2)
        p1 = tmp_path / "serial.json"
        p2 = tmp_path / "parallel.json"
        save_report_json(p1, small_reports, include_timing=False)
        save_report_json(p2, parallel, include_timing=False)
        assert p1.read_bytes() == p2.read_bytes()
        r1 = tmp_path / "serial_runs.jsonl"
        r2 = tmp_path / "parallel_runs.jsonl"
        save_runs_jsonl(r1, small_reports, include_timing=False)
        save_runs_jsonl(r2, parallel, include_timing=False)
        assert r1.read_bytes() == r2.read_bytes()

    def test_report_recomputable_from_saved_runs(self, small_reports, graph3, tmp_path):
        path = tmp_path / "runs.jsonl"
        save_runs_jsonl(path, small_reports)
        rows = load_runs_jsonl(path)
        truth = brute_force(graph3)
        (report,) = small_reports
        for method in ("bfgs", "spsa"):
            cap = [r["record"] for r in rows if r["record"].method == method and r["leg"] == "cap"]
            tol = [r["record"] for r in rows if r["record"].method == method and r["leg"] == "tol"]
            redone = aggregate_method(method, cap, tol, truth, PROTO)
            assert redone.to_dict() == report.aggregates[method].to_dict()

    def test_aggregates_permutation_invariant(self, small_reports, graph3):
        truth = brute_force(graph3)
        (report,) = small_reports
        cap, tol = report.records["spsa"]
        fwd = aggregate_method("spsa", cap, tol, truth, PROTO)
        rev = aggregate_method("spsa", cap[::-1], tol[::-1], truth, PROTO)
        assert fwd.to_dict() == rev.to_dict()

    def test_failed_run_counted_not_fatal(self, graph3):
        truth = brute_force(graph3)
        ok = synth([0.0, 0.0], -100.0, [([1.0, 1.0], truth.optimal_value)])
        crashed = synth([0.0, 0.0], -100.0, [], failed=True)
        agg = aggregate_method("bfgs", [ok, crashed], [ok, crashed], truth, PROTO)
        assert agg.n_failed == 1
        assert agg.convergence_ratio == 0.5

    def test_unknown_method_fails_fast(self, graph3):
        with pytest.raises(KeyError):
            run_benchmark([graph3], ["newton"], PROTO, seed=0)

    def test_bad_hyper_override_fails_fast(self, graph3):
        with pytest.raises(ValueError):
            run_benchmark(
                [graph3], ["bfgs"], PROTO, seed=0, hyper_overrides={"bfgs": {"nope": 1.0}}
            )

    def test_tables_and_headers(self, small_reports):
        runs = runs_table(small_reports)
        aggs = aggregates_table(small_reports)
        assert runs.startswith("# schema_version=1\n")
        assert aggs.startswith("# schema_version=1\n")
        # 1 problem x 2 methods x 2 legs x 2 restarts = 8 run rows
        assert len(runs.strip().split("\n")) == 2 + 8
        assert len(aggs.strip().split("\n")) == 2 + 2
        assert "walltime" in runs.split("\n")[1]
        assert "walltime" not in runs_table(small_reports, include_timing=False).split("\n")[1]

    def test_protocol_validation(self):
        with pytest.raises(ValueError):
            BenchProtocol(restarts=0)
        with pytest.raises(ValueError):
            BenchProtocol(rho=0.0)
        assert BenchProtocol().cap_for("spsa") == 400
        assert BenchProtocol().cap_for("bfgs") == 60
        assert BenchProtocol(max_iterations=7).cap_for("spsa") == 7
