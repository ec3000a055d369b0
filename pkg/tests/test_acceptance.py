"""Acceptance gate: twelve checks, one test each, numbered in run order.

Checks 01-08 are exact property suites (machine-checkable tolerances).
Checks 09-12 are statistical trend gates on the two frozen fixtures below;
their thresholds were fixed once from golden runs on those fixtures and now
act as regression gates.  Check 09 is a documented honest failure: the
ordering it demands does not exist under deterministic evaluation with the
published per-method defaults on any fixture we searched (see README,
acceptance status).

Each test prints one ``acceptance NN name: PASS/FAIL`` line with its headline
numbers; pytest -v adds the usual per-test verdicts.  The expensive benchmark
sweeps are module-scoped fixtures so single-check reruns stay cheap.
"""

import json
import time

import numpy as np
import pytest

from doubles import LinearOracle, QuadraticOracle
from oracles import central_difference_gradient, dense_gp_posterior, full_enumeration_maxcut

from qopt_bench.bench import (
    BenchProtocol,
    LipschitzStats,
    centroid_gap,
    run_benchmark,
    run_lipschitz,
)
from qopt_bench.optimizers import (
    METHOD_IDS,
    RunRecord,
    SecantPenaltyConfig,
    StopRule,
    default_hyper,
    run,
    update_bfgs,
    update_dfp,
    update_sp_bfgs,
    update_sr1,
)
from qopt_bench.optimizers.stochastic import (
    CurvatureAverage,
    SPSAConfig,
    spsa2_step,
    spsa_gains,
    spsa_step,
)
from qopt_bench.problems import brute_force, generate_problem
from qopt_bench.seeding import stream
from qopt_bench.simulator import Evaluator, fubini_study_from_derivatives
from qopt_bench.tuner import GPModel, MaternKernel, tune_method

pytestmark = pytest.mark.acceptance

# Frozen trend fixtures.  fix3: uniform triangle, every weight exactly 20
# (heavy enough that each method's tuned step sizes resolve the landscape),
# depth 1.  fix5: uniform 5-cycle, depth 2 (the shallowest depth at which its
# optimum is reachable to machine precision).
FIX3 = generate_problem(3, seed=7, density=1.0, weight_range=(20.0, 20.0))
FIX5 = generate_problem(5, seed=1, degree=2, weight_range=(1.0, 1.0))
SEED = 0

TRIO = ("bfgs", "sr1", "ncg")
QNG_FAMILY = ("qng_block", "qng_diag", "qbroyden", "qbang", "mqng")

# Frozen golden-run margin for check 12 (golden improvement was 19.73).
TUNING_MARGIN = 5.0


def _status(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"acceptance {number:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


# ---------------------------------------------------------------- properties


def test_c01_brute_force_matches_full_enumeration():
    t0 = time.perf_counter()
    for i in range(100):
        n = 2 + i % 9  # cycles 2..10
        g = generate_problem(n, seed=3000 + i, density=(0.4, 0.7, 1.0)[i % 3])
        truth = brute_force(g)
        ref_value, ref_assignments = full_enumeration_maxcut(g)
        assert truth.optimal_value == ref_value, f"value mismatch on n={n} seed={3000 + i}"
        assert list(truth.optimal_assignments) == ref_assignments
    elapsed = time.perf_counter() - t0
    _status(1, "brute-force-oracle", elapsed < 10.0, f"100 graphs in {elapsed:.2f}s")
    assert elapsed < 10.0


def test_c02_parameter_shift_matches_central_differences():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(2, 7))
        p = int(rng.integers(1, 3))
        g = generate_problem(n, seed=5000 + i, density=0.8)
        ev = Evaluator.for_graph(g, n_layers=p)
        theta = rng.uniform(-np.pi, np.pi, 2 * p)
        err = np.abs(
            ev.gradient(theta) - central_difference_gradient(ev.expectation, theta, h=1e-5)
        ).max()
        worst = max(worst, float(err))
    _status(2, "parameter-shift-gradient", worst < 1e-6, f"max inf-norm err {worst:.2e}")
    assert worst < 1e-6


def test_c03_metric_tensor_properties():
    # single-parameter harness: exp(-i theta X/2)|0> has metric exactly 1/4
    worst_harness = 0.0
    for theta in (0.0, 0.3, 1.2, -2.5):
        psi = np.array([np.cos(theta / 2), -1j * np.sin(theta / 2)])
        dpsi = np.array([-0.5 * np.sin(theta / 2), -0.5j * np.cos(theta / 2)])
        g = fubini_study_from_derivatives(psi, [dpsi])
        worst_harness = max(worst_harness, abs(g[0, 0] - 0.25))
    assert worst_harness < 1e-10

    rng = np.random.default_rng(7)
    worst_sym = worst_diag = 0.0
    min_eig = np.inf
    for i in range(50):
        n = int(rng.integers(2, 6))
        p = int(rng.integers(1, 3))
        g = generate_problem(n, seed=7000 + i, density=0.8)
        ev = Evaluator.for_graph(g, n_layers=p)
        theta = rng.uniform(-np.pi, np.pi, 2 * p)
        full = ev.metric(theta, "full").matrix
        worst_sym = max(worst_sym, float(np.abs(full - full.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(full).min()))
        diag = ev.metric(theta, "diagonal").matrix
        worst_diag = max(worst_diag, float(np.abs(np.diag(full) - np.diag(diag)).max()))
    ok = worst_harness < 1e-10 and worst_sym < 1e-10 and min_eig >= -1e-9 and worst_diag < 1e-10
    _status(
        3,
        "metric-tensor",
        ok,
        f"harness {worst_harness:.1e}, sym {worst_sym:.1e}, "
        f"min eig {min_eig:.1e}, diag {worst_diag:.1e}",
    )
    assert ok


def test_c04_secant_conditions():
    rng = np.random.default_rng(11)
    updates = {"bfgs": update_bfgs, "dfp": update_dfp, "sr1": update_sr1}
    accepted = 0
    worst = 0.0
    while accepted < 1000:
        n = int(rng.integers(2, 7))
        a = rng.normal(size=(n, n))
        b = a @ a.T + 0.1 * np.eye(n)
        s = rng.normal(size=n)
        y = rng.normal(size=n)
        for fn in updates.values():
            b_new = fn(b, s, y)
            if b_new is None:
                continue
            worst = max(worst, float(np.abs(b_new @ y - s).max()))
            accepted += 1
    assert worst < 1e-10, f"secant residual {worst:.2e}"

    # penalty limits: huge weight recovers the rank-2 update, zero weight is a no-op
    worst_limit = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        a = rng.normal(size=(n, n))
        b = a @ a.T + 0.1 * np.eye(n)
        s = rng.normal(size=n)
        y = rng.normal(size=n)
        if float(s @ y) <= 1e-6:
            continue
        pen = SecantPenaltyConfig(n0=0.0, ns=1e12 / float(np.linalg.norm(s)))
        stiff = update_sp_bfgs(b, s, y, pen)
        exact = update_bfgs(b, s, y)
        worst_limit = max(worst_limit, float(np.abs(stiff - exact).max()))
        frozen = update_sp_bfgs(b, s, y, SecantPenaltyConfig(n0=1.0, ns=0.0))
        assert np.array_equal(frozen, b) and frozen is not b
    ok = worst < 1e-10 and worst_limit < 1e-6
    _status(4, "secant-conditions", ok, f"residual {worst:.1e}, stiff-limit gap {worst_limit:.1e}")
    assert ok


def test_c05_stochastic_estimators():
    # first-order: mean gradient estimate on a linear function is unbiased
    coeffs = np.array([1.5, -2.0, 0.5, 3.0])
    cfg = SPSAConfig(a_init=1e-9, c_init=0.1, big_a=0.0, alpha_decay=0.602, gamma_decay=0.101)
    rng = stream(202, "acceptance-spsa")
    theta = np.zeros(4)
    n_draws = 10_000
    estimates = np.empty((n_draws, 4))
    ev = LinearOracle(coeffs)
    a0, _ = spsa_gains(0, cfg)
    for i in range(n_draws):
        estimates[i] = (theta - spsa_step(ev, theta, 0, cfg, rng)) / a0
    sem = estimates.std(axis=0, ddof=1) / np.sqrt(n_draws)
    bias = np.abs(estimates.mean(axis=0) - coeffs)
    assert np.all(bias <= 3.0 * sem + 1e-12), f"bias {bias} vs 3*sem {3 * sem}"

    # second-order: running curvature average approaches a diagonal Hessian
    d = np.array([1.0, 3.0])
    curv = CurvatureAverage()
    cfg2 = SPSAConfig(a_init=1e-4, c_init=0.2, big_a=10.0, ch_init=0.2)
    rng2 = stream(11, "acceptance-hessian")
    th = np.array([0.5, -0.5])
    for k in range(2000):
        th = spsa2_step(QuadraticOracle(d), th, k, cfg2, rng2, curv)
    rel = np.linalg.norm(curv.matrix - np.diag(d)) / np.linalg.norm(np.diag(d))
    ok = rel < 0.2
    _status(5, "stochastic-estimators", ok, f"max bias/sem {(bias / sem).max():.2f}, "
            f"curvature rel err {rel:.3f}")
    assert ok


def test_c06_gp_posterior():
    x3 = np.array([[0.1], [0.5], [0.9]])
    y3 = np.array([1.0, -0.5, 2.0])
    worst = 0.0
    for nu in (0.5, 1.5, 2.5):
        kern = MaternKernel(nu, np.array([0.3]), 1.5)
        gp = GPModel(kern, noise=1e-6, mean=0.4, x_obs=x3, y_obs=y3)

        def kfn(a, b, kern=kern):
            return kern(np.atleast_2d(a), np.atleast_2d(b))[0, 0]

        queries = np.array([[0.05], [0.3], [0.5], [0.77]])
        want_mu, want_var = dense_gp_posterior(x3, y3, queries, kfn, gp.noise, gp.mean)
        mu, var = gp.posterior(queries)
        worst = max(worst, float(np.abs(mu - want_mu).max()))
        worst = max(worst, float(np.abs(var - np.maximum(want_var, 0.0)).max()))
    assert worst < 1e-10, f"posterior vs dense solve {worst:.2e}"

    gp0 = GPModel(MaternKernel(2.5, np.array([0.3]), 1.5), noise=0.0, mean=0.4,
                  x_obs=x3, y_obs=y3)
    mu0, var0 = gp0.posterior(x3)
    interp = float(np.abs(mu0 - y3).max())
    assert interp < 1e-8 and np.all(var0 < 1e-8)

    prior = GPModel(MaternKernel(2.5, np.array([0.3]), 1.5), mean=0.4,
                    x_obs=np.zeros((0, 1)), y_obs=np.zeros(0))
    mu_p, var_p = prior.posterior(np.array([[0.25]]))
    ok = mu_p[0] == 0.4 and var_p[0] == 1.5
    _status(6, "gp-posterior", ok and worst < 1e-10,
            f"dense gap {worst:.1e}, interpolation {interp:.1e}, prior exact {ok}")
    assert ok


def _synthetic_record(xs, fs):
    """Straight-line trajectory along the first axis with given objective values."""
    thetas = [np.array([x, 0.0]) for x in xs[1:]]
    k = len(thetas)
    return RunRecord(
        method="bfgs", hyper={}, seed=0, theta0=np.array([xs[0], 0.0]), f0=fs[0],
        thetas=thetas, fs=list(fs[1:]), grad_norms=[float("nan")] * k,
        qcalls=list(range(1, k + 1)), wallclock=[0.0] * k,
    )


def test_c07_lipschitz_statistics():
    rec = _synthetic_record([0.0, 1.0, 3.0, 3.5], [0.0, 3.0, 9.0, 10.5])  # f = 3x
    slope = run_lipschitz(rec)
    assert slope == 3.0  # exact, not approximate

    base = LipschitzStats.from_samples([2.0, 4.0, 5.0], n_total=3)
    c = 4.0  # power of two: scaling commutes exactly through every statistic
    scaled = LipschitzStats.from_samples([c * 2.0, c * 4.0, c * 5.0], n_total=3)
    ok = (
        scaled.average == c * base.average
        and scaled.std == c * base.std
        and scaled.median == c * base.median
        and scaled.iqr == c * base.iqr
    )
    _status(7, "lipschitz-statistics", slope == 3.0 and ok,
            f"slope {slope}, scale-covariant {ok}")
    assert slope == 3.0 and ok


def test_c08_benchmark_determinism_across_workers():
    proto = BenchProtocol(restarts=2, shots=None, sample_shots=64,
                          rho=0.03, lp_rho=0.01, lp_cap=10, n_layers=1,
                          max_iterations=10)
    outs = []
    for workers in (1, 2):
        (rep,) = run_benchmark([FIX3], list(METHOD_IDS), proto, seed=SEED, workers=workers)
        report_json = json.dumps(rep.to_dict(include_timing=False), sort_keys=True)
        runs_json = json.dumps(
            {
                m: [[r.to_dict(include_timing=False) for r in leg] for leg in legs]
                for m, legs in rep.records.items()
            },
            sort_keys=True,
        )
        outs.append((report_json, runs_json))
    ok = outs[0] == outs[1]
    _status(8, "worker-count-determinism", ok,
            f"{len(METHOD_IDS)} methods x 2 restarts, byte-identical {ok}")
    assert ok


# -------------------------------------------------------------- trend gates


@pytest.fixture(scope="module")
def quasi_newton_sweep():
    proto = BenchProtocol(restarts=50, shots=None, sample_shots=256,
                          rho=0.03, lp_rho=0.01, lp_cap=20, n_layers=1,
                          max_iterations=60)
    t0 = time.perf_counter()
    (rep,) = run_benchmark(
        [FIX3], ["bfgs", "dfp", "sr1", "ncg", "sp_bfgs"], proto, seed=SEED
    )
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def lipschitz_sweep():
    proto = BenchProtocol(restarts=200, shots=None, sample_shots=256,
                          rho=0.03, lp_rho=0.01, lp_cap=20, n_layers=1,
                          max_iterations=20)
    t0 = time.perf_counter()
    (rep,) = run_benchmark([FIX3], list(TRIO) + list(QNG_FAMILY), proto, seed=SEED)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cost_sweeps():
    out = {}
    t0 = time.perf_counter()
    for label, graph, p in (("n3", FIX3, 1), ("n5", FIX5, 2)):
        proto = BenchProtocol(restarts=50, shots=None, sample_shots=256,
                              rho=0.03, lp_rho=0.01, lp_cap=20, n_layers=p,
                              max_iterations=60)
        (rep,) = run_benchmark([graph], ["dfp", "sp_bfgs"], proto, seed=SEED)
        out[label] = rep
    return out, time.perf_counter() - t0


def test_c09_preconditioner_convergence_ratios(quasi_newton_sweep):
    rep, elapsed = quasi_newton_sweep
    ratios = {m: rep.aggregates[m].convergence_ratio for m in rep.aggregates}
    ok = all(ratios[w] > ratios[b] for w in ("dfp", "sp_bfgs") for b in TRIO)
    detail = ", ".join(f"{m} {ratios[m]:.3f}" for m in ("bfgs", "dfp", "sr1", "ncg", "sp_bfgs"))
    _status(9, "convergence-ratio-ordering", ok, f"{detail}; {elapsed:.0f}s")
    assert elapsed < 240.0
    assert ok, (
        "dfp and sp_bfgs must each exceed bfgs, sr1 and ncg in 3% convergence "
        f"ratio; measured {detail}.  The ordering does not exist under "
        "deterministic evaluation with the published defaults on this fixture "
        "(documented honest failure; see README, acceptance status)."
    )


def test_c10_natural_gradient_lipschitz_dominance(lipschitz_sweep):
    rep, elapsed = lipschitz_sweep
    means = {}
    filtered = []
    for m in list(TRIO) + list(QNG_FAMILY):
        agg = rep.aggregates[m]
        if agg.lipschitz is None:
            filtered.append(f"{m} ({agg.lipschitz_note})")
        else:
            means[m] = agg.lipschitz.average
    trio_in = [m for m in TRIO if m in means]
    qng_in = [m for m in QNG_FAMILY if m in means]
    ok = (
        len(trio_in) >= 2
        and len(qng_in) >= 2
        and min(means[m] for m in qng_in) > max(means[m] for m in trio_in)
    )
    detail = (
        ", ".join(f"{m} {means[m]:.1f}" for m in trio_in + qng_in)
        + (f"; filtered: {len(filtered)}" if filtered else "")
    )
    _status(10, "natural-gradient-lipschitz", ok, f"{detail}; {elapsed:.0f}s")
    assert elapsed < 600.0
    assert ok, f"per-run slope means {means}, filtered {filtered}"


def test_c11_secant_penalty_cost_scaling(cost_sweeps):
    reps, elapsed = cost_sweeps
    gaps = {}
    qc_ok = {}
    for label, rep in reps.items():
        qc = {m: rep.aggregates[m].mean_qcalls_to_convergence for m in ("dfp", "sp_bfgs")}
        assert qc["dfp"] is not None and qc["sp_bfgs"] is not None, f"{label}: no converged runs"
        qc_ok[label] = qc["sp_bfgs"] <= qc["dfp"]
        clouds = {}
        for m in ("dfp", "sp_bfgs"):
            _cap, tol = rep.records[m]
            clouds[m] = [r.walltime / len(r.fs) for r in tol
                         if not r.failed and r.converged and len(r.fs) > 0]
        gaps[label] = centroid_gap(clouds["sp_bfgs"], clouds["dfp"])
    ok = qc_ok["n3"] and qc_ok["n5"] and gaps["n5"] >= gaps["n3"]
    _status(11, "cost-to-convergence", ok,
            f"qcalls ok n3 {qc_ok['n3']} n5 {qc_ok['n5']}, "
            f"tpi gap {gaps['n3']:.5f} -> {gaps['n5']:.5f}; {elapsed:.0f}s")
    assert elapsed < 1200.0
    assert ok, f"qcalls {qc_ok}, time-per-iteration gaps {gaps}"


def test_c12_tuning_beats_published_defaults():
    restarts, cap = 10, 60

    def mean_final_at(hyper_subset):
        base = default_hyper("sp_bfgs")
        base.update(hyper_subset)
        finals = []
        for r in range(restarts):
            ev = Evaluator.for_graph(FIX3, n_layers=1, shots=None, seed=SEED)
            theta0 = stream(SEED, "tune", "theta0", r).uniform(-np.pi, np.pi, 2)
            rec = run("sp_bfgs", ev, theta0, hyper=base,
                      stop=StopRule(max_iterations=cap),
                      seed=int(stream(SEED, "tune", "run", r).integers(0, 2**31 - 1)))
            finals.append(rec.fs[-1] if rec.fs else rec.f0)
        return float(np.mean(finals))

    t0 = time.perf_counter()
    baseline = mean_final_at({})
    result = tune_method("sp_bfgs", FIX3, budget=30, seed=SEED,
                         dim_names=["alpha", "n0", "ns"], restarts=restarts,
                         max_iterations=cap, log_timing=False)
    elapsed = time.perf_counter() - t0
    improvement = baseline - result.best_y
    ok = improvement >= TUNING_MARGIN
    _status(12, "tuning-improvement", ok,
            f"baseline {baseline:.3f} -> best {result.best_y:.3f}, "
            f"gain {improvement:.2f} (margin {TUNING_MARGIN}); {elapsed:.0f}s")
    assert elapsed < 1800.0
    assert ok, f"improvement {improvement:.3f} below margin {TUNING_MARGIN}"
