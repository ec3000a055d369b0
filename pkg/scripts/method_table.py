"""Run every registered optimizer on one random graph and print a summary table.

Quick API demo and smoke driver.  Columns: 3% convergence ratio (over the
capped leg), mean final objective, mean qcalls to convergence (converged runs
of the tolerance leg, blank when none converge), mean Hamming distance of the
modal sampled bitstring to the nearest optimal cut.
"""

import argparse

from qopt_bench.bench import BenchProtocol, run_benchmark
from qopt_bench.optimizers import METHOD_IDS
from qopt_bench.problems import brute_force, generate_problem


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=3)
    ap.add_argument("--graph-seed", type=int, default=7)
    ap.add_argument("--weight", type=float, default=20.0,
                    help="uniform edge weight (heavy enough that the tuned "
                         "step sizes of all methods make progress)")
    ap.add_argument("--layers", type=int, default=1)
    ap.add_argument("--restarts", type=int, default=20)
    ap.add_argument("--max-iterations", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    graph = generate_problem(args.nodes, seed=args.graph_seed, density=1.0,
                             weight_range=(args.weight, args.weight))
    truth = brute_force(graph)
    print(f"{args.nodes}-node graph, {len(graph.edges)} edges, "
          f"optimal objective {truth.optimal_value:g}")

    proto = BenchProtocol(restarts=args.restarts, shots=None, sample_shots=256,
                          rho=0.03, lp_rho=0.01, lp_cap=20,
                          n_layers=args.layers, max_iterations=args.max_iterations)
    (rep,) = run_benchmark([graph], list(METHOD_IDS), proto, seed=args.seed)

    print(f"{'method':12s} {'ratio':>6s} {'final f':>10s} {'qcalls@3%':>10s} {'hamming':>8s}")
    for m in METHOD_IDS:
        agg = rep.aggregates[m]
        qc = "" if agg.mean_qcalls_to_convergence is None \
            else f"{agg.mean_qcalls_to_convergence:.0f}"
        print(f"{m:12s} {agg.convergence_ratio:6.2f} {agg.mean_final_f:10.3f} "
              f"{qc:>10s} {agg.mean_hamming:8.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
