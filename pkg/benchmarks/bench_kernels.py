"""Time the compiled and pure-Python kernels on the same workload.

    python benchmarks/bench_kernels.py [--steps N]

Also checks that both backends return identical tables and metrics.
"""

import argparse
import time

import numpy as np

from microgrid_q.core import GridConfig
from microgrid_q.kernels import available_backends
from microgrid_q.oracle import build_exact_model, value_iteration
from microgrid_q.qlearning import LearningSchedule, evaluate_policy, train


def bench(backend, config, steps, policy):
    t0 = time.perf_counter()
    trained = train(config, LearningSchedule.constant(0.1), 0.85, steps, seed=0, backend=backend)
    t1 = time.perf_counter()
    metrics = evaluate_policy(policy, config, steps, seed=0, backend=backend)
    t2 = time.perf_counter()
    return trained.q.values, metrics, t1 - t0, t2 - t1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=100_000)
    args = parser.parse_args()
    config = GridConfig()
    policy = value_iteration(build_exact_model(config)).policy
    results = {b: bench(b, config, args.steps, policy) for b in available_backends()}
    print(f"{'backend':<8} {'train us/step':>14} {'eval us/step':>13}")
    for name, (_, _, t_train, t_eval) in results.items():
        print(f"{name:<8} {1e6 * t_train / args.steps:>14.3f} {1e6 * t_eval / args.steps:>13.3f}")
    if len(results) == 2:
        (q_py, m_py, tp, ep), (q_c, m_c, tc, ec) = results["python"], results["cython"]
        print(f"speedup: train x{tp / tc:.0f}, eval x{ep / ec:.0f}")
        print("identical output:", np.array_equal(q_py, q_c) and m_py == m_c)


if __name__ == "__main__":
    main()
