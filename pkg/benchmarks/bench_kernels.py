"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py --runs 20
"""

import argparse
import statistics
import time

from platoon_match import accel
from platoon_match.distribution import ScoreState
from platoon_match.experiment import scenario_seed
from platoon_match.scenario import ScenarioConfig, generate_scenario

MODELS = ("even_out", "score", "cooperative", "market")


def solve(model, scenario, scores, backend):
    if model == "market":
        return accel.solve_market(scenario, backend_name=backend)
    return accel.solve_departures(scenario, model, scores if model == "score" else None,
                                  backend_name=backend)


def time_cell(model, n, runs, backend):
    samples = []
    for run in range(runs):
        sc = generate_scenario(ScenarioConfig(n), scenario_seed(0, n, run))
        scores = ScoreState.random(n, run)
        t0 = time.perf_counter()
        solve(model, sc, scores, backend)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples) * 1e3


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--n", type=int, nargs="+", default=[10, 20, 29])
    args = p.parse_args(argv)
    backends = ["python"] + (["cython"] if accel.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the fallback only")
    print(f"{'model':<12}{'N':>4}" + "".join(f"{b + ' ms':>12}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for model in MODELS:
        for n in args.n:
            ms = [time_cell(model, n, args.runs, b) for b in backends]
            line = f"{model:<12}{n:>4}" + "".join(f"{m:>12.3f}" for m in ms)
            if len(ms) == 2:
                line += f"{ms[0] / ms[1]:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
