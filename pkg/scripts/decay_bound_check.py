"""High-probability decay bound on the 3-agent ring with three coin hypotheses.

Counts how often max_i max_{wrong theta} b_i(theta) < exp(-n (K - eps))
at round n, for several (delta, eps) pairs.
"""

import argparse

import numpy as np

from agora.rates import rate_report, sample_complexity
from agora.scenarios import bernoulli_ring3
from agora.simulation import resolve_model, run_many, static_weights


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=500)
    p.add_argument("--cap", type=int, default=5000, help="largest simulated horizon")
    args = p.parse_args()

    scenario = bernoulli_ring3()
    w = static_weights(scenario)
    rep = rate_report(resolve_model(scenario, w.n_agents).agents, w)
    k, C = rep.k_theta, rep.constants["C"]
    traces = run_many(scenario.replace(rounds=args.cap), range(args.seeds))["cooperative"]
    worst = np.array([t.metrics["max_wrong_log_belief"].max(axis=1) for t in traces])  # (seeds, rounds + 1)
    print(f"K={k:.5f} C={C:.4f} gap={rep.spectral_gap:.4f}")
    print(f"{'delta':>6} {'eps/K':>6} {'bound n':>9} {'n used':>7} {'event rate':>10} {'1-delta':>8}")
    for delta in (0.05, 0.1, 0.2):
        for frac in (0.25, 0.5, 0.75):
            eps = frac * k
            bound = sample_complexity(w.n_agents, 3, delta, eps, C, rep.spectral_gap, k).rounds
            n = min(bound, args.cap)
            rate = np.mean(worst[:, n] < -n * (k - eps))
            print(f"{delta:>6} {frac:>6} {bound:>9} {n:>7} {rate:>10.3f} {1 - delta:>8}")


if __name__ == "__main__":
    main()
