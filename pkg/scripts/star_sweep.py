"""Edge-to-hub confidence sweep on the 9-agent star.

For each a, prints the hub centrality, the analytic rate K and the
empirical decay slope of the worst wrong-parameter belief.
"""

import argparse

import numpy as np

from agora.rates import empirical_decay_rate, rate_report
from agora.scenarios import STAR_SWEEP, star_classification
from agora.simulation import resolve_model, run_many, static_weights


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--rounds", type=int, default=1500)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--ambiguous", action="store_true", help="use the partition where no agent can tell two labels apart")
    args = p.parse_args()

    print(f"{'a':>5} {'v_hub':>7} {'K':>9} {'slope':>9} {'slope/K':>8}")
    for a in STAR_SWEEP:
        scenario = star_classification(a, args.ambiguous, rounds=args.rounds)
        w = static_weights(scenario)
        rep = rate_report(resolve_model(scenario, w.n_agents).agents, w)
        traces = run_many(scenario, range(args.seeds))["cooperative"]
        slopes = [empirical_decay_rate(t.metrics["max_wrong_log_belief"][:, i], args.burn_in).slope
                  for t in traces for i in range(w.n_agents)]
        print(f"{a:>5} {rep.centrality[0]:>7.4f} {rep.k_theta:>9.5f} {np.mean(slopes):>9.5f} "
              f"{np.mean(slopes) / rep.k_theta:>8.3f}")


if __name__ == "__main__":
    main()
