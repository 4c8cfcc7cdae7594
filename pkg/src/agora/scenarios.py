"""Ready-made scenarios used by the experiments, tests and CLI examples."""

from __future__ import annotations

from .simulation import Scenario

# 4-agent decentralized regression with a shared bias feature; agent i
# sees only coordinate i of x, drawn uniformly with the given half-width.
REGRESSION_THETA_STAR = [-0.3, 0.5, 0.5, 0.1, 0.2]
REGRESSION_NOISE_STD = 0.8
REGRESSION_HALF_WIDTHS = [1.0, 1.5, 1.25, 0.75]
REGRESSION_WEIGHTS = [
    [0.5, 0.5, 0.0, 0.0],
    [0.3, 0.1, 0.3, 0.3],
    [0.0, 0.5, 0.5, 0.0],
    [0.0, 0.5, 0.0, 0.5],
]

STAR_SWEEP = (0.1, 0.2, 0.3, 0.5, 0.7)

# Six-class analog of the label-split image experiments. Hypothesis
# (a, b) confuses input a with label b; only an agent holding both labels
# can rule it out.
CLASSES = 6
CONFUSIONS = [[0, 1], [2, 3], [4, 5]]
CENTER_INFORMATIVE = {"center": [2, 3, 4, 5], "edge": [0, 1]}
AMBIGUOUS_CONFUSIONS = [[0, 1], [3, 4], [4, 5]]
AMBIGUOUS = {"center": [0, 1, 2, 3], "edge": [4, 5]}


def regression4(rounds: int = 2000, seed: int = 0) -> Scenario:
    return Scenario(
        name="regression4",
        engine="gaussian",
        topology={"kind": "matrix", "rows": REGRESSION_WEIGHTS},
        model={"kind": "regression", "theta_star": REGRESSION_THETA_STAR, "noise_std": REGRESSION_NOISE_STD,
               "prior_var": 0.5, "bias": True, "test_size": 10000, "test_half_width": 1.0, "test_seed": 12345},
        partition={"mode": "by-feature-coordinate", "owners": [[0], [1], [2], [3]],
                   "half_widths": REGRESSION_HALF_WIDTHS},
        batch_size=1,
        rounds=rounds,
        seed=seed,
    )


def bernoulli_ring3(rounds: int = 2000, seed: int = 0) -> Scenario:
    """Three agents on a ring, binary labels, two input types.

    Agent 0 only sees input 0, agent 1 only input 1, agent 2 both. The
    wrong hypothesis ``b`` differs from the truth on input 0 only, ``c``
    on input 1 only, so no single agent can learn alone.
    """
    return Scenario(
        name="bernoulli_ring3",
        engine="finite",
        topology={"kind": "ring", "n": 3, "self_weight": 0.5},
        model={"kind": "coin", "biases": [[0.5, 0.5], [0.7, 0.5], [0.5, 0.3]], "labels": ["a", "b", "c"],
               "truth": 0},
        partition={"mode": "explicit", "agent_probs": [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]},
        batch_size=1,
        rounds=rounds,
        seed=seed,
    )


def bernoulli_pair(rounds: int = 2000, seed: int = 0, self_weight: float = 0.7) -> Scenario:
    """Two agents, coin biases {0.3, 0.5, 0.7}, truth 0.5.

    On input 1 the label is a coin with the parameter's bias; on input 0
    it is a fair coin regardless. Agent 0 sees input 1 half of the time,
    agent 1 never does.
    """
    return Scenario(
        name="bernoulli_pair",
        engine="finite",
        topology={"kind": "ring", "n": 2, "self_weight": self_weight},
        model={"kind": "coin", "biases": [[0.5, 0.3], [0.5, 0.5], [0.5, 0.7]], "labels": [0.3, 0.5, 0.7],
               "truth": 1},
        partition={"mode": "explicit", "agent_probs": [[0.5, 0.5], [1.0, 0.0]]},
        rounds=rounds,
        seed=seed,
    )


def _star_subsets(spec, n_edges=8):
    return [spec["center"]] + [spec["edge"]] * n_edges


def star_classification(a: float, ambiguous: bool = False, rounds: int = 500, seed: int = 0) -> Scenario:
    spec = AMBIGUOUS if ambiguous else CENTER_INFORMATIVE
    return Scenario(
        name=f"star9_{'ambiguous' if ambiguous else 'informative'}_a{a}",
        engine="finite",
        topology={"kind": "star", "n_edges": 8, "a": a},
        model={"kind": "label_softmax", "classes": CLASSES, "beta": 2.0,
               "confusions": AMBIGUOUS_CONFUSIONS if ambiguous else CONFUSIONS},
        partition={"mode": "by-label", "label_subsets": _star_subsets(spec)},
        rounds=rounds,
        seed=seed,
    )


def grid_classification(setting: int, rounds: int = 500, seed: int = 0) -> Scenario:
    """3x3 grid; the informative (type-1) agent sits at the centre
    (setting 1, agent 4) or a corner (setting 2, agent 0)."""
    informative = {1: 4, 2: 0}[setting]
    subsets = [CENTER_INFORMATIVE["edge"]] * 9
    subsets[informative] = CENTER_INFORMATIVE["center"]
    return Scenario(
        name=f"grid3_setting{setting}",
        engine="finite",
        topology={"kind": "grid", "side": 3},
        model={"kind": "label_softmax", "classes": CLASSES, "beta": 2.0, "confusions": CONFUSIONS},
        partition={"mode": "by-label", "label_subsets": subsets},
        rounds=rounds,
        seed=seed,
    )


def time_varying_star(n_edges: int = 25, n_active: int = 5, rounds: int = 500, seed: int = 0) -> Scenario:
    return Scenario(
        name=f"tv_star_{n_edges}_{n_active}",
        engine="finite",
        topology={"kind": "time_varying_star", "n_edges": n_edges, "n_active": n_active, "a": 0.5},
        model={"kind": "label_softmax", "classes": CLASSES, "beta": 2.0, "confusions": CONFUSIONS},
        partition={"mode": "iid"},
        rounds=rounds,
        seed=seed,
    )


def scalar_regression(engine: str, rounds: int = 100, seed: int = 0, points: int = 4001) -> Scenario:
    """Two agents learning a scalar slope; the finite engine scores a grid of slopes."""
    topology = {"kind": "ring", "n": 2, "self_weight": 0.6}
    if engine == "finite":
        model = {"kind": "grid_regression", "theta_star": 0.7, "noise_std": 0.8, "prior_var": 0.5,
                 "grid": [-2.0, 2.0, points]}
    else:
        model = {"kind": "regression", "theta_star": [0.7], "noise_std": 0.8, "prior_var": 0.5, "bias": False,
                 "test_size": 1000}
    return Scenario(name=f"scalar_regression_{engine}", engine=engine, topology=topology, model=model,
                    partition={"mode": "iid", "half_width": 1.0}, rounds=rounds, seed=seed)


PRESETS = {
    "regression4": regression4,
    "bernoulli_ring3": bernoulli_ring3,
    "bernoulli_pair": bernoulli_pair,
    "star9": lambda: star_classification(0.5),
    "star9_ambiguous": lambda: star_classification(0.5, ambiguous=True),
    "grid_setting1": lambda: grid_classification(1),
    "grid_setting2": lambda: grid_classification(2),
    "time_varying_star": time_varying_star,
}
