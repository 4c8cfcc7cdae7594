"""Round-based simulation of the decentralized learning rule.

Each round every active agent (1) draws a batch from its own data stream,
(2) performs a local Bayes update to form its public belief and (3) pools
the public beliefs of its neighbours log-linearly into its private belief.

Seeds are processed in vectorized chunks. Every seed owns one generator
per agent (spawned from ``SeedSequence(seed)``), so a seed's trace does
not depend on which other seeds share its chunk, and the central and
no-cooperation baselines see exactly the same samples.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .beliefs import FiniteBelief, log_normalize
from .errors import ConfigError, MissingInputError, NumericError
from .gaussian import GaussianBelief
from .graph import WeightMatrix
from .models import (
    BoundedLikelihood,
    FiniteAgent,
    GridRegressionAgent,
    RegressionAgent,
    coin_table,
    label_softmax_tables,
    partition_features,
    partition_inputs,
)
from .rates import LOG_FLOOR, global_learnable_set, local_optimal_set
from .topology import TimeVaryingStarSchedule, build_topology, check_topology

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ENGINES = ("finite", "gaussian")
FINITE_MODELS = ("coin", "label_softmax", "grid_regression")
GAUSSIAN_MODELS = ("regression",)
MEMORY_BUDGET = 64 * 2**20


@dataclass
class Scenario:
    name: str
    engine: str
    topology: dict
    model: dict
    partition: dict = field(default_factory=lambda: {"mode": "iid"})
    batch_size: int = 1
    rounds: int = 100
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        obj = dict(obj)
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario fields {sorted(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(f"malformed scenario: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc

    def save(self, path):
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"scenario file not found: {path}", path=str(path))
        return cls.loads(path.read_text())

    def replace(self, **changes) -> "Scenario":
        return Scenario.from_dict({**self.to_dict(), **changes})


@dataclass(eq=False)
class ResolvedModel:
    agents: list
    labels: tuple
    prior: object  # (n_params,) log-probs for finite engines, GaussianBelief otherwise
    truth_index: int | None = None
    theta_star_set: frozenset = frozenset()
    theta_star: np.ndarray | None = None
    test_stats: tuple | None = None  # (Gram, cross, mean y^2) of the regression test set
    grid: np.ndarray | None = None
    partition_report: dict = field(default_factory=dict)


def _regression_test_stats(theta_star, noise_std, half_width, bias, size, seed):
    rng = np.random.default_rng(seed)
    d = len(theta_star)
    k = d - int(bias)
    probe = RegressionAgent(theta_star, noise_std, [-half_width] * k, [half_width] * k, bias=bias)
    phi, y = probe.draw(rng, 1, size)
    phi, y = phi[0], y[0]
    return phi.T @ phi / size, phi.T @ y / size, float(y @ y / size), phi, y


def resolve_model(scenario: Scenario, n_agents: int) -> ResolvedModel:
    m = dict(scenario.model)
    kind = m.get("kind")
    part = dict(scenario.partition)
    mode = part.get("mode", "iid")
    if scenario.engine not in ENGINES:
        raise ConfigError(f"unknown engine {scenario.engine!r}")
    allowed = FINITE_MODELS if scenario.engine == "finite" else GAUSSIAN_MODELS
    if kind not in allowed:
        raise ConfigError(f"model {kind!r} cannot run on the {scenario.engine} engine", engine=scenario.engine)
    try:
        if kind == "coin":
            table = coin_table(m["biases"])
            lik = BoundedLikelihood(table, m.get("floor"), m.get("ceiling"))
            truth = int(m.get("truth", 0))
            n_inputs = table.shape[1]
            global_probs = m.get("input_probs", [1.0 / n_inputs] * n_inputs)
            probs, report = partition_inputs(global_probs, mode, n_agents, part.get("label_subsets"),
                                             part.get("agent_probs"))
            # ``true_biases`` makes the model misspecified: the data law need not be any hypothesis
            true_table = coin_table([m["true_biases"]])[0] if "true_biases" in m else None
            agents = [FiniteAgent(lik, p, truth=true_table, true_index=truth) for p in probs]
            labels = tuple(m.get("labels", range(table.shape[0])))
            prior = np.full(table.shape[0], -math.log(table.shape[0]))
            return _finite(agents, labels, prior, truth, report)
        if kind == "label_softmax":
            k = int(m["classes"])
            confusions = [tuple(c) for c in m.get("confusions", [])]
            subsets = part.get("label_subsets") if mode == "by-label" else [list(range(k))] * n_agents
            probs, report = partition_inputs(np.full(k, 1.0 / k), mode, n_agents, subsets, part.get("agent_probs"))
            tables = label_softmax_tables(k, float(m.get("beta", 2.0)), confusions, subsets)
            agents = [FiniteAgent(BoundedLikelihood(t, lo, hi), p) for (t, lo, hi), p in zip(tables, probs)]
            labels = ("truth",) + tuple(f"conf({a},{b})" for a, b in confusions)
            prior = np.full(len(labels), -math.log(len(labels)))
            return _finite(agents, labels, prior, 0, report)
        if kind == "grid_regression":
            low, high, points = m["grid"]
            grid = np.linspace(float(low), float(high), int(points))
            widths = np.broadcast_to(np.asarray(part.get("half_width", 1.0), dtype=float), (n_agents,))
            agents = [GridRegressionAgent(float(m["theta_star"]), float(m["noise_std"]), w, grid) for w in widths]
            prior = log_normalize(-0.5 * grid**2 / float(m.get("prior_var", 0.5)))
            return ResolvedModel(agents, tuple(grid.tolist()), prior, grid=grid,
                                 theta_star=np.array([float(m["theta_star"])]))
        if kind == "regression":
            theta_star = np.asarray(m["theta_star"], dtype=float)
            bias = bool(m.get("bias", True))
            k = theta_star.size - int(bias)
            if mode == "by-feature-coordinate":
                widths = np.asarray(part["half_widths"], dtype=float).reshape(n_agents, -1)
                low, high = partition_features(k, mode, n_agents, widths, part["owners"])
            else:
                low, high = partition_features(k, "iid", n_agents, part.get("half_width", 1.0))
            noise = float(m["noise_std"])
            agents = [RegressionAgent(theta_star, noise, lo, hi, bias) for lo, hi in zip(low, high)]
            prior = GaussianBelief.isotropic(theta_star.size, float(m.get("prior_var", 0.5)))
            gram, cross, ysq, _, _ = _regression_test_stats(theta_star, noise, float(m.get("test_half_width", 1.0)),
                                                            bias, int(m.get("test_size", 10000)),
                                                            int(m.get("test_seed", 12345)))
            return ResolvedModel(agents, tuple(f"theta{i}" for i in range(theta_star.size)), prior,
                                 theta_star=theta_star, test_stats=(gram, cross, ysq),
                                 partition_report={"mode": mode})
    except KeyError as exc:
        raise ConfigError(f"model {kind!r} is missing field {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def _finite(agents, labels, prior, truth, report) -> ResolvedModel:
    if len({ag.n_params for ag in agents}) != 1:
        raise ConfigError("agents disagree on the parameter set")
    star_set = global_learnable_set(local_optimal_set(ag) for ag in agents).members
    return ResolvedModel(agents, labels, prior, truth, star_set, partition_report=report)


@dataclass(eq=False)
class RunTrace:
    scenario: str
    seed: int
    engine: str
    variant: str
    metrics: dict
    labels: tuple = ()
    public: np.ndarray | None = None      # finite: (T+1, N, n_params) log-probs
    private: np.ndarray | None = None
    means: np.ndarray | None = None       # gaussian: (T+1, N, d)
    precisions: np.ndarray | None = None  # gaussian: (T+1, N, d, d)
    active: np.ndarray | None = None      # (T, N) data-drawing agents per round
    final_precision: np.ndarray | None = None  # gaussian: (N, d, d)

    @property
    def rounds(self) -> int:
        return next(iter(self.metrics.values())).shape[0] - 1

    @property
    def n_agents(self) -> int:
        return next(iter(self.metrics.values())).shape[1]

    def snapshot(self, round_: int, agent: int, public: bool = False):
        if self.engine == "finite":
            src = self.public if public else self.private
            if src is None:
                raise ConfigError("trace was recorded without snapshots")
            return FiniteBelief(src[round_, agent])
        if self.precisions is None:
            raise ConfigError("trace was recorded without snapshots")
        return GaussianBelief(self.means[round_, agent], self.precisions[round_, agent])


class _Schedule:
    """Uniform view over a static matrix or a time-varying schedule."""

    def __init__(self, topo):
        self.topo = topo
        self.static = not isinstance(topo, TimeVaryingStarSchedule)
        self.n_agents = topo.n_agents

    def weights(self, round_: int) -> np.ndarray:
        return self.topo.weights if self.static else self.topo.at(round_).weights

    def active(self, round_: int) -> np.ndarray:
        return np.ones(self.n_agents, dtype=bool) if self.static else self.topo.active(round_)


def _active_table(schedule: _Schedule, rounds: int) -> np.ndarray:
    return np.array([schedule.active(r) for r in range(1, rounds + 1)]).reshape(rounds, schedule.n_agents)


def _draw_streams(agents, seed: int, rounds: int, batch_size: int):
    children = np.random.SeedSequence(seed).spawn(len(agents))
    return [ag.draw(np.random.default_rng(child), rounds, batch_size) for ag, child in zip(agents, children)]


def _gather(per_agent: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Map per-agent stream arrays (N, T, ...) onto rounds (T, N, ...).

    An agent consumes its next batch only in rounds where it is active;
    inactive slots are zero-filled and ignored by the update.
    """
    if active.shape[0] == 0:
        return np.empty((0, *per_agent.shape[:1], *per_agent.shape[2:]))
    ptr = np.cumsum(active, axis=0) - 1
    out = per_agent[np.arange(active.shape[1])[None, :], np.maximum(ptr, 0)]
    out[~active] = 0.0
    return out


def _chunks(seeds, per_seed_bytes):
    size = max(1, int(MEMORY_BUDGET // max(per_seed_bytes, 1)))
    for start in range(0, len(seeds), size):
        yield seeds[start:start + size]


VARIANTS = ("cooperative", "central", "no-coop")


def run(scenario: Scenario, seed: int | None = None, variant: str = "cooperative",
        keep_snapshots: bool = True) -> RunTrace:
    seed = scenario.seed if seed is None else seed
    return run_many(scenario, [seed], variants=(variant,), keep_snapshots=keep_snapshots)[variant][0]


def reference_baselines(scenario: Scenario, seed: int | None = None, keep_snapshots: bool = True):
    """Central-agent and no-cooperation traces on the cooperative run's sample streams."""
    seed = scenario.seed if seed is None else seed
    out = run_many(scenario, [seed], variants=("central", "no-coop"), keep_snapshots=keep_snapshots)
    return out["central"][0], out["no-coop"][0]


def run_many(scenario: Scenario, seeds, variants=("cooperative",), keep_snapshots: bool = False) -> dict:
    """Run ``scenario`` for every seed; returns ``{variant: [RunTrace, ...]}``.

    Variants: ``cooperative`` (the learning rule), ``central`` (one agent
    receives every active agent's batch each round) and ``no-coop``
    (consensus skipped, W = I).
    """
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be unique")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}")
    if scenario.rounds < 0 or scenario.batch_size < 1:
        raise ConfigError("rounds must be >= 0 and batch_size >= 1")
    topo = check_topology(build_topology(scenario.topology))
    schedule = _Schedule(topo)
    model = resolve_model(scenario, schedule.n_agents)
    T = scenario.rounds
    active = _active_table(schedule, T)
    out = {v: [] for v in variants}
    if scenario.engine == "finite":
        per_seed = T * schedule.n_agents * model.agents[0].n_params * 8 * (3 + 2 * keep_snapshots)
        for chunk in _chunks(seeds, per_seed):
            ll = np.stack([_gather(np.stack([ag.log_likelihood_sums(d) for ag, d in
                                             zip(model.agents, _draw_streams(model.agents, s, T,
                                                                             scenario.batch_size))]), active)
                           for s in chunk])  # (S, T, N, P)
            for v in variants:
                out[v].extend(_finite_variant(scenario, model, schedule, active, ll, chunk, v, keep_snapshots))
    else:
        d = model.prior.dim
        per_seed = T * schedule.n_agents * (d * d + d) * 8 * (2 + keep_snapshots)
        for chunk in _chunks(seeds, per_seed):
            dprec, dshift = [], []
            for s in chunk:
                stats = [ag.statistics(data) for ag, data in
                         zip(model.agents, _draw_streams(model.agents, s, T, scenario.batch_size))]
                dprec.append(_gather(np.stack([st[0] for st in stats]), active))
                dshift.append(_gather(np.stack([st[1] for st in stats]), active))
            dprec, dshift = np.stack(dprec), np.stack(dshift)  # (S, T, N, d, d), (S, T, N, d)
            for v in variants:
                out[v].extend(_gaussian_variant(scenario, model, schedule, active, dprec, dshift, chunk, v,
                                                keep_snapshots))
    return out


def _variant_setup(schedule: _Schedule, active: np.ndarray, variant: str):
    """Return (weights_at(round), active table, n_agents, collapse) for a variant."""
    n = schedule.n_agents
    if variant == "cooperative":
        return schedule.weights, active, n, False
    if variant == "no-coop":
        eye = np.eye(n)
        return (lambda r: eye), active, n, False
    one = np.ones((1, 1))
    return (lambda r: one), np.ones((active.shape[0], 1), dtype=bool), 1, True


def _finite_variant(scenario, model, schedule, active, ll, seeds, variant, keep):
    weights_at, act, n, collapse = _variant_setup(schedule, active, variant)
    if collapse:
        ll = ll.sum(axis=2, keepdims=True)
    S, T, _, P = ll.shape
    q = np.broadcast_to(model.prior, (S, n, P)).copy()
    grid = model.grid
    wrong = np.array([t not in model.theta_star_set for t in range(P)]) if model.truth_index is not None else None

    def metrics_of(q_, b_):
        if grid is not None:
            p = np.exp(q_)
            mean = p @ grid
            return {"posterior_mean": mean, "posterior_var": p @ grid**2 - mean**2}
        res = {"belief_theta_star": np.exp(q_[..., model.truth_index])}
        if wrong.any():
            res["max_wrong_log_belief"] = np.maximum(b_[..., wrong].max(axis=-1), LOG_FLOOR)
        return res

    first = metrics_of(q, q)
    mets = {k: np.empty((T + 1, S, n)) for k in first}
    for k, val in first.items():
        mets[k][0] = val
    if keep:
        pub = np.empty((T + 1, S, n, P))
        priv = np.empty((T + 1, S, n, P))
        pub[0] = priv[0] = q
    for t in range(1, T + 1):
        a = act[t - 1]
        try:
            if a.all():
                b = log_normalize(q + ll[:, t - 1])
                q = log_normalize(np.einsum("ij,sjp->sip", weights_at(t), b))
            else:
                b = q.copy()
                b[:, a] = log_normalize(q[:, a] + ll[:, t - 1][:, a])
                pooled = log_normalize(np.einsum("ij,sjp->sip", weights_at(t), b))
                q = np.where(a[None, :, None], pooled, q)
        except NumericError as exc:
            raise NumericError(str(exc), round=t, variant=variant) from exc
        for k, val in metrics_of(q, b).items():
            mets[k][t] = val
        if keep:
            pub[t], priv[t] = b, q
    traces = []
    for s_idx, seed in enumerate(seeds):
        traces.append(RunTrace(
            scenario=scenario.name, seed=seed, engine="finite", variant=variant,
            metrics={k: v[:, s_idx].copy() for k, v in mets.items()}, labels=model.labels,
            public=pub[:, s_idx].copy() if keep else None, private=priv[:, s_idx].copy() if keep else None,
            active=act.copy(),
        ))
    return traces


def _solve_means(prec: np.ndarray, shift: np.ndarray, round_: int) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        bad = [idx for idx in np.ndindex(prec.shape[:-2]) if np.any(np.linalg.eigvalsh(prec[idx]) <= 0)]
        raise NumericError("precision lost positive definiteness", round=round_,
                           agent=int(bad[0][-1]) if bad else None) from None
    z = np.linalg.solve(chol, shift[..., None])
    return np.linalg.solve(np.swapaxes(chol, -1, -2), z)[..., 0]


def _gaussian_variant(scenario, model, schedule, active, dprec, dshift, seeds, variant, keep):
    weights_at, act, n, collapse = _variant_setup(schedule, active, variant)
    if collapse:
        dprec = dprec.sum(axis=2, keepdims=True)
        dshift = dshift.sum(axis=2, keepdims=True)
    S, T, _, d = dshift.shape
    prec = np.broadcast_to(model.prior.precision, (S, n, d, d)).copy()
    shift = np.broadcast_to(model.prior.shift, (S, n, d)).copy()
    means = np.empty((T + 1, S, n, d))
    means[0] = model.prior.mean
    precs = np.empty((T + 1, S, n, d, d)) if keep else None
    if keep:
        precs[0] = prec
    for t in range(1, T + 1):
        a = act[t - 1]
        w = weights_at(t)
        pb = prec + dprec[:, t - 1]
        sb = shift + dshift[:, t - 1]
        new_prec = np.einsum("ij,sjkl->sikl", w, pb)
        new_shift = np.einsum("ij,sjk->sik", w, sb)
        if not a.all():
            # inactive agents are isolated (W_ii = 1) and keep their belief exactly
            new_prec[:, ~a] = prec[:, ~a]
            new_shift[:, ~a] = shift[:, ~a]
        prec, shift = new_prec, new_shift
        means[t] = _solve_means(prec, shift, t)
        if keep:
            precs[t] = prec
    theta_star = model.theta_star
    gram, cross, ysq = model.test_stats
    mse = ysq - 2 * means @ cross + np.einsum("...i,ij,...j->...", means, gram, means)
    linf = np.abs(means - theta_star).max(axis=-1)
    traces = []
    for s_idx, seed in enumerate(seeds):
        traces.append(RunTrace(
            scenario=scenario.name, seed=seed, engine="gaussian", variant=variant,
            metrics={"mse": mse[:, s_idx].copy(), "linf_error": linf[:, s_idx].copy()},
            labels=model.labels, means=means[:, s_idx].copy(),
            precisions=precs[:, s_idx].copy() if keep else None, active=act.copy(),
            final_precision=prec[s_idx].copy(),
        ))
    return traces


def describe(scenario: Scenario) -> dict:
    """Validation summary without running: network checks and learnability."""
    topo = check_topology(build_topology(scenario.topology))
    model = resolve_model(scenario, topo.n_agents)
    info = {"scenario": scenario.name, "engine": scenario.engine, "n_agents": topo.n_agents,
            "parameters": list(model.labels) if scenario.engine == "finite" and model.grid is None else None,
            "partition": model.partition_report}
    if model.truth_index is not None:
        info["theta_star_set"] = [model.labels[t] for t in sorted(model.theta_star_set)]
        info["globally_learnable"] = bool(model.theta_star_set)
        info["identifiable"] = len(model.theta_star_set) == 1
    return info


def resolve_network(scenario: Scenario):
    return check_topology(build_topology(scenario.topology))


def static_weights(scenario: Scenario) -> WeightMatrix:
    topo = resolve_network(scenario)
    if isinstance(topo, TimeVaryingStarSchedule):
        raise ConfigError("rate analysis needs a static network")
    return topo
