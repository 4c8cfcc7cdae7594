"""Convergence-rate quantities for finite parameter sets.

All expectations over a finite input space are computed by exact
enumeration; Monte Carlo is used only when explicitly requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import AssumptionError, ConfigError, NumericError
from .graph import spectral_summary

TIE_TOL = 1e-9
LOG_FLOOR = -700.0


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """KL(p[x] || q[x]) for each row x, with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return terms.sum(axis=-1)


def expected_kl(agent, theta: int) -> float:
    """E_{x ~ P_i} KL(true label law || l_i(. | theta, x))."""
    return float(agent.input_probs @ _kl_rows(agent.truth, agent.lik.conditional(theta)))


def local_optimal_set(agent, n_params: int | None = None) -> frozenset:
    """Indices minimizing the agent's expected KL, ties within TIE_TOL kept."""
    n = agent.n_params if n_params is None else n_params
    if n == 0:
        raise ConfigError("empty parameter set")
    kl = np.array([expected_kl(agent, t) for t in range(n)])
    return frozenset(np.flatnonzero(kl <= kl.min() + TIE_TOL).tolist())


@dataclass(frozen=True)
class LearnableSet:
    members: frozenset

    @property
    def globally_learnable(self) -> bool:
        return bool(self.members)

    @property
    def reason(self) -> str:
        return "" if self.members else "not globally learnable"

    def __contains__(self, item):
        return item in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)


def global_learnable_set(locals_) -> LearnableSet:
    locals_ = list(locals_)
    if not locals_:
        raise ConfigError("need at least one local optimal set")
    return LearnableSet(frozenset.intersection(*map(frozenset, locals_)))


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    stderr: float = 0.0
    samples: int = 0  # 0 means exact enumeration


def divergence_gap(agent, theta_star: int, theta: int, batch_size: int = 1, mc_samples: int | None = None,
                   seed: int | None = None, theta_star_set=None) -> DivergenceEstimate:
    """Expected excess KL of ``theta`` over ``theta_star`` for one batch of size M.

    The batch KL of i.i.d. samples is M times the single-sample KL.
    """
    if theta_star_set is not None:
        if theta_star not in theta_star_set:
            raise ConfigError("theta_star is not in the globally learnable set", theta_star=theta_star)
        if theta in theta_star_set:
            raise ConfigError("theta must lie outside the globally learnable set", theta=theta)
    per_input = (_kl_rows(agent.truth, agent.lik.conditional(theta))
                 - _kl_rows(agent.truth, agent.lik.conditional(theta_star)))
    if mc_samples is None:
        return DivergenceEstimate(batch_size * float(agent.input_probs @ per_input))
    rng = np.random.default_rng(seed)
    draws = per_input[agent.sample_inputs(rng, mc_samples)]
    return DivergenceEstimate(batch_size * float(draws.mean()),
                              batch_size * float(draws.std(ddof=1) / math.sqrt(mc_samples)), mc_samples)


def divergence_matrix(agents, batch_size: int = 1) -> np.ndarray:
    """``I[j, a, b]`` = excess divergence of parameter b over a at agent j."""
    ekl = np.array([[expected_kl(ag, t) for t in range(ag.n_params)] for ag in agents])
    return batch_size * (ekl[:, None, :] - ekl[:, :, None])


@dataclass(frozen=True)
class RateConstant:
    k: float
    argmin: tuple | None
    degenerate: bool = False


def rate_constant(centrality, divergences, theta_star_set) -> RateConstant:
    """Minimum over (truth in Theta*, wrong theta) of the centrality-weighted divergence.

    Ties are broken by parameter order. When every parameter is in
    Theta* there is nothing to rule out and ``k`` is ``+inf``.
    """
    v = np.asarray(centrality, dtype=float)
    div = np.asarray(divergences, dtype=float)
    n = div.shape[-1]
    good = sorted(theta_star_set)
    if not good:
        raise ConfigError("Theta* is empty: not globally learnable")
    bad = [t for t in range(n) if t not in theta_star_set]
    if not bad:
        return RateConstant(math.inf, None, degenerate=True)
    weighted = np.einsum("j,jab->ab", v, div)
    best, pair = math.inf, None
    for a in good:
        for b in bad:
            if weighted[a, b] < best:
                best, pair = float(weighted[a, b]), (a, b)
    return RateConstant(best, pair)


@dataclass(frozen=True)
class SampleComplexity:
    rounds: int
    vacuous: bool = False


def sample_complexity(n_agents: int, theta_count: int, delta: float, epsilon: float, C: float,
                      spectral_gap: float, k: float | None = None) -> SampleComplexity:
    """Rounds after which the high-probability decay bound holds.

    ``ceil(8 C log(N |Theta| / delta) / (epsilon^2 * gap))``. Flagged
    vacuous when ``epsilon >= k`` (the guaranteed exponent is not positive).
    """
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if spectral_gap <= 1e-12:
        raise ConfigError("degenerate graph: spectral gap is zero")
    n = 8 * C * math.log(n_agents * theta_count / delta) / (epsilon**2 * spectral_gap)
    return SampleComplexity(math.ceil(n), vacuous=k is not None and epsilon >= k)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    stderr: float
    truncated: bool
    rounds_used: int


def empirical_decay_rate(log_beliefs, burn_in: int) -> DecayFit:
    """Least-squares slope of ``-log b(theta)`` against the round index.

    Rounds at or below the LOG_FLOOR are excluded; if the floor is hit
    before ``burn_in`` the fit falls back to the pre-floor rounds and is
    flagged as truncated.
    """
    lb = np.asarray(log_beliefs, dtype=float)
    if lb.size <= burn_in + 10:
        raise ConfigError("trace too short for the requested burn-in", length=lb.size, burn_in=burn_in)
    floored = np.flatnonzero(lb <= LOG_FLOOR)
    stop = int(floored[0]) if floored.size else lb.size
    truncated = stop <= burn_in
    start = 0 if truncated else burn_in
    if stop - start < 3:
        raise NumericError("too few rounds above the belief floor to fit a slope", rounds=stop - start)
    rounds = np.arange(start, stop)
    fit = stats.linregress(rounds, -lb[start:stop])
    return DecayFit(float(fit.slope), float(fit.stderr), truncated, stop - start)


@dataclass(eq=False)
class RateReport:
    theta_star_set: tuple
    divergences: np.ndarray
    k_theta: float
    argmin: tuple | None
    centrality: np.ndarray
    lambda_max: float
    mixing_bound: float
    constants: dict
    sample_complexity: list = field(default_factory=list)
    labels: tuple = ()

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.lambda_max

    def positivity_holds(self) -> bool:
        """K > 0 whenever every wrong parameter is ruled out by some agent."""
        return self.k_theta > 0

    def to_dict(self):
        lab = self.labels or tuple(range(self.divergences.shape[-1]))
        return {
            "theta_star_set": [lab[t] for t in self.theta_star_set],
            "k_theta": self.k_theta if math.isfinite(self.k_theta) else None,
            "argmin": None if self.argmin is None else [lab[self.argmin[0]], lab[self.argmin[1]]],
            "centrality": self.centrality.tolist(),
            "lambda_max": self.lambda_max,
            "spectral_gap": self.spectral_gap,
            "mixing_bound": self.mixing_bound,
            "constants": self.constants,
            "per_agent_divergence": self.divergences.tolist(),
            "sample_complexity": self.sample_complexity,
        }


def rate_report(agents, weights, batch_size: int = 1, deltas=(0.05, 0.1, 0.2), epsilon_fractions=(0.25, 0.5, 0.75),
                labels=()) -> RateReport:
    """Assemble every analytic quantity for a finite scenario.

    Raises
    ------
    AssumptionError
        If the globally learnable set is empty.
    """
    summary = spectral_summary(weights)
    n_params = agents[0].n_params
    learnable = global_learnable_set(local_optimal_set(ag) for ag in agents)
    if not learnable.globally_learnable:
        raise AssumptionError("not globally learnable: local optimal sets have empty intersection")
    div = divergence_matrix(agents, batch_size)
    rc = rate_constant(summary.centrality, div, learnable.members)
    floor = min(ag.lik.floor for ag in agents)
    ceiling = max(ag.lik.ceiling for ag in agents)
    C = abs(math.log(ceiling / floor))
    table = []
    if not rc.degenerate:
        for delta in deltas:
            for frac in epsilon_fractions:
                eps = frac * rc.k
                sc = sample_complexity(len(agents), n_params, delta, eps, C, summary.gap, rc.k)
                table.append({"delta": delta, "epsilon": eps, "rounds": sc.rounds, "vacuous": sc.vacuous})
    return RateReport(
        theta_star_set=tuple(sorted(learnable.members)),
        divergences=div,
        k_theta=rc.k,
        argmin=rc.argmin,
        centrality=summary.centrality,
        lambda_max=summary.lambda_max,
        mixing_bound=summary.mixing_bound,
        constants={"C": C, "alpha": floor, "L": ceiling},
        sample_complexity=table,
        labels=tuple(labels),
    )
