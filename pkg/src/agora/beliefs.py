"""Finite-parameter beliefs and the three-step local learning rule.

Beliefs live in log-space: after ``n`` rounds the mass on a wrong
parameter is of order ``exp(-n K)`` and would underflow quickly as plain
probabilities. With the allowed family equal to all distributions on a
finite parameter set, the projection step is the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericError

NORM_TOL = 1e-9
WEIGHT_TOL = 1e-12


def log_normalize(log_values: np.ndarray) -> np.ndarray:
    """Subtract log-sum-exp along the last axis."""
    m = np.max(log_values, axis=-1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise NumericError("cannot normalize: a belief row has no finite entry")
    return log_values - (m + np.log(np.sum(np.exp(log_values - m), axis=-1, keepdims=True)))


def logsumexp(log_values: np.ndarray) -> float:
    m = float(np.max(log_values))
    return m + math.log(float(np.sum(np.exp(log_values - m))))


@dataclass(frozen=True)
class ParameterSet:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) < 2:
            raise ConfigError("a parameter set needs at least two elements")
        if len(set(labels)) != len(labels):
            raise ConfigError("parameter labels must be unique")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)


@dataclass(frozen=True, eq=False)
class FiniteBelief:
    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.array(self.log_probs, dtype=float)
        if lp.ndim != 1 or lp.size == 0:
            raise ConfigError("log_probs must be a non-empty vector")
        if not np.all(np.isfinite(lp)):
            raise ConfigError("belief entries must be finite (strictly positive mass)")
        if abs(logsumexp(lp)) > NORM_TOL:
            raise ConfigError("belief is not normalized", logsumexp=logsumexp(lp))
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)

    @classmethod
    def uniform(cls, size: int) -> "FiniteBelief":
        return cls(np.full(size, -math.log(size)))

    @classmethod
    def from_probs(cls, probs) -> "FiniteBelief":
        p = np.asarray(probs, dtype=float)
        return cls(log_normalize(np.log(p)))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def __len__(self):
        return self.log_probs.size

    def __eq__(self, other):
        return isinstance(other, FiniteBelief) and np.array_equal(self.log_probs, other.log_probs)

    def to_json(self, parameters: ParameterSet | None = None) -> str:
        labels = list(parameters.labels) if parameters else list(range(len(self)))
        return json.dumps({"parameters": labels, "log_probs": self.log_probs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FiniteBelief":
        return cls(np.asarray(json.loads(text)["log_probs"], dtype=float))


@dataclass(frozen=True, eq=False)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs)
        y = np.asarray(self.labels)
        if len(x) != len(y):
            raise ConfigError("batch inputs and labels differ in length", inputs=len(x), labels=len(y))
        if len(x) == 0:
            raise ConfigError("batch must hold at least one sample")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.labels)


class BoundedLikelihood:
    """Tabulated likelihood ``table[theta, x, y]`` over finite inputs and labels.

    Every evaluation is clamped into ``[floor, ceiling]`` so that no
    parameter can ever receive a log-likelihood of ``-inf``. When the
    bounds are omitted they default to the extreme table entries.
    """

    def __init__(self, table, floor: float | None = None, ceiling: float | None = None):
        table = np.asarray(table, dtype=float)
        if table.ndim != 3:
            raise ConfigError("likelihood table must have shape (n_params, n_inputs, n_labels)")
        if np.any(table < 0) or not np.allclose(table.sum(axis=2), 1.0, atol=1e-12):
            raise ConfigError("each table[theta, x, :] must be a probability vector")
        self.table = table
        self.floor = float(table.min()) if floor is None else float(floor)
        self.ceiling = float(table.max()) if ceiling is None else float(ceiling)
        if not 0 < self.floor < self.ceiling:
            raise ConfigError("clamp bounds must satisfy 0 < floor < ceiling",
                              floor=self.floor, ceiling=self.ceiling)
        self._log_table = np.log(np.clip(table, self.floor, self.ceiling))

    @property
    def n_params(self) -> int:
        return self.table.shape[0]

    @property
    def C(self) -> float:
        return abs(math.log(self.ceiling / self.floor))

    def log_likelihoods(self, inputs, labels) -> np.ndarray:
        """Per-sample clamped log-likelihoods, shape ``inputs.shape + (n_params,)``."""
        return np.moveaxis(self._log_table[:, inputs, labels], 0, -1)

    def conditional(self, theta_index: int) -> np.ndarray:
        """Label law ``l(. | theta, x)`` for every input, shape (n_inputs, n_labels)."""
        return np.clip(self.table[theta_index], self.floor, self.ceiling)


class GaussianGridLikelihood:
    """Scalar linear-Gaussian likelihood ``y ~ N(theta * phi, sigma^2)`` on a grid of theta.

    Inputs are scalar features ``phi``; labels are real.
    """

    def __init__(self, grid, noise_std: float, floor: float = 1e-300):
        self.grid = np.asarray(grid, dtype=float)
        if noise_std <= 0:
            raise ConfigError("noise_std must be positive")
        self.noise_std = float(noise_std)
        self.floor = float(floor)
        self.ceiling = 1.0 / (math.sqrt(2 * math.pi) * self.noise_std)
        self._log_floor = math.log(self.floor)
        self._log_ceiling = math.log(self.ceiling)

    @property
    def n_params(self) -> int:
        return self.grid.size

    @property
    def C(self) -> float:
        return abs(self._log_ceiling - self._log_floor)

    def log_likelihoods(self, inputs, labels) -> np.ndarray:
        phi = np.asarray(inputs, dtype=float)[..., None]
        y = np.asarray(labels, dtype=float)[..., None]
        resid = y - phi * self.grid
        ll = self._log_ceiling - 0.5 * (resid / self.noise_std) ** 2
        return np.clip(ll, self._log_floor, self._log_ceiling)


def bayes_update(prior: FiniteBelief, lik, batch: Batch) -> FiniteBelief:
    """Multiply the prior by the batch likelihood and renormalize.

    The batch likelihood is the product of the per-sample likelihoods.
    """
    ll = lik.log_likelihoods(batch.inputs, batch.labels)
    if ll.shape[-1] != len(prior):
        raise ConfigError("likelihood and belief disagree on the parameter count")
    return FiniteBelief(log_normalize(prior.log_probs + ll.reshape(-1, len(prior)).sum(axis=0)))


def project_identity(b: FiniteBelief) -> FiniteBelief:
    return b


def consensus(beliefs: Sequence[FiniteBelief], weights) -> FiniteBelief:
    """Weighted geometric mean of neighbour beliefs, renormalized."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(beliefs) != weights.size:
        raise ConfigError("need exactly one weight per belief", beliefs=len(beliefs), weights=weights.size)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > WEIGHT_TOL:
        raise ConfigError("consensus weights must be positive and sum to 1")
    sizes = {len(b) for b in beliefs}
    if len(sizes) != 1:
        raise ConfigError("beliefs are over different parameter sets")
    stacked = np.stack([b.log_probs for b in beliefs])
    return FiniteBelief(log_normalize(weights @ stacked))


def agent_round(state: FiniteBelief, lik, batch: Batch, neighbor_publics: Sequence[FiniteBelief],
                neighbor_weights, self_weight: float) -> tuple[FiniteBelief, FiniteBelief]:
    """One synchronous round at a single agent.

    ``neighbor_publics`` are the current-round public beliefs of the other
    neighbours; the agent's own fresh public belief enters the pool with
    ``self_weight``. Returns ``(public, private)``.
    """
    if self_weight <= 0:
        raise ConfigError("an agent must listen to itself (self weight > 0)")
    public = project_identity(bayes_update(state, lik, batch))
    pool = [public, *neighbor_publics]
    weights = np.concatenate([[self_weight], np.asarray(neighbor_weights, dtype=float).ravel()])
    return public, consensus(pool, weights)
