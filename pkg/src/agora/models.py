"""Per-agent observation models: what an agent sees and how it scores parameters.

Every agent object exposes

* ``draw(rng, count, batch_size)`` -> data arrays with leading shape ``(count, batch_size)``
* ``log_likelihood_sums(data)`` -> ``(count, n_params)`` summed batch log-likelihoods
  (finite-parameter agents only)

Regression agents additionally expose ``statistics(data)`` for the
Gaussian engine.
"""

from __future__ import annotations

import numpy as np

from .beliefs import BoundedLikelihood, GaussianGridLikelihood
from .errors import ConfigError
from .gaussian import regression_statistics


def _categorical(rng, cdf: np.ndarray, size) -> np.ndarray:
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


class FiniteAgent:
    """Agent with finite input and label spaces.

    Parameters
    ----------
    lik : BoundedLikelihood
        Candidate likelihoods ``l_i(y | theta, x)``.
    input_probs : (n_inputs,) array
        Local input distribution ``P_i``.
    truth : (n_inputs, n_labels) array, optional
        True label law. Defaults to the likelihood at ``true_index``.
    """

    def __init__(self, lik: BoundedLikelihood, input_probs, truth=None, true_index: int = 0):
        self.lik = lik
        p = np.asarray(input_probs, dtype=float)
        if p.shape != (lik.table.shape[1],) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("input_probs must be a distribution over the likelihood's inputs")
        self.input_probs = p
        self.truth = lik.table[true_index] if truth is None else np.asarray(truth, dtype=float)
        if self.truth.shape != lik.table.shape[1:]:
            raise ConfigError("truth table has the wrong shape")
        self._x_cdf = np.cumsum(p)
        self._y_cdf = np.cumsum(self.truth, axis=1)

    @property
    def n_params(self) -> int:
        return self.lik.n_params

    def draw(self, rng, count: int, batch_size: int):
        x = _categorical(rng, self._x_cdf, (count, batch_size))
        u = rng.random((count, batch_size))
        y = np.minimum((u[..., None] >= self._y_cdf[x]).sum(axis=-1), self.truth.shape[1] - 1)
        return x, y

    def log_likelihood_sums(self, data) -> np.ndarray:
        x, y = data
        return self.lik.log_likelihoods(x, y).sum(axis=-2)

    def sample_inputs(self, rng, size) -> np.ndarray:
        return _categorical(rng, self._x_cdf, size)


class RegressionAgent:
    """Linear-Gaussian observations ``y = theta*^T phi + noise``.

    ``low``/``high`` bound a uniform draw for each non-bias feature; a
    coordinate with ``low == high == 0`` is never observed. With
    ``bias=True`` a constant feature 1 is prepended.
    """

    def __init__(self, theta_star, noise_std: float, low, high, bias: bool = True):
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.noise_std = float(noise_std)
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.bias = bias
        if self.low.shape != self.high.shape or self.low.size + int(bias) != self.theta_star.size:
            raise ConfigError("feature ranges do not match theta_star")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")

    @property
    def dim(self) -> int:
        return self.theta_star.size

    def observed(self) -> np.ndarray:
        mask = (self.low != 0) | (self.high != 0)
        return np.concatenate([[True], mask]) if self.bias else mask

    def features(self, rng, size) -> np.ndarray:
        u = rng.random(tuple(size) + (self.low.size,))
        phi = self.low + (self.high - self.low) * u
        if self.bias:
            phi = np.concatenate([np.ones(tuple(size) + (1,)), phi], axis=-1)
        return phi

    def draw(self, rng, count: int, batch_size: int):
        phi = self.features(rng, (count, batch_size))
        y = phi @ self.theta_star + self.noise_std * rng.standard_normal((count, batch_size))
        return phi, y

    def statistics(self, data):
        phi, y = data
        return regression_statistics(phi, y, self.noise_std)


class GridRegressionAgent(RegressionAgent):
    """Scalar regression scored on a finite grid of slopes (no bias feature)."""

    def __init__(self, theta_star: float, noise_std: float, half_width: float, grid):
        super().__init__([theta_star], noise_std, [-half_width], [half_width], bias=False)
        self.lik = GaussianGridLikelihood(grid, noise_std)

    @property
    def n_params(self) -> int:
        return self.lik.n_params

    def log_likelihood_sums(self, data) -> np.ndarray:
        phi, y = data
        return self.lik.log_likelihoods(phi[..., 0], y).sum(axis=-2)


def coin_table(biases) -> np.ndarray:
    """Likelihood table for binary labels: ``biases[theta, x] = P(y = 1 | theta, x)``."""
    b = np.asarray(biases, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    return np.stack([1.0 - b, b], axis=-1)


def label_softmax_tables(n_classes: int, beta: float, confusions, label_subsets):
    """Per-agent likelihood tables for a finite softmax classifier family.

    Inputs are class prototypes ``x in {0..K-1}``. The true scorer gives
    ``beta`` to ``y = x``; hypothesis ``(a, b)`` additionally scores
    ``beta`` for label ``b`` on input ``a`` (it confuses ``a`` with ``b``).
    An agent trained on label subset ``S`` normalizes its softmax over
    ``S`` only, so it cannot tell hypotheses apart unless it holds both
    labels involved.

    Returns a list of ``(table, floor, ceiling)`` per agent; the first
    hypothesis (index 0) is the true scorer.
    """
    scores = np.zeros((1 + len(confusions), n_classes, n_classes))
    scores[:, np.arange(n_classes), np.arange(n_classes)] = beta
    for h, (a, b) in enumerate(confusions, start=1):
        if a == b or not (0 <= a < n_classes and 0 <= b < n_classes):
            raise ConfigError(f"bad confusion pair {(a, b)}")
        scores[h, a, b] = beta
    out = []
    for subset in label_subsets:
        mask = np.zeros(n_classes, dtype=bool)
        mask[list(subset)] = True
        e = np.where(mask, np.exp(scores), 0.0)
        table = e / e.sum(axis=-1, keepdims=True)
        positive = table[table > 0]
        out.append((table, float(positive.min()), float(positive.max())))
    return out


def partition_inputs(global_probs, mode: str, n_agents: int, label_subsets=None, agent_probs=None):
    """Per-agent input distributions over a finite input space.

    ``iid`` copies the global distribution; ``by-label`` restricts it to
    each agent's label subset (inputs are class prototypes) and
    renormalizes; ``explicit`` takes the distributions as given.

    Returns ``(probs, report)`` where ``report["uncovered"]`` lists inputs
    no agent ever observes.
    """
    g = np.asarray(global_probs, dtype=float)
    if mode == "iid":
        probs = np.tile(g, (n_agents, 1))
    elif mode == "by-label":
        if label_subsets is None or len(label_subsets) != n_agents:
            raise ConfigError("by-label partition needs one label subset per agent")
        probs = np.zeros((n_agents, g.size))
        for i, subset in enumerate(label_subsets):
            if len(subset) == 0:
                raise ConfigError(f"agent {i} has an empty label subset", agent=i)
            idx = list(subset)
            probs[i, idx] = g[idx]
            if probs[i].sum() <= 0:
                raise ConfigError(f"agent {i} has no probability mass", agent=i)
            probs[i] /= probs[i].sum()
    elif mode == "explicit":
        probs = np.asarray(agent_probs, dtype=float)
        if probs.shape != (n_agents, g.size):
            raise ConfigError("explicit partition needs an (agents x inputs) matrix")
    else:
        raise ConfigError(f"unknown partition mode {mode!r}")
    uncovered = np.flatnonzero((probs > 0).sum(axis=0) == 0).tolist()
    return probs, {"mode": mode, "uncovered": uncovered}


def partition_features(dim: int, mode: str, n_agents: int, half_widths, owners=None):
    """Per-agent uniform feature ranges for regression.

    ``iid``: every agent samples every coordinate. ``by-feature-coordinate``:
    agent ``i`` samples only the coordinates in ``owners[i]``; all other
    coordinates are identically zero for it.

    Returns ``(low, high)`` arrays of shape (n_agents, dim).
    """
    hw = np.broadcast_to(np.asarray(half_widths, dtype=float), (n_agents, dim))
    if mode == "iid":
        mask = np.ones((n_agents, dim), dtype=bool)
    elif mode == "by-feature-coordinate":
        if owners is None or len(owners) != n_agents:
            raise ConfigError("by-feature-coordinate partition needs an owner list per agent")
        mask = np.zeros((n_agents, dim), dtype=bool)
        for i, coords in enumerate(owners):
            if len(coords) == 0:
                raise ConfigError(f"agent {i} owns no coordinates", agent=i)
            mask[i, list(coords)] = True
    else:
        raise ConfigError(f"unknown partition mode {mode!r}")
    high = np.where(mask, hw, 0.0)
    return -high, high
