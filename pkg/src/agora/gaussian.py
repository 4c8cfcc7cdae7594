"""Gaussian beliefs for linear-Gaussian regression.

Beliefs are stored as (mean, precision). Both the conjugate local update
and log-linear pooling are linear in the natural parameters
``(precision, precision @ mean)``, so no covariance inversion is ever
needed on the hot path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import CapabilityError, ConfigError, DimensionError, NumericError

MAX_DIM = 64
SYM_TOL = 1e-10
MAX_COND = 1e12


def _cholesky(precision: np.ndarray):
    eigs = np.linalg.eigvalsh(precision)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > MAX_COND:
        raise NumericError("precision is not safely positive definite",
                           min_eig=float(eigs[0]), max_eig=float(eigs[-1]))
    try:
        return linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"Cholesky factorization failed: {exc}") from exc


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        prec = np.array(self.precision, dtype=float)
        d = mean.size
        if d > MAX_DIM:
            raise CapabilityError(f"dimension {d} exceeds {MAX_DIM}")
        if prec.shape != (d, d):
            raise DimensionError(f"precision shape {prec.shape} does not match mean of length {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(prec))):
            raise ConfigError("Gaussian belief has non-finite entries")
        if np.max(np.abs(prec - prec.T), initial=0.0) > SYM_TOL:
            raise ConfigError("precision must be symmetric")
        _cholesky(prec)
        mean.setflags(write=False)
        prec.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", prec)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve(_cholesky(self.precision), np.eye(self.dim))

    @property
    def shift(self) -> np.ndarray:
        """Natural location parameter ``precision @ mean``."""
        return self.precision @ self.mean

    @classmethod
    def from_natural(cls, precision, shift) -> "GaussianBelief":
        precision = np.asarray(precision, dtype=float)
        precision = 0.5 * (precision + precision.T)
        mean = linalg.cho_solve(_cholesky(precision), np.asarray(shift, dtype=float))
        return cls(mean, precision)

    @classmethod
    def isotropic(cls, dim: int, variance: float) -> "GaussianBelief":
        return cls(np.zeros(dim), np.eye(dim) / variance)

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean.tolist(), "precision": self.precision.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GaussianBelief":
        obj = json.loads(text)
        return cls(np.asarray(obj["mean"]), np.asarray(obj["precision"]))


@dataclass(frozen=True, eq=False)
class RegressionObservation:
    features: np.ndarray
    label: float
    noise_std: float

    def __post_init__(self):
        phi = np.array(self.features, dtype=float).ravel()
        if not np.all(np.isfinite(phi)) or not math.isfinite(self.label):
            raise ConfigError("observation has non-finite features or label")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")
        phi.setflags(write=False)
        object.__setattr__(self, "features", phi)


def _stack(batch: Sequence[RegressionObservation]):
    if len(batch) == 0:
        raise ConfigError("batch must hold at least one observation")
    stds = {obs.noise_std for obs in batch}
    if len(stds) != 1:
        raise ConfigError("observations in one batch must share noise_std")
    phi = np.stack([obs.features for obs in batch])
    y = np.array([obs.label for obs in batch])
    return phi, y, stds.pop()


def regression_statistics(phi: np.ndarray, y: np.ndarray, noise_std: float):
    """Precision and shift increments contributed by a batch: (sum phi phi^T, sum y phi) / sigma^2."""
    s = 1.0 / noise_std**2
    return s * np.einsum("...mi,...mj->...ij", phi, phi), s * np.einsum("...m,...mi->...i", y, phi)


def conjugate_update(prior: GaussianBelief, batch: Sequence[RegressionObservation]) -> GaussianBelief:
    """Exact posterior of a Gaussian prior under a linear-Gaussian likelihood."""
    phi, y, sigma = _stack(batch)
    if phi.shape[1] != prior.dim:
        raise DimensionError("feature dimension does not match belief dimension")
    d_prec, d_shift = regression_statistics(phi, y, sigma)
    return GaussianBelief.from_natural(prior.precision + d_prec, prior.shift + d_shift)


def gaussian_consensus(beliefs: Sequence[GaussianBelief], weights) -> GaussianBelief:
    """Log-linear pooling of Gaussians: precisions and shifts combine linearly."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size != len(beliefs):
        raise ConfigError("need exactly one weight per belief")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ConfigError("weights must be non-negative and sum to 1")
    if len({b.dim for b in beliefs}) != 1:
        raise DimensionError("beliefs differ in dimension")
    active = np.flatnonzero(weights > 0)
    if active.size == 1:
        return beliefs[active[0]]
    prec = sum(weights[j] * beliefs[j].precision for j in active)
    shift = sum(weights[j] * beliefs[j].shift for j in active)
    return GaussianBelief.from_natural(prec, shift)


def gaussian_kl(p: GaussianBelief, q: GaussianBelief) -> float:
    """KL(p || q) in nats."""
    if p.dim != q.dim:
        raise DimensionError("beliefs differ in dimension")
    cov_p = p.covariance
    diff = q.mean - p.mean
    _, logdet_p = np.linalg.slogdet(p.precision)
    _, logdet_q = np.linalg.slogdet(q.precision)
    kl = 0.5 * (np.trace(q.precision @ cov_p) + diff @ q.precision @ diff - p.dim + logdet_p - logdet_q)
    return max(float(kl), 0.0)


def predictive_mse(belief: GaussianBelief, test_set: Sequence[RegressionObservation]) -> float:
    """Mean squared error of the posterior-mean prediction."""
    if len(test_set) == 0:
        raise ConfigError("test set is empty")
    phi = np.stack([obs.features for obs in test_set])
    y = np.array([obs.label for obs in test_set])
    return float(np.mean((y - phi @ belief.mean) ** 2))


def free_energy(q: GaussianBelief, prior: GaussianBelief, phi: np.ndarray, y: np.ndarray, noise_std: float) -> float:
    """KL(q || prior) + E_q[-log likelihood], up to the constant log normalizer of the noise."""
    cov = q.covariance
    resid = y - phi @ q.mean
    expected_sq = resid @ resid + np.einsum("mi,ij,mj->", phi, cov, phi)
    return gaussian_kl(q, prior) + expected_sq / (2 * noise_std**2)
