"""Social-network weight matrices and their spectral quantities.

``W[i, j]`` is the confidence agent ``i`` places on what it hears from
agent ``j``; ``j`` is a neighbour of ``i`` exactly when ``W[i, j] > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import CapabilityError, ConfigError, DimensionError, MissingInputError, NumericError

ROW_SUM_TOL = 1e-12
MAX_DENSE_AGENTS = 512


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
            raise DimensionError(f"weight matrix must be square and non-empty, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or w.min() < 0.0 or w.max() > 1.0:
            raise ConfigError("weight matrix entries must lie in [0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.weights[i] > 0)

    def adjacency(self) -> np.ndarray:
        return self.weights > 0

    def __eq__(self, other):
        return isinstance(other, WeightMatrix) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def to_edge_list(self) -> str:
        lines = [f"agents {self.n_agents}"]
        for i, j in zip(*np.nonzero(self.weights)):
            lines.append(f"{i} {j} {float(self.weights[i, j])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "WeightMatrix":
        """Parse ``agents N`` followed by ``i j w_ij`` lines (0-indexed).

        Blank lines and ``#`` comments are ignored.
        """
        n = None
        entries = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "agents":
                if n is not None or len(parts) != 2:
                    raise ConfigError(f"line {lineno}: bad header", line=lineno)
                n = int(parts[1])
                continue
            if n is None:
                raise ConfigError("edge list must start with 'agents N'", line=lineno)
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: expected 'i j w_ij'", line=lineno)
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigError(f"line {lineno}: agent index out of range", line=lineno)
            entries.append((i, j, w))
        if n is None:
            raise ConfigError("empty edge list")
        w = np.zeros((n, n))
        for i, j, val in entries:
            w[i, j] = val
        return cls(w)

    @classmethod
    def load(cls, path) -> "WeightMatrix":
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"graph file not found: {path}", path=str(path))
        return cls.from_edge_list(path.read_text())


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    rows: tuple = ()


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    centrality: np.ndarray
    lambda_max: float
    mixing_bound: float
    # diagnostics for non-reversible W, where eigenvalues may be complex
    lambda_max_real: float = float("nan")
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda_max

    def to_dict(self):
        return {
            "centrality": self.centrality.tolist(),
            "lambda_max": self.lambda_max,
            "lambda_max_real": self.lambda_max_real,
            "spectral_gap": self.gap,
            "mixing_bound": self.mixing_bound,
        }


def _as_matrix(w) -> WeightMatrix:
    return w if isinstance(w, WeightMatrix) else WeightMatrix(np.asarray(w, dtype=float))


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = list(nxt)
    return seen


def is_strongly_connected(adj) -> bool:
    adj = np.asarray(adj, dtype=bool)
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def period(adj) -> int:
    """Period of a strongly connected digraph: gcd of its cycle lengths.

    Uses BFS levels from node 0; the period is the gcd of
    ``level[u] + 1 - level[v]`` over all edges ``u -> v``.
    """
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    diffs = [int(level[u] + 1 - level[v]) for u, v in zip(*np.nonzero(adj)) if level[u] >= 0]
    return reduce(math.gcd, diffs, 0)


def validate_weight_matrix(w) -> list[Violation]:
    """List every violated network assumption; empty means valid.

    Raises
    ------
    DimensionError
        If the input is not square.
    """
    w = _as_matrix(w)
    out = []
    sums = w.weights.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        out.append(Violation("not_stochastic", f"rows {bad.tolist()} do not sum to 1", tuple(bad.tolist())))
    no_self = np.flatnonzero(np.diag(w.weights) <= 0)
    if no_self.size:
        out.append(Violation("missing_self_loop", f"rows {no_self.tolist()} have W_ii = 0", tuple(no_self.tolist())))
    adj = w.adjacency()
    if not is_strongly_connected(adj):
        out.append(Violation("not_irreducible", "communication graph is not strongly connected"))
    else:
        p = period(adj)
        if p != 1:
            out.append(Violation("periodic", f"communication graph has period {p}"))
    return out


def require_valid(w) -> WeightMatrix:
    w = _as_matrix(w)
    problems = validate_weight_matrix(w)
    if problems:
        first = problems[0]
        raise ConfigError(f"invalid weight matrix: {first.detail}", kind=first.kind, rows=list(first.rows),
                          violations=[p.kind for p in problems])
    return w


def stationary_distribution(w, tol: float = 1e-12, max_iter: int = 10**6) -> np.ndarray:
    """Left Perron vector of ``W`` by power iteration, normalized to sum to one."""
    w = require_valid(w)
    mat = w.weights
    v = np.full(w.n_agents, 1.0 / w.n_agents)
    residual = np.inf
    for _ in range(max_iter):
        nxt = v @ mat
        nxt /= nxt.sum()
        residual = np.max(np.abs(nxt - v))
        v = nxt
        if residual < tol:
            return v
    raise NumericError("power iteration did not converge", residual=float(residual), max_iter=max_iter)


def _eigenvalues(w: WeightMatrix) -> np.ndarray:
    if w.n_agents > MAX_DENSE_AGENTS:
        raise CapabilityError(f"dense eigensolver limited to {MAX_DENSE_AGENTS} agents", n_agents=w.n_agents)
    try:
        return np.linalg.eigvals(w.weights)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc


def _non_perron(eigs: np.ndarray) -> np.ndarray:
    return np.delete(eigs, np.argmin(np.abs(eigs - 1.0)))


def spectral_gap(w) -> tuple[float, float]:
    """Return ``(lambda_max, 1 - lambda_max)``.

    ``lambda_max`` is the largest eigenvalue modulus once the Perron root
    is removed.
    """
    w = require_valid(w)
    rest = _non_perron(_eigenvalues(w))
    lam = float(np.max(np.abs(rest))) if rest.size else 0.0
    return lam, 1.0 - lam


def mixing_bound(w) -> float:
    w = _as_matrix(w)
    lam, gap = spectral_gap(w)
    if gap <= 1e-12:
        raise ConfigError("degenerate graph: spectral gap is zero", lambda_max=lam)
    return 4.0 * math.log(w.n_agents) / gap


def powers_deviation(w, horizon: int) -> np.ndarray:
    """Per-agent ``sum_{k=1..horizon} sum_j |W^k_ij - v_j|``."""
    w = require_valid(w)
    if not 1 <= horizon <= 10**5:
        raise ConfigError("horizon must lie in [1, 1e5]", horizon=horizon)
    v = stationary_distribution(w)
    power = w.weights.copy()
    total = np.zeros(w.n_agents)
    for _ in range(horizon):
        total += np.abs(power - v).sum(axis=1)
        power = power @ w.weights
    return total


def spectral_summary(w) -> SpectralSummary:
    w = require_valid(w)
    eigs = _eigenvalues(w)
    rest = _non_perron(eigs)
    lam = float(np.max(np.abs(rest))) if rest.size else 0.0
    lam_real = float(np.max(rest.real)) if rest.size else 0.0
    gap = 1.0 - lam
    if gap <= 1e-12:
        raise ConfigError("degenerate graph: spectral gap is zero", lambda_max=lam)
    return SpectralSummary(
        centrality=stationary_distribution(w),
        lambda_max=lam,
        mixing_bound=4.0 * math.log(w.n_agents) / gap,
        lambda_max_real=lam_real,
        eigenvalues=eigs,
    )
