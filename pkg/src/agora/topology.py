"""Topology generators: star, grid, ring, explicit matrices and the rotating star."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import WeightMatrix, is_strongly_connected, require_valid


def star(n_edges: int, a: float) -> WeightMatrix:
    """Agent 0 is the hub and averages uniformly over everyone; each edge
    agent puts ``a`` on the hub and ``1 - a`` on itself."""
    if not 0 < a < 1:
        raise ConfigError("edge confidence a must lie in (0, 1)", a=a)
    if n_edges < 1:
        raise ConfigError("a star needs at least one edge agent")
    n = n_edges + 1
    w = np.zeros((n, n))
    w[0, :] = 1.0 / n
    w[1:, 0] = a
    w[np.arange(1, n), np.arange(1, n)] = 1.0 - a
    return WeightMatrix(w)


def grid(side: int) -> WeightMatrix:
    """``side x side`` lattice, 4-neighbour adjacency plus self, uniform rows.

    Agents are numbered row-major, so for side 3 the centre is agent 4
    and the corners are 0, 2, 6, 8.
    """
    if side < 2:
        raise ConfigError("grid side must be at least 2", side=side)
    n = side * side
    w = np.zeros((n, n))
    for r in range(side):
        for c in range(side):
            i = r * side + c
            nbrs = [i] + [rr * side + cc for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
                          if 0 <= rr < side and 0 <= cc < side]
            w[i, nbrs] = 1.0 / len(nbrs)
    return WeightMatrix(w)


def ring(n: int, self_weight: float = 0.5) -> WeightMatrix:
    """Undirected ring: ``self_weight`` on self, the rest split between the two neighbours."""
    if n < 2:
        raise ConfigError("a ring needs at least two agents")
    if not 0 < self_weight < 1:
        raise ConfigError("self_weight must lie in (0, 1)")
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, idx] = self_weight
    if n == 2:
        w[idx, (idx + 1) % n] = 1.0 - self_weight
    else:
        w[idx, (idx + 1) % n] += (1.0 - self_weight) / 2
        w[idx, (idx - 1) % n] += (1.0 - self_weight) / 2
    return WeightMatrix(w)


@dataclass(frozen=True)
class TimeVaryingStarSchedule:
    """Hub 0 plus ``n_edges`` edge agents; in round ``r`` only block
    ``k = (r - 1) mod (n_edges / n_active)`` of ``n_active`` edge agents is
    linked to the hub. Everyone else is inactive and keeps its belief."""

    n_edges: int
    n_active: int
    a: float = 0.5

    def __post_init__(self):
        if self.n_active < 1 or self.n_edges % self.n_active:
            raise ConfigError("n_edges must be a positive multiple of n_active",
                              n_edges=self.n_edges, n_active=self.n_active)
        if not 0 < self.a < 1:
            raise ConfigError("edge confidence a must lie in (0, 1)")

    @property
    def n_agents(self) -> int:
        return self.n_edges + 1

    @property
    def period(self) -> int:
        return self.n_edges // self.n_active

    def block(self, round_: int) -> np.ndarray:
        k = (round_ - 1) % self.period
        return np.arange(self.n_active * k + 1, self.n_active * (k + 1) + 1)

    def active(self, round_: int) -> np.ndarray:
        mask = np.zeros(self.n_agents, dtype=bool)
        mask[0] = True
        mask[self.block(round_)] = True
        return mask

    def at(self, round_: int) -> WeightMatrix:
        n = self.n_agents
        w = np.eye(n)
        edges = self.block(round_)
        w[0, :] = 0.0
        w[0, 0] = w[0, edges] = 1.0 / (self.n_active + 1)
        w[edges, 0] = self.a
        w[edges, edges] = 1.0 - self.a
        return WeightMatrix(w)

    def union_adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for r in range(1, self.period + 1):
            adj |= self.at(r).adjacency()
        return adj

    def validate(self):
        if not is_strongly_connected(self.union_adjacency()):
            raise ConfigError("union of the schedule's graphs is not strongly connected")


def build_topology(spec: dict):
    """Resolve a topology spec into a WeightMatrix or a TimeVaryingStarSchedule.

    Recognized kinds: ``star`` (n_edges, a), ``grid`` (side), ``ring``
    (n, self_weight), ``matrix`` (rows), ``edges`` (text or path) and
    ``time_varying_star`` (n_edges, n_active, a).
    """
    kind = spec.get("kind")
    p = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "star":
            return star(int(p.get("n_edges", 8)), float(p["a"]))
        if kind == "grid":
            return grid(int(p.get("side", 3)))
        if kind == "ring":
            return ring(int(p["n"]), float(p.get("self_weight", 0.5)))
        if kind == "matrix":
            return WeightMatrix(np.asarray(p["rows"], dtype=float))
        if kind == "edges":
            if "text" in p:
                return WeightMatrix.from_edge_list(p["text"])
            return WeightMatrix.load(p["path"])
        if kind == "time_varying_star":
            sched = TimeVaryingStarSchedule(int(p["n_edges"]), int(p["n_active"]), float(p.get("a", 0.5)))
            sched.validate()
            return sched
    except KeyError as exc:
        raise ConfigError(f"topology {kind!r} is missing field {exc}") from exc
    raise ConfigError(f"unknown topology kind {kind!r}")


def check_topology(topo):
    """Raise ConfigError (naming the offending rows) unless the network is usable."""
    if isinstance(topo, TimeVaryingStarSchedule):
        topo.validate()
        for r in range(1, topo.period + 1):
            w = topo.at(r).weights
            bad = np.flatnonzero(np.abs(w.sum(axis=1) - 1.0) > 1e-12)
            if bad.size:
                raise ConfigError("schedule produced a non-stochastic matrix", rows=bad.tolist(), round=r)
        return topo
    return require_valid(topo)
