"""Server-network generation and reduction to a pairwise transfer-cost matrix.

Networks are undirected graphs with positive integer per-byte link costs.
The planner never looks at the graph itself; it consumes the dense matrix of
cheapest-path costs between every pair of servers.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConnectivityError, ParameterError, StructuralError

# Sentinel for "no path yet" during the shortest-path sweep.  Kept far below
# the int64 overflow line so sentinel + sentinel stays representable.
_UNREACHED = np.int64(2) ** 41


@dataclass(frozen=True)
class Graph:
    """Undirected server network; each edge carries a positive integer cost."""

    node_count: int
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.node_count < 1:
            raise ParameterError("node_count must be >= 1")
        seen = set()
        normalized = []
        for edge in self.edges:
            u, v, cost = int(edge[0]), int(edge[1]), int(edge[2])
            if u == v:
                raise StructuralError(f"self-loop at node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise StructuralError(f"edge ({u}, {v}) references a missing node")
            if cost <= 0:
                raise ParameterError(f"edge ({u}, {v}) has non-positive cost {cost}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise StructuralError(f"duplicate edge {key}")
            seen.add(key)
            normalized.append((key[0], key[1], cost))
        normalized.sort()
        object.__setattr__(self, "edges", tuple(normalized))

    def is_connected(self) -> bool:
        if self.node_count == 1:
            return True
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = [False] * self.node_count
        seen[0] = True
        queue = deque([0])
        reached = 1
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    reached += 1
                    queue.append(v)
        return reached == self.node_count


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense symmetric matrix of cheapest per-byte transfer costs."""

    m: int
    l: np.ndarray

    def __post_init__(self):
        arr = np.array(self.l, dtype=np.int64)
        if arr.shape != (self.m, self.m):
            raise StructuralError(f"cost matrix must be {self.m}x{self.m}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "l", arr)

    def validate(self) -> None:
        """Check metric-style invariants; raises StructuralError on failure."""
        l = self.l
        if (np.diag(l) != 0).any():
            raise StructuralError("diagonal must be zero")
        if (l != l.T).any():
            raise StructuralError("matrix must be symmetric")
        off = l[~np.eye(self.m, dtype=bool)]
        if off.size and (off <= 0).any():
            raise StructuralError("off-diagonal costs must be positive")
        for h in range(self.m):
            if (l > l[:, h, None] + l[None, h, :]).any():
                raise StructuralError(f"triangle inequality violated via node {h}")

    def to_csv(self, path) -> None:
        """Write the matrix as plain CSV, one row per source node, no header."""
        with open(path, "w", newline="") as fh:
            for row in self.l:
                fh.write(",".join(str(int(v)) for v in row))
                fh.write("\n")


def generate_ba_topology(n: int, m_links: int, seed: int) -> Graph:
    """Grow a preferential-attachment network of ``n`` servers.

    Starts from two nodes joined by one edge; every further node attaches to
    ``m_links`` distinct existing nodes chosen with probability proportional
    to current degree.  While fewer than ``m_links`` nodes exist, the newcomer
    attaches to all of them.  ``m_links=1`` yields a tree.  Edge costs are a
    placeholder 1 until :func:`assign_link_costs` runs.
    """
    if n < 1:
        raise ParameterError(f"need at least one node, got {n}")
    if m_links < 1:
        raise ParameterError(f"m_links must be >= 1, got {m_links}")
    if n > 1 and m_links >= n:
        raise ParameterError(f"m_links={m_links} must be < node count {n}")
    if n == 1:
        return Graph(1, ())

    rng = random.Random(seed)
    edges = [(0, 1)]
    # One entry per degree unit; sampling from it is degree-proportional.
    repeated = [0, 1]
    for newcomer in range(2, n):
        want = min(m_links, newcomer)
        targets: set[int] = set()
        while len(targets) < want:
            targets.add(rng.choice(repeated))
        picked = sorted(targets)
        for t in picked:
            edges.append((t, newcomer))
        repeated.extend(picked)
        repeated.extend([newcomer] * want)
    return Graph(n, tuple((u, v, 1) for u, v in edges))


def assign_link_costs(graph: Graph, cost_lo: int, cost_hi: int, seed: int) -> Graph:
    """Return a copy of ``graph`` with integer costs drawn uniformly from [lo, hi]."""
    if cost_lo <= 0 or cost_lo > cost_hi:
        raise ParameterError(f"cost range must satisfy 0 < lo <= hi, got [{cost_lo}, {cost_hi}]")
    rng = random.Random(seed)
    # Edges are kept in canonical sorted order, so draws are reproducible.
    edges = tuple((u, v, rng.randint(cost_lo, cost_hi)) for u, v, _ in graph.edges)
    return Graph(graph.node_count, edges)


def all_pairs_shortest_paths(graph: Graph) -> CostMatrix:
    """Reduce a connected graph to its cheapest-path cost matrix."""
    if not graph.is_connected():
        raise ConnectivityError(
            f"graph with {graph.node_count} nodes and {len(graph.edges)} edges is not connected"
        )
    m = graph.node_count
    dist = np.full((m, m), _UNREACHED, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for u, v, cost in graph.edges:
        if cost < dist[u, v]:
            dist[u, v] = cost
            dist[v, u] = cost
    for h in range(m):
        np.minimum(dist, dist[:, h, None] + dist[None, h, :], out=dist)
    matrix = CostMatrix(m, dist)
    matrix.validate()
    return matrix


def save_topology(graph: Graph, path) -> None:
    payload = {"nodes": graph.node_count, "edges": [[u, v, c] for u, v, c in graph.edges]}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_topology(path) -> Graph:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        nodes = int(payload["nodes"])
        edges = tuple((int(u), int(v), int(c)) for u, v, c in payload["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed topology file {path}: {exc}") from exc
    return Graph(nodes, edges)
