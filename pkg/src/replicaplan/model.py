"""Domain state: server/object catalogs, traffic, placements, nearest index.

A placement is an M x N 0/1 matrix ``x`` (servers by objects).  Validity means
every server's replicas fit its storage and every object keeps a replica on
its primary server.  The nearest-replicator index ``n`` caches, per (server,
object), the id of the cheapest replicator; it is maintained incrementally as
replicas are added and dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    ConstraintError,
    ParameterError,
    PreconditionError,
    StructuralError,
)
from .topology import CostMatrix


@dataclass(frozen=True, eq=False)
class ServerCatalog:
    """Per-server storage capacity and long-run failure probability."""

    capacities: np.ndarray
    failure_probs: np.ndarray

    def __post_init__(self):
        caps = np.array(self.capacities, dtype=np.int64)
        probs = np.array(self.failure_probs, dtype=np.float64)
        if caps.ndim != 1 or caps.size == 0:
            raise StructuralError("capacities must be a non-empty vector")
        if probs.shape != caps.shape:
            raise StructuralError("failure_probs must match capacities in length")
        if (caps <= 0).any():
            raise ParameterError("capacities must be positive")
        if (probs < 0).any() or (probs >= 1).any():
            raise ParameterError("failure probabilities must lie in [0, 1)")
        caps.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "failure_probs", probs)

    @property
    def count(self) -> int:
        return int(self.capacities.size)


@dataclass(frozen=True, eq=False)
class ObjectCatalog:
    """Per-object byte size and primary server id."""

    sizes: np.ndarray
    primaries: np.ndarray

    def __post_init__(self):
        sizes = np.array(self.sizes, dtype=np.int64)
        prim = np.array(self.primaries, dtype=np.int64)
        if sizes.ndim != 1:
            raise StructuralError("sizes must be a vector")
        if prim.shape != sizes.shape:
            raise StructuralError("primaries must match sizes in length")
        if (sizes <= 0).any():
            raise ParameterError("object sizes must be positive")
        if (prim < 0).any():
            raise ParameterError("primary ids must be non-negative")
        sizes.setflags(write=False)
        prim.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "primaries", prim)

    @property
    def count(self) -> int:
        return int(self.sizes.size)


@dataclass(frozen=True, eq=False)
class Scenario:
    """One problem instance minus the network: catalogs plus traffic."""

    servers: ServerCatalog
    objects: ObjectCatalog
    traffic: np.ndarray
    meta: dict | None = None

    def __post_init__(self):
        r = np.array(self.traffic, dtype=np.int64)
        m, n = self.servers.count, self.objects.count
        if r.shape != (m, n):
            raise StructuralError(f"traffic must be {m}x{n}, got {r.shape}")
        if (r < 0).any():
            raise ParameterError("traffic entries must be non-negative")
        if (self.objects.primaries >= m).any():
            raise ParameterError("primary ids must reference existing servers")
        r.setflags(write=False)
        object.__setattr__(self, "traffic", r)

    def save(self, path) -> None:
        payload = {
            "capacities": self.servers.capacities.tolist(),
            "failure_probs": self.servers.failure_probs.tolist(),
            "sizes": self.objects.sizes.tolist(),
            "primaries": self.objects.primaries.tolist(),
            "traffic": self.traffic.tolist(),
        }
        if self.meta is not None:
            payload["meta"] = self.meta
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            payload = json.load(fh)
        try:
            servers = ServerCatalog(payload["capacities"], payload["failure_probs"])
            objects = ObjectCatalog(payload["sizes"], payload["primaries"])
            traffic = payload["traffic"]
        except KeyError as exc:
            raise StructuralError(f"scenario file {path} is missing field {exc}") from exc
        return cls(servers, objects, traffic, meta=payload.get("meta"))


@dataclass(frozen=True)
class Violation:
    """One validity failure: kind is 'storage' (index=server) or 'primary' (index=object)."""

    kind: str
    index: int
    detail: str


def validate_placement(x, servers: ServerCatalog, objects: ObjectCatalog) -> list[Violation]:
    """Return every storage/primary violation of placement ``x`` (empty if valid)."""
    x = np.asarray(x)
    m, n = servers.count, objects.count
    if x.shape != (m, n):
        raise StructuralError(f"placement must be {m}x{n}, got {x.shape}")
    violations = []
    loads = x.astype(np.int64) @ objects.sizes
    for i in np.flatnonzero(loads > servers.capacities):
        violations.append(
            Violation(
                "storage",
                int(i),
                f"server {i} stores {loads[i]} bytes over capacity {servers.capacities[i]}",
            )
        )
    primary_bits = x[objects.primaries, np.arange(n)]
    for k in np.flatnonzero(primary_bits != 1):
        violations.append(
            Violation(
                "primary",
                int(k),
                f"object {k} has no replica on its primary server {objects.primaries[k]}",
            )
        )
    return violations


def primary_only_placement(servers: ServerCatalog, objects: ObjectCatalog) -> np.ndarray:
    """The starting placement: each object exactly on its primary server."""
    m, n = servers.count, objects.count
    x = np.zeros((m, n), dtype=np.int8)
    x[objects.primaries, np.arange(n)] = 1
    loads = x.astype(np.int64) @ objects.sizes
    over = np.flatnonzero(loads > servers.capacities)
    if over.size:
        i = int(over[0])
        raise CapacityError(
            f"primary replicas overflow server {i}: {loads[i]} > {servers.capacities[i]}"
        )
    return x


def nearest_replicator(x, l, i: int, k: int) -> int:
    """Cheapest replicator of object ``k`` as seen from server ``i`` (lowest id on ties)."""
    x = np.asarray(x)
    reps = np.flatnonzero(x[:, k])
    if reps.size == 0:
        raise StructuralError(f"object {k} has no replicator")
    return int(reps[np.argmin(l[i, reps])])


def build_nearest_index(x, l) -> tuple[np.ndarray, np.ndarray]:
    """Compute (nearest-id, nearest-distance) matrices for every (server, object)."""
    x = np.asarray(x)
    m, n = x.shape
    near = np.empty((m, n), dtype=np.int64)
    dist = np.empty((m, n), dtype=np.int64)
    rows = np.arange(m)
    for k in range(n):
        reps = np.flatnonzero(x[:, k])
        if reps.size == 0:
            raise StructuralError(f"object {k} has no replicator")
        sub = l[:, reps]
        pos = sub.argmin(axis=1)  # first minimum = lowest replicator id
        near[:, k] = reps[pos]
        dist[:, k] = sub[rows, pos]
    return near, dist


class PlacementState:
    """A placement bound to one instance, with derived indexes kept in sync.

    Attributes ``x`` (placement), ``n``/``d`` (nearest replicator id and its
    cost), ``free`` (spare bytes per server) and ``replica_counts`` are all
    updated by :meth:`add_replica` / :meth:`remove_replica`.
    """

    def __init__(self, cost: CostMatrix, servers: ServerCatalog, objects: ObjectCatalog,
                 traffic, x):
        if cost.m != servers.count:
            raise StructuralError("cost matrix size must match server count")
        r = np.asarray(traffic, dtype=np.int64)
        if r.shape != (servers.count, objects.count):
            raise StructuralError("traffic shape must match catalogs")
        if (r < 0).any():
            raise ParameterError("traffic entries must be non-negative")
        violations = validate_placement(x, servers, objects)
        if violations:
            raise ConstraintError(
                "invalid starting placement: " + "; ".join(v.detail for v in violations)
            )
        self.cost = cost
        self.l = cost.l
        self.servers = servers
        self.objects = objects
        self.traffic = r
        self.x = np.array(x, dtype=np.int8)
        self.n, self.d = build_nearest_index(self.x, self.l)
        loads = self.x.astype(np.int64) @ objects.sizes
        self.free = servers.capacities - loads
        self.replica_counts = self.x.sum(axis=0, dtype=np.int64)

    @classmethod
    def from_scenario(cls, cost: CostMatrix, scenario: Scenario, x=None) -> "PlacementState":
        if x is None:
            x = primary_only_placement(scenario.servers, scenario.objects)
        return cls(cost, scenario.servers, scenario.objects, scenario.traffic, x)

    @property
    def num_servers(self) -> int:
        return self.servers.count

    @property
    def num_objects(self) -> int:
        return self.objects.count

    def replicators(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.x[:, k])

    def copy(self) -> "PlacementState":
        dup = object.__new__(PlacementState)
        dup.cost = self.cost
        dup.l = self.l
        dup.servers = self.servers
        dup.objects = self.objects
        dup.traffic = self.traffic
        dup.x = self.x.copy()
        dup.n = self.n.copy()
        dup.d = self.d.copy()
        dup.free = self.free.copy()
        dup.replica_counts = self.replica_counts.copy()
        return dup

    def add_replica(self, i: int, k: int) -> np.ndarray:
        """Place object ``k`` on server ``i``; returns servers whose nearest changed."""
        if self.x[i, k]:
            raise PreconditionError(f"server {i} already replicates object {k}")
        size = self.objects.sizes[k]
        if self.free[i] < size:
            raise CapacityError(
                f"server {i} lacks space for object {k} ({self.free[i]} < {size})"
            )
        self.x[i, k] = 1
        self.free[i] -= size
        self.replica_counts[k] += 1
        col_n = self.n[:, k]
        col_d = self.d[:, k]
        li = self.l[:, i]
        # Strictly cheaper wins; on a tie the lower server id keeps the slot.
        better = (li < col_d) | ((li == col_d) & (i < col_n))
        col_n[better] = i
        col_d[better] = li[better]
        return np.flatnonzero(better)

    def remove_replica(self, i: int, k: int) -> np.ndarray:
        """Drop object ``k`` from server ``i``; returns servers whose nearest changed."""
        if not self.x[i, k]:
            raise PreconditionError(f"server {i} does not replicate object {k}")
        if int(self.objects.primaries[k]) == i:
            raise ConstraintError(f"cannot drop object {k} from its primary server {i}")
        self.x[i, k] = 0
        self.free[i] += self.objects.sizes[k]
        self.replica_counts[k] -= 1
        reps = np.flatnonzero(self.x[:, k])
        sub = self.l[:, reps]
        pos = sub.argmin(axis=1)
        new_n = reps[pos]
        new_d = sub[np.arange(self.num_servers), pos]
        changed = np.flatnonzero((new_n != self.n[:, k]) | (new_d != self.d[:, k]))
        self.n[:, k] = new_n
        self.d[:, k] = new_d
        return changed


def save_placement(x, path) -> None:
    """Write placement as {"objects": [{"id", "replicators"}, ...]}, ids ascending."""
    x = np.asarray(x)
    objects = [
        {"id": int(k), "replicators": [int(i) for i in np.flatnonzero(x[:, k])]}
        for k in range(x.shape[1])
    ]
    with open(path, "w") as fh:
        json.dump({"objects": objects}, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_placement(path, m: int, n: int) -> np.ndarray:
    with open(path) as fh:
        payload = json.load(fh)
    x = np.zeros((m, n), dtype=np.int8)
    try:
        entries = payload["objects"]
        for entry in entries:
            k = int(entry["id"])
            if not 0 <= k < n:
                raise StructuralError(f"placement references unknown object {k}")
            for i in entry["replicators"]:
                i = int(i)
                if not 0 <= i < m:
                    raise StructuralError(f"placement references unknown server {i}")
                x[i, k] = 1
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed placement file {path}: {exc}") from exc
    return x
