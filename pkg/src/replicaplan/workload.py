"""Workload synthesis: object catalogs, traffic matrices, server availability.

Traffic is a matrix of total bytes each server requests per object.  The
``zipf`` model makes object popularity follow rank^(-skew) under a seeded
rank-to-object permutation and splits each object's volume evenly across
servers; ``uniform`` spreads the total evenly over all cells.  Integer volumes
are apportioned exactly (largest-remainder), so matrix totals match the
requested volume to the byte.

Server failure probabilities come either from a synthetic distribution or
from an interval trace: a CSV of per-node up/down intervals.  A node's
observation horizon spans its first record start to its last record end;
time inside the horizon not covered by a ``down`` record counts as up.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TraceError
from .model import ObjectCatalog


@dataclass(frozen=True)
class TrafficModel:
    """How request volume is spread over objects and servers."""

    kind: str = "zipf"
    zipf_skew: float = 0.8
    total_volume: int = 50_000_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "zipf"):
            raise ParameterError(f"unknown traffic kind {self.kind!r}")
        if self.zipf_skew < 0:
            raise ParameterError("zipf skew must be >= 0")
        if self.total_volume <= 0:
            raise ParameterError("total volume must be positive")


@dataclass(frozen=True)
class TraceRecord:
    node: int
    start: float
    end: float
    state: str


@dataclass(frozen=True)
class FailureTrace:
    """Validated interval records plus each node's observation horizon."""

    records: tuple[TraceRecord, ...]
    horizons: dict[int, tuple[float, float]]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.horizons)


def generate_object_catalog(n_objects: int, size_lo: int, size_hi: int,
                            n_servers: int, seed: int) -> ObjectCatalog:
    """Draw object sizes uniformly from [lo, hi] and primaries uniformly over servers."""
    if n_objects < 1:
        raise ParameterError("need at least one object")
    if size_lo <= 0 or size_lo > size_hi:
        raise ParameterError(f"size range must satisfy 0 < lo <= hi, got [{size_lo}, {size_hi}]")
    if n_servers < 1:
        raise ParameterError("need at least one server")
    rng = random.Random(seed)
    sizes = [rng.randint(size_lo, size_hi) for _ in range(n_objects)]
    primaries = [rng.randrange(n_servers) for _ in range(n_objects)]
    return ObjectCatalog(sizes, primaries)


def _apportion(total: int, weights, rng: random.Random | None = None) -> np.ndarray:
    """Split ``total`` into integer shares proportional to ``weights``, summing exactly."""
    weights = np.asarray(weights, dtype=np.float64)
    wsum = weights.sum()
    if total == 0 or wsum == 0:
        return np.zeros(len(weights), dtype=np.int64)
    quota = total * (weights / wsum)
    shares = np.floor(quota).astype(np.int64)
    leftover = int(total - shares.sum())
    if leftover:
        frac = quota - shares
        # Stable sort: ties go to the lower index, keeping output seed-free here.
        order = np.argsort(-frac, kind="stable")
        shares[order[:leftover]] += 1
    return shares


def generate_traffic(model: TrafficModel, n_servers: int, n_objects: int,
                     sizes=None) -> np.ndarray:
    """Build the request matrix for ``model``.

    ``sizes`` is accepted for interface symmetry with the catalog generator;
    volume is split by popularity alone so column shares stay exactly Zipf.
    """
    if n_servers < 1 or n_objects < 1:
        raise ParameterError("traffic needs at least one server and one object")
    rng = random.Random(model.seed)
    r = np.zeros((n_servers, n_objects), dtype=np.int64)
    if model.kind == "uniform":
        cells = n_servers * n_objects
        base, rem = divmod(model.total_volume, cells)
        r += base
        for idx in rng.sample(range(cells), rem):
            r.flat[idx] += 1
        return r
    # zipf: rank weights, seeded rank->object permutation, even server split.
    weights = np.arange(1, n_objects + 1, dtype=np.float64) ** (-model.zipf_skew)
    by_rank = _apportion(model.total_volume, weights)
    perm = list(range(n_objects))
    rng.shuffle(perm)
    for rank, k in enumerate(perm):
        volume = int(by_rank[rank])
        base, rem = divmod(volume, n_servers)
        r[:, k] += base
        if rem:
            for i in rng.sample(range(n_servers), rem):
                r[i, k] += 1
    return r


def load_failure_trace(path) -> FailureTrace:
    """Parse and validate an interval trace CSV (header: node_id,start,end,state)."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node_id", "start", "end", "state"]:
            raise TraceError(f"{path}: expected header 'node_id,start,end,state'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                node = int(row[0])
                start = float(row[1])
                end = float(row[2])
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
            state = row[3].strip().lower()
            if state not in ("up", "down"):
                raise TraceError(f"{path}:{lineno}: state must be 'up' or 'down', got {row[3]!r}")
            if node < 0:
                raise TraceError(f"{path}:{lineno}: negative node id {node}")
            if end <= start:
                raise TraceError(f"{path}:{lineno}: interval end {end} <= start {start}")
            records.append(TraceRecord(node, start, end, state))
    horizons: dict[int, tuple[float, float]] = {}
    by_node: dict[int, list[TraceRecord]] = {}
    for rec in records:
        by_node.setdefault(rec.node, []).append(rec)
    for node, recs in by_node.items():
        recs.sort(key=lambda rec: rec.start)
        for prev, cur in zip(recs, recs[1:]):
            if cur.start < prev.end:
                raise TraceError(
                    f"{path}: node {node} has overlapping intervals "
                    f"[{prev.start}, {prev.end}) and [{cur.start}, {cur.end})"
                )
        horizons[node] = (recs[0].start, recs[-1].end)
    return FailureTrace(records=tuple(records), horizons=horizons)


def estimate_availability(trace: FailureTrace, n_servers: int,
                          f_max: float = 0.99) -> np.ndarray:
    """Failure probability per server: downtime share of the node's horizon.

    Nodes absent from the trace are assumed never to fail.  Estimates are
    clamped to [0, f_max] so a permanently dead node cannot zero out every
    availability product it joins.
    """
    if not 0 <= f_max < 1:
        raise ParameterError("f_max must lie in [0, 1)")
    f = np.zeros(n_servers, dtype=np.float64)
    downtime: dict[int, float] = {}
    for rec in trace.records:
        if rec.node >= n_servers:
            raise ParameterError(
                f"trace node {rec.node} out of range for {n_servers} servers"
            )
        if rec.state == "down":
            downtime[rec.node] = downtime.get(rec.node, 0.0) + (rec.end - rec.start)
    for node, (t0, t1) in trace.horizons.items():
        span = t1 - t0
        fi = downtime.get(node, 0.0) / span
        f[node] = min(max(fi, 0.0), f_max)
    return f


def trace_availability_for_servers(trace: FailureTrace, n_servers: int,
                                   f_max: float = 0.99) -> np.ndarray:
    """Fold a trace of arbitrary node ids onto ``n_servers`` servers.

    Node ids map to servers modulo the server count; when several nodes land
    on one server their estimates are averaged.  Servers with no mapped node
    get failure probability 0.
    """
    if not trace.horizons:
        return np.zeros(n_servers, dtype=np.float64)
    universe = max(trace.horizons) + 1
    per_node = estimate_availability(trace, universe, f_max=f_max)
    f = np.zeros(n_servers, dtype=np.float64)
    hits = np.zeros(n_servers, dtype=np.int64)
    for node in trace.nodes:
        f[node % n_servers] += per_node[node]
        hits[node % n_servers] += 1
    nonzero = hits > 0
    f[nonzero] /= hits[nonzero]
    return f


def parse_availability_spec(spec: str) -> tuple[str, float, float]:
    """Parse 'constant:F' or 'uniform:LO:HI' into (kind, lo, hi)."""
    parts = spec.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            value = float(parts[1])
            lo = hi = value
        elif parts[0] == "uniform" and len(parts) == 3:
            lo, hi = float(parts[1]), float(parts[2])
        else:
            raise ParameterError(
                f"availability spec must be 'constant:F' or 'uniform:LO:HI', got {spec!r}"
            )
    except ValueError as exc:
        raise ParameterError(f"malformed availability spec {spec!r}: {exc}") from exc
    if not (0.0 <= lo <= hi < 1.0):
        raise ParameterError(f"availability spec bounds must satisfy 0 <= lo <= hi < 1: {spec!r}")
    return parts[0], lo, hi


def synthetic_availability(n_servers: int, spec: str, seed: int) -> np.ndarray:
    """Draw per-server failure probabilities from a small distribution spec."""
    if n_servers < 1:
        raise ParameterError("need at least one server")
    kind, lo, hi = parse_availability_spec(spec)
    if kind == "constant":
        return np.full(n_servers, lo, dtype=np.float64)
    rng = random.Random(seed)
    return np.array([rng.uniform(lo, hi) for _ in range(n_servers)], dtype=np.float64)
