"""Deployment field: node placement, crescent obstacle, unit-disk links, hop distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import IO, Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree


class GenerationError(RuntimeError):
    """Raised when node placement cannot find enough free positions."""


@dataclass(frozen=True)
class CrescentObstacle:
    """Outer disk minus inner disk.

    Points on either boundary circle count as part of the obstacle.
    """

    outer_center: tuple[float, float]
    outer_radius: float
    inner_center: tuple[float, float]
    inner_radius: float

    def __post_init__(self):
        if self.outer_radius <= 0 or self.inner_radius < 0:
            raise ValueError("obstacle radii must be positive")
        gap = math.dist(self.outer_center, self.inner_center)
        if gap + self.outer_radius <= self.inner_radius:
            raise ValueError("inner disk swallows the outer disk; crescent is empty")

    @classmethod
    def default(cls, field_size=(50.0, 50.0), offset=(-6.0, 0.0)):
        """Radius-12 disk at the field center with a radius-10 bite shifted by `offset`."""
        cx, cy = field_size[0] / 2, field_size[1] / 2
        return cls((cx, cy), 12.0, (cx + offset[0], cy + offset[1]), 10.0)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d_out = np.hypot(p[:, 0] - self.outer_center[0], p[:, 1] - self.outer_center[1])
        d_in = np.hypot(p[:, 0] - self.inner_center[0], p[:, 1] - self.inner_center[1])
        return (d_out <= self.outer_radius) & (d_in >= self.inner_radius)


def _disk_interval(a, d, center, radius):
    """Parameter interval [lo, hi] of a + t*d inside the closed disk (NaN if missed)."""
    f = a - np.asarray(center, dtype=float)
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2.0 * np.einsum("ij,ij->i", d, f)
    qc = np.einsum("ij,ij->i", f, f) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(disc)
        lo = (-qb - root) / (2.0 * qa)
        hi = (-qb + root) / (2.0 * qa)
    return lo, hi, disc


def segments_blocked(a, b, obstacle: CrescentObstacle) -> np.ndarray:
    """Vectorised `segment_blocked` over arrays of endpoints, shape (m, 2)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = b - a
    out_lo, out_hi, out_disc = _disk_interval(a, d, obstacle.outer_center, obstacle.outer_radius)
    lo = np.maximum(out_lo, 0.0)
    hi = np.minimum(out_hi, 1.0)
    touches_outer = (out_disc >= 0) & (lo <= hi)

    in_lo, in_hi, in_disc = _disk_interval(a, d, obstacle.inner_center, obstacle.inner_radius)
    # the open inner disk swallows the whole outer-disk part of the segment
    hidden = (in_disc > 0) & (in_lo < lo) & (hi < in_hi)
    blocked = touches_outer & ~hidden

    point = np.einsum("ij,ij->i", d, d) == 0
    if point.any():
        blocked[point] = obstacle.contains(a[point])
    return blocked


def segment_blocked(a, b, obstacle: CrescentObstacle) -> bool:
    """True iff the segment ab crosses the crescent region."""
    return bool(segments_blocked([tuple(a)], [tuple(b)], obstacle)[0])


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable deployed topology.

    Node ids are dense integers ``0..n-1``. Adjacency is stored in CSR form
    (``indptr``/``indices``) with each neighbor list sorted by id.
    """

    positions: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    comm_radius: float
    field: tuple[float, float]
    obstacle: Optional[CrescentObstacle] = None
    seed: Optional[int] = None
    orig_ids: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @cached_property
    def adj(self) -> tuple[tuple[int, ...], ...]:
        ind = self.indices.tolist()
        ptr = self.indptr.tolist()
        return tuple(tuple(ind[ptr[u]:ptr[u + 1]]) for u in range(self.n_nodes))

    @cached_property
    def adj_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(nb) for nb in self.adj)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def avg_neighbors(self) -> float:
        return 2.0 * self.n_edges / self.n_nodes if self.n_nodes else 0.0

    def edges(self) -> np.ndarray:
        """Edge list (m, 2) with the lower id first, sorted."""
        src = np.repeat(np.arange(self.n_nodes), self.degrees())
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def components(self) -> np.ndarray:
        """Component label per node (labels ordered by smallest member id)."""
        labels = np.full(self.n_nodes, -1, dtype=np.int64)
        nxt = 0
        for u in range(self.n_nodes):
            if labels[u] < 0:
                labels[np.isfinite(bfs_hops(self, u))] = nxt
                nxt += 1
        return labels

    def largest_component(self) -> np.ndarray:
        labels = self.components()
        counts = np.bincount(labels)
        return np.flatnonzero(labels == int(np.argmax(counts)))

    def subgraph(self, nodes: Iterable[int]) -> "Network":
        """Induced subnetwork, re-indexed densely; ``orig_ids`` maps back."""
        nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        e = self.edges()
        e = remap[e]
        e = e[(e >= 0).all(axis=1)]
        base = self.orig_ids if self.orig_ids is not None else np.arange(self.n_nodes)
        return _from_edges(
            self.positions[nodes], e, self.comm_radius, self.field, self.obstacle, self.seed,
            orig_ids=base[nodes],
        )

    def ids_out(self, nodes) -> list[int]:
        """Translate local ids to ids of the originally deployed network."""
        if self.orig_ids is None:
            return [int(v) for v in nodes]
        return [int(self.orig_ids[v]) for v in nodes]


def _from_edges(positions, edges, comm_radius, field_size, obstacle, seed, orig_ids=None) -> Network:
    n = len(positions)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Network(
        positions=np.asarray(positions, dtype=float),
        indptr=indptr,
        indices=dst,
        comm_radius=float(comm_radius),
        field=(float(field_size[0]), float(field_size[1])),
        obstacle=obstacle,
        seed=seed,
        orig_ids=orig_ids,
    )


def link_nodes(positions, comm_radius: float, obstacle: Optional[CrescentObstacle] = None) -> np.ndarray:
    """Unit-disk edges between `positions`, minus links crossing the obstacle."""
    positions = np.asarray(positions, dtype=float)
    if len(positions) < 2:
        return np.empty((0, 2), dtype=np.int64)
    pairs = cKDTree(positions).query_pairs(comm_radius, output_type="ndarray").astype(np.int64)
    if len(pairs) == 0:
        return pairs
    pairs.sort(axis=1)
    # query_pairs works with a tolerance; re-check the radius exactly
    dx = positions[pairs[:, 0]] - positions[pairs[:, 1]]
    pairs = pairs[np.einsum("ij,ij->i", dx, dx) <= comm_radius * comm_radius]
    if obstacle is not None and len(pairs):
        pairs = pairs[~segments_blocked(positions[pairs[:, 0]], positions[pairs[:, 1]], obstacle)]
    return pairs


def network_from_positions(positions, comm_radius: float, field_size=None,
                           obstacle: Optional[CrescentObstacle] = None, seed=None) -> Network:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if field_size is None:
        field_size = tuple(positions.max(axis=0)) if len(positions) else (0.0, 0.0)
    return _from_edges(positions, link_nodes(positions, comm_radius, obstacle),
                       comm_radius, field_size, obstacle, seed)


def network_from_edges(n_nodes: int, edges: Sequence[tuple[int, int]], positions=None,
                       comm_radius: float = 1.0) -> Network:
    """Build a Network from an explicit edge list (handy for hand-made graphs)."""
    if positions is None:
        positions = np.column_stack([np.arange(n_nodes, dtype=float), np.zeros(n_nodes)])
    e = np.array([sorted(p) for p in edges], dtype=np.int64).reshape(-1, 2)
    if len(e):
        if (e[:, 0] == e[:, 1]).any():
            raise ValueError("self loops are not allowed")
        e = np.unique(e, axis=0)
    pos = np.asarray(positions, dtype=float)
    return _from_edges(pos, e, comm_radius, tuple(pos.max(axis=0)) if len(pos) else (0.0, 0.0), None, None)


def deploy(seed: int, n_nodes: int, field=(50.0, 50.0), comm_radius: float = 2.0,
           obstacle: Optional[CrescentObstacle] = None) -> Network:
    """Drop `n_nodes` uniformly over the field minus the obstacle and link them.

    Placement is rejection sampling with a budget of ``1000 * n_nodes`` draws.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if comm_radius <= 0:
        raise ValueError("comm_radius must be > 0")
    width, height = float(field[0]), float(field[1])
    rng = np.random.default_rng(seed)
    budget = 1000 * n_nodes
    drawn = 0
    chunks = []
    have = 0
    while have < n_nodes:
        if drawn >= budget:
            raise GenerationError(
                f"placed only {have} of {n_nodes} nodes after {budget} draws; obstacle covers the field?"
            )
        batch = min(max(n_nodes - have, 64), budget - drawn)
        pts = rng.random((batch, 2)) * (width, height)
        drawn += batch
        if obstacle is not None:
            pts = pts[~obstacle.contains(pts)]
        chunks.append(pts)
        have += len(pts)
    positions = np.concatenate(chunks)[:n_nodes]
    return network_from_positions(positions, comm_radius, (width, height), obstacle, seed)


def bfs_hops(net: Network, source: int) -> np.ndarray:
    """Hop count from `source` to every node; ``inf`` marks unreachable nodes."""
    if not 0 <= source < net.n_nodes:
        raise IndexError(f"no node {source}")
    dist = np.full(net.n_nodes, np.inf)
    dist[source] = 0.0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    indptr, indices = net.indptr, net.indices
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        lens = indptr[frontier + 1] - starts
        total = int(lens.sum())
        if total == 0:
            break
        offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
        nbrs = indices[offs]
        nbrs = np.unique(nbrs[np.isinf(dist[nbrs])])
        dist[nbrs] = level
        frontier = nbrs
    return dist


def shortest_path_len(net: Network, s: int, t: int) -> Optional[int]:
    """Hop length of a shortest s-t path, or None when t is unreachable."""
    d = bfs_hops(net, s)[t]
    return None if math.isinf(d) else int(d)


# -- text dump ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def graph_header(net: Network) -> str:
    parts = [
        "header",
        f"width={_fmt(net.field[0])}",
        f"height={_fmt(net.field[1])}",
        f"radius={_fmt(net.comm_radius)}",
        f"seed={net.seed if net.seed is not None else 'none'}",
    ]
    ob = net.obstacle
    if ob is not None:
        parts.append("outer=" + ",".join(map(_fmt, (*ob.outer_center, ob.outer_radius))))
        parts.append("inner=" + ",".join(map(_fmt, (*ob.inner_center, ob.inner_radius))))
    return " ".join(parts)


def write_graph(net: Network, fh: IO[str]) -> None:
    """Write the line-oriented graph dump (header, node lines, edge lines)."""
    fh.write(graph_header(net) + "\n")
    for u, (x, y) in enumerate(net.positions):
        fh.write(f"node {u} {_fmt(x)} {_fmt(y)}\n")
    for u, v in net.edges():
        fh.write(f"edge {u} {v}\n")


def read_graph(fh: IO[str]) -> dict:
    """Parse a graph dump back into plain Python structures."""
    out = {"header": {}, "nodes": {}, "edges": [], "anchors": {}, "coords": {}, "paths": []}
    for line in fh:
        tok = line.split()
        if not tok:
            continue
        kind = tok[0]
        if kind == "header":
            out["header"] = dict(t.split("=", 1) for t in tok[1:])
        elif kind == "node":
            out["nodes"][int(tok[1])] = (float(tok[2]), float(tok[3]))
        elif kind == "edge":
            out["edges"].append((int(tok[1]), int(tok[2])))
        elif kind == "anchor":
            out["anchors"][int(tok[1])] = int(tok[2])
        elif kind == "coord":
            out["coords"][int(tok[1])] = tuple(float(t) for t in tok[2:])
        elif kind == "path":
            out["paths"].append([int(t) for t in tok[1:]])
        else:
            raise ValueError(f"unknown dump line: {line!r}")
    return out
