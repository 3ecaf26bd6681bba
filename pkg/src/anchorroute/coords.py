"""Anchor-distance coordinates.

Every node is described by its vector of distances to an ordered set of
anchors, either straight-line or in hops. Routing measures closeness with
the L2 norm of the difference of two such vectors (the "anchors distance").
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .topology import Network, bfs_hops

MODES = ("euclidean", "hop")


class CoordinateError(ValueError):
    """A node cannot be given a finite coordinate vector."""


@dataclass(frozen=True)
class AnchorSet:
    anchor_ids: tuple[int, ...]
    mode: str = "euclidean"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(set(self.anchor_ids)) != len(self.anchor_ids):
            raise ValueError("anchor ids must be distinct")

    def __len__(self):
        return len(self.anchor_ids)

    def with_mode(self, mode: str) -> "AnchorSet":
        return AnchorSet(self.anchor_ids, mode)


@dataclass(frozen=True, eq=False)
class CoordinateSystem:
    """Coordinates of every node; row ``u`` of ``coords`` is f(u)."""

    anchors: AnchorSet
    coords: np.ndarray
    flood_messages: int = 0

    def __getitem__(self, u: int) -> np.ndarray:
        return self.coords[u]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def select_anchors(net: Network, k: int, seed: int, mode: str = "euclidean") -> AnchorSet:
    """Pick `k` distinct nodes uniformly at random."""
    if k > net.n_nodes:
        raise ValueError(f"cannot pick {k} anchors from {net.n_nodes} nodes")
    if k < 1:
        raise ValueError("need at least one anchor")
    rng = np.random.default_rng(seed)
    ids = rng.choice(net.n_nodes, size=k, replace=False)
    return AnchorSet(tuple(int(a) for a in ids), mode)


def build_coords(net: Network, anchors: AnchorSet) -> CoordinateSystem:
    for a in anchors.anchor_ids:
        if not 0 <= a < net.n_nodes:
            raise CoordinateError(f"anchor {a} is not a deployed node")
    ids = list(anchors.anchor_ids)
    if anchors.mode == "euclidean":
        diff = net.positions[:, None, :] - net.positions[ids][None, :, :]
        coords = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return CoordinateSystem(anchors, coords)

    # one flood per anchor; every node rebroadcasts once per flood
    cols = []
    for i, a in enumerate(ids):
        hops = bfs_hops(net, a)
        bad = np.flatnonzero(np.isinf(hops))
        if bad.size:
            raise CoordinateError(f"node {int(bad[0])} is unreachable from anchor {a} (index {i})")
        cols.append(hops)
    coords = np.column_stack(cols) if cols else np.zeros((net.n_nodes, 0))
    return CoordinateSystem(anchors, coords, flood_messages=len(ids) * net.n_nodes)


def anchors_distance(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"coordinate length mismatch: {u.shape} vs {v.shape}")
    return float(np.sqrt(np.sum((u - v) ** 2)))


def is_general_setting(points, tol: float = 1e-9) -> bool:
    """Planar check: at least three points, not all on one line.

    The signed-area threshold scales with the squared bounding-box size.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 3:
        return False
    scale = float(np.max(p.max(axis=0) - p.min(axis=0)))
    if scale == 0.0:
        return False
    limit = tol * scale * scale
    base = p[0]
    # farthest point from base fixes the line direction
    far = p[int(np.argmax(np.hypot(*(p - base).T)))]
    d = far - base
    rel = p - base
    area = 0.5 * np.abs(d[0] * rel[:, 1] - d[1] * rel[:, 0])
    return bool(np.any(area > limit))


def filter_anchors(sender: Sequence[float], dest: Sequence[float]) -> np.ndarray:
    """Indices of anchors worth keeping when forwarding from `sender`.

    An anchor is dropped when the sender is both nearer to it than to the
    destination and nearer than half its distance to the farthest anchor.
    If that would drop everything, all indices are kept.
    """
    s = np.asarray(sender, dtype=float)
    d = np.asarray(dest, dtype=float)
    if s.shape != d.shape or s.size == 0:
        raise ValueError("sender and dest must be non-empty and of equal length")
    to_dest = anchors_distance(s, d)
    drop = (s < to_dest) & (s < s.max() / 2.0)
    keep = np.flatnonzero(~drop)
    return keep if keep.size else np.arange(s.size)


def coordinate_collisions(cs: CoordinateSystem) -> list[list[int]]:
    """Groups of two or more nodes sharing one coordinate vector."""
    _, inverse, counts = np.unique(cs.coords, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    groups = []
    for g in np.flatnonzero(counts > 1):
        groups.append([int(u) for u in np.flatnonzero(inverse == g)])
    groups.sort()
    return groups


def write_coords(net: Network, cs: CoordinateSystem, fh: IO[str]) -> None:
    """Append ``anchor`` and ``coord`` lines (ids in deployed-network numbering)."""
    for i, a in enumerate(net.ids_out(cs.anchors.anchor_ids)):
        fh.write(f"anchor {i} {a}\n")
    out_ids = net.ids_out(range(net.n_nodes))
    for u, row in zip(out_ids, cs.coords):
        fh.write("coord " + str(u) + " " + " ".join(repr(float(c)) for c in row) + "\n")


def euclidean_column(points, anchor) -> np.ndarray:
    """Distances from each planar point to one anchor location."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.hypot(p[:, 0] - anchor[0], p[:, 1] - anchor[1])


def coordinate_map(points, anchor_points) -> np.ndarray:
    """f evaluated at arbitrary plane points for anchors at `anchor_points`."""
    return np.column_stack([euclidean_column(points, a) for a in anchor_points])


__all__ = [
    "AnchorSet",
    "CoordinateError",
    "CoordinateSystem",
    "anchors_distance",
    "build_coords",
    "coordinate_collisions",
    "coordinate_map",
    "filter_anchors",
    "is_general_setting",
    "select_anchors",
    "write_coords",
]
