"""Greedy, ROAM and GRIC forwarding over an arbitrary coordinate view.

Each protocol only ever asks for node coordinates and the L2 distance between
them, so the same code routes on true 2D positions and on anchor-distance
vectors of any dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .coords import CoordinateSystem, filter_anchors
from .topology import Network

METRICS = ("euclid2d", "anchors_euclid", "anchors_hop")
PROTOCOLS = ("greedy", "roam", "gric")
DEFAULT_ALPHA = 0.3 * math.pi

# relative threshold below which a frame vector is considered zero
FRAME_TOL = 1e-12
# comparisons in the rotation clamp ignore round-off of this size
CLAMP_EPS = 1e-12
# |cos| above 1 - PARALLEL_TOL counts as parallel
PARALLEL_TOL = 1e-9

Eligible = Union[None, np.ndarray, Callable[[int], bool]]


class DistanceView:
    """Node coordinates plus the L2 metric on them."""

    def __init__(self, coords, metric: str = "euclid2d"):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        self.coords = np.ascontiguousarray(coords, dtype=float)
        self.metric = metric

    @classmethod
    def plane(cls, net: Network) -> "DistanceView":
        return cls(net.positions, "euclid2d")

    @classmethod
    def from_coords(cls, cs: CoordinateSystem) -> "DistanceView":
        metric = "anchors_hop" if cs.anchors.mode == "hop" else "anchors_euclid"
        return cls(cs.coords, metric)

    def coord(self, u: int) -> np.ndarray:
        return self.coords[u]

    def dist(self, u: int, v: int) -> float:
        return float(np.linalg.norm(self.coords[u] - self.coords[v]))

    def distances_to(self, point, nodes=None) -> np.ndarray:
        c = self.coords if nodes is None else self.coords[nodes]
        diff = c - np.asarray(point, dtype=float)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))


@dataclass
class Message:
    source: int
    dest: int
    dest_coord: np.ndarray
    ttl: int
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if not self.trace:
            self.trace = [self.source]

    @property
    def at(self) -> int:
        return self.trace[-1]


@dataclass
class RouteOutcome:
    delivered: bool
    trace: list
    reason: Optional[str] = None

    @property
    def hops(self) -> int:
        return len(self.trace) - 1


@dataclass
class GricMsgState:
    alpha: float = DEFAULT_ALPHA
    d_last: Optional[np.ndarray] = None
    p_east: Optional[np.ndarray] = None


class RoamState:
    """Dead-end marks and exit pointers kept for one destination."""

    def __init__(self, n_nodes: int):
        self.marked_mask = np.zeros(n_nodes, dtype=bool)
        self.exit = np.full(n_nodes, -1, dtype=np.int64)
        self.waves = 0

    @property
    def marked(self) -> set[int]:
        return set(np.flatnonzero(self.marked_mask).tolist())

    @property
    def exit_of(self) -> dict[int, int]:
        keys = np.flatnonzero(self.exit >= 0)
        return {int(k): int(self.exit[k]) for k in keys}

    def copy(self) -> "RoamState":
        other = RoamState(len(self.marked_mask))
        other.marked_mask[:] = self.marked_mask
        other.exit[:] = self.exit
        other.waves = self.waves
        return other


def _gather(net: Network, nodes: np.ndarray):
    """Neighbors of `nodes` flattened, with the index of the owning node."""
    starts = net.indptr[nodes]
    lens = net.indptr[nodes + 1] - starts
    total = int(lens.sum())
    offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    owner = np.repeat(np.arange(len(nodes)), lens)
    return net.indices[offs], owner


def _eligible_mask(eligible: Eligible, nbrs: np.ndarray) -> np.ndarray:
    if eligible is None:
        return np.ones(len(nbrs), dtype=bool)
    if callable(eligible):
        return np.fromiter((bool(eligible(int(v))) for v in nbrs), dtype=bool, count=len(nbrs))
    return np.asarray(eligible, dtype=bool)[nbrs]


def _component_mask(view: DistanceView, u: int, dest_coord, use_filter: bool):
    if not use_filter or view.metric == "euclid2d":
        return None
    mask = np.zeros(view.coords.shape[1])
    mask[filter_anchors(view.coords[u], dest_coord)] = 1.0
    return mask


def greedy_step(view: DistanceView, net: Network, u: int, dest_coord, eligible: Eligible = None,
                dest: Optional[int] = None, dist: Optional[np.ndarray] = None,
                use_filter: bool = False) -> Optional[int]:
    """Eligible neighbor strictly closer to `dest_coord` than `u`, closest first.

    Ties go to the lowest id. Returns None when stuck. A neighbor that *is*
    the destination node is always chosen (coordinates may be shared).
    """
    nbrs = net.neighbors(u)
    if nbrs.size == 0:
        return None
    if dest is not None and dest in net.adj_sets[u]:
        if eligible is None or _eligible_mask(eligible, np.array([dest]))[0]:
            return dest
    mask = _component_mask(view, u, dest_coord, use_filter)
    if mask is not None:
        diff = (view.coords[nbrs] - dest_coord) * mask
        dn = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        du = float(np.sqrt(np.sum(((view.coords[u] - dest_coord) * mask) ** 2)))
    elif dist is not None:
        dn = dist[nbrs]
        du = dist[u]
    else:
        dn = view.distances_to(dest_coord, nbrs)
        du = float(np.linalg.norm(view.coords[u] - np.asarray(dest_coord, dtype=float)))
    ok = (dn < du) & _eligible_mask(eligible, nbrs)
    if not ok.any():
        return None
    cand = np.flatnonzero(ok)
    return int(nbrs[cand[np.argmin(dn[cand])]])


# -- ROAM ---------------------------------------------------------------------

def dead_end_evaluate(view: DistanceView, net: Network, u: int, dest_coord, state: RoamState,
                      dest: Optional[int] = None, dist: Optional[np.ndarray] = None) -> RoamState:
    """Mark `u` if it has no unmarked strictly-closer neighbor, and propagate.

    Newly marked nodes make their neighbors re-run the same test until
    nothing changes. Candidates are tested in synchronous rounds; because
    the test is monotone in the marked set, the result equals any
    sequential evaluation order. After a wave that marked anything the
    exit pointers are rebuilt.
    """
    if dist is None:
        dist = view.distances_to(dest_coord)
    marked = state.marked_mask
    protected = np.zeros(len(marked), dtype=bool)
    if dest is not None:
        protected[dest] = True
    else:
        protected |= dist == 0.0

    cand = np.array([u], dtype=np.int64)
    grew = False
    while cand.size:
        cand = cand[~marked[cand] & ~protected[cand]]
        if not cand.size:
            break
        nbrs, owner = _gather(net, cand)
        closer = ~marked[nbrs] & (dist[nbrs] < dist[cand][owner])
        has_way = np.bincount(owner, weights=closer, minlength=len(cand)) > 0
        newly = cand[~has_way]
        if not newly.size:
            break
        marked[newly] = True
        grew = True
        nb, _ = _gather(net, newly)
        cand = np.unique(nb[~marked[nb]])
    if grew:
        state.waves += 1
        _advertise_exits(net, state)
    return state


def _advertise_exits(net: Network, state: RoamState) -> None:
    """Rebuild exit pointers: a breadth-first spread from unmarked border nodes.

    A marked node adopts the first advertiser it hears; within one round the
    lowest id wins.
    """
    marked = state.marked_mask
    exit_ = state.exit
    exit_[:] = -1
    inside = np.flatnonzero(marked)
    if not inside.size:
        return
    nb, _ = _gather(net, inside)
    frontier = np.unique(nb[~marked[nb]])
    while frontier.size:
        nbrs, owner = _gather(net, frontier)
        senders = frontier[owner]
        hit = marked[nbrs] & (exit_[nbrs] < 0)
        if not hit.any():
            break
        tgt, snd = nbrs[hit], senders[hit]
        order = np.lexsort((snd, tgt))
        tgt, snd = tgt[order], snd[order]
        first = np.ones(len(tgt), dtype=bool)
        first[1:] = tgt[1:] != tgt[:-1]
        exit_[tgt[first]] = snd[first]
        frontier = tgt[first]


def roam_step(view: DistanceView, net: Network, u: int, msg: Message, state: RoamState,
              dist: Optional[np.ndarray] = None):
    """One ROAM hop: evaluate dead ends at `u`, then greedy or escape.

    Returns ``(next_node or None, state)``.
    """
    if msg.dest in net.adj_sets[u]:
        return msg.dest, state
    if dist is None:
        dist = view.distances_to(msg.dest_coord)
    dead_end_evaluate(view, net, u, msg.dest_coord, state, dest=msg.dest, dist=dist)
    if not state.marked_mask[u]:
        nxt = greedy_step(view, net, u, msg.dest_coord, eligible=~state.marked_mask,
                          dest=msg.dest, dist=dist)
        return nxt, state
    ex = int(state.exit[u])
    return (ex if ex >= 0 else None), state


# -- GRIC ---------------------------------------------------------------------

def _norm(v) -> float:
    # cheaper than np.linalg.norm for the short vectors used per hop
    return math.sqrt(float(v @ v))


def _unit(v):
    n = _norm(v)
    return (v / n) if n > 0 else None


def frame_from_vectors(d_direction, d_last, i_vec, p_east=None):
    """North/east unit vectors of the routing plane spanned by d_last and i.

    ``i`` is first made orthogonal to ``d_last`` so the pair is orthonormal.
    Returns None for a degenerate frame.
    """
    d_direction = np.asarray(d_direction, dtype=float)
    d_last = np.asarray(d_last, dtype=float)
    i_vec = np.asarray(i_vec, dtype=float)
    scale = max(1.0, _norm(d_direction))
    i_perp = i_vec - float(i_vec @ d_last) * d_last
    ni = _norm(i_perp)
    if ni <= FRAME_TOL:
        return None
    i_perp = i_perp / ni
    a = float(d_direction @ d_last)
    b = float(d_direction @ i_perp)
    north = a * d_last + b * i_perp
    east = b * d_last - a * i_perp
    nn = _norm(north)
    ne = _norm(east)
    if nn <= FRAME_TOL * scale or ne <= FRAME_TOL * scale:
        return None
    north = north / nn
    east = east / ne
    if p_east is not None and float(east @ np.asarray(p_east, dtype=float)) < 0:
        east = -east
    return north, east


def _gamma(view: DistanceView, net: Network, u: int, mask=None):
    nbrs = net.neighbors(u)
    vecs = view.coords[nbrs] - view.coords[u]
    if mask is not None:
        vecs = vecs * mask
    norms = np.sqrt(np.einsum("ij,ij->i", vecs, vecs))
    ok = norms > 0
    return nbrs[ok], vecs[ok] / norms[ok][:, None]


def vgric_frame(view: DistanceView, net: Network, u: int, d_last, dest_coord, p_east=None,
                mask=None):
    """(v_north, v_east) at `u`, or None when the frame degenerates."""
    nbrs, gam = _gamma(view, net, u, mask)
    d_direction = np.asarray(dest_coord, dtype=float) - view.coords[u]
    if mask is not None:
        d_direction = d_direction * mask
    return _frame(gam, d_direction, np.asarray(d_last, dtype=float), p_east)


def _pick_i(gam: np.ndarray, d_direction: np.ndarray, d_last: np.ndarray):
    """Neighbor direction most perpendicular to d_direction.

    Directions (anti)parallel to d_last cannot span a plane with it and are
    skipped; the first minimum wins, i.e. the lowest neighbor id.
    """
    usable = np.abs(gam @ d_last) < 1.0 - PARALLEL_TOL
    if not usable.any():
        return None
    score = np.abs(gam @ d_direction)
    score[~usable] = np.inf
    return gam[int(np.argmin(score))]


def _frame(gam, d_direction, d_last, p_east):
    if not len(gam):
        return None
    i_vec = _pick_i(gam, d_direction, d_last)
    if i_vec is None:
        return None
    return frame_from_vectors(d_direction, d_last, i_vec, p_east)


def vgric_ideal(d_last, v_north, v_east, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    d_last = np.asarray(d_last, dtype=float)
    x = float(d_last @ v_east)
    y = float(d_last @ v_north)
    if x < 0:
        x = -x
    ca, sa = math.cos(alpha), math.sin(alpha)
    d_ideal = (ca * y + sa * x) * v_north + (ca * x - sa * y) * v_east
    if float(d_ideal @ v_east) < -CLAMP_EPS and float(d_ideal @ v_north) > CLAMP_EPS:
        d_ideal = np.array(v_north, dtype=float)
    return d_ideal


def vgric_step(view: DistanceView, net: Network, u: int, msg: Message, gs: GricMsgState,
               dist: Optional[np.ndarray] = None, use_filter: bool = False):
    """One GRIC hop. Returns ``(next_node or None, gs)``; `gs` is updated in place."""
    nbrs_all = net.neighbors(u)
    if nbrs_all.size == 0:
        return None, gs
    cu = view.coords[u]

    def took(v):
        step = _unit(view.coords[v] - cu)
        if step is not None:
            gs.d_last = step
        return v, gs

    if msg.dest in net.adj_sets[u]:
        return took(msg.dest)
    if nbrs_all.size == 1:
        return took(int(nbrs_all[0]))

    mask = _component_mask(view, u, msg.dest_coord, use_filter)
    d_direction = np.asarray(msg.dest_coord, dtype=float) - cu
    if mask is not None:
        d_direction = d_direction * mask
    d_last = gs.d_last if gs.d_last is not None else _unit(d_direction)
    nbrs, gam = _gamma(view, net, u, mask)
    frame = None if d_last is None else _frame(gam, d_direction, d_last, gs.p_east)
    if frame is None:
        nxt = greedy_step(view, net, u, msg.dest_coord, dest=msg.dest, dist=dist,
                          use_filter=use_filter)
        if nxt is None:
            return None, gs
        return took(nxt)
    v_north, v_east = frame
    d_ideal = vgric_ideal(d_last, v_north, v_east, gs.alpha)
    nxt = int(nbrs[int(np.argmax(gam @ d_ideal))])
    gs.p_east = v_east
    return took(nxt)


# -- driver -------------------------------------------------------------------

def default_ttl(shortest: Optional[int]) -> int:
    if shortest is None:
        return 100
    return max(100, 10 * int(shortest))


def _unroll_cycle(trace: list, start: int, ttl: int) -> None:
    """Extend `trace` by repeating its tail from `start` until it holds ttl hops."""
    period = trace[start:-1]
    i = 0
    while len(trace) - 1 < ttl:
        trace.append(period[(i + 1) % len(period)])
        i += 1


def route(protocol: str, view: DistanceView, net: Network, msg: Message,
          roam_state: Optional[RoamState] = None, alpha: float = DEFAULT_ALPHA,
          use_filter: bool = False) -> RouteOutcome:
    """Forward `msg` hop by hop until it reaches its destination node or fails.

    Failures (stuck, ttl, no exit) come back as an outcome, never raised.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    if msg.ttl < 1:
        raise ValueError("ttl must be >= 1")
    dist = view.distances_to(msg.dest_coord)
    if protocol == "roam" and roam_state is None:
        roam_state = RoamState(net.n_nodes)
    gs = GricMsgState(alpha=alpha)
    trace = msg.trace
    u = trace[-1]
    # a GRIC hop depends only on (node, d_last, p_east); a repeat means a cycle
    seen: dict = {}
    while u != msg.dest:
        if len(trace) - 1 >= msg.ttl:
            return RouteOutcome(False, trace, "ttl")
        if protocol == "gric" and gs.d_last is not None:
            key = (u, gs.d_last.tobytes(), None if gs.p_east is None else gs.p_east.tobytes())
            start = seen.setdefault(key, len(trace) - 1)
            if start != len(trace) - 1:
                _unroll_cycle(trace, start, msg.ttl)
                return RouteOutcome(False, trace, "ttl")
        if protocol == "greedy":
            nxt = greedy_step(view, net, u, msg.dest_coord, dest=msg.dest, dist=dist,
                              use_filter=use_filter)
            reason = "stuck"
        elif protocol == "roam":
            nxt, _ = roam_step(view, net, u, msg, roam_state, dist=dist)
            reason = "no-exit"
        else:
            nxt, _ = vgric_step(view, net, u, msg, gs, dist=dist, use_filter=use_filter)
            reason = "stuck"
        if nxt is None:
            return RouteOutcome(False, trace, reason)
        trace.append(nxt)
        u = nxt
    return RouteOutcome(True, trace)
