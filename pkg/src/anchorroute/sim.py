"""Crescent-obstacle routing experiments: scenarios, runs, sweeps and reports."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .coords import build_coords, coordinate_collisions, select_anchors, write_coords
from .routing import DEFAULT_ALPHA, DistanceView, Message, RoamState, route
from .topology import CrescentObstacle, Network, bfs_hops, deploy, write_graph

MODES = ("2d", "euclidean", "hop")
PROTOCOL_ALIASES = {
    "greedy": "greedy",
    "roam": "roam",
    "vroam": "roam",
    "gric": "gric",
    "vgric": "gric",
}
# (protocol, mode) pairs compared throughout the experiments
VARIANTS = (
    ("roam", "2d"),
    ("roam", "euclidean"),
    ("roam", "hop"),
    ("gric", "2d"),
    ("gric", "euclidean"),
    ("gric", "hop"),
)
VARIANT_NAMES = {
    ("roam", "2d"): "ROAM",
    ("roam", "euclidean"): "VROAM",
    ("roam", "hop"): "VROAMhop",
    ("gric", "2d"): "GRIC",
    ("gric", "euclidean"): "VGRIC",
    ("gric", "hop"): "VGRIChop",
    ("greedy", "2d"): "GREEDY",
    ("greedy", "euclidean"): "VGREEDY",
    ("greedy", "hop"): "VGREEDYhop",
}
CSV_HEADER = (
    "protocol", "mode", "n_nodes", "avg_neighbors", "seed", "delivery_rate",
    "mean_stretch", "median_stretch", "marked_nodes", "messages",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    seed: int = 1
    n_nodes: int = 2000
    field_width: float = 50.0
    field_height: float = 50.0
    comm_radius: float = 2.0
    obstacle: str = "crescent"
    outer_cx: float = 25.0
    outer_cy: float = 25.0
    outer_radius: float = 12.0
    inner_cx: float = 19.0
    inner_cy: float = 25.0
    inner_radius: float = 10.0
    n_anchors: int = 6
    mode: str = "euclidean"
    protocol: str = "roam"
    n_messages: int = 200
    source_zone: tuple = (0.0, 20.0, 10.0, 30.0)
    dest_zone: tuple = (40.0, 20.0, 50.0, 30.0)
    ttl_factor: int = 10
    ttl_min: int = 100
    filter_anchors: bool = False
    roam_reset: bool = False
    alpha: float = DEFAULT_ALPHA
    giant_component: bool = True
    sweep_densities: tuple = ()
    sweep_seeds: tuple = ()

    def __post_init__(self):
        proto = PROTOCOL_ALIASES.get(self.protocol)
        if proto is None:
            raise ScenarioError(f"unknown protocol {self.protocol!r}")
        object.__setattr__(self, "protocol", proto)
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.obstacle not in ("crescent", "none"):
            raise ScenarioError("obstacle must be 'crescent' or 'none'")
        if self.n_nodes < 1 or self.n_messages < 1 or self.n_anchors < 1:
            raise ScenarioError("n_nodes, n_messages and n_anchors must be >= 1")
        if self.comm_radius <= 0:
            raise ScenarioError("comm_radius must be > 0")
        for name in ("source_zone", "dest_zone"):
            z = tuple(float(v) for v in getattr(self, name))
            if len(z) != 4 or z[0] > z[2] or z[1] > z[3]:
                raise ScenarioError(f"{name} must be x0,y0,x1,y1 with x0<=x1, y0<=y1")
            if z[0] < 0 or z[1] < 0 or z[2] > self.field_width or z[3] > self.field_height:
                raise ScenarioError(f"{name} leaves the field")
            object.__setattr__(self, name, z)
        object.__setattr__(self, "sweep_densities", tuple(int(v) for v in self.sweep_densities))
        object.__setattr__(self, "sweep_seeds", tuple(int(v) for v in self.sweep_seeds))
        ob = self.crescent()
        if ob is not None:
            for name in ("source_zone", "dest_zone"):
                x0, y0, x1, y1 = getattr(self, name)
                gx, gy = np.meshgrid(np.linspace(x0, x1, 21), np.linspace(y0, y1, 21))
                if ob.contains(np.column_stack([gx.ravel(), gy.ravel()])).any():
                    raise ScenarioError(f"{name} overlaps the obstacle")

    @property
    def field(self) -> tuple[float, float]:
        return (self.field_width, self.field_height)

    @property
    def variant(self) -> str:
        return VARIANT_NAMES[(self.protocol, self.mode)]

    def crescent(self) -> Optional[CrescentObstacle]:
        if self.obstacle == "none":
            return None
        return CrescentObstacle(
            (self.outer_cx, self.outer_cy), self.outer_radius,
            (self.inner_cx, self.inner_cy), self.inner_radius,
        )

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass
class MessageResult:
    source: int
    dest: int
    delivered: bool
    reason: Optional[str]
    hops: int
    shortest: Optional[int]
    stretch: Optional[float]
    trace: list = field(repr=False, default_factory=list)


@dataclass
class RunReport:
    scenario: Scenario
    messages: list
    avg_neighbors: float
    marked_nodes: int
    wall_time: float = 0.0
    flood_messages: int = 0
    coord_collisions: int = 0
    error: Optional[str] = None

    @property
    def n_messages(self) -> int:
        return len(self.messages)

    @property
    def delivered(self) -> int:
        return sum(m.delivered for m in self.messages)

    @property
    def failed(self) -> int:
        return self.n_messages - self.delivered

    @property
    def delivery_rate(self) -> float:
        return self.delivered / self.n_messages if self.messages else float("nan")

    @property
    def delivery_rate_connected(self) -> float:
        conn = [m for m in self.messages if m.shortest is not None]
        return sum(m.delivered for m in conn) / len(conn) if conn else float("nan")

    @property
    def stretches(self) -> np.ndarray:
        return np.array([m.stretch for m in self.messages if m.stretch is not None], dtype=float)

    @property
    def mean_stretch(self) -> float:
        s = self.stretches
        return float(s.mean()) if s.size else float("nan")

    @property
    def median_stretch(self) -> float:
        s = self.stretches
        return float(np.median(s)) if s.size else float("nan")

    def csv_row(self) -> list[str]:
        sc = self.scenario
        return [
            sc.protocol, sc.mode, str(sc.n_nodes), f"{self.avg_neighbors:.6f}", str(sc.seed),
            f"{self.delivery_rate:.6f}", f"{self.mean_stretch:.6f}", f"{self.median_stretch:.6f}",
            str(self.marked_nodes), str(self.n_messages),
        ]

    def summary(self) -> str:
        sc = self.scenario
        if self.error:
            return f"{sc.variant} n={sc.n_nodes} seed={sc.seed} ERROR {self.error}"
        return (
            f"{sc.variant:<10} n={sc.n_nodes} seed={sc.seed} avg_nb={self.avg_neighbors:.2f} "
            f"delivered={self.delivered}/{self.n_messages} mean_stretch={self.mean_stretch:.4f} "
            f"median_stretch={self.median_stretch:.4f} marked={self.marked_nodes}"
        )


def write_csv(reports: Iterable[RunReport], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        if r.error is None:
            w.writerow(r.csv_row())


def reports_to_csv(reports: Iterable[RunReport]) -> str:
    buf = io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()


# -- preparation shared by all variants of one (seed, topology) ---------------

def _sub_seeds(seed: int) -> tuple[int, int]:
    anchor_ss, msg_ss = np.random.SeedSequence(seed).spawn(2)
    return int(anchor_ss.generate_state(1)[0]), int(msg_ss.generate_state(1)[0])


def _topology_key(sc: Scenario):
    return (sc.seed, sc.n_nodes, sc.field, sc.comm_radius, sc.crescent(), sc.giant_component,
            sc.n_anchors, sc.source_zone, sc.dest_zone, sc.n_messages)


@dataclass(frozen=True, eq=False)
class Prepared:
    """Network, anchors and message pairs common to every protocol variant."""

    net: Network
    domain: Network
    anchors: object
    pairs: tuple
    shortest: tuple
    coords: dict = field(default_factory=dict)

    def view(self, mode: str) -> DistanceView:
        if mode == "2d":
            return DistanceView.plane(self.domain)
        if mode not in self.coords:
            self.coords[mode] = build_coords(self.domain, self.anchors.with_mode(mode))
        return DistanceView.from_coords(self.coords[mode])


def zone_nodes(net: Network, zone) -> np.ndarray:
    x0, y0, x1, y1 = zone
    p = net.positions
    inside = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
    return np.flatnonzero(inside)


def sample_pairs(net: Network, sc: Scenario, seed: int) -> list[tuple[int, int]]:
    src = zone_nodes(net, sc.source_zone)
    dst = zone_nodes(net, sc.dest_zone)
    if not src.size:
        raise ScenarioError("source zone contains no nodes")
    if not dst.size:
        raise ScenarioError("destination zone contains no nodes")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(sc.n_messages):
        for _attempt in range(100):
            s = int(src[rng.integers(src.size)])
            t = int(dst[rng.integers(dst.size)])
            if s != t:
                break
        pairs.append((s, t))
    return pairs


def _prepare(sc: Scenario) -> Prepared:
    net = deploy(sc.seed, sc.n_nodes, sc.field, sc.comm_radius, sc.crescent())
    domain = net.subgraph(net.largest_component()) if sc.giant_component else net
    anchor_seed, msg_seed = _sub_seeds(sc.seed)
    anchors = select_anchors(domain, sc.n_anchors, anchor_seed)
    pairs = sample_pairs(domain, sc, msg_seed)
    by_source = {}
    shortest = []
    for s, t in pairs:
        if s not in by_source:
            by_source[s] = bfs_hops(domain, s)
        d = by_source[s][t]
        shortest.append(None if math.isinf(d) else int(d))
    return Prepared(net, domain, anchors, tuple(pairs), tuple(shortest))


_PREPARED: dict = {}
_PREPARED_MAX = 2


def prepare(sc: Scenario) -> Prepared:
    """Prepared field for `sc`; the last few are cached so variants share them."""
    key = _topology_key(sc)
    prep = _PREPARED.get(key)
    if prep is None:
        prep = _prepare(sc)
        while len(_PREPARED) >= _PREPARED_MAX:
            _PREPARED.pop(next(iter(_PREPARED)))
        _PREPARED[key] = prep
    return prep


def _valid_walk(net: Network, trace: Sequence[int]) -> bool:
    return all(b in net.adj_sets[a] for a, b in zip(trace, trace[1:]))


def run(sc: Scenario) -> RunReport:
    """Route every sampled message of the scenario and collect metrics."""
    t0 = time.perf_counter()
    prep = prepare(sc)
    dom = prep.domain
    view = prep.view(sc.mode)
    states: dict[int, RoamState] = {}
    results = []
    marked_total = 0
    for (s, t), sp in zip(prep.pairs, prep.shortest):
        ttl = sc.ttl_min if sp is None else max(sc.ttl_min, sc.ttl_factor * sp)
        msg = Message(s, t, view.coord(t).copy(), ttl)
        state = None
        if sc.protocol == "roam":
            if sc.roam_reset:
                state = RoamState(dom.n_nodes)
            else:
                state = states.setdefault(t, RoamState(dom.n_nodes))
        out = route(sc.protocol, view, dom, msg, roam_state=state, alpha=sc.alpha,
                    use_filter=sc.filter_anchors)
        if sc.protocol == "roam" and sc.roam_reset:
            marked_total += dead_end_zone_size(state)
        if out.delivered and not _valid_walk(dom, out.trace):
            raise RuntimeError(f"invalid walk reported for message {s}->{t}")
        stretch = None
        if out.delivered and sp:
            stretch = out.hops / sp
        results.append(MessageResult(s, t, out.delivered, out.reason, out.hops, sp, stretch, out.trace))
    if sc.protocol == "roam" and not sc.roam_reset:
        marked_total = sum(dead_end_zone_size(st) for st in states.values())
    flood = prep.coords[sc.mode].flood_messages if sc.mode in prep.coords else 0
    collisions = 0
    if sc.mode == "hop":
        collisions = len(coordinate_collisions(prep.coords["hop"]))
    return RunReport(
        scenario=sc,
        messages=results,
        avg_neighbors=prep.net.avg_neighbors(),
        marked_nodes=int(marked_total),
        wall_time=time.perf_counter() - t0,
        flood_messages=flood,
        coord_collisions=collisions,
    )


def dead_end_zone_size(state: Optional[RoamState]) -> int:
    """Number of nodes marked as dead ends."""
    if state is None:
        return 0
    return int(state.marked_mask.sum())


def _safe_run(sc: Scenario) -> RunReport:
    try:
        return run(sc)
    except Exception as exc:  # noqa: BLE001 - a sweep keeps going past a bad run
        return RunReport(sc, [], float("nan"), 0, error=f"{type(exc).__name__}: {exc}")


def _run_group(scenarios: Sequence[Scenario]) -> list[RunReport]:
    return [_safe_run(sc) for sc in scenarios]


def sweep(base: Scenario, densities: Sequence[int], seeds: Sequence[int],
          variants: Sequence[tuple[str, str]] = VARIANTS, jobs: int = 1) -> list[RunReport]:
    """Cross product of density x seed x variant, ordered in that nesting."""
    if not densities or not seeds:
        raise ScenarioError("densities and seeds must be non-empty")
    groups = []
    for n in densities:
        for seed in seeds:
            groups.append([base.with_(n_nodes=int(n), seed=int(seed), protocol=p, mode=m)
                           for p, m in variants])
    if jobs > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_group, groups))
    else:
        chunks = [_run_group(g) for g in groups]
    return [r for chunk in chunks for r in chunk]


def write_dump(sc: Scenario, fh: IO[str], reports: Sequence[RunReport] = ()) -> None:
    """Graph dump of the deployed field plus anchor/coordinate lines and paths."""
    prep = prepare(sc)
    write_graph(prep.net, fh)
    mode = "hop" if sc.mode == "hop" else "euclidean"
    prep.view(mode)
    write_coords(prep.domain, prep.coords[mode], fh)
    for rep in reports:
        for m in rep.messages:
            fh.write("path " + " ".join(map(str, prep.domain.ids_out(m.trace))) + "\n")


SCENARIO_FIELDS = tuple(f.name for f in fields(Scenario))
