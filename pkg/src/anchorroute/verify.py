"""Property checks run by ``anchorroute verify``.

Each check draws its cases from a seeded generator and returns a
:class:`Check`; failures carry the seed of the offending case so it can be
replayed in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coords import AnchorSet, anchors_distance, build_coords, coordinate_map, is_general_setting
from .routing import (
    DistanceView,
    GricMsgState,
    Message,
    RoamState,
    dead_end_evaluate,
    frame_from_vectors,
    greedy_step,
    vgric_frame,
    vgric_ideal,
    vgric_step,
)
from .topology import CrescentObstacle, Network, bfs_hops, deploy

FAULTS = ("da_symmetry",)


@dataclass
class Check:
    name: str
    ok: bool
    trials: int
    detail: str = ""
    seed: Optional[int] = None

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" counterexample seed={self.seed}" if self.seed is not None and not self.ok else ""
        detail = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name} trials={self.trials}{extra}{detail}"


def floyd_warshall(net: Network) -> np.ndarray:
    """All-pairs hop distances by dynamic programming over intermediates."""
    n = net.n_nodes
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    e = net.edges()
    d[e[:, 0], e[:, 1]] = 1.0
    d[e[:, 1], e[:, 0]] = 1.0
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def _distance_fn(fault: Optional[str]) -> Callable:
    if fault == "da_symmetry":
        def skewed(u, v):
            return anchors_distance(u, v) * (1.001 if u[0] > v[0] else 1.0)
        return skewed
    return anchors_distance


def check_metric_axioms(trials: int, seed: int, fault: Optional[str] = None) -> list[Check]:
    """Non-negativity, symmetry and triangle inequality of the anchors distance."""
    da = _distance_fn(fault)
    rng = np.random.default_rng(seed)
    case_seeds = rng.integers(0, 2**31, size=trials)
    names = ("da_nonnegativity", "da_symmetry", "da_triangle")
    bad = {name: None for name in names}
    for s in case_seeds:
        r = np.random.default_rng(int(s))
        dim = int(r.integers(1, 11))
        u, v, w = r.normal(scale=r.uniform(0.1, 100.0), size=(3, dim))
        duv, dvu = da(u, v), da(v, u)
        if bad["da_nonnegativity"] is None and duv < -1e-9:
            bad["da_nonnegativity"] = int(s)
        if bad["da_symmetry"] is None and abs(duv - dvu) > 1e-9:
            bad["da_symmetry"] = int(s)
        if bad["da_triangle"] is None and duv > da(u, w) + da(w, v) + 1e-9:
            bad["da_triangle"] = int(s)
    return [Check(name, bad[name] is None, trials, seed=bad[name]) for name in names]


def check_separation(trials: int, seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = math.inf
    bad_seed = None
    done = 0
    while done < trials:
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        anchors = r.uniform(-10, 10, size=(3, 2))
        if not is_general_setting(anchors):
            continue
        batch = min(1000, trials - done)
        u = r.uniform(-20, 20, size=(batch, 2))
        v = r.uniform(-20, 20, size=(batch, 2))
        fu, fv = coordinate_map(u, anchors), coordinate_map(v, anchors)
        d = np.sqrt(((fu - fv) ** 2).sum(axis=1))
        distinct = (u != v).any(axis=1)
        m = float(d[distinct].min()) if distinct.any() else math.inf
        if m <= 1e-9 and bad_seed is None:
            bad_seed = s
        worst = min(worst, m)
        done += batch
    general = Check("general_setting_separation", bad_seed is None, trials,
                    f"min d_a over distinct pairs {worst:.3g}", bad_seed)

    # anchors on the x-axis: a point and its mirror image share coordinates
    r = np.random.default_rng(seed + 1)
    line = np.column_stack([r.uniform(-10, 10, 3), np.zeros(3)])
    p = np.array([[r.uniform(-5, 5), r.uniform(0.5, 5)]])
    q = p * np.array([1.0, -1.0])
    d = anchors_distance(coordinate_map(p, line)[0], coordinate_map(q, line)[0])
    witness = Check("collinear_witness", d == 0.0 and not is_general_setting(line), 1,
                    f"d_a(mirror pair) = {d}", None if d == 0.0 else seed + 1)
    return [general, witness]


def _random_net(r: np.random.Generator, n: int, obstacle: bool = False) -> Network:
    side = float(r.uniform(6, 14))
    ob = None
    if obstacle:
        c = side / 2
        ob = CrescentObstacle((c, c), side * 0.3, (c - side * 0.15, c), side * 0.25)
    return deploy(int(r.integers(0, 2**31)), n, (side, side), float(r.uniform(1.5, 3.0)), ob)


def check_hop_oracle(trials: int, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        net = _random_net(r, 60)
        fw = floyd_warshall(net)
        for u in range(net.n_nodes):
            if not np.array_equal(bfs_hops(net, u), fw[u]):
                return Check("hop_oracle", False, trials, f"row {u}", s)
        comp = net.largest_component()
        sub = net.subgraph(comp)
        anchors = tuple(int(a) for a in r.choice(sub.n_nodes, size=min(4, sub.n_nodes), replace=False))
        cs = build_coords(sub, AnchorSet(anchors, "hop"))
        fw_sub = floyd_warshall(sub)
        if not np.array_equal(cs.coords, fw_sub[list(anchors)].T):
            return Check("hop_oracle", False, trials, "hop coordinates", s)
    return Check("hop_oracle", True, trials)


def check_greedy_argmin(trials: int, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    net = _random_net(rng, 50)
    view = DistanceView.plane(net)
    for _ in range(trials):
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        u = int(r.integers(net.n_nodes))
        target = r.uniform(0, net.field[0], size=2)
        got = greedy_step(view, net, u, target)
        du = math.dist(net.positions[u], target)
        best, best_d = None, du
        for v in sorted(net.adj[u]):
            dv = math.dist(net.positions[v], target)
            if dv < best_d:
                best, best_d = v, dv
        if got != best:
            return Check("greedy_argmin", False, trials, f"u={u} got {got} want {best}", s)
    return Check("greedy_argmin", True, trials)


def check_gric_argmax(trials: int, seed: int) -> Check:
    """Frame-based choice against a plain loop over the neighbor table."""
    rng = np.random.default_rng(seed)
    net = _random_net(rng, 80)
    view = DistanceView.plane(net)
    done = 0
    while done < trials:
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        u, dest = (int(x) for x in r.choice(net.n_nodes, size=2, replace=False))
        if len(net.adj[u]) < 2 or dest in net.adj_sets[u]:
            continue
        target = view.coord(dest)
        d_last = r.normal(size=2)
        d_last /= np.linalg.norm(d_last)
        alpha = float(r.uniform(0, math.pi))
        frame = vgric_frame(view, net, u, d_last, target)
        done += 1
        if frame is None:
            continue
        gs = GricMsgState(alpha, d_last=d_last.copy())
        got, _ = vgric_step(view, net, u, Message(u, dest, target, 100), gs)
        ideal = vgric_ideal(d_last, *frame, alpha)
        scores = {}
        for v in sorted(net.adj[u]):
            g = net.positions[v] - net.positions[u]
            n = math.hypot(*g)
            if n > 0:
                scores[v] = (g[0] * ideal[0] + g[1] * ideal[1]) / n
        top = max(scores.values())
        best = min(v for v, sc in scores.items() if sc >= top - 1e-12)
        if got != best and abs(scores.get(got, -math.inf) - top) > 1e-12:
            return Check("gric_argmax", False, trials, f"u={u} got {got} want {best}", s)
    return Check("gric_argmax", True, trials)


def _random_frame_inputs(r: np.random.Generator):
    dim = int(r.integers(2, 9))
    d_last = r.normal(size=dim)
    d_last /= np.linalg.norm(d_last)
    return dim, d_last, r.normal(size=dim) * r.uniform(0.1, 50), r.normal(size=dim), r.normal(size=dim)


def check_frame_geometry(trials: int, seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    ortho_bad = iso_bad = None
    for _ in range(trials):
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        _, d_last, d_dir, i_vec, p_east = _random_frame_inputs(r)
        fr = frame_from_vectors(d_dir, d_last, i_vec / np.linalg.norm(i_vec), p_east)
        if fr is None:
            continue
        vn, ve = fr
        if ortho_bad is None and (abs(np.linalg.norm(vn) - 1) > 1e-9 or abs(np.linalg.norm(ve) - 1) > 1e-9
                                  or abs(float(vn @ ve)) > 1e-6):
            ortho_bad = s
        alpha = float(r.uniform(0, math.pi))
        x, y = abs(float(d_last @ ve)), float(d_last @ vn)
        before = math.hypot(x, y)
        ca, sa = math.cos(alpha), math.sin(alpha)
        rotated = (ca * y + sa * x) * vn + (ca * x - sa * y) * ve
        if iso_bad is None and abs(np.linalg.norm(rotated) - before) > 1e-9 * max(1.0, before):
            iso_bad = s
        ideal = vgric_ideal(d_last, vn, ve, alpha)
        clamped = float(rotated @ ve) < -1e-12 and float(rotated @ vn) > 1e-12
        if not clamped and iso_bad is None and not np.allclose(ideal, rotated, atol=1e-12):
            iso_bad = s
    return [
        Check("frame_orthonormal", ortho_bad is None, trials, seed=ortho_bad),
        Check("rotation_isometry", iso_bad is None, trials, seed=iso_bad),
    ]


def descending_reach(net: Network, dist: np.ndarray, dest: int) -> np.ndarray:
    """Nodes with a strictly decreasing path to `dest` (the never-marked set)."""
    ok = np.zeros(net.n_nodes, dtype=bool)
    ok[dest] = True
    stack = [dest]
    while stack:
        w = stack.pop()
        for v in net.adj[w]:
            if not ok[v] and dist[v] > dist[w]:
                ok[v] = True
                stack.append(v)
    return ok


def check_roam_soundness(trials: int, seed: int, orders: int = 10) -> Check:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        s = int(rng.integers(0, 2**31))
        r = np.random.default_rng(s)
        net = _random_net(r, int(r.integers(60, 201)), obstacle=True)
        view = DistanceView.plane(net)
        dest = int(r.integers(net.n_nodes))
        dest_coord = view.coord(dest)
        dist = view.distances_to(dest_coord)
        reference = None
        for _k in range(orders):
            state = RoamState(net.n_nodes)
            for u in r.permutation(net.n_nodes):
                dead_end_evaluate(view, net, int(u), dest_coord, state, dest=dest, dist=dist)
            marked = state.marked_mask.copy()
            for u in range(net.n_nodes):
                if u == dest or marked[u]:
                    continue
                if not any(not marked[v] and dist[v] < dist[u] for v in net.adj[u]):
                    return Check("roam_soundness", False, trials, f"unmarked dead end {u}", s)
            if reference is None:
                reference = marked
                if not np.array_equal(~marked, descending_reach(net, dist, dest)):
                    return Check("roam_soundness", False, trials, "marking != descending-reach oracle", s)
            elif not np.array_equal(reference, marked):
                return Check("roam_soundness", False, trials, "order dependent marking", s)
    return Check("roam_soundness", True, trials)


def run_all(trials: int = 2000, seed: int = 0, fault: Optional[str] = None) -> list[Check]:
    """Every property at a trial budget scaled from `trials`."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; known: {FAULTS}")
    checks = []
    checks += check_metric_axioms(trials, seed, fault)
    checks += check_separation(trials, seed)
    checks.append(check_hop_oracle(max(1, trials // 500), seed))
    checks.append(check_greedy_argmin(max(1, trials // 2), seed))
    checks.append(check_gric_argmax(max(1, trials // 2), seed))
    checks += check_frame_geometry(trials, seed)
    checks.append(check_roam_soundness(max(1, trials // 1000), seed, orders=3))
    return checks

