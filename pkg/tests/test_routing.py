import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anchorroute.coords import build_coords, select_anchors
from anchorroute.routing import (
    DEFAULT_ALPHA,
    DistanceView,
    GricMsgState,
    Message,
    RoamState,
    dead_end_evaluate,
    default_ttl,
    frame_from_vectors,
    greedy_step,
    roam_step,
    route,
    vgric_frame,
    vgric_ideal,
    vgric_step,
)
from anchorroute.topology import CrescentObstacle, deploy, network_from_edges, network_from_positions
from anchorroute.verify import descending_reach


def msg_to(view, src, dst, ttl=100):
    return Message(src, dst, view.coord(dst).copy(), ttl)


# greedy

def test_greedy_takes_adjacent_dest(net60):
    view = DistanceView.plane(net60)
    u = 0
    v = int(net60.neighbors(u)[0])
    assert greedy_step(view, net60, u, view.coord(v), dest=v) == v


def test_greedy_path_graph(path3):
    view = DistanceView.plane(path3)
    assert greedy_step(view, path3, 0, view.coord(2)) == 1


def test_greedy_needs_strict_improvement():
    # node 1 and its only neighbor 0 are both exactly 1 away from the target
    net = network_from_edges(3, [(0, 1), (0, 2)], positions=[[0, 0], [1, 1], [-1, 1]])
    view = DistanceView.plane(net)
    target = np.array([0.0, 1.0])
    assert greedy_step(view, net, 1, target) is None
    assert greedy_step(view, net, 0, np.array([0.0, -5.0])) is None


def test_greedy_tie_lowest_id():
    net = network_from_edges(3, [(0, 1), (0, 2)], positions=[[0, 0], [1, 1], [-1, 1]])
    view = DistanceView.plane(net)
    assert greedy_step(view, net, 0, np.array([0.0, 5.0])) == 1


def test_greedy_brute_force_argmin():
    net = deploy(21, 50, (7, 7), 2.0)
    view = DistanceView.plane(net)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        u = int(rng.integers(50))
        t = rng.uniform(0, 7, 2)
        du = math.dist(net.positions[u], t)
        cands = [(math.dist(net.positions[v], t), v) for v in net.adj[u]]
        closer = [c for c in cands if c[0] < du]
        want = min(closer)[1] if closer else None
        assert greedy_step(view, net, u, t) == want


def test_greedy_respects_eligibility(path3):
    view = DistanceView.plane(path3)
    mask = np.array([True, False, True])
    assert greedy_step(view, path3, 0, view.coord(2), eligible=mask) is None


# ROAM

@pytest.fixture
def cul_de_sac():
    # a=0, b=1, c=2, dest=3; dest hangs off a, c and b lie nearer to it in the plane
    pos = [[3.0, 0.0], [2.5, 1.0], [1.0, 1.5], [0.0, 0.0]]
    return network_from_edges(4, [(3, 0), (0, 1), (1, 2)], positions=pos)


def test_cul_de_sac_marking(cul_de_sac):
    view = DistanceView.plane(cul_de_sac)
    st_ = RoamState(4)
    dead_end_evaluate(view, cul_de_sac, 2, view.coord(3), st_, dest=3)
    assert st_.marked == {1, 2}
    assert st_.exit_of == {1: 0, 2: 1}


def test_cul_de_sac_escape(cul_de_sac):
    view = DistanceView.plane(cul_de_sac)
    st_ = RoamState(4)
    nxt, _ = roam_step(view, cul_de_sac, 2, msg_to(view, 2, 3), st_)
    assert nxt == 1
    out = route("roam", view, cul_de_sac, msg_to(view, 2, 3), st_)
    assert out.delivered and out.trace == [2, 1, 0, 3]
    assert route("greedy", view, cul_de_sac, msg_to(view, 2, 3)).reason == "stuck"


def test_no_change_when_closer_neighbor_exists(path3):
    view = DistanceView.plane(path3)
    st_ = RoamState(3)
    dead_end_evaluate(view, path3, 1, view.coord(2), st_, dest=2)
    assert st_.marked == set() and st_.waves == 0


def test_complete_graph_never_marks():
    net = deploy(7, 40, (5, 5), 20.0)
    view = DistanceView.plane(net)
    for dest in range(0, 40, 5):
        st_ = RoamState(40)
        for u in range(40):
            dead_end_evaluate(view, net, u, view.coord(dest), st_, dest=dest)
        assert not st_.marked


def test_roam_step_reduces_to_greedy(net60):
    view = DistanceView.plane(net60)
    dest = 17
    for u in range(net60.n_nodes):
        st_ = RoamState(net60.n_nodes)
        nxt, _ = roam_step(view, net60, u, msg_to(view, u, dest), st_)
        if not st_.marked_mask[u]:
            g = greedy_step(view, net60, u, view.coord(dest), eligible=~st_.marked_mask, dest=dest)
            assert nxt == g


def test_roam_adjacent_dest(path3):
    view = DistanceView.plane(path3)
    nxt, _ = roam_step(view, path3, 1, msg_to(view, 1, 0), RoamState(3))
    assert nxt == 0


def _exit_chains_ok(st_):
    marked = st_.marked_mask
    for u in np.flatnonzero(marked):
        seen = set()
        v = int(u)
        while marked[v]:
            if v in seen or st_.exit[v] < 0:
                return False
            seen.add(v)
            v = int(st_.exit[v])
    return True


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(60, 200))
def test_marking_soundness_and_order_independence(seed, n):
    rng = np.random.default_rng(seed)
    side = 10.0
    ob = CrescentObstacle((5, 5), 3.0, (3.5, 5), 2.5)
    net = deploy(seed, n, (side, side), 1.8, ob)
    view = DistanceView.plane(net)
    dest = int(rng.integers(n))
    dist = view.distances_to(view.coord(dest))
    ref = None
    for _ in range(3):
        st_ = RoamState(n)
        before = st_.marked_mask.copy()
        for u in rng.permutation(n):
            dead_end_evaluate(view, net, int(u), view.coord(dest), st_, dest=dest, dist=dist)
            assert (st_.marked_mask >= before).all()
            before = st_.marked_mask.copy()
        m = st_.marked_mask
        for u in range(n):
            if u != dest and not m[u]:
                assert any(not m[v] and dist[v] < dist[u] for v in net.adj[u])
        if ref is None:
            ref = m.copy()
            assert np.array_equal(~m, descending_reach(net, dist, dest))
        else:
            assert np.array_equal(ref, m)
        # marked nodes sharing a component with an unmarked node get an exit
        reach = set(np.flatnonzero(~m).tolist())
        frontier = list(reach)
        while frontier:
            w = frontier.pop()
            for v in net.adj[w]:
                if v not in reach:
                    reach.add(v)
                    frontier.append(v)
        for u in np.flatnonzero(m):
            if int(u) in reach:
                assert st_.exit[u] >= 0
        st_.marked_mask &= np.isin(np.arange(n), list(reach))
        assert _exit_chains_ok(st_)


def test_exits_form_bfs_layers(small_crescent_net):
    net = small_crescent_net
    view = DistanceView.plane(net)
    dest = int(np.argmax(net.positions[:, 0]))
    st_ = RoamState(net.n_nodes)
    for u in range(net.n_nodes):
        dead_end_evaluate(view, net, u, view.coord(dest), st_, dest=dest)
    for u, e in st_.exit_of.items():
        assert u in st_.marked and e in net.adj_sets[u]


# GRIC frame and rotation

def test_frame_hand_example():
    vn, ve = frame_from_vectors((2, 0), (1, 0), (0, 1), p_east=(0, -1))
    assert np.allclose(vn, (1, 0)) and np.allclose(ve, (0, -1))


def test_frame_sign_rule():
    _, ve = frame_from_vectors((2, 0), (1, 0), (0, 1), p_east=(0, 1))
    assert np.allclose(ve, (0, 1))
    _, ve = frame_from_vectors((2, 0), (1, 0), (0, 1), p_east=(0.3, -0.2))
    assert np.allclose(ve, (0, -1))


def test_frame_north_follows_perpendicular_direction():
    vn, ve = frame_from_vectors((0, 3), (1, 0), (0, 1))
    assert np.allclose(vn, (0, 1))
    assert abs(vn @ ve) < 1e-12


def test_frame_degenerate():
    assert frame_from_vectors((2, 0), (1, 0), (1, 0)) is None
    assert frame_from_vectors((0, 0), (1, 0), (0, 1)) is None


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_frame_orthonormal_and_rotation_isometric(seed):
    r = np.random.default_rng(seed)
    dim = int(r.integers(2, 9))
    dl = r.normal(size=dim)
    dl /= np.linalg.norm(dl)
    fr = frame_from_vectors(r.normal(size=dim) * 10, dl, r.normal(size=dim), r.normal(size=dim))
    if fr is None:
        return
    vn, ve = fr
    assert abs(np.linalg.norm(vn) - 1) < 1e-12 and abs(np.linalg.norm(ve) - 1) < 1e-12
    assert abs(vn @ ve) <= 1e-6
    alpha = float(r.uniform(0, math.pi))
    x, y = abs(dl @ ve), dl @ vn
    ca, sa = math.cos(alpha), math.sin(alpha)
    rot = (ca * y + sa * x) * vn + (ca * x - sa * y) * ve
    assert abs(np.linalg.norm(rot) - math.hypot(x, y)) <= 1e-9


def test_ideal_identity_rotation():
    vn, ve = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    assert np.allclose(vgric_ideal(vn, vn, ve, 0.0), vn)


def test_ideal_quarter_turn_no_clamp():
    vn, ve = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    assert np.allclose(vgric_ideal(vn, vn, ve, math.pi / 2), -ve, atol=1e-15)


def test_ideal_default_alpha_clamps_to_north():
    vn, ve = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    assert DEFAULT_ALPHA == 0.3 * math.pi
    raw = math.cos(DEFAULT_ALPHA) * vn - math.sin(DEFAULT_ALPHA) * ve
    assert raw @ ve < 0 and raw @ vn > 0
    assert np.array_equal(vgric_ideal(vn, vn, ve, DEFAULT_ALPHA), vn)


def test_vgric_frame_on_network(net60):
    view = DistanceView.plane(net60)
    fr = vgric_frame(view, net60, 0, np.array([1.0, 0.0]), view.coord(30))
    assert fr is not None
    vn, ve = fr
    assert abs(vn @ ve) < 1e-9


# GRIC steps

def test_vgric_adjacent_dest(path3):
    view = DistanceView.plane(path3)
    gs = GricMsgState(d_last=np.array([1.0, 0.0]))
    nxt, gs = vgric_step(view, path3, 1, msg_to(view, 1, 2), gs)
    assert nxt == 2 and np.allclose(gs.d_last, (1, 0))


def test_vgric_single_neighbor():
    net = network_from_edges(3, [(0, 1), (1, 2)], positions=[[0, 0], [0, 1], [5, 5]])
    view = DistanceView.plane(net)
    gs = GricMsgState(d_last=np.array([0.0, -1.0]))
    nxt, _ = vgric_step(view, net, 0, msg_to(view, 0, 2), gs)
    assert nxt == 1


def test_vgric_corridor_monotone():
    xs = np.arange(0, 12, 0.8)
    pos = np.concatenate([np.column_stack([xs, np.zeros_like(xs)]),
                          np.column_stack([xs + 0.4, np.full_like(xs, 0.6)])])
    net = network_from_positions(pos, 1.0)
    view = DistanceView.plane(net)
    src, dst = 0, len(xs) - 1
    out = route("gric", view, net, msg_to(view, src, dst))
    assert out.delivered
    d = [math.dist(net.positions[u], net.positions[dst]) for u in out.trace]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_vgric_brute_force_argmax():
    net = deploy(3, 80, (9, 9), 2.0)
    view = DistanceView.plane(net)
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(3000):
        u, dest = (int(x) for x in rng.choice(80, 2, replace=False))
        if len(net.adj[u]) < 2 or dest in net.adj_sets[u]:
            continue
        dl = rng.normal(size=2)
        dl /= np.linalg.norm(dl)
        fr = vgric_frame(view, net, u, dl, view.coord(dest))
        if fr is None:
            continue
        ideal = vgric_ideal(dl, *fr)
        scores = []
        for v in net.adj[u]:
            g = net.positions[v] - net.positions[u]
            scores.append((-(g @ ideal) / np.linalg.norm(g), v))
        want = min(scores)[1]
        got, _ = vgric_step(view, net, u, msg_to(view, u, dest), GricMsgState(d_last=dl.copy()))
        assert got == want
        checked += 1
    assert checked > 1000


# driver

def test_route_source_is_dest(net60):
    view = DistanceView.plane(net60)
    for p in ("greedy", "roam", "gric"):
        out = route(p, view, net60, msg_to(view, 4, 4))
        assert out.delivered and out.trace == [4] and out.hops == 0


def test_route_disconnected():
    net = network_from_edges(4, [(0, 1), (2, 3)], positions=[[0, 0], [1, 0], [5, 0], [6, 0]])
    view = DistanceView.plane(net)
    for p in ("greedy", "roam", "gric"):
        out = route(p, view, net, msg_to(view, 0, 3, ttl=30))
        assert not out.delivered and out.reason in ("ttl", "stuck", "no-exit")


def test_route_rejects_bad_input(path3):
    view = DistanceView.plane(path3)
    with pytest.raises(ValueError):
        route("gpsr", view, path3, msg_to(view, 0, 2))
    with pytest.raises(ValueError):
        route("greedy", view, path3, msg_to(view, 0, 2, ttl=0))


def test_default_ttl():
    assert default_ttl(3) == 100
    assert default_ttl(25) == 250
    assert default_ttl(None) == 100


def test_traces_are_walks_within_ttl(small_crescent_net):
    comp = small_crescent_net.largest_component()
    net = small_crescent_net.subgraph(comp)
    views = [DistanceView.plane(net)]
    for mode in ("euclidean", "hop"):
        views.append(DistanceView.from_coords(build_coords(net, select_anchors(net, 6, 1, mode))))
    rng = np.random.default_rng(2)
    for view in views:
        for p in ("greedy", "roam", "gric"):
            for s, t in rng.integers(0, net.n_nodes, size=(15, 2)):
                m = msg_to(view, int(s), int(t), ttl=120)
                out = route(p, view, net, m)
                assert out.trace[0] == s and len(out.trace) <= 121
                for a, b in zip(out.trace, out.trace[1:]):
                    assert b in net.adj_sets[a]
                if out.delivered:
                    assert out.trace[-1] == t


def test_roam_delivers_on_connected_pairs(small_crescent_net):
    comp = small_crescent_net.largest_component()
    net = small_crescent_net.subgraph(comp)
    view = DistanceView.from_coords(build_coords(net, select_anchors(net, 6, 4, "hop")))
    rng = np.random.default_rng(8)
    for s, t in rng.integers(0, net.n_nodes, size=(40, 2)):
        out = route("roam", view, net, msg_to(view, int(s), int(t), ttl=1000))
        assert out.delivered


def _gric_reference(view, net, msg, alpha=DEFAULT_ALPHA):
    gs = GricMsgState(alpha=alpha)
    dist = view.distances_to(msg.dest_coord)
    u = msg.source
    trace = [u]
    while u != msg.dest:
        if len(trace) - 1 >= msg.ttl:
            return False, trace
        nxt, gs = vgric_step(view, net, u, msg, gs, dist=dist)
        if nxt is None:
            return False, trace
        trace.append(nxt)
        u = nxt
    return True, trace


def test_gric_cycle_shortcut_is_exact():
    from anchorroute.sim import Scenario, prepare
    prep = prepare(Scenario(n_nodes=2000, n_messages=40))
    net = prep.domain
    looped = 0
    for mode in ("2d", "hop"):
        view = prep.view(mode)
        for (s, t), sp in zip(prep.pairs, prep.shortest):
            ttl = default_ttl(sp)
            out = route("gric", view, net, msg_to(view, s, t, ttl))
            ok, trace = _gric_reference(view, net, msg_to(view, s, t, ttl))
            assert out.delivered == ok and out.trace == trace
            looped += out.reason == "ttl"
    assert looped > 0
