import itertools

import networkx as nx
import pytest

from aernoc import analytics
from aernoc.routing import (
    Route,
    RoutingError,
    RoutingTable,
    default_routing,
    load_connectivity,
    routing_table_bits,
    save_connectivity,
    tree_multicast_route,
    turns,
    xy_route,
)
from aernoc.topology import build_mesh, build_torus, build_tree


def test_xy_example(mesh3):
    r = xy_route(mesh3, mesh3.router_at(0, 0), mesh3.router_at(2, 1))
    assert [mesh3.coord(v) for v in r.hops] == [(1, 0), (2, 0), (2, 1)]


def test_xy_identity(mesh3):
    assert xy_route(mesh3, 4, 4).links == ()


def test_torus_wrap(torus4):
    r = xy_route(torus4, torus4.router_at(0, 0), torus4.router_at(3, 0))
    assert [torus4.coord(v) for v in r.hops] == [(3, 0)]


def test_torus_tie_goes_positive(torus4):
    r = xy_route(torus4, torus4.router_at(0, 0), torus4.router_at(2, 2))
    assert [torus4.coord(v) for v in r.hops] == [(1, 0), (2, 0), (2, 1), (2, 2)]


def test_xy_wrong_kind(bintree):
    with pytest.raises(RoutingError):
        xy_route(bintree, 3, 4)


@pytest.mark.parametrize("w,h", [(3, 3), (4, 4), (5, 2)])
def test_xy_minimal_and_turn_free_exhaustive(w, h):
    t = build_mesh(w, h)
    for a, b in itertools.product(range(t.n_routers), repeat=2):
        r = xy_route(t, a, b)
        (ax, ay), (bx, by) = t.coord(a), t.coord(b)
        assert len(r) == abs(ax - bx) + abs(ay - by)
        assert len(set(r.hops)) == len(r.hops)
        assert ("y", "x") not in turns(r, t)


def test_torus_minimal_exhaustive():
    t = build_torus(5, 4)
    g = nx.DiGraph([(l.src, l.dst) for l in t.links])
    for a, b in itertools.product(range(t.n_routers), repeat=2):
        r = xy_route(t, a, b)
        assert len(r) == nx.shortest_path_length(g, a, b)
        assert ("y", "x") not in turns(r, t)


def test_tree_siblings(bintree):
    leaves = bintree.leaves
    r = tree_multicast_route(bintree, leaves[0], [leaves[1]])
    assert len(r) == 2
    assert r.links[0][1] == bintree.parent[leaves[0]]


def test_tree_broadcast_covers_each_link_once(bintree):
    leaves = bintree.leaves
    r = tree_multicast_route(bintree, leaves[0], leaves[1:])
    assert len(set(r.links)) == len(r.links)
    undirected = {frozenset(l) for l in r.links}
    assert len(undirected) == bintree.n_routers - 1


def test_tree_src_in_dsts(bintree):
    leaves = bintree.leaves
    r = tree_multicast_route(bintree, leaves[0], leaves[:2])
    assert leaves[0] in r.destinations
    assert r.hop_count(leaves[0]) == 0
    assert len(r) == 2


def test_tree_non_leaf_destination(bintree):
    with pytest.raises(RoutingError, match="not a leaf"):
        tree_multicast_route(bintree, bintree.leaves[0], [0])


def _union_of_unicast(t, src, dsts):
    g = nx.Graph([(l.src, l.dst) for l in t.links])
    g.add_nodes_from(range(t.n_routers))
    out = set()
    for d in dsts:
        path = nx.shortest_path(g, src, d)
        out |= set(zip(path, path[1:]))
    return out


def all_binary_trees_depth_le_3():
    for leaves in range(1, 9):
        yield build_tree(2, leaves)


def test_multicast_equals_union_of_unicast_exhaustive():
    checked = 0
    for t in all_binary_trees_depth_le_3():
        leaves = t.leaves
        for src in leaves:
            for k in range(1, len(leaves) + 1):
                for dsts in itertools.combinations(leaves, k):
                    r = tree_multicast_route(t, src, dsts)
                    assert set(r.links) == _union_of_unicast(t, src, dsts)
                    assert len(set(r.links)) == len(r.links)
                    checked += 1
    assert checked > 2000


def test_multicast_links_are_causally_ordered():
    t = build_tree(3, 9)
    r = tree_multicast_route(t, t.leaves[0], t.leaves[3:])
    reached = {r.source}
    for u, v in r.links:
        assert u in reached
        reached.add(v)


def test_default_routing(mesh3, bintree):
    assert default_routing(mesh3, 0, [0]) == []
    routes = default_routing(mesh3, 0, [4, 8])
    assert [r.destinations for r in routes] == [frozenset([4]), frozenset([8])]
    assert len(default_routing(bintree, 3, [4, 5, 6])) == 1


def test_route_needs_destinations():
    with pytest.raises(RoutingError):
        Route(0, (), frozenset())


def test_table_bits_examples():
    assert routing_table_bits(RoutingTable.uniform(2, 2)) == 8
    assert routing_table_bits(RoutingTable.uniform(2, 2)) == analytics.routing_memory_bits(analytics.SystemParams(2, 2), ceil=True)
    assert routing_table_bits(RoutingTable({}, 4)) == 0
    rt = RoutingTable.uniform(16, 4)
    assert rt.address_bits == 6
    # brute force over the constructed table
    assert sum(len(rt.destinations(i)) * 6 for i in range(16)) == 384 == routing_table_bits(rt)


def test_table_validation():
    with pytest.raises(ValueError):
        RoutingTable({0: (5,)}, 4)
    with pytest.raises(ValueError):
        RoutingTable({9: (1,)}, 4)


def test_split_addressing():
    t = build_mesh(4, 4, neurons_per_cluster=4)
    rt = RoutingTable.uniform(64, 4)
    cluster_bits, local_bits = rt.split_address_bits(t)
    assert (cluster_bits, local_bits) == (4, 4)
    assert routing_table_bits(rt, t, scheme="split") == 64 * 4 * 8
    with pytest.raises(ValueError):
        routing_table_bits(rt, scheme="split")


def test_connectivity_file_round_trip(tmp_path):
    rt = RoutingTable({0: (1, 2), 1: (0,), 3: (2, 2, 1)}, 4)
    path = tmp_path / "c.conn"
    save_connectivity(rt, path)
    assert load_connectivity(path, 4) == rt


def test_connectivity_file_errors(tmp_path):
    path = tmp_path / "bad.conn"
    path.write_text("0: 1 2\n1 2 3\n")
    with pytest.raises(ValueError, match=":2:"):
        load_connectivity(path, 4)
    path.write_text("0: 1 9\n")
    with pytest.raises(ValueError, match="out of range"):
        load_connectivity(path, 4)
