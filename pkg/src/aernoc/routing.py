"""Per-packet routes and table-based AER routing memory accounting.

Grids use dimension-ordered XY routing (X fully resolved before Y). On a torus
each dimension takes the shorter wrap direction, ties going positive. Trees
route up to the lowest common ancestor and branch down, carrying a multicast
packet over each link at most once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from aernoc.topology import GRID_KINDS, TREE_KINDS, Topology


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class Route:
    """Links a packet (or its replicas) traverses, in causal order.

    For a unicast route ``links`` is a path starting at ``source``. For a
    multicast route it is an arborescence rooted at ``source``, listed so that
    each link comes after the link that reaches its tail.
    """

    source: int
    links: Tuple[Tuple[int, int], ...]
    destinations: FrozenSet[int]

    def __post_init__(self):
        if not self.destinations:
            raise RoutingError("route destination set must not be empty")

    @property
    def hops(self) -> List[int]:
        """Routers visited after the source, for unicast routes."""
        return [v for _, v in self.links]

    def __len__(self) -> int:
        return len(self.links)

    def hop_count(self, dst: int) -> int:
        """Links from the source to ``dst`` along this route."""
        if dst == self.source:
            return 0
        into = {v: u for u, v in self.links}
        n = 0
        while dst != self.source:
            if dst not in into:
                raise RoutingError(f"router {dst} is not reached by this route")
            dst = into[dst]
            n += 1
        return n


def _axis_steps(src: int, dst: int, size: int, wrap: bool) -> List[int]:
    if not wrap:
        step = 1 if dst > src else -1
        return [step] * abs(dst - src)
    fwd = (dst - src) % size
    back = (src - dst) % size
    if fwd <= back:
        return [1] * fwd
    return [-1] * back


def xy_route(t: Topology, src: int, dst: int) -> Route:
    if t.kind not in GRID_KINDS:
        raise RoutingError(f"XY routing needs a mesh or torus, got {t.kind}")
    wrap = t.kind == "torus"
    (sx, sy), (dx, dy) = t.coord(src), t.coord(dst)
    links = []
    x, y = sx, sy
    for step in _axis_steps(sx, dx, t.width, wrap):
        nx = (x + step) % t.width
        links.append((t.router_at(x, y), t.router_at(nx, y)))
        x = nx
    for step in _axis_steps(sy, dy, t.height, wrap):
        ny = (y + step) % t.height
        links.append((t.router_at(x, y), t.router_at(x, ny)))
        y = ny
    for u, v in links:
        if not t.has_link(u, v):
            raise RoutingError(f"no link {u}->{v} on XY path {src}->{dst}")
    return Route(src, tuple(links), frozenset([dst]))


def _ancestors(t: Topology, router: int) -> List[int]:
    chain = [router]
    while t.parent[router] != router:
        router = t.parent[router]
        chain.append(router)
    return chain


def tree_path(t: Topology, src: int, dst: int) -> Tuple[Tuple[int, int], ...]:
    up = _ancestors(t, src)
    down = _ancestors(t, dst)
    common = set(up) & set(down)
    lca = next(r for r in up if r in common)
    ascent = up[: up.index(lca) + 1]
    descent = list(reversed(down[: down.index(lca) + 1]))
    nodes = ascent + descent[1:]
    return tuple(zip(nodes, nodes[1:]))


def tree_multicast_route(t: Topology, src: int, dsts: Iterable[int]) -> Route:
    """Up to the lowest common ancestor, branching down towards every destination.

    Replication happens at the first router where destination paths diverge;
    the link set equals the union of the unicast tree paths.
    """
    if t.kind not in TREE_KINDS:
        raise RoutingError(f"tree multicast needs a tree topology, got {t.kind}")
    dsts = frozenset(dsts)
    if not dsts:
        raise RoutingError("multicast destination set must not be empty")
    leaves = set(t.leaves)
    for d in sorted(dsts):
        if d not in leaves:
            raise RoutingError(f"destination {d} is not a leaf")
    seen = set()
    links = []
    for d in sorted(dsts):
        for link in tree_path(t, src, d):
            if link not in seen:
                seen.add(link)
                links.append(link)
    # Order by distance from the source so every link follows the one feeding it.
    depth = {src: 0}
    ordered = []
    frontier = [src]
    by_tail: Dict[int, List[Tuple[int, int]]] = {}
    for u, v in links:
        by_tail.setdefault(u, []).append((u, v))
    while frontier:
        nxt = []
        for u in frontier:
            for link in sorted(by_tail.get(u, ())):
                ordered.append(link)
                depth[link[1]] = depth[u] + 1
                nxt.append(link[1])
        frontier = nxt
    for u, v in ordered:
        if not t.has_link(u, v):
            raise RoutingError(f"no link {u}->{v} in tree")
    return Route(src, tuple(ordered), dsts)


def path_hops(t: Topology, src: int, dst: int) -> int:
    """Hop count from ``src`` to ``dst`` under the default routing function."""
    if t.kind in GRID_KINDS:
        return len(xy_route(t, src, dst))
    if t.kind in TREE_KINDS:
        return len(tree_path(t, src, dst))
    raise RoutingError(f"no routing function for {t.kind}")


def default_routing(t: Topology, src: int, dsts: Iterable[int]) -> List[Route]:
    """Routes covering ``dsts`` (router ids) from ``src``.

    Grids replicate at the source (one XY unicast per destination router);
    trees send one multicast packet replicated at branch routers. A source
    router in the destination set is delivered locally and needs no route.
    """
    remote = sorted(set(dsts) - {src})
    if not remote:
        return []
    if t.kind in GRID_KINDS:
        return [xy_route(t, src, d) for d in remote]
    if t.kind in TREE_KINDS:
        return [tree_multicast_route(t, src, remote)]
    raise RoutingError(f"no routing function for {t.kind}")


def turns(route: Route, t: Topology) -> List[Tuple[str, str]]:
    """Dimension turns along a grid route, e.g. ``("x", "y")``."""
    dims = []
    for u, v in route.links:
        dims.append("x" if t.coord(u)[1] == t.coord(v)[1] else "y")
    return [(a, b) for a, b in zip(dims, dims[1:]) if a != b]


# -- routing tables ------------------------------------------------------------


def address_width(n_addresses: int) -> int:
    """Bits to name one of ``n_addresses`` destinations."""
    if n_addresses < 1:
        raise ValueError("need at least one address")
    return math.ceil(math.log2(n_addresses)) if n_addresses > 1 else 0


@dataclass(frozen=True)
class RoutingTable:
    """Per-source-neuron fanout lists of destination neuron ids.

    ``address_bits`` is the flat per-destination address width; by default it
    names one of ``n_neurons * max_fanout`` synapse addresses.
    """

    fanouts: Mapping[int, Tuple[int, ...]]
    n_neurons: int
    address_bits: Optional[int] = None

    def __post_init__(self):
        fanouts = {int(k): tuple(int(d) for d in v) for k, v in sorted(self.fanouts.items())}
        for src, dsts in fanouts.items():
            if not 0 <= src < self.n_neurons:
                raise ValueError(f"source neuron {src} out of range 0..{self.n_neurons - 1}")
            for d in dsts:
                if not 0 <= d < self.n_neurons:
                    raise ValueError(f"destination {d} of neuron {src} out of range")
        object.__setattr__(self, "fanouts", fanouts)
        if self.address_bits is None:
            widest = max((len(v) for v in fanouts.values()), default=0)
            bits = address_width(self.n_neurons * widest) if widest and self.n_neurons else 0
            object.__setattr__(self, "address_bits", bits)

    @classmethod
    def uniform(cls, n_neurons: int, fanout: int) -> "RoutingTable":
        """Every neuron targets the next ``fanout`` neurons cyclically."""
        table = {
            i: tuple((i + 1 + j) % n_neurons for j in range(fanout)) for i in range(n_neurons)
        }
        return cls(table, n_neurons)

    def destinations(self, neuron: int) -> Tuple[int, ...]:
        return self.fanouts.get(neuron, ())

    @property
    def fanout_lengths(self) -> Dict[int, int]:
        return {k: len(v) for k, v in self.fanouts.items()}

    def split_address_bits(self, t: Topology) -> Tuple[int, int]:
        """(cluster bits, local bits) when an address is split as cluster + local synapse."""
        hosts = [c for c in t.clusters if c.neurons > 0]
        widest = max((len(v) for v in self.fanouts.values()), default=0)
        local = max(c.neurons for c in hosts) * max(widest, 1) if hosts else 1
        return address_width(max(len(hosts), 1)), address_width(max(local, 1))


def routing_table_bits(rt: RoutingTable, t: Optional[Topology] = None, scheme: str = "flat") -> int:
    """Σ over source neurons of fanout length times address width.

    ``scheme="split"`` charges ``ceil(lg clusters) + ceil(lg local)`` bits per
    entry and needs the topology.
    """
    if scheme == "flat":
        width = rt.address_bits
    elif scheme == "split":
        if t is None:
            raise ValueError("split addressing needs the topology")
        width = sum(rt.split_address_bits(t))
    else:
        raise ValueError(f"unknown address scheme {scheme!r}")
    return sum(len(v) for v in rt.fanouts.values()) * width


def load_connectivity(path, n_neurons: int) -> RoutingTable:
    """Read ``<src>: <dst> <dst> ...`` lines; ``#`` starts a comment."""
    table: Dict[int, Tuple[int, ...]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, sep, tail = line.partition(":")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected '<src>: <dst> ...'")
            try:
                src = int(head)
                dsts = tuple(int(v) for v in tail.replace(",", " ").split())
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer neuron id in {raw.strip()!r}") from None
            if src in table:
                raise ValueError(f"{path}:{lineno}: duplicate source neuron {src}")
            table[src] = dsts
    try:
        return RoutingTable(table, n_neurons)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def save_connectivity(rt: RoutingTable, path) -> None:
    with open(path, "w") as fh:
        for src, dsts in rt.fanouts.items():
            fh.write(f"{src}: {' '.join(map(str, dsts))}\n")
