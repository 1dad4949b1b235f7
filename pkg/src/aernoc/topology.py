"""Router-graph topologies: 2D mesh, 2D torus (optionally with diagonals), trees.

A :class:`Topology` is immutable. Routers are numbered ``0..n-1``; mesh and
torus routers are laid out row-major (``id = y * width + x``), tree routers
breadth-first from the root (``id 0``). Neurons are numbered contiguously over
clusters in cluster order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

KINDS = ("mesh", "torus", "tree", "hierarchical")
GRID_KINDS = ("mesh", "torus")
TREE_KINDS = ("tree", "hierarchical")

SCHEMA_HEADER = "# aernoc topology v1"


@dataclass(frozen=True)
class LinkTiming:
    service_ticks: int = 1
    pipeline_ticks: int = 0

    def __post_init__(self):
        if int(self.service_ticks) != self.service_ticks or self.service_ticks < 1:
            raise ValueError(f"service_ticks must be an integer >= 1, got {self.service_ticks}")
        if int(self.pipeline_ticks) != self.pipeline_ticks or self.pipeline_ticks < 0:
            raise ValueError(f"pipeline_ticks must be an integer >= 0, got {self.pipeline_ticks}")


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    service_ticks: int = 1
    pipeline_ticks: int = 0

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"self-loop link at router {self.src}")
        LinkTiming(self.service_ticks, self.pipeline_ticks)

    @property
    def latency_ticks(self) -> int:
        """Uncontended traversal time."""
        return self.service_ticks + self.pipeline_ticks

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class Cluster:
    router: int
    neurons: int
    external: int


@dataclass(frozen=True)
class Topology:
    kind: str
    n_routers: int
    links: Tuple[Link, ...]
    clusters: Tuple[Cluster, ...]
    width: int = 0
    height: int = 0
    diagonals: bool = False
    fanout: int = 0
    depth: int = 0
    parent: Tuple[int, ...] = ()
    padded: bool = False
    _index: Dict[Tuple[int, int], int] = field(default=None, init=False, repr=False, compare=False)
    _neuron_router: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown topology kind {self.kind!r}")
        index = {}
        for i, link in enumerate(self.links):
            if not (0 <= link.src < self.n_routers and 0 <= link.dst < self.n_routers):
                raise ValueError(f"link {link} references a router outside 0..{self.n_routers - 1}")
            if (link.src, link.dst) in index:
                raise ValueError(f"duplicate link {link}")
            index[(link.src, link.dst)] = i
        seen = set()
        for c in self.clusters:
            if not 0 <= c.router < self.n_routers:
                raise ValueError(f"cluster attached to unknown router {c.router}")
            if c.router in seen:
                raise ValueError(f"router {c.router} hosts more than one cluster")
            seen.add(c.router)
        object.__setattr__(self, "_index", index)
        owners = [c.router for c in self.clusters for _ in range(c.neurons)]
        object.__setattr__(self, "_neuron_router", np.asarray(owners, dtype=np.int64))
        self._check_connected()

    def _check_connected(self):
        if self.n_routers <= 1:
            return
        adj = [[] for _ in range(self.n_routers)]
        for link in self.links:
            adj[link.src].append(link.dst)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != self.n_routers:
            missing = sorted(set(range(self.n_routers)) - seen)
            raise ValueError(f"topology is not connected; unreachable from router 0: {missing[:5]}")

    # -- lookup -------------------------------------------------------------

    def link_index(self, src: int, dst: int) -> int:
        try:
            return self._index[(src, dst)]
        except KeyError:
            raise KeyError(f"no link {src}->{dst}") from None

    def has_link(self, src: int, dst: int) -> bool:
        return (src, dst) in self._index

    def link(self, src: int, dst: int) -> Link:
        return self.links[self.link_index(src, dst)]

    def degree(self, router: int) -> int:
        """Number of outgoing network links (the local port is not counted)."""
        return sum(1 for link in self.links if link.src == router)

    def degrees(self) -> np.ndarray:
        out = np.zeros(self.n_routers, dtype=np.int64)
        for link in self.links:
            out[link.src] += 1
        return out

    @property
    def n_neurons(self) -> int:
        return int(self._neuron_router.size)

    @property
    def neuron_router(self) -> np.ndarray:
        return self._neuron_router

    def router_of(self, neuron: int) -> int:
        if not 0 <= neuron < self.n_neurons:
            raise IndexError(f"neuron {neuron} out of range 0..{self.n_neurons - 1}")
        return int(self._neuron_router[neuron])

    def neurons_at(self, router: int) -> range:
        start = 0
        for c in self.clusters:
            if c.router == router:
                return range(start, start + c.neurons)
            start += c.neurons
        return range(0)

    def coord(self, router: int) -> Tuple[int, int]:
        if self.kind not in GRID_KINDS:
            raise ValueError(f"{self.kind} topology has no grid coordinates")
        return router % self.width, router // self.width

    def router_at(self, x: int, y: int) -> int:
        return y * self.width + x

    def children(self, router: int) -> List[int]:
        return [i for i, p in enumerate(self.parent) if p == router and i != router]

    def level(self, router: int) -> int:
        lvl = 0
        while self.parent[router] != router:
            router = self.parent[router]
            lvl += 1
        return lvl

    @property
    def leaves(self) -> List[int]:
        if self.kind not in TREE_KINDS:
            raise ValueError("only trees have leaves")
        return [i for i in range(self.n_routers) if not self.children(i)]

    def side(self, router: int) -> int:
        """Which half of the canonical median cut a router lies in.

        Grids split at column ``width // 2``. Trees split the root's children
        into a first ``ceil(fanout / 2)`` and the rest; the root returns ``-1``.
        """
        if self.kind in GRID_KINDS:
            x, _ = self.coord(router)
            return 0 if x < self.width // 2 else 1
        if router == 0:
            return -1
        while self.parent[router] != 0:
            router = self.parent[router]
        first = self.children(0)
        return 0 if first.index(router) < math.ceil(len(first) / 2) else 1


# -- builders -----------------------------------------------------------------


def _timing(link_params) -> LinkTiming:
    if link_params is None:
        return LinkTiming()
    if isinstance(link_params, LinkTiming):
        return link_params
    return LinkTiming(*link_params)


def _make_links(pairs: Iterable[Tuple[int, int]], link_params, overrides) -> Tuple[Link, ...]:
    base = _timing(link_params)
    overrides = overrides or {}
    out = []
    for a, b in pairs:
        t = _timing(overrides.get((a, b), base))
        out.append(Link(a, b, t.service_ticks, t.pipeline_ticks))
    return tuple(out)


def _clusters(routers: Sequence[int], neurons_per_cluster: int, external: Optional[int]) -> Tuple[Cluster, ...]:
    if neurons_per_cluster < 0:
        raise ValueError("neurons_per_cluster must be >= 0")
    ext = neurons_per_cluster if external is None else external
    return tuple(Cluster(r, neurons_per_cluster, ext) for r in routers)


def build_mesh(
    width: int,
    height: int,
    link_params=None,
    neurons_per_cluster: int = 1,
    external: Optional[int] = None,
    overrides: Optional[Mapping[Tuple[int, int], LinkTiming]] = None,
) -> Topology:
    """4-neighbour grid with a bidirectional link pair on every edge."""
    if width < 1 or height < 1:
        raise ValueError(f"mesh dimensions must be >= 1, got {width}x{height}")
    if width * height > 1 << 22:
        raise ValueError(f"mesh {width}x{height} is too large")
    pairs = []
    for y in range(height):
        for x in range(width):
            r = y * width + x
            if x + 1 < width:
                pairs += [(r, r + 1), (r + 1, r)]
            if y + 1 < height:
                pairs += [(r, r + width), (r + width, r)]
    n = width * height
    return Topology(
        kind="mesh",
        n_routers=n,
        links=_make_links(sorted(pairs), link_params, overrides),
        clusters=_clusters(range(n), neurons_per_cluster, external),
        width=width,
        height=height,
    )


def build_torus(
    width: int,
    height: int,
    diagonals: bool = False,
    link_params=None,
    neurons_per_cluster: int = 1,
    external: Optional[int] = None,
    overrides: Optional[Mapping[Tuple[int, int], LinkTiming]] = None,
) -> Topology:
    """Wraparound grid; ``diagonals`` adds the (+1,+1)/(-1,-1) neighbours for degree 6."""
    if width < 3 or height < 3:
        raise ValueError(f"torus needs both dimensions >= 3, got {width}x{height}")
    if width * height > 1 << 22:
        raise ValueError(f"torus {width}x{height} is too large")
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if diagonals:
        steps += [(1, 1), (-1, -1)]
    pairs = set()
    for y in range(height):
        for x in range(width):
            for dx, dy in steps:
                pairs.add((y * width + x, ((y + dy) % height) * width + (x + dx) % width))
    n = width * height
    return Topology(
        kind="torus",
        n_routers=n,
        links=_make_links(sorted(pairs), link_params, overrides),
        clusters=_clusters(range(n), neurons_per_cluster, external),
        width=width,
        height=height,
        diagonals=diagonals,
    )


def build_tree(
    fanout: int,
    leaves: int,
    link_params=None,
    neurons_per_cluster: int = 1,
    external: Optional[int] = None,
    overrides: Optional[Mapping[Tuple[int, int], LinkTiming]] = None,
    kind: str = "tree",
) -> Topology:
    """Balanced ``fanout``-ary tree; leaf routers host clusters.

    When ``leaves`` is not a power of ``fanout`` the bottom level is padded
    with unused leaves (no cluster attached) and ``padded`` is set.
    """
    if fanout < 2:
        raise ValueError(f"fanout must be >= 2, got {fanout}")
    if leaves < 1:
        raise ValueError(f"leaves must be >= 1, got {leaves}")
    if kind not in TREE_KINDS:
        raise ValueError(f"tree kind must be one of {TREE_KINDS}")
    depth = 0
    while fanout**depth < leaves:
        depth += 1
    n = sum(fanout**i for i in range(depth + 1))
    parent = [0] + [(i - 1) // fanout for i in range(1, n)]
    pairs = []
    for child in range(1, n):
        pairs += [(child, parent[child]), (parent[child], child)]
    first_leaf = n - fanout**depth
    leaf_ids = list(range(first_leaf, n))[:leaves]
    return Topology(
        kind=kind,
        n_routers=n,
        links=_make_links(sorted(pairs), link_params, overrides),
        clusters=_clusters(leaf_ids, neurons_per_cluster, external),
        fanout=fanout,
        depth=depth,
        parent=tuple(parent),
        padded=fanout**depth != leaves,
    )


def build_hierarchical(
    fanout: int,
    clusters: int,
    neurons_per_cluster: int,
    link_params=None,
    external: Optional[int] = None,
) -> Topology:
    """Tree of routers with a cluster layer of ``neurons_per_cluster`` at each leaf.

    A stand-in for generic hierarchical networks; identical to a tree apart from
    the kind tag.
    """
    return build_tree(
        fanout, clusters, link_params, neurons_per_cluster, external, kind="hierarchical"
    )


# -- analysis -------------------------------------------------------------------


def bisection_links(t: Topology) -> int:
    """One-directional link count across the canonical median cut."""
    if t.n_routers < 2:
        raise ValueError("bisection is undefined for a single-router topology")
    if t.kind in GRID_KINDS:
        if t.width < 2:
            raise ValueError("median cut needs width >= 2")
        return sum(1 for link in t.links if t.side(link.src) == 0 and t.side(link.dst) == 1)
    return sum(1 for link in t.links if link.dst == 0 and t.side(link.src) == 0)


def uniform_traffic(t: Topology) -> np.ndarray:
    """Router-level traffic matrix with unit weight on every ordered pair of
    distinct cluster routers."""
    m = np.zeros((t.n_routers, t.n_routers))
    hosts = [c.router for c in t.clusters if c.neurons > 0]
    for a in hosts:
        for b in hosts:
            if a != b:
                m[a, b] = 1.0
    return m


def mean_hops(t: Topology, traffic_matrix) -> float:
    """Traffic-weighted mean hop count under the default routing function."""
    from aernoc.routing import RoutingError, path_hops

    m = np.asarray(traffic_matrix, dtype=float)
    if m.shape != (t.n_routers, t.n_routers):
        raise ValueError(f"traffic matrix must be {t.n_routers}x{t.n_routers}, got {m.shape}")
    if (m < 0).any():
        raise ValueError("traffic matrix must be non-negative")
    if (m.sum(axis=1) > 0).sum() == 0:
        raise ValueError("traffic matrix has no traffic")
    total = 0.0
    for a, b in zip(*np.nonzero(m)):
        try:
            hops = path_hops(t, int(a), int(b))
        except RoutingError as exc:
            raise RoutingError(f"destination {b} unreachable from {a}: {exc}") from exc
        total += m[a, b] * hops
    return total / m.sum()


# -- serialization -------------------------------------------------------------


def dumps(t: Topology) -> str:
    """Plain-text export: header, scalar ``param`` lines, then ``link`` and
    ``cluster`` records, one per line."""
    lines = [SCHEMA_HEADER, f"kind {t.kind}", f"routers {t.n_routers}"]
    for key in ("width", "height", "fanout", "depth"):
        lines.append(f"param {key} {getattr(t, key)}")
    lines.append(f"param diagonals {int(t.diagonals)}")
    lines.append(f"param padded {int(t.padded)}")
    if t.parent:
        lines.append("parent " + " ".join(map(str, t.parent)))
    for link in t.links:
        lines.append(f"link {link.src} {link.dst} {link.service_ticks} {link.pipeline_ticks}")
    for c in t.clusters:
        lines.append(f"cluster {c.router} {c.neurons} {c.external}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Topology:
    kind = None
    n = None
    params = {}
    parent: Tuple[int, ...] = ()
    links = []
    clusters = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, *rest = line.split()
        try:
            if tag == "kind":
                (kind,) = rest
            elif tag == "routers":
                n = int(rest[0])
            elif tag == "param":
                params[rest[0]] = int(rest[1])
            elif tag == "parent":
                parent = tuple(int(v) for v in rest)
            elif tag == "link":
                src, dst, service, pipeline = map(int, rest)
                links.append(Link(src, dst, service, pipeline))
            elif tag == "cluster":
                router, neurons, external = map(int, rest)
                clusters.append(Cluster(router, neurons, external))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if kind is None or n is None:
        raise ValueError("topology text is missing 'kind' or 'routers'")
    return Topology(
        kind=kind,
        n_routers=n,
        links=tuple(links),
        clusters=tuple(clusters),
        width=params.get("width", 0),
        height=params.get("height", 0),
        diagonals=bool(params.get("diagonals", 0)),
        fanout=params.get("fanout", 0),
        depth=params.get("depth", 0),
        parent=parent,
        padded=bool(params.get("padded", 0)),
    )


def save(t: Topology, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(t))


def load(path) -> Topology:
    with open(path) as fh:
        return loads(fh.read())
