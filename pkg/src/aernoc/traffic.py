"""Spike workloads: Poisson firing, synchronized half-network bursts, trace replay.

Workloads are plain lists of :class:`SpikeEvent` sorted by generation tick,
with ``spike_id`` increasing in that order. Every generator is deterministic
for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from aernoc.routing import RoutingTable
from aernoc.topology import GRID_KINDS, Topology

WORKLOAD_KINDS = ("poisson", "burst", "replay")
PAIRINGS = ("permutation", "mirror", "shift")


@dataclass(frozen=True)
class SpikeEvent:
    spike_id: int
    source_neuron: int
    generation_tick: int
    destinations: Tuple[int, ...]

    def __post_init__(self):
        if self.generation_tick < 0:
            raise ValueError(f"spike {self.spike_id}: generation_tick must be >= 0")
        if not self.destinations:
            raise ValueError(f"spike {self.spike_id}: destination set is empty")


@dataclass(frozen=True)
class WorkloadSpec:
    """Workload parameters.

    ``alpha`` is the fraction of spikes whose destination lies across the
    median cut; ``None`` picks destinations uniformly among all other neurons.
    """

    kind: str = "poisson"
    rate_hz: float = 10.0
    duration_ticks: int = 1000
    tick_duration_s: float = 1e-3
    alpha: Optional[float] = None
    seed: int = 0
    burst_tick: int = 0
    pairing: str = "permutation"

    def __post_init__(self):
        if self.kind not in WORKLOAD_KINDS:
            raise ValueError(f"workload kind must be one of {WORKLOAD_KINDS}, got {self.kind!r}")
        if not self.tick_duration_s > 0:
            raise ValueError("tick_duration_s must be > 0")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be >= 0")
        if self.duration_ticks < 0:
            raise ValueError("duration_ticks must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"pairing must be one of {PAIRINGS}, got {self.pairing!r}")

    @property
    def spike_probability(self) -> float:
        """Per-neuron, per-tick firing probability."""
        return self.rate_hz * self.tick_duration_s


def _number(events: List[Tuple[int, int, Tuple[int, ...]]]) -> List[SpikeEvent]:
    events.sort(key=lambda e: (e[0], e[1]))
    return [SpikeEvent(i, src, tick, dsts) for i, (tick, src, dsts) in enumerate(events)]


def halves(t: Topology) -> Tuple[List[int], List[int]]:
    """Neuron ids on each side of the median cut."""
    sides = ([], [])
    for n, r in enumerate(t.neuron_router):
        s = t.side(int(r))
        if s >= 0:
            sides[s].append(n)
    return sides


def firing_ticks(spec: WorkloadSpec, n_neurons: int) -> Tuple[np.ndarray, np.ndarray]:
    """Firing ticks and source neurons, ordered by (tick, neuron).

    Inter-spike gaps are geometric, which is the exact law of a Bernoulli
    trial per tick with probability ``rate_hz * tick_duration_s``.
    """
    p = spec.spike_probability
    if p >= 1:
        raise ValueError(
            f"rate {spec.rate_hz} Hz x tick {spec.tick_duration_s} s = {p} >= 1 spike per tick"
        )
    empty = np.zeros(0, dtype=np.int64)
    if p == 0 or spec.duration_ticks == 0 or n_neurons == 0:
        return empty, empty
    rng = np.random.default_rng(spec.seed)
    chunk = max(16, int(spec.duration_ticks * p * 1.2) + 16)
    per_neuron = []
    for neuron in range(n_neurons):
        parts = []
        last = -1
        while True:
            ticks = last + np.cumsum(rng.geometric(p, size=chunk))
            inside = ticks[ticks < spec.duration_ticks]
            parts.append(inside)
            if inside.size < chunk:
                break
            last = int(ticks[-1])
        per_neuron.append(np.concatenate(parts))
    ticks = np.concatenate(per_neuron).astype(np.int64)
    srcs = np.repeat(np.arange(n_neurons, dtype=np.int64), [a.size for a in per_neuron])
    order = np.lexsort((srcs, ticks))
    return ticks[order], srcs[order]


def poisson_workload(
    spec: WorkloadSpec, population: Topology, table: Optional[RoutingTable] = None
) -> List[SpikeEvent]:
    """Bernoulli-per-tick approximation of independent Poisson firing at ``spec.rate_hz``.

    Destinations come from ``table`` when given, otherwise one seeded draw per
    spike: uniform over the other neurons, or locality-weighted when
    ``spec.alpha`` is set.
    """
    n = population.n_neurons
    ticks, srcs = firing_ticks(spec, n)
    if ticks.size == 0:
        return []
    # Destination draws use a stream independent of the firing times.
    rng = np.random.default_rng([spec.seed, 1])
    if table is not None:
        out = []
        for tk, s in zip(ticks.tolist(), srcs.tolist()):
            dsts = table.destinations(s)
            if dsts:
                out.append(SpikeEvent(len(out), s, tk, dsts))
        return out
    if spec.alpha is None:
        if n > 1:
            dsts = (srcs + 1 + rng.integers(n - 1, size=srcs.size)) % n
        else:
            dsts = srcs.copy()
    else:
        dsts = _locality_destinations(rng, srcs, population, spec.alpha)
    return [
        SpikeEvent(i, s, tk, (d,))
        for i, (tk, s, d) in enumerate(zip(ticks.tolist(), srcs.tolist(), dsts.tolist()))
    ]


def _locality_destinations(rng, srcs: np.ndarray, population: Topology, alpha: float) -> np.ndarray:
    """Cross the median cut with probability ``alpha``, else stay on the own side.

    Local picks avoid the source neuron when its side has anyone else.
    """
    low, high = (np.asarray(h, dtype=np.int64) for h in halves(population))
    side = np.zeros(population.n_neurons, dtype=np.int64)
    side[high] = 1
    cross = rng.random(srcs.size) < alpha
    out = np.empty_like(srcs)
    for i, (s, c) in enumerate(zip(srcs, cross)):
        own = side[s]
        pool = (low, high)[1 - own] if c else (low, high)[own]
        if not c and pool.size > 1:
            d = pool[rng.integers(pool.size - 1)]
            out[i] = d if d != s else pool[-1]
        elif pool.size:
            out[i] = pool[rng.integers(pool.size)]
        else:
            out[i] = s
    return out


@dataclass(frozen=True)
class Burst:
    events: List[SpikeEvent]
    cross: int
    excluded: Tuple[int, ...]

    @property
    def flagged(self) -> bool:
        return bool(self.excluded)


def _twin(t: Topology, neuron: int, shift: bool) -> int:
    """Same-slot neuron on the mirrored router, or on the router half the network away."""
    router = t.router_of(neuron)
    local = neuron - t.neurons_at(router).start
    if t.kind in GRID_KINDS:
        x, y = t.coord(router)
        twin = t.router_at(x + t.width // 2 if shift else t.width - 1 - x, y)
    else:
        hosts = [c.router for c in t.clusters if c.neurons > 0]
        i = hosts.index(router)
        twin = hosts[i + len(hosts) // 2 if shift else len(hosts) - 1 - i]
    return t.neurons_at(twin)[local]


def burst_workload(
    population: Topology,
    burst_tick: int = 0,
    alpha: float = 1.0,
    seed: int = 0,
    pairing: str = "permutation",
) -> Burst:
    """One synchronized spike from every neuron in the low half of the median cut.

    ``round(alpha * pairs)`` of them target a distinct neuron across the cut
    (seeded permutation; the mirror-image neuron with ``pairing="mirror"``; or the
    neuron half the network away with ``pairing="shift"``, which gives every
    crossing spike the same path length);
    the rest target another neuron on their own side. Neurons that cannot be
    paired because the halves differ in size are excluded and reported.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    low, high = halves(population)
    pairs = min(len(low), len(high))
    excluded = tuple(low[pairs:]) + tuple(high[pairs:])
    sources = low[:pairs]
    rng = np.random.default_rng(seed)
    if pairing in ("mirror", "shift"):
        if len(low) != len(high):
            raise ValueError(f"{pairing} pairing needs equal halves, got {len(low)} and {len(high)}")
        targets = [_twin(population, s, pairing == "shift") for s in sources]
    elif pairing == "permutation":
        targets = [high[i] for i in rng.permutation(pairs)]
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    n_cross = int(round(alpha * pairs))
    crossing = set(int(i) for i in rng.permutation(pairs)[:n_cross])
    local_targets = rng.permutation(pairs) if pairs > 1 else np.zeros(pairs, dtype=int)
    events = []
    for i, src in enumerate(sources):
        if i in crossing:
            dst = targets[i]
        else:
            j = int(local_targets[i])
            if pairs > 1 and sources[j] == src:
                j = int(local_targets[(i + 1) % pairs])
            dst = sources[j]
        events.append((burst_tick, src, (dst,)))
    return Burst(_number(events), n_cross, excluded)


# -- traces --------------------------------------------------------------------


def parse_trace(
    lines: Sequence[str],
    n_neurons: Optional[int] = None,
    table: Optional[RoutingTable] = None,
    name: str = "<trace>",
) -> List[SpikeEvent]:
    """Parse ``neuron_id,tick[,dst1;dst2;...]`` lines; ``#`` lines are comments."""
    events = []
    last_tick = -1
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3):
            raise ValueError(f"{name}:{lineno}: expected 'neuron_id,tick[,dsts]' in {line!r}")
        try:
            src, tick = int(parts[0]), int(parts[1])
            dsts = tuple(int(d) for d in parts[2].split(";") if d.strip()) if len(parts) == 3 else None
        except ValueError:
            raise ValueError(f"{name}:{lineno}: non-integer field in {line!r}") from None
        if tick < 0:
            raise ValueError(f"{name}:{lineno}: negative tick in {line!r}")
        if tick < last_tick:
            raise ValueError(f"{name}:{lineno}: tick {tick} goes backwards (previous {last_tick})")
        last_tick = tick
        for nid in (src,) + (dsts or ()):
            if n_neurons is not None and not 0 <= nid < n_neurons:
                raise ValueError(f"{name}:{lineno}: neuron id {nid} out of range in {line!r}")
        if not dsts:
            if table is None:
                raise ValueError(f"{name}:{lineno}: no destinations and no routing table")
            dsts = table.destinations(src)
            if not dsts:
                raise ValueError(f"{name}:{lineno}: neuron {src} has no fanout in the routing table")
        events.append(SpikeEvent(len(events), src, tick, dsts))
    return events


def replay_workload(
    trace_file, n_neurons: Optional[int] = None, table: Optional[RoutingTable] = None
) -> List[SpikeEvent]:
    with open(trace_file) as fh:
        return parse_trace(fh.readlines(), n_neurons, table, name=str(trace_file))


def format_trace(events: Sequence[SpikeEvent]) -> str:
    return "".join(
        f"{e.source_neuron},{e.generation_tick},{';'.join(map(str, e.destinations))}\n"
        for e in events
    )


def build_workload(
    spec: WorkloadSpec,
    population: Topology,
    table: Optional[RoutingTable] = None,
    trace_file=None,
) -> List[SpikeEvent]:
    if spec.kind == "poisson":
        return poisson_workload(spec, population, table)
    if spec.kind == "burst":
        alpha = 1.0 if spec.alpha is None else spec.alpha
        return burst_workload(population, spec.burst_tick, alpha, spec.seed, spec.pairing).events
    if trace_file is None:
        raise ValueError("replay workload needs a trace file")
    return replay_workload(trace_file, population.n_neurons, table)
