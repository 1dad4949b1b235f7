"""Deterministic discrete-event simulation of AER spike packets.

Router model: output-queued, single-cycle crossbar, contention only at links.
Each hop is "pipeline then serve": a packet reaching router ``u`` becomes
ready for link ``u->v`` after the link's pipeline latency, waits in that
link's FIFO, occupies the link for ``service_ticks`` and arrives at ``v``
when service ends. An uncontended hop therefore costs
``pipeline_ticks + service_ticks``. Queues are unbounded; nothing is dropped.

Events are ordered by ``(tick, spike_id, hop_index, sequence)``.
"""
from __future__ import annotations

import csv
import heapq
import io
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from aernoc import analytics
from aernoc.routing import Route, default_routing
from aernoc.topology import Topology, bisection_links
from aernoc.traffic import SpikeEvent, WorkloadSpec, burst_workload, poisson_workload

RoutingFn = Callable[[Topology, int, Sequence[int]], List[Route]]

DELIVERY_COLUMNS = ("spike_id", "src", "dst", "t_gen", "t_deliver", "hops")
LINK_COLUMNS = ("link", "served", "utilization", "max_queue")
SUMMARY_COLUMNS = (
    "injected",
    "delivered",
    "expected",
    "mean_latency",
    "min_latency",
    "max_latency",
    "p99_latency",
    "jitter",
    "link_traversals",
    "duration_ticks",
    "max_queue",
)
SWEEP_COLUMNS = ("rate", "mean_latency", "p99_latency", "zero_load_latency", "delivered", "saturated")


class SimulationTimeout(RuntimeError):
    """Packets were still in flight at ``max_ticks``; ``report`` holds what was delivered."""

    def __init__(self, message: str, report: "SimReport"):
        super().__init__(message)
        self.report = report


class EventQueueOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class Limits:
    max_ticks: Optional[int] = None
    max_events: int = 10_000_000


@dataclass(frozen=True)
class Delivery:
    spike_id: int
    src: int
    dst: int
    t_gen: int
    t_deliver: int
    hops: int
    base_latency: int

    @property
    def latency(self) -> int:
        return self.t_deliver - self.t_gen

    @property
    def queueing(self) -> int:
        """Latency beyond the uncontended path latency."""
        return self.latency - self.base_latency


@dataclass(frozen=True)
class HopRecord:
    """One link service: when a packet copy joined the link FIFO and when it started service.

    ``copy`` is the event sequence number, unique per queued copy.
    """

    link: int
    spike_id: int
    copy: int
    enqueue: int
    dequeue: int


@dataclass
class SimReport:
    deliveries: List[Delivery]
    links: List[Tuple[str, int, int]]  # (name, served, max_queue)
    service_ticks: List[int]
    injected: int
    expected: int
    duration_ticks: int
    n_routers: int
    n_clusters: int
    hop_log: List[HopRecord] = field(default_factory=list)
    complete: bool = True

    @property
    def delivered(self) -> int:
        return len(self.deliveries)

    @property
    def latencies(self) -> np.ndarray:
        return np.array([d.latency for d in self.deliveries], dtype=np.int64)

    @property
    def link_traversals(self) -> int:
        return sum(served for _, served, _ in self.links)

    @property
    def hop_total(self) -> int:
        """Router-to-router traversals, counting each replica separately."""
        return self.link_traversals

    def utilization(self) -> List[float]:
        if self.duration_ticks <= 0:
            return [0.0] * len(self.links)
        return [served * o / self.duration_ticks for (_, served, _), o in zip(self.links, self.service_ticks)]

    @property
    def max_queue(self) -> int:
        return max((q for _, _, q in self.links), default=0)

    def cohort_spread(self) -> int:
        """Largest latency spread among spikes generated on the same tick."""
        groups: Dict[int, List[int]] = {}
        for d in self.deliveries:
            groups.setdefault(d.t_gen, []).append(d.latency)
        return max((max(v) - min(v) for v in groups.values()), default=0)

    def summary(self) -> Dict[str, float]:
        lat = self.latencies
        has = lat.size > 0
        return {
            "injected": self.injected,
            "delivered": self.delivered,
            "expected": self.expected,
            "mean_latency": float(lat.mean()) if has else 0.0,
            "min_latency": int(lat.min()) if has else 0,
            "max_latency": int(lat.max()) if has else 0,
            "p99_latency": float(np.percentile(lat, 99)) if has else 0.0,
            "jitter": self.cohort_spread(),
            "link_traversals": self.link_traversals,
            "duration_ticks": self.duration_ticks,
            "max_queue": self.max_queue,
        }

    # -- CSV ------------------------------------------------------------------

    def deliveries_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DELIVERY_COLUMNS)
        for d in self.deliveries:
            w.writerow((d.spike_id, d.src, d.dst, d.t_gen, d.t_deliver, d.hops))
        return buf.getvalue()

    def links_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LINK_COLUMNS)
        for (name, served, q), u in zip(self.links, self.utilization()):
            w.writerow((name, served, repr(u), q))
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        s = self.summary()
        w.writerow([repr(s[k]) if isinstance(s[k], float) else s[k] for k in SUMMARY_COLUMNS])
        return buf.getvalue()


def run(
    t: Topology,
    workload: Sequence[SpikeEvent],
    routing_fn: Optional[RoutingFn] = None,
    limits: Limits = Limits(),
    duration_ticks: Optional[int] = None,
    record_hops: bool = True,
) -> SimReport:
    """Simulate ``workload`` on ``t`` until every packet is delivered.

    ``duration_ticks`` sets the utilization denominator; it defaults to the
    last generation or delivery tick. Raises :class:`SimulationTimeout` if
    packets remain in flight after ``limits.max_ticks``.
    """
    routing_fn = routing_fn or default_routing
    links = t.links
    free_at = [0] * len(links)
    served = [0] * len(links)
    max_queue = [0] * len(links)
    waiting: List[deque] = [deque() for _ in links]
    deliveries: List[Delivery] = []
    hop_log: List[HopRecord] = []
    heap: list = []
    seq = 0
    expected = 0
    last_tick = 0

    # Each in-flight copy: (spike event, children map, destination neurons by router, hops, base)
    for ev in workload:
        src_router = t.router_of(ev.source_neuron)
        by_router: Dict[int, List[int]] = {}
        for d in ev.destinations:
            by_router.setdefault(t.router_of(d), []).append(d)
        expected += len(ev.destinations)
        last_tick = max(last_tick, ev.generation_tick)
        for d in by_router.pop(src_router, ()):
            deliveries.append(Delivery(ev.spike_id, ev.source_neuron, d, ev.generation_tick, ev.generation_tick, 0, 0))
        if not by_router:
            continue
        for route in routing_fn(t, src_router, sorted(by_router)):
            children: Dict[int, List[int]] = {}
            for u, v in route.links:
                children.setdefault(u, []).append(t.link_index(u, v))
            targets = {r: by_router[r] for r in route.destinations if r in by_router}
            copy = (ev, children, targets)
            for li in children.get(src_router, ()):
                ready = ev.generation_tick + links[li].pipeline_ticks
                heapq.heappush(heap, (ready, ev.spike_id, 0, seq, li, 0, copy))
                seq += 1
        if len(heap) > limits.max_events:
            raise EventQueueOverflow(f"event queue exceeded {limits.max_events} entries")

    timed_out = False
    while heap:
        ready, sid, hop, ev_seq, li, base, copy = heapq.heappop(heap)
        if limits.max_ticks is not None and ready > limits.max_ticks:
            timed_out = True
            break
        link = links[li]
        start = max(ready, free_at[li])
        free_at[li] = start + link.service_ticks
        served[li] += 1
        q = waiting[li]
        while q and q[0] <= ready:
            q.popleft()
        depth = len(q) + (1 if start > ready else 0)
        if depth > max_queue[li]:
            max_queue[li] = depth
        q.append(start)
        if record_hops:
            hop_log.append(HopRecord(li, sid, ev_seq, ready, start))
        arrive = start + link.service_ticks
        base += link.latency_ticks
        ev, children, targets = copy
        router = link.dst
        for d in targets.get(router, ()):
            deliveries.append(Delivery(sid, ev.source_neuron, d, ev.generation_tick, arrive, hop + 1, base))
            last_tick = max(last_tick, arrive)
        for nli in children.get(router, ()):
            heapq.heappush(heap, (arrive + links[nli].pipeline_ticks, sid, hop + 1, seq, nli, base, copy))
            seq += 1
        if len(heap) > limits.max_events:
            raise EventQueueOverflow(f"event queue exceeded {limits.max_events} entries")

    deliveries.sort(key=lambda d: (d.spike_id, d.dst))
    duration = max(last_tick, duration_ticks or 0)
    report = SimReport(
        deliveries=deliveries,
        links=[(str(l), s, m) for l, s, m in zip(links, served, max_queue)],
        service_ticks=[l.service_ticks for l in links],
        injected=len(workload),
        expected=expected,
        duration_ticks=duration,
        n_routers=t.n_routers,
        n_clusters=sum(1 for c in t.clusters if c.neurons > 0),
        hop_log=hop_log,
        complete=not timed_out,
    )
    if timed_out:
        raise SimulationTimeout(
            f"{expected - len(deliveries)} deliveries still pending at tick {limits.max_ticks}", report
        )
    return report


# -- burst jitter ------------------------------------------------------------


@dataclass(frozen=True)
class BurstJitter:
    min_latency: int
    max_latency: int
    spread: int
    queueing_spread: int
    bound: float
    cross_spikes: int
    bisection_links: int
    service_ticks: int

    @property
    def within_bound(self) -> bool:
        return self.queueing_spread <= self.bound


def burst_jitter(
    t: Topology,
    workload: Optional[Sequence[SpikeEvent]] = None,
    routing_fn: Optional[RoutingFn] = None,
    limits: Limits = Limits(),
) -> BurstJitter:
    """Latency spread of a synchronized burst, next to the analytic arrival-jitter bound.

    ``spread`` is max minus min delivery latency. ``queueing_spread`` removes
    each delivery's uncontended path latency first, isolating the part the
    bound describes (the bound assumes one common base latency). The bound is
    evaluated with the topology's measured ``C`` and the bisection links'
    service time ``o``, in ticks.
    """
    if workload is None:
        workload = burst_workload(t).events
    report = run(t, workload, routing_fn, limits)
    lat = report.latencies
    if lat.size == 0:
        raise ValueError("burst produced no deliveries")
    q = np.array([d.queueing for d in report.deliveries])
    c = bisection_links(t)
    crossing = [l for l in t.links if _crosses(t, l)]
    o = max(l.service_ticks for l in crossing)
    cross = sum(
        1
        for ev in workload
        for d in ev.destinations
        if _side(t, t.router_of(ev.source_neuron)) != _side(t, t.router_of(d))
    )
    bound = _jitter_bound_ticks(cross, c, o)
    return BurstJitter(
        int(lat.min()), int(lat.max()), int(lat.max() - lat.min()), int(q.max() - q.min()), bound, cross, c, o
    )


def _side(t: Topology, router: int) -> int:
    return t.side(router)


def _crosses(t: Topology, link) -> bool:
    if t.kind in ("mesh", "torus"):
        return t.side(link.src) == 0 and t.side(link.dst) == 1
    return link.dst == 0 and t.side(link.src) == 0


def _jitter_bound_ticks(cross_spikes: int, c: int, o: int) -> float:
    """Arrival-jitter bound for ``cross_spikes`` simultaneous spikes over ``c`` links of occupancy ``o``.

    Encodes the burst as ``N*R/2 = cross_spikes`` (``R = 1`` spike per neuron).
    """
    params = analytics.SystemParams(n_neurons=2 * cross_spikes, firing_rate_hz=1.0)
    bp = analytics.BisectionParams(bisection_links=c, link_occupancy_s=o)
    return analytics.arrival_jitter_bound(params, bp).value


# -- load sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    rate: float
    mean_latency: float
    p99_latency: float
    zero_load_latency: float
    delivered: int
    saturated: bool

    def as_tuple(self):
        return (repr(self.rate), repr(self.mean_latency), repr(self.p99_latency),
                repr(self.zero_load_latency), self.delivered, int(self.saturated))


def zero_load_latency(t: Topology) -> float:
    """Mean uncontended latency over uniform traffic between distinct cluster routers."""
    hosts = [c.router for c in t.clusters if c.neurons > 0]
    total, n = 0.0, 0
    for a in hosts:
        for b in hosts:
            if a == b:
                continue
            (route,) = default_routing(t, a, [b])
            total += sum(t.link(u, v).latency_ticks for u, v in route.links)
            n += 1
    return total / n if n else 0.0


def peak_link_load(t: Topology, rate: float) -> float:
    """Highest expected link occupancy fraction for uniform traffic at ``rate`` spikes/node/cycle."""
    hosts = [c.router for c in t.clusters if c.neurons > 0]
    if len(hosts) < 2:
        return 0.0
    load = np.zeros(len(t.links))
    per_pair = rate / (len(hosts) - 1)
    for a in hosts:
        for b in hosts:
            if a != b:
                (route,) = default_routing(t, a, [b])
                for u, v in route.links:
                    li = t.link_index(u, v)
                    load[li] += per_pair * t.links[li].service_ticks
    return float(load.max())


def _sweep_point(args) -> SweepRow:
    t, rate, duration, seed, routing_fn, drain_factor, zero = args
    saturated = peak_link_load(t, rate) >= 1.0
    if rate == 0:
        return SweepRow(rate, zero, zero, zero, 0, saturated)
    per_neuron = rate / max(c.neurons for c in t.clusters)
    spec = WorkloadSpec(kind="poisson", rate_hz=per_neuron, duration_ticks=duration, tick_duration_s=1.0, seed=seed)
    workload = poisson_workload(spec, t)
    try:
        report = run(t, workload, routing_fn, Limits(max_ticks=int(duration * drain_factor)), duration, record_hops=False)
    except SimulationTimeout as exc:
        report, saturated = exc.report, True
    lat = report.latencies
    if lat.size == 0:
        return SweepRow(rate, math.nan, math.nan, zero, 0, saturated)
    return SweepRow(rate, float(lat.mean()), float(np.percentile(lat, 99)), zero, int(lat.size), saturated)


def load_sweep(
    t: Topology,
    rates: Sequence[float],
    duration: int,
    routing_fn: Optional[RoutingFn] = None,
    seed: int = 0,
    drain_factor: float = 2.0,
    n_jobs: int = 1,
) -> List[SweepRow]:
    """Latency versus injection rate (spikes per node per cycle, one tick per cycle).

    Every rate uses the same seed and uniform-random destinations. A point is
    flagged saturated when its expected peak link load reaches 1 or packets are
    still in flight after ``drain_factor * duration`` ticks.
    """
    rates = list(rates)
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise ValueError("rates must be sorted ascending")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be >= 0")
    zero = zero_load_latency(t)
    jobs = [(t, r, duration, seed, routing_fn, drain_factor, zero) for r in rates]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    return sorted(rows, key=lambda r: r.rate)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow(row.as_tuple())
    return buf.getvalue()
