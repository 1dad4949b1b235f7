"""Closed-form communication model for spiking interconnects.

Routing-memory storage, bisection bandwidth under spike-timing constraints,
per-link bandwidth and effective memory density. Everything here is pure.

Formulas that carry a printed form and a dimensionally re-derived form are
exposed through a ``mode`` argument; see :data:`BISECTION_MODES` and
:data:`LINK_MODES`. Values that would go negative are clamped to the
physically meaningful floor and returned as a :class:`Clamped` carrying a
``degenerate`` flag instead of raising, so sweeps can cross corner cases.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional

BISECTION_MODES = ("paper_literal", "rederived")
LINK_MODES = ("paper_literal_constrained", "rederived_constrained", "conventional")

GIB = 2**30
KIB = 2**10


class Clamped(NamedTuple):
    """A clamped closed-form result.

    ``raw`` is the unclamped expression, ``value`` the clamped one and
    ``degenerate`` is set when the clamp was active.
    """

    value: float
    raw: float
    degenerate: bool

    def __float__(self) -> float:
        return float(self.value)


def _clamp(raw: float, floor: float) -> Clamped:
    if raw < floor:
        return Clamped(float(floor), float(raw), True)
    return Clamped(float(raw), float(raw), False)


@dataclass(frozen=True)
class SystemParams:
    """Whole-system scalars: neurons, fanout, synapse types, rate, precision.

    ``temporal_precision_s`` defaults to ``1 / (1000 * firing_rate_hz)``.
    """

    n_neurons: float
    synapses_per_neuron: float = 1
    synapse_types: float = 1
    firing_rate_hz: float = 10.0
    temporal_precision_s: Optional[float] = None

    def __post_init__(self):
        if self.n_neurons < 0:
            raise ValueError(f"n_neurons must be >= 0, got {self.n_neurons}")
        if self.synapses_per_neuron < 1:
            raise ValueError(f"synapses_per_neuron must be >= 1, got {self.synapses_per_neuron}")
        if self.synapse_types < 1:
            raise ValueError(f"synapse_types must be >= 1, got {self.synapse_types}")
        if not self.firing_rate_hz > 0:
            raise ValueError(f"firing_rate_hz must be > 0, got {self.firing_rate_hz}")
        if self.temporal_precision_s is None:
            object.__setattr__(self, "temporal_precision_s", 1.0 / (1e3 * self.firing_rate_hz))
        elif not self.temporal_precision_s > 0:
            raise ValueError(f"temporal_precision_s must be > 0, got {self.temporal_precision_s}")

    @property
    def epsilon(self) -> float:
        return float(self.temporal_precision_s)

    def relaxed(self, factor: float) -> "SystemParams":
        """Copy with the temporal precision loosened by ``factor``."""
        return SystemParams(
            self.n_neurons,
            self.synapses_per_neuron,
            self.synapse_types,
            self.firing_rate_hz,
            self.epsilon * factor,
        )


@dataclass(frozen=True)
class BisectionParams:
    """Bisection bandwidth ``B``, crossing links ``C``, base latency ``l``,
    link occupancy ``o`` and locality ``alpha``.

    Give any two of ``B``, ``C``, ``o``; the third follows from ``C = B * o``.
    When all three are given they must agree.
    """

    bisection_bw_spikes_s: Optional[float] = None
    bisection_links: Optional[float] = None
    base_latency_s: float = 0.0
    link_occupancy_s: Optional[float] = None
    locality_fraction: float = 1.0

    def __post_init__(self):
        b, c, o = self.bisection_bw_spikes_s, self.bisection_links, self.link_occupancy_s
        if sum(v is None for v in (b, c, o)) > 1:
            raise ValueError("need at least two of bisection_bw_spikes_s, bisection_links, link_occupancy_s")
        if b is None:
            b = c / o
        elif c is None:
            c = b * o
        elif o is None:
            o = c / b if b else math.inf
        elif not math.isclose(b, c / o, rel_tol=1e-9):
            raise ValueError(f"inconsistent bisection: B={b} but C/o={c / o}")
        if c < 0 or o < 0 or b < 0 or (o == 0 and self.link_occupancy_s is not None):
            raise ValueError(f"invalid bisection parameters B={b}, C={c}, o={o}")
        if not 0.0 <= self.locality_fraction <= 1.0:
            raise ValueError(f"locality_fraction must be in [0, 1], got {self.locality_fraction}")
        if self.base_latency_s < 0:
            raise ValueError("base_latency_s must be >= 0")
        object.__setattr__(self, "bisection_bw_spikes_s", float(b))
        object.__setattr__(self, "bisection_links", float(c))
        object.__setattr__(self, "link_occupancy_s", float(o))

    @property
    def B(self) -> float:
        return self.bisection_bw_spikes_s

    @property
    def C(self) -> float:
        return self.bisection_links

    @property
    def o(self) -> float:
        return self.link_occupancy_s

    @property
    def l(self) -> float:  # noqa: E743
        return self.base_latency_s


@dataclass(frozen=True)
class LinkParams:
    """Externally-communicating neurons per cluster, router degree, mean hops."""

    cluster_external_neurons: float
    router_degree: float
    mean_hops: float

    def __post_init__(self):
        if self.cluster_external_neurons < 0:
            raise ValueError("cluster_external_neurons must be >= 0")
        if self.router_degree <= 0:
            raise ValueError(f"router_degree must be > 0, got {self.router_degree}")
        if self.mean_hops < 0:
            raise ValueError("mean_hops must be >= 0")


@dataclass(frozen=True)
class MemoryTechParams:
    """Bit-cell area and an array-efficiency step curve keyed by array size in bits.

    The efficiency of an array of ``n`` bits is the value at the largest key
    ``<= n``; arrays smaller than every key take the smallest key's value.
    """

    bit_area: float = 1.0
    efficiency_curve: Mapping[int, float] = field(default_factory=lambda: {1: 1.0})

    def __post_init__(self):
        if self.bit_area <= 0:
            raise ValueError("bit_area must be > 0")
        if not self.efficiency_curve:
            raise ValueError("efficiency_curve must not be empty")
        items = sorted(self.efficiency_curve.items())
        prev = 0.0
        for size, eff in items:
            if not 0.0 < eff <= 1.0:
                raise ValueError(f"efficiency at {size} bits must be in (0, 1], got {eff}")
            if eff < prev:
                raise ValueError("efficiency_curve must be non-decreasing in array size")
            prev = eff
        object.__setattr__(self, "efficiency_curve", dict(items))

    def efficiency(self, bits: float) -> float:
        sizes = list(self.efficiency_curve)
        i = bisect.bisect_right(sizes, bits) - 1
        return self.efficiency_curve[sizes[max(i, 0)]]

    def effective_bit_area(self, bits: float) -> float:
        return self.bit_area / self.efficiency(bits)


# Illustrative SRAM curve: 50% efficiency for tiny arrays rising to 80% at 1 Mib.
SRAM_ILLUSTRATIVE = MemoryTechParams(
    bit_area=1.0,
    efficiency_curve={1: 0.5, 2**14: 0.6, 2**17: 0.7, 2**20: 0.8},
)


# -- routing memory -----------------------------------------------------------


def routing_memory_bits(params: SystemParams, ceil: bool = False) -> float:
    """Storage for fully flexible connectivity: ``N*S*log2(N*S)`` bits.

    With ``ceil=True`` each address is rounded up to whole bits.
    """
    ns = params.n_neurons * params.synapses_per_neuron
    if ns < 1:
        raise ValueError(f"N*S must be >= 1, got {ns}")
    width = math.log2(ns)
    if ceil:
        width = math.ceil(width)
    return ns * width


def routing_memory_bits_typed(params: SystemParams, ceil: bool = False) -> float:
    """Storage when synapses are grouped by type: ``N*S*log2(k*N)`` bits."""
    kn = params.synapse_types * params.n_neurons
    if kn < 1:
        raise ValueError(f"k*N must be >= 1, got {kn}")
    width = math.log2(kn)
    if ceil:
        width = math.ceil(width)
    return params.n_neurons * params.synapses_per_neuron * width


def reduction_factor(params: SystemParams) -> float:
    typed = routing_memory_bits_typed(params)
    if typed == 0:
        raise ZeroDivisionError("typed storage is zero (k*N == 1); reduction factor undefined")
    return routing_memory_bits(params) / typed


def bits_to_gib(bits: float) -> float:
    return bits / 8 / GIB


def bits_per_neuron_kib(bits: float, n_neurons: float) -> float:
    return bits / 8 / n_neurons / KIB


# -- bisection ---------------------------------------------------------------


def conventional_min_bisection(params: SystemParams, alpha: float = 1.0) -> float:
    """Bisection bandwidth for a synchronized half-network burst: ``alpha*N*R/2``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * params.n_neurons * params.firing_rate_hz / 2


def burst_spike_latency(index: int, bp: BisectionParams) -> float:
    """Latency of the ``index``-th spike queued on one link: ``l + (index-1)*o``."""
    if index < 1:
        raise ValueError(f"index must be >= 1, got {index}")
    return bp.l + (index - 1) * bp.o


def last_packet_latency(params: SystemParams, bp: BisectionParams) -> Clamped:
    """Latency of the last group of a burst spread over ``C`` links.

    ``l + (alpha*N*R/(2C) - 1)*o``, never below ``l``.
    """
    if bp.C <= 0:
        raise ValueError("bisection_links must be > 0")
    if bp.o <= 0:
        raise ValueError("link_occupancy_s must be > 0")
    burst = conventional_min_bisection(params, bp.locality_fraction)
    return _clamp(bp.l + (burst / bp.C - 1) * bp.o, bp.l)


def arrival_jitter_bound(params: SystemParams, bp: BisectionParams) -> Clamped:
    """Upper end of the spike-arrival uncertainty ``alpha*N*R/(2B) - C/B``, floored at 0."""
    if bp.B <= 0:
        raise ValueError("bisection bandwidth must be > 0")
    if math.isinf(bp.B):
        return Clamped(0.0, 0.0, False)
    burst = conventional_min_bisection(params, bp.locality_fraction)
    return _clamp(burst / bp.B - bp.C / bp.B, 0.0)


def latency_constrained_min_bisection(
    params: SystemParams,
    bisection_links: float,
    mode: str = "paper_literal",
    alpha: float = 1.0,
) -> Clamped:
    """Bisection bandwidth needed to keep arrival jitter within the temporal precision.

    ``paper_literal`` evaluates ``(alpha*N*R**2/2 - C) / (eps*R)``, the printed
    ``1e3*(N*R**2/2 - C)`` at the default precision. ``rederived`` solves the
    jitter bound for ``B``: ``(alpha*N*R/2 - C) / eps``. Both are floored at the
    unconstrained requirement.
    """
    if bisection_links < 0:
        raise ValueError("bisection_links must be >= 0")
    r, eps = params.firing_rate_hz, params.epsilon
    n = alpha * params.n_neurons
    if mode == "paper_literal":
        raw = (n * r * r / 2 - bisection_links) / (eps * r)
    elif mode == "rederived":
        raw = (n * r / 2 - bisection_links) / eps
    else:
        raise ValueError(f"mode must be one of {BISECTION_MODES}, got {mode!r}")
    return _clamp(raw, conventional_min_bisection(params, alpha))


# -- per-link ----------------------------------------------------------------


def link_traffic(lp: LinkParams, params: SystemParams) -> float:
    """Spike rate each link carries: ``N_c*R*d/r``."""
    return lp.cluster_external_neurons * params.firing_rate_hz * lp.mean_hops / lp.router_degree


def link_bandwidth_requirement(
    lp: LinkParams, params: SystemParams, mode: str = "paper_literal_constrained"
) -> Clamped:
    """Required link bandwidth ``1/o`` in spikes/s, floored at 0."""
    r, eps, d = params.firing_rate_hz, params.epsilon, lp.mean_hops
    per_link = link_traffic(lp, params)
    if mode == "paper_literal_constrained":
        raw = d * (per_link * r - 1) / (eps * r)
    elif mode == "rederived_constrained":
        raw = d * (per_link - 1) / eps
    elif mode == "conventional":
        raw = per_link - 1
    else:
        raise ValueError(f"mode must be one of {LINK_MODES}, got {mode!r}")
    return _clamp(raw, 0.0)


# -- memory density -------------------------------------------------------------


def effective_memory_area(bits: float, tech: MemoryTechParams) -> float:
    """Macro area for ``bits`` of storage once array overhead is included."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    eff = tech.efficiency(bits)
    if eff <= 0:
        raise ValueError(f"array efficiency must be > 0, got {eff}")
    return bits * tech.bit_area / eff
