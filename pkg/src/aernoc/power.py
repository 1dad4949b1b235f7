"""First-order power accounting: compute, communication and static shares.

Energy coefficients are configuration, not device claims. Presets are
labelled illustrative; the one calibrated to published share percentages
only reproduces those percentages for its reference activity.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

from aernoc.engine import SimReport

POWER_COLUMNS = ("component", "watts", "share_percent")


@dataclass(frozen=True)
class PowerModel:
    e_router_j: float = 0.0
    e_link_j: float = 0.0
    p_static_router_w: float = 0.0
    p_static_cluster_w: float = 0.0
    e_compute_spike_j: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        for name in ("e_router_j", "e_link_j", "p_static_router_w", "p_static_cluster_w", "e_compute_spike_j"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def scaled(self, dynamic: float = 1.0, static: float = 1.0) -> "PowerModel":
        return replace(
            self,
            e_router_j=self.e_router_j * dynamic,
            e_link_j=self.e_link_j * dynamic,
            e_compute_spike_j=self.e_compute_spike_j * dynamic,
            p_static_router_w=self.p_static_router_w * static,
            p_static_cluster_w=self.p_static_cluster_w * static,
        )


@dataclass(frozen=True)
class Activity:
    """Event counts over a run: spikes fired and router/link traversals."""

    spikes: float
    router_traversals: float
    link_traversals: float
    n_routers: int
    n_clusters: int

    @classmethod
    def from_report(cls, report: SimReport) -> "Activity":
        hops = report.hop_total
        return cls(report.injected, hops, report.link_traversals, report.n_routers, report.n_clusters)

    def with_hops_scaled(self, d_scale: float) -> "Activity":
        return replace(
            self,
            router_traversals=self.router_traversals * d_scale,
            link_traversals=self.link_traversals * d_scale,
        )


@dataclass(frozen=True)
class PowerBreakdown:
    compute_w: float
    communication_w: float
    static_w: float

    @property
    def total_w(self) -> float:
        return self.compute_w + self.communication_w + self.static_w

    @property
    def shares(self) -> Tuple[float, float, float]:
        """(compute, communication, static) in percent of the total."""
        total = self.total_w
        if total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(100.0 * v / total for v in (self.compute_w, self.communication_w, self.static_w))

    def rows(self):
        shares = self.shares
        return [
            ("compute", self.compute_w, shares[0]),
            ("communication", self.communication_w, shares[1]),
            ("static", self.static_w, shares[2]),
            ("total", self.total_w, sum(shares)),
        ]


def _activity(source: Union[SimReport, Activity]) -> Activity:
    return source if isinstance(source, Activity) else Activity.from_report(source)


def estimate(source: Union[SimReport, Activity], model: PowerModel, wall_duration_s: float) -> PowerBreakdown:
    if not wall_duration_s > 0:
        raise ValueError(f"wall_duration_s must be > 0, got {wall_duration_s}")
    a = _activity(source)
    communication = (a.router_traversals * model.e_router_j + a.link_traversals * model.e_link_j) / wall_duration_s
    compute = a.spikes * model.e_compute_spike_j / wall_duration_s
    static = a.n_routers * model.p_static_router_w + a.n_clusters * model.p_static_cluster_w
    return PowerBreakdown(compute, communication, static)


@dataclass(frozen=True)
class HopSensitivity:
    d_scale: float
    communication_w: float
    scaled_communication_w: float

    @property
    def delta_w(self) -> float:
        return self.scaled_communication_w - self.communication_w

    @property
    def relative(self) -> float:
        if self.communication_w == 0:
            return 0.0
        return self.delta_w / self.communication_w


def hop_energy_sensitivity(
    source: Union[SimReport, Activity], model: PowerModel, d_scale: float, wall_duration_s: float
) -> HopSensitivity:
    """Communication power if every spike travelled ``d_scale`` times as many hops."""
    if not d_scale > 0:
        raise ValueError(f"d_scale must be > 0, got {d_scale}")
    a = _activity(source)
    base = estimate(a, model, wall_duration_s).communication_w
    scaled = estimate(a.with_hops_scaled(d_scale), model, wall_duration_s).communication_w
    return HopSensitivity(d_scale, base, scaled)


def calibrate(
    source: Union[SimReport, Activity],
    wall_duration_s: float,
    total_w: float,
    shares: Sequence[float] = (30.0, 10.0, 60.0),
    router_fraction: float = 0.5,
    static_router_fraction: float = 0.5,
    label: str = "calibrated",
) -> PowerModel:
    """Energy coefficients that give ``shares`` (compute, communication, static
    percent) of ``total_w`` for this activity.

    ``router_fraction`` splits communication energy between router and link
    traversals; ``static_router_fraction`` splits static power between
    routers and clusters.
    """
    if abs(sum(shares) - 100.0) > 1e-9:
        raise ValueError(f"shares must sum to 100, got {sum(shares)}")
    if any(s < -1e-9 for s in shares) or total_w < 0:
        raise ValueError("shares and total_w must be >= 0")
    a = _activity(source)
    # clamp round-off so a share written as 100 - a - b cannot go negative
    compute_w, comm_w, static_w = (total_w * max(s, 0.0) / 100.0 for s in shares)
    if (compute_w and not a.spikes) or (comm_w and not a.link_traversals):
        raise ValueError("activity has no events to carry the requested dynamic share")
    hops = a.link_traversals
    e_comm = comm_w * wall_duration_s / hops if hops else 0.0
    return PowerModel(
        e_router_j=e_comm * router_fraction,
        e_link_j=e_comm * (1 - router_fraction),
        p_static_router_w=static_w * static_router_fraction / a.n_routers if a.n_routers else 0.0,
        p_static_cluster_w=static_w * (1 - static_router_fraction) / a.n_clusters if a.n_clusters else 0.0,
        e_compute_spike_j=compute_w * wall_duration_s / a.spikes if a.spikes else 0.0,
        label=label,
    )


def _grid_mean_hops(side: int) -> float:
    # Uniform traffic over all ordered pairs (self included) of a side x side mesh.
    return 2 * (side * side - 1) / (3 * side)


# Reference activity for a 64x64-core mesh of 256 neurons per core firing at
# 20 Hz for one second, with uniform destinations.
TRUENORTH_REFERENCE = Activity(
    spikes=64 * 64 * 256 * 20.0,
    router_traversals=64 * 64 * 256 * 20.0 * _grid_mean_hops(64),
    link_traversals=64 * 64 * 256 * 20.0 * _grid_mean_hops(64),
    n_routers=64 * 64,
    n_clusters=64 * 64,
)


def truenorth_table1_illustrative() -> PowerModel:
    """Illustrative preset: 30/10/60 compute/communication/static of 72 mW at
    :data:`TRUENORTH_REFERENCE` over one second. Not a device model."""
    return calibrate(TRUENORTH_REFERENCE, 1.0, 0.072, (30.0, 10.0, 60.0), label="truenorth-table1-illustrative")


PRESETS = {"truenorth-table1-illustrative": truenorth_table1_illustrative}


def breakdown_csv(b: PowerBreakdown, sensitivities: Optional[Sequence[Tuple[HopSensitivity, PowerBreakdown]]] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POWER_COLUMNS)
    for name, watts, share in b.rows():
        w.writerow((name, repr(watts), repr(share)))
    for s, scaled in sensitivities or ():
        share = 100.0 * scaled.communication_w / scaled.total_w if scaled.total_w else 0.0
        w.writerow((f"communication@d_scale={s.d_scale!r}", repr(s.scaled_communication_w), repr(share)))
    return buf.getvalue()
