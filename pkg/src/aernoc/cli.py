"""Command-line entry point: ``aernoc {analyze,simulate,sweep,report}``.

Exit codes: 0 success, 2 invalid config or arguments, 3 simulation timeout,
4 missing or unreadable files.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from typing import List, Optional, Sequence

from aernoc import analytics, engine, power, routing, topology, traffic
from aernoc.config import ConfigError, RunConfig, bundled, bundled_names, load

log = logging.getLogger("aernoc")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TIMEOUT = 3
EXIT_IO = 4

ANALYSIS_COLUMNS = ("formula", "inputs", "value", "paper_literal", "rederived", "degenerate")


class UsageError(ConfigError):
    pass


# -- building objects from a config ----------------------------------------------


def _wrap(section: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def build_topology(cfg: RunConfig) -> topology.Topology:
    if not cfg.has("topology"):
        raise UsageError("missing [topology] section")
    s = cfg.section("topology")
    if "file" in s:
        return _wrap("topology.file", topology.load, cfg.path("topology", "file"))
    kind = s.get("kind")
    timing = _wrap("topology", topology.LinkTiming, s.get("service_ticks", 1), s.get("pipeline_ticks", 0))
    common = dict(link_params=timing, neurons_per_cluster=s.get("neurons_per_cluster", 1), external=s.get("external"))
    if kind == "mesh":
        return _wrap("topology", topology.build_mesh, s.get("width", 1), s.get("height", 1), **common)
    if kind == "torus":
        return _wrap("topology", topology.build_torus, s.get("width", 3), s.get("height", 3), s.get("diagonals", False), **common)
    if kind in topology.TREE_KINDS:
        return _wrap("topology", topology.build_tree, s.get("fanout", 2), s.get("leaves", 1), kind=kind, **common)
    raise ConfigError(f"topology.kind: expected one of {topology.KINDS}, got {kind!r}")


def build_table(cfg: RunConfig, t: topology.Topology) -> Optional[routing.RoutingTable]:
    path = cfg.path("workload", "connectivity")
    if path is None:
        return None
    return _wrap("workload.connectivity", routing.load_connectivity, path, t.n_neurons)


def build_spec(cfg: RunConfig, seed: int) -> traffic.WorkloadSpec:
    if not cfg.has("workload"):
        raise UsageError("missing [workload] section")
    s = dict(cfg.section("workload"))
    s.pop("trace", None)
    s.pop("connectivity", None)
    return _wrap("workload", traffic.WorkloadSpec, seed=seed, **s)


def build_workload(cfg: RunConfig, t: topology.Topology, seed: int) -> List[traffic.SpikeEvent]:
    spec = build_spec(cfg, seed)
    table = build_table(cfg, t)
    trace = cfg.path("workload", "trace")
    if spec.kind == "replay" and trace is not None and not os.path.exists(trace):
        raise FileNotFoundError(trace)
    return _wrap("workload", traffic.build_workload, spec, t, table, trace)


def build_system(cfg: RunConfig) -> analytics.SystemParams:
    s = cfg.section("analytics")
    return _wrap(
        "analytics",
        analytics.SystemParams,
        n_neurons=s.get("n_neurons", 1e6),
        synapses_per_neuron=s.get("synapses_per_neuron", 1e4),
        synapse_types=s.get("synapse_types", 4),
        firing_rate_hz=s.get("firing_rate_hz", 10.0),
        temporal_precision_s=s.get("temporal_precision_s"),
    )


def build_power_model(cfg: RunConfig, activity: Optional[power.Activity], duration_s: float) -> power.PowerModel:
    s = cfg.section("power")
    if "calibrate_total_w" in s:
        if activity is None:
            raise UsageError("power calibration needs simulation outputs")
        shares = s.get("calibrate_shares", [30.0, 10.0, 60.0])
        return _wrap("power", power.calibrate, activity, duration_s, s["calibrate_total_w"], shares)
    if "preset" in s:
        if s["preset"] not in power.PRESETS:
            raise ConfigError(f"power.preset: unknown preset {s['preset']!r}; have {sorted(power.PRESETS)}")
        return power.PRESETS[s["preset"]]()
    keys = ("e_router_j", "e_link_j", "p_static_router_w", "p_static_cluster_w", "e_compute_spike_j")
    return _wrap("power", power.PowerModel, **{k: s[k] for k in keys if k in s})


def validate(cfg: RunConfig, command: str) -> None:
    """Check every section the command needs before any run starts."""
    if command == "analyze":
        if not cfg.has("analytics"):
            raise UsageError("missing [analytics] section")
        build_system(cfg)
        mode = cfg.get("analytics", "mode", "paper_literal")
        if mode not in analytics.BISECTION_MODES:
            raise ConfigError(f"analytics.mode: expected one of {analytics.BISECTION_MODES}, got {mode!r}")
        return
    build_topology(cfg)
    if command == "simulate":
        build_spec(cfg, cfg.get("run", "seed", 0))
    elif command == "sweep" and not cfg.has("sweep"):
        raise UsageError("missing [sweep] section")
    elif command == "report":
        if not cfg.has("power"):
            raise UsageError("missing [power] section")
        s = cfg.section("power")
        if "calibrate_total_w" not in s:
            build_power_model(cfg, None, 1.0)


# -- CSV helpers ------------------------------------------------------------------------


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_rows(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- commands -------------------------------------------------------------------


def _g(x: float) -> str:
    return repr(float(x))


def analysis_rows(cfg: RunConfig, mode: str = "paper_literal") -> List[tuple]:
    s = cfg.section("analytics")
    p = build_system(cfg)
    n, syn, k, r = p.n_neurons, p.synapses_per_neuron, p.synapse_types, p.firing_rate_hz
    alpha = s.get("alpha", 1.0)
    c = s.get("bisection_links", 1e3)
    base = f"N={_g(n)};S={_g(syn)}"
    rows = []

    bits = analytics.routing_memory_bits(p)
    rows.append(("routing_memory_bits", base, _g(bits), "", "", 0))
    rows.append(("routing_memory_gib", base, _g(analytics.bits_to_gib(bits)), "", "", 0))
    rows.append(("routing_memory_kib_per_neuron", base, _g(analytics.bits_per_neuron_kib(bits, n)), "", "", 0))
    rows.append(("routing_memory_bits_ceil", base, _g(analytics.routing_memory_bits(p, ceil=True)), "", "", 0))
    typed = analytics.routing_memory_bits_typed(p)
    rows.append(("routing_memory_bits_typed", f"{base};k={_g(k)}", _g(typed), "", "", 0))
    if typed > 0:
        rows.append(("reduction_factor", f"{base};k={_g(k)}", _g(analytics.reduction_factor(p)), "", "", 0))

    rate_in = f"N={_g(n)};R={_g(r)};alpha={_g(alpha)}"
    rows.append(("conventional_min_bisection", rate_in, _g(analytics.conventional_min_bisection(p, alpha)), "", "", 0))
    lit = analytics.latency_constrained_min_bisection(p, c, "paper_literal", alpha)
    red = analytics.latency_constrained_min_bisection(p, c, "rederived", alpha)
    chosen = lit if mode == "paper_literal" else red
    rows.append((
        "latency_constrained_min_bisection",
        f"{rate_in};C={_g(c)};eps={_g(p.epsilon)}",
        _g(chosen.value), _g(lit.value), _g(red.value), int(lit.degenerate or red.degenerate),
    ))

    o = s.get("link_occupancy_s")
    if o is not None:
        bp = analytics.BisectionParams(
            bisection_links=c, link_occupancy_s=o, base_latency_s=s.get("base_latency_s", 0.0), locality_fraction=alpha
        )
        inputs = f"{rate_in};C={_g(c)};o={_g(o)};l={_g(bp.l)}"
        lp = analytics.last_packet_latency(p, bp)
        rows.append(("last_packet_latency", inputs, _g(lp.value), "", "", int(lp.degenerate)))
        jb = analytics.arrival_jitter_bound(p, bp)
        rows.append(("arrival_jitter_bound", f"{inputs};B={_g(bp.B)}", _g(jb.value), "", "", int(jb.degenerate)))

    if "cluster_external_neurons" in s:
        link_p = _wrap(
            "analytics", analytics.LinkParams,
            s["cluster_external_neurons"], s.get("router_degree", 4.0), s.get("mean_hops", 1.0),
        )
        inputs = f"Nc={_g(link_p.cluster_external_neurons)};R={_g(r)};d={_g(link_p.mean_hops)};r={_g(link_p.router_degree)}"
        rows.append(("link_traffic", inputs, _g(analytics.link_traffic(link_p, p)), "", "", 0))
        lit = analytics.link_bandwidth_requirement(link_p, p, "paper_literal_constrained")
        red = analytics.link_bandwidth_requirement(link_p, p, "rederived_constrained")
        conv = analytics.link_bandwidth_requirement(link_p, p, "conventional")
        chosen = lit if mode == "paper_literal" else red
        rows.append(("link_bandwidth_requirement", inputs, _g(chosen.value), _g(lit.value), _g(red.value),
                     int(lit.degenerate or red.degenerate)))
        rows.append(("link_bandwidth_conventional", inputs, _g(conv.value), "", "", int(conv.degenerate)))
    return rows


def cmd_analyze(cfg: RunConfig, out_dir: str, mode: Optional[str] = None) -> str:
    mode = mode or cfg.get("analytics", "mode", "paper_literal")
    validate(cfg, "analyze")
    if mode not in analytics.BISECTION_MODES:
        raise ConfigError(f"mode: expected one of {analytics.BISECTION_MODES}, got {mode!r}")
    return _write(out_dir, "analysis.csv", _csv(analysis_rows(cfg, mode), ANALYSIS_COLUMNS))


def _limits(cfg: RunConfig) -> engine.Limits:
    max_ticks = cfg.get("run", "max_ticks")
    return engine.Limits(max_ticks=max_ticks)


def simulate(cfg: RunConfig, seed: int) -> engine.SimReport:
    validate(cfg, "simulate")
    t = build_topology(cfg)
    workload = build_workload(cfg, t, seed)
    return engine.run(t, workload, limits=_limits(cfg))


def write_report(report: engine.SimReport, out_dir: str) -> List[str]:
    return [
        _write(out_dir, "deliveries.csv", report.deliveries_csv()),
        _write(out_dir, "links.csv", report.links_csv()),
        _write(out_dir, "summary.csv", report.summary_csv()),
    ]


def cmd_simulate(cfg: RunConfig, out_dir: str, seed: int) -> int:
    try:
        report = simulate(cfg, seed)
    except engine.SimulationTimeout as exc:
        write_report(exc.report, out_dir)
        log.error("%s", exc)
        return EXIT_TIMEOUT
    write_report(report, out_dir)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out_dir: str, seed: int, rates: Optional[Sequence[float]] = None) -> str:
    validate(cfg, "sweep")
    s = cfg.section("sweep")
    rates = list(rates if rates is not None else s.get("rates", []))
    if not rates:
        raise UsageError("no rates given (use --rates or sweep.rates)")
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise ConfigError("sweep.rates: rates must be ascending")
    t = build_topology(cfg)
    rows = engine.load_sweep(
        t, rates, s.get("duration_ticks", 100_000), seed=seed,
        drain_factor=s.get("drain_factor", 2.0), n_jobs=s.get("n_jobs", 1),
    )
    return _write(out_dir, "sweep.csv", engine.sweep_csv(rows))


def activity_from_outputs(cfg: RunConfig, out_dir: str) -> tuple:
    summary_path = os.path.join(out_dir, "summary.csv")
    links_path = os.path.join(out_dir, "links.csv")
    for p in (summary_path, links_path):
        if not os.path.exists(p):
            raise FileNotFoundError(f"{p} not found; run 'simulate' first")
    (summary,) = _read_rows(summary_path)
    traversals = sum(int(r["served"]) for r in _read_rows(links_path))
    t = build_topology(cfg)
    act = power.Activity(
        spikes=int(summary["injected"]),
        router_traversals=traversals,
        link_traversals=traversals,
        n_routers=t.n_routers,
        n_clusters=sum(1 for c in t.clusters if c.neurons > 0),
    )
    tick_s = cfg.get("workload", "tick_duration_s", 1e-3)
    duration = cfg.get("power", "wall_duration_s") or int(summary["duration_ticks"]) * tick_s
    return act, duration


def cmd_report(cfg: RunConfig, out_dir: str) -> str:
    validate(cfg, "report")
    act, duration = activity_from_outputs(cfg, out_dir)
    if not duration > 0:
        raise ConfigError("power.wall_duration_s: run duration is zero; set it explicitly")
    model = build_power_model(cfg, act, duration)
    breakdown = power.estimate(act, model, duration)
    sens = []
    for d in cfg.get("power", "d_scales", []):
        s = power.hop_energy_sensitivity(act, model, d, duration)
        sens.append((s, power.estimate(act.with_hops_scaled(d), model, duration)))
    return _write(out_dir, "power.csv", power.breakdown_csv(breakdown, sens))


# -- argument parsing ----------------------------------------------------------------


def _rates(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from None


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aernoc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("analyze", "closed-form analysis CSV"),
        ("simulate", "run one simulation and write deliveries/links/summary CSVs"),
        ("sweep", "latency versus injection rate"),
        ("report", "power breakdown from simulate outputs"),
    ):
        p = sub.add_parser(name, help=help_)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH")
        src.add_argument("--example", metavar="NAME", help=f"bundled config: {', '.join(bundled_names())}")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=_seed, metavar="U64")
        if name == "sweep":
            p.add_argument("--rates", type=_rates, metavar="CSV-LIST")
        if name == "analyze":
            p.add_argument("--mode", choices=analytics.BISECTION_MODES)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load(args.config if args.config else bundled(args.example))
        out_dir = args.out or cfg.get("run", "out") or "."
        seed = args.seed if args.seed is not None else cfg.get("run", "seed", 0)
        if args.command == "analyze":
            print(cmd_analyze(cfg, out_dir, args.mode))
        elif args.command == "simulate":
            code = cmd_simulate(cfg, out_dir, seed)
            print(out_dir)
            return code
        elif args.command == "sweep":
            print(cmd_sweep(cfg, out_dir, seed, args.rates))
        else:
            print(cmd_report(cfg, out_dir))
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_VALIDATION
    except engine.SimulationTimeout as exc:
        log.error("%s", exc)
        return EXIT_TIMEOUT
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
