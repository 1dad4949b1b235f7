"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a ``PASS``/``FAIL`` line with the measured values. Run the
file directly (``python3 tests/test_acceptance.py``) for just those lines.
"""
import itertools
import math
import os
import sys
import tempfile
import time

import networkx as nx
import pytest

from aernoc import analytics, cli, config, engine, power, topology
from aernoc.routing import RoutingTable, routing_table_bits, tree_multicast_route

PAPER = analytics.SystemParams(n_neurons=1e6, synapses_per_neuron=1e4, synapse_types=4, firing_rate_hz=10)


def rel(got, want):
    return abs(got - want) / abs(want)


def check(checks):
    """``checks`` is a list of (label, ok); returns (all ok, detail text)."""
    return all(ok for _, ok in checks), "; ".join(f"{label} [{'ok' if ok else 'MISS'}]" for label, ok in checks)


# -- criteria -----------------------------------------------------------------------------


def c1_routing_memory():
    bits = analytics.routing_memory_bits(PAPER)
    gib = analytics.bits_to_gib(bits)
    kib = analytics.bits_per_neuron_kib(bits, PAPER.n_neurons)
    return check([
        (f"bits {bits:.5e} vs 3.3219e11", rel(bits, 3.3219e11) <= 1e-3),
        (f"GiB {gib:.4f} vs 38.7", rel(gib, 38.7) <= 1e-3),
        (f"KiB/neuron {kib:.4f} vs 40.5 (off by {100 * rel(kib, 40.5):.3f}%)", rel(kib, 40.5) <= 1e-3),
    ])


def c2_reduction():
    f = analytics.reduction_factor(PAPER)
    return check([(f"factor {f:.4f} vs 1.51 +- 0.01", abs(f - 1.51) <= 0.01)])


def c3_bandwidth():
    conv = analytics.conventional_min_bisection(PAPER)
    lit = analytics.latency_constrained_min_bisection(PAPER, 1e3, "paper_literal").value
    red = analytics.latency_constrained_min_bisection(PAPER, 1e3, "rederived").value
    red10 = analytics.latency_constrained_min_bisection(PAPER.relaxed(10), 1e3, "rederived").value
    return check([
        (f"conventional {conv:.6g} == 5e6", conv == 5e6),
        (f"paper_literal {lit:.6g} vs 4.9999e10", rel(lit, 4.9999e10) <= 1e-3),
        (f"rederived {red:.6g} / relaxed {red10:.6g} = {red / red10:.12g}", math.isclose(red / red10, 10, rel_tol=1e-12)),
    ])


def c4_serial_service():
    report = cli.simulate(config.load(config.bundled("two-router")), 0)
    got = [d.t_deliver for d in report.deliveries]
    bp = analytics.BisectionParams(bisection_links=1, link_occupancy_s=2, base_latency_s=5)
    want = [analytics.burst_spike_latency(i, bp) for i in (1, 2, 3)]
    return check([(f"deliveries {got} vs analytic {want}", got == want == [5, 7, 9])])


def _burst(name):
    cfg = config.load(config.bundled(name))
    t = cli.build_topology(cfg)
    return t, engine.burst_jitter(t, cli.build_workload(cfg, t, cfg.get("run", "seed", 0)))


def c5_jitter():
    t, mesh = _burst("mesh-burst")
    _, tree = _burst("tree-burst")
    m = tree.cross_spikes
    return check([
        (f"4x4 mesh: spread {mesh.spread} <= bound {mesh.bound:g} (C={mesh.bisection_links}, o={mesh.service_ticks})",
         t.width == t.height == 4 and mesh.spread <= mesh.bound),
        (f"tree C={tree.bisection_links}: spread {tree.spread} == (M-1)*o = {(m - 1) * tree.service_ticks} == bound {tree.bound:g}",
         tree.bisection_links == 1 and tree.spread == (m - 1) * tree.service_ticks == tree.bound),
    ])


def c6_low_load():
    cfg = config.load(config.bundled("low-load-sweep"))
    t = cli.build_topology(cfg)
    s = cfg.section("sweep")
    a, b = engine.load_sweep(t, s["rates"], s["duration_ticks"], seed=cfg.get("run", "seed", 0))
    z = a.zero_load_latency
    return check([
        (f"4x4 mesh rates {a.rate:g}, {b.rate:g}", t.width == t.height == 4 and (a.rate, b.rate) == (1e-4, 1e-3)),
        (f"means {a.mean_latency:.4f}, {b.mean_latency:.4f} differ by {100 * rel(a.mean_latency, b.mean_latency):.2f}%",
         rel(a.mean_latency, b.mean_latency) <= 0.05),
        (f"zero-load {z:.4f}", rel(a.mean_latency, z) <= 0.05 and rel(b.mean_latency, z) <= 0.05),
    ])


def _outputs(fn):
    with tempfile.TemporaryDirectory() as out:
        fn(out)
        return {f: open(os.path.join(out, f), "rb").read() for f in sorted(os.listdir(out))}


def c7_conservation():
    checks = []
    for name in config.bundled_names():
        cfg = config.load(config.bundled(name))
        seed = cfg.get("run", "seed", 0)
        if cfg.has("workload"):
            t = cli.build_topology(cfg)
            fanouts = sum(len(e.destinations) for e in cli.build_workload(cfg, t, seed))
            report = cli.simulate(cfg, seed)
            checks.append((f"{name}: delivered {report.delivered} == {fanouts}", report.delivered == fanouts))

            def both(out, cfg=cfg, seed=seed):
                assert cli.cmd_simulate(cfg, out, seed) == cli.EXIT_OK
                if cfg.has("power"):
                    cli.cmd_report(cfg, out)
        elif cfg.has("sweep"):
            both = lambda out, cfg=cfg, seed=seed: cli.cmd_sweep(cfg, out, seed)
        else:
            both = lambda out, cfg=cfg: cli.cmd_analyze(cfg, out)
        first, second = _outputs(both), _outputs(both)
        checks.append((f"{name}: {len(first)} CSVs identical", first == second and len(first) > 0))
    return check(checks)


def c8_oracles():
    mesh = topology.build_mesh(3, 3)
    pairs = list(itertools.permutations(itertools.product(range(3), range(3)), 2))
    brute = sum(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in pairs) / len(pairs)
    mean = topology.mean_hops(mesh, topology.uniform_traffic(mesh))
    cases = mismatches = 0
    for leaves in range(1, 9):  # every binary tree of depth <= 3
        t = topology.build_tree(2, leaves)
        g = nx.Graph([(l.src, l.dst) for l in t.links])
        g.add_nodes_from(range(t.n_routers))
        for src in t.leaves:
            for k in range(1, len(t.leaves) + 1):
                for dsts in itertools.combinations(t.leaves, k):
                    union = set()
                    for d in dsts:
                        p = nx.shortest_path(g, src, d)
                        union |= set(zip(p, p[1:]))
                    cases += 1
                    mismatches += set(tree_multicast_route(t, src, dsts).links) != union
    return check([
        (f"3x3 mean hops {mean} == brute force {brute}", mean == brute == 2.0),
        (f"multicast == union of unicast on {cases} cases, {mismatches} mismatches", mismatches == 0 and cases > 0),
    ])


def c9_memory_accounting():
    bad = []
    for n in range(1, 65):
        for s in range(1, 65):
            got = routing_table_bits(RoutingTable.uniform(n, s))
            want = analytics.routing_memory_bits(analytics.SystemParams(n, s), ceil=True)
            if got != want:
                bad.append((n, s, got, want))
    return check([(f"4096 (N, S) pairs, {len(bad)} mismatches {bad[:3]}", not bad)])


def c10_power():
    model = power.truenorth_table1_illustrative()
    b = power.estimate(power.TRUENORTH_REFERENCE, model, 1.0)
    cfg = config.load(config.bundled("idle-power"))
    idle = power.estimate(cli.simulate(cfg, 0), model, 1.0)
    s = power.hop_energy_sensitivity(power.TRUENORTH_REFERENCE, model, 0.5, 1.0)
    shares = ", ".join(f"{v:.4f}" for v in b.shares)
    return check([
        (f"shares {shares} vs 30/10/60", all(abs(g - w) <= 0.1 for g, w in zip(b.shares, (30, 10, 60)))),
        (f"zero traffic static {idle.shares[2]}%", idle.shares == (0.0, 0.0, 100.0)),
        (f"d_scale 0.5: {s.scaled_communication_w!r} == {s.communication_w!r} / 2", s.scaled_communication_w == s.communication_w / 2),
    ])


CRITERIA = [
    (1, "routing-memory headline", c1_routing_memory, 1.0),
    (2, "type-grouping reduction", c2_reduction, 1.0),
    (3, "bandwidth dichotomy", c3_bandwidth, 1.0),
    (4, "serial-service exactness", c4_serial_service, 1.0),
    (5, "jitter-bound property", c5_jitter, 5.0),
    (6, "low-load flatness", c6_low_load, 60.0),
    (7, "conservation and determinism", c7_conservation, 60.0),
    (8, "oracle equivalence", c8_oracles, 10.0),
    (9, "cross-module memory accounting", c9_memory_accounting, 10.0),
    (10, "power arithmetic", c10_power, 1.0),
]


def evaluate(fn, budget):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    in_time = elapsed <= budget
    return ok and in_time, f"{detail}; {elapsed:.2f}s of {budget:g}s{'' if in_time else ' [MISS]'}"


def line(number, name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"


@pytest.mark.parametrize("number,name,fn,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, name, fn, budget, capsys):
    ok, detail = evaluate(fn, budget)
    with capsys.disabled():
        print("\n" + line(number, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, name, fn, budget in CRITERIA:
        ok, detail = evaluate(fn, budget)
        failed += not ok
        print(line(number, name, ok, detail))
    sys.exit(1 if failed else 0)
