"""INI-style run configuration.

Sections and keys are fixed by :data:`SCHEMA`; anything else is rejected.
Values are typed on parse and written back in a canonical form, so
``parse(dump(parse(text)))`` equals ``parse(text)``.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


SCHEMA: Dict[str, Dict[str, Callable[[str], Any]]] = {
    "run": {"seed": int, "out": str, "max_ticks": int},
    "topology": {
        "kind": str,
        "width": int,
        "height": int,
        "diagonals": _bool,
        "fanout": int,
        "leaves": int,
        "neurons_per_cluster": int,
        "external": int,
        "service_ticks": int,
        "pipeline_ticks": int,
        "file": str,
    },
    "workload": {
        "kind": str,
        "rate_hz": float,
        "duration_ticks": int,
        "tick_duration_s": float,
        "alpha": float,
        "burst_tick": int,
        "pairing": str,
        "trace": str,
        "connectivity": str,
    },
    "analytics": {
        "n_neurons": float,
        "synapses_per_neuron": float,
        "synapse_types": float,
        "firing_rate_hz": float,
        "temporal_precision_s": float,
        "bisection_links": float,
        "base_latency_s": float,
        "link_occupancy_s": float,
        "alpha": float,
        "cluster_external_neurons": float,
        "router_degree": float,
        "mean_hops": float,
        "mode": str,
    },
    "power": {
        "preset": str,
        "e_router_j": float,
        "e_link_j": float,
        "p_static_router_w": float,
        "p_static_cluster_w": float,
        "e_compute_spike_j": float,
        "wall_duration_s": float,
        "calibrate_total_w": float,
        "calibrate_shares": _floats,
        "d_scales": _floats,
    },
    "sweep": {"rates": _floats, "duration_ticks": int, "n_jobs": int, "drain_factor": float},
}


@dataclass
class RunConfig:
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    base_dir: str = "."

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.sections

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def path(self, section: str, key: str) -> Optional[str]:
        value = self.get(section, key)
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def dumps(self) -> str:
        out = []
        for name in SCHEMA:
            if name not in self.sections:
                continue
            out.append(f"[{name}]")
            for key in SCHEMA[name]:
                if key in self.sections[name]:
                    out.append(f"{key} = {_fmt(self.sections[name][key])}")
            out.append("")
        return "\n".join(out)


def parse(text: str, base_dir: str = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections: Dict[str, Dict[str, Any]] = {}
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"{name}: unknown section")
        parsed = {}
        for key, raw in cp.items(name):
            if key not in SCHEMA[name]:
                raise ConfigError(f"{name}.{key}: unknown key")
            try:
                parsed[key] = SCHEMA[name][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{name}.{key}: {exc}") from exc
        sections[name] = parsed
    return RunConfig(sections, base_dir)


def load(path) -> RunConfig:
    with open(path) as fh:
        return parse(fh.read(), os.path.dirname(os.path.abspath(path)))


def bundled_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "configs")


def bundled(name: str) -> str:
    """Path of a bundled example config, by name without extension."""
    path = os.path.join(bundled_dir(), f"{name}.ini")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no bundled config {name!r}")
    return path


def bundled_names() -> List[str]:
    return sorted(f[:-4] for f in os.listdir(bundled_dir()) if f.endswith(".ini"))
