"""Traffic, energy, and redundancy accounting plus the run report format.

Reports serialize to canonical JSON (sorted keys) so identical runs are
byte-identical on disk; the per-timestep series additionally goes out as CSV
with the columns timestep, mode, injected_flits, flit_hops, packets, busy_ps,
drain_ps, dynamic_energy, static_energy.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field, asdict

Coord = tuple[int, int]

METRICS = ("injected_flits", "ejected_flits", "flit_hops", "packets",
           "head_flits", "body_flits")


class TrafficLedger:
    """Flit/packet counters, total and per (core, timestep).

    Injected flits, packets and flit-hops are attributed to the packet's
    source core; ejected flits to the destination core.  A hop is one link
    traversal, so a packet's flits contribute flit_count x distance hops.
    """

    def __init__(self):
        self.totals = {m: 0 for m in METRICS}
        self.per_core_step: dict[str, Counter] = {m: Counter() for m in METRICS}

    def _bump(self, metric: str, core: Coord, timestep: int, n: int = 1) -> None:
        self.totals[metric] += n
        self.per_core_step[metric][(core, timestep)] += n

    def count_injected(self, core: Coord, timestep: int, is_head: bool) -> None:
        self._bump("injected_flits", core, timestep)
        self._bump("head_flits" if is_head else "body_flits", core, timestep)

    def count_ejected(self, core: Coord, timestep: int) -> None:
        self._bump("ejected_flits", core, timestep)

    def count_hop(self, core: Coord, timestep: int) -> None:
        self._bump("flit_hops", core, timestep)

    def count_packet(self, core: Coord, timestep: int) -> None:
        self._bump("packets", core, timestep)

    def timestep_total(self, metric: str, timestep: int) -> int:
        return sum(n for (_, t), n in self.per_core_step[metric].items()
                   if t == timestep)

    def by_timestep(self, metric: str) -> dict[int, int]:
        out: dict[int, int] = {}
        for (_, t), n in self.per_core_step[metric].items():
            out[t] = out.get(t, 0) + n
        return out

    def core_total(self, metric: str, core: Coord) -> int:
        return sum(n for (c, _), n in self.per_core_step[metric].items()
                   if c == core)


@dataclass(frozen=True)
class EnergyCostTable:
    """Per-event dynamic costs and static power.

    The numbers below are round placeholder magnitudes in arbitrary energy
    units per event (or per picosecond for static power); calibrate them
    against a target technology before trusting absolute joules.  Ratios
    between runs are meaningful for any consistent table.
    """

    router_per_flit: float = 5.0        # per flit per link traversal
    link_per_flit: float = 3.0
    neuron_update: float = 10.0
    decode_per_body_flit: float = 2.0
    sram_read_per_byte: float = 0.05
    sram_write_per_byte: float = 0.05
    core_static_per_ps: float = 2e-4    # per powered core
    router_static_per_ps: float = 1e-4  # per router

    def dynamic(self, flit_hops: int = 0, updates: int = 0,
                decoded_body_flits: int = 0, sram_read_bytes: int = 0,
                sram_write_bytes: int = 0) -> float:
        return (flit_hops * (self.router_per_flit + self.link_per_flit)
                + updates * self.neuron_update
                + decoded_body_flits * self.decode_per_body_flit
                + sram_read_bytes * self.sram_read_per_byte
                + sram_write_bytes * self.sram_write_per_byte)

    def static(self, n_cores: int, n_routers: int, span_ps: int) -> float:
        return (n_cores * self.core_static_per_ps
                + n_routers * self.router_static_per_ps) * span_ps


@dataclass(frozen=True)
class RedundancyProfile:
    """How many packets carried addresses already sent the same timestep.

    ``effective`` counts distinct (source, destination, timestep) triples;
    ``ratio`` is effective/total.  An empty log is reported as ratio 1 with
    the ``empty`` flag raised rather than as a division error.
    """

    total_packets: int
    effective_packets: int
    payload_flits: int
    ratio: float
    empty: bool


def redundancy_profile(records) -> RedundancyProfile:
    """``records`` is any iterable with .src/.dest/.timestep/.body_count."""
    total = 0
    payload = 0
    triples = set()
    for r in records:
        total += 1
        payload += r.body_count
        triples.add((r.src, r.dest, r.timestep))
    if total == 0:
        return RedundancyProfile(0, 0, 0, 1.0, True)
    return RedundancyProfile(total, len(triples), payload,
                             len(triples) / total, False)


@dataclass
class TimestepRow:
    timestep: int
    injected_flits: int
    flit_hops: int
    packets: int
    busy_ps: int
    drain_ps: int
    dynamic_energy: float
    static_energy: float


@dataclass
class RunReport:
    workload: str
    mode: str
    partitioner: str
    config_digest: str
    timesteps: int
    modeled_time_ps: int
    spike_digest: str
    total_spikes: int
    traffic: dict
    energy: dict
    redundancy: dict
    per_timestep: list[TimestepRow]
    schema_version: int = 1

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunReport":
        d = json.loads(text)
        rows = [TimestepRow(**r) for r in d.pop("per_timestep")]
        return RunReport(per_timestep=rows, **d)


def emit_report(report: RunReport, json_path: str, csv_path: str | None = None) -> None:
    with open(json_path, "w") as f:
        f.write(report.to_json())
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["timestep", "mode", "injected_flits", "flit_hops",
                        "packets", "busy_ps", "drain_ps", "dynamic_energy",
                        "static_energy"])
            for r in report.per_timestep:
                w.writerow([r.timestep, report.mode, r.injected_flits,
                            r.flit_hops, r.packets, r.busy_ps, r.drain_ps,
                            repr(r.dynamic_energy), repr(r.static_energy)])


def parse_report(json_path: str) -> RunReport:
    with open(json_path) as f:
        return RunReport.from_json(f.read())


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def compare_reports(baseline: RunReport, other: RunReport) -> dict[str, float]:
    """Improvement ratios of ``other`` relative to ``baseline`` (>1 is better)."""
    return {
        "traffic_saving": _ratio(baseline.traffic["flit_hops"],
                                 other.traffic["flit_hops"]),
        "traffic_saving_injected": _ratio(baseline.traffic["injected_flits"],
                                          other.traffic["injected_flits"]),
        "speedup": _ratio(baseline.modeled_time_ps, other.modeled_time_ps),
        "energy_efficiency": _ratio(baseline.energy["total"],
                                    other.energy["total"]),
    }
