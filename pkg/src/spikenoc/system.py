"""Whole-system orchestration: deploy a network onto the mesh and run it.

Timesteps are globally barriered: every core runs its decode and update pass
for step t, all generated packets drain through the mesh, and only then does
step t+1 begin.  Modeled time advances to the latest of core completion,
generator completion, and network drain, so congestion shows up directly in
execution time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .artifact import DeploymentBundle, build_bundle
from .core import CoreState, CoreTiming, MODE_BASELINE, MODE_UNISPIKE
from .graph import SnnGraph, SpikeTrain
from .metrics import (EnergyCostTable, RunReport, TimestepRow, TrafficLedger,
                      compare_reports, redundancy_profile)
from .noc import MeshConfig, NocSim, PacketRecord
from .partition import (CoreMap, MemoryBudget, Partition, hsfc_order,
                        initial_partition, map_clusters, sss_refine)
from .stimulus import StimulusSpec, build_stimulus

Coord = tuple[int, int]

PARTITIONERS = ("naive", "hsfc", "hsfc-sss")


@dataclass(frozen=True)
class SystemConfig:
    mesh: MeshConfig = MeshConfig(4, 4)
    timing: CoreTiming = CoreTiming()
    energy: EnergyCostTable = EnergyCostTable()
    budget: MemoryBudget = MemoryBudget()
    stimulus: StimulusSpec = StimulusSpec()
    mode: str = MODE_UNISPIKE
    partitioner: str = "hsfc-sss"
    placement: str = "hilbert"
    timesteps: int = 20
    dt: float = 1.0
    partition_seed: int = 0
    seg_ratio: float = 0.1
    sss_iters: int | None = None
    sss_t0: float | None = None
    sss_cooling: float = 0.995
    trace: bool = False


class TimestepBarrier:
    """Tracks one timestep's completion: every core done, network drained."""

    def __init__(self, core_coords, start_ps: int):
        self.waiting = set(core_coords)
        self.drained = False
        self.t_end = start_ps

    def core_done(self, coord: Coord, at_ps: int) -> None:
        self.waiting.discard(coord)
        self.t_end = max(self.t_end, at_ps)

    def noc_drained(self, at_ps: int) -> None:
        self.drained = True
        self.t_end = max(self.t_end, at_ps)

    def advance(self) -> int:
        if self.waiting or not self.drained:
            raise RuntimeError("barrier released early")
        return self.t_end


def make_partition(graph: SnnGraph, cfg: SystemConfig) -> Partition:
    if cfg.partitioner not in PARTITIONERS:
        raise ValueError(f"unknown partitioner {cfg.partitioner!r}")
    order = list(range(graph.neuron_count)) if cfg.partitioner == "naive" \
        else hsfc_order(graph)
    part = initial_partition(order, graph, cfg.budget)
    if cfg.partitioner == "hsfc-sss":
        part = sss_refine(part, graph, cfg.budget, seed=cfg.partition_seed,
                          iters=cfg.sss_iters, t0=cfg.sss_t0,
                          cooling=cfg.sss_cooling, seg_ratio=cfg.seg_ratio)
    return part


def deploy(graph: SnnGraph, cfg: SystemConfig) -> DeploymentBundle:
    part = make_partition(graph, cfg)
    core_map = map_clusters(part, cfg.mesh.width, cfg.mesh.height, cfg.placement)
    return build_bundle(graph, part, core_map, cfg.budget)


@dataclass
class RunResult:
    report: RunReport
    train: SpikeTrain
    packet_records: list[PacketRecord]
    flit_trace: list | None


def run_experiment(bundle: DeploymentBundle, cfg: SystemConfig,
                   stimulus_rows: list[list[int]] | None,
                   workload: str = "", config_digest: str = "") -> RunResult:
    """Simulate the deployed system timestep by timestep."""
    if cfg.mode not in (MODE_BASELINE, MODE_UNISPIKE):
        raise ValueError(f"unknown mode {cfg.mode!r}")
    graph = bundle.graph
    if stimulus_rows is not None and len(stimulus_rows) < cfg.timesteps:
        raise ValueError("stimulus shorter than the run")
    order = sorted(bundle.cores, key=lambda c: (c.coord[1], c.coord[0]))
    cores = []
    for art in order:
        params = [graph.params_of(nid) for nid in art.neuron_ids]
        cores.append(CoreState(art, params, bundle.frac_bits, cfg.timing,
                               cfg.mode, cfg.dt))
    ledger = TrafficLedger()
    packet_records: list[PacketRecord] = []
    flit_trace: list | None = [] if cfg.trace else None
    noc = NocSim(cfg.mesh, cfg.timing, ledger, packet_records, flit_trace)
    energy = cfg.energy
    n_cores = cfg.mesh.width * cfg.mesh.height

    inbox: dict[Coord, list] = {}
    t_start = 0
    steps: list[tuple[int, ...]] = []
    rows: list[TimestepRow] = []
    dynamic_total = 0.0
    static_total = 0.0

    for t in range(cfg.timesteps):
        stim_row = stimulus_rows[t - 1] if (stimulus_rows is not None and t > 0) \
            else None
        barrier = TimestepBarrier([c.coord for c in cores], t_start)
        jobs_by_core = {}
        fired: list[int] = []
        busy_max = 0
        updates = 0
        accum_events = 0
        decoded_body = 0
        for core in cores:
            arrived = inbox.get(core.coord, [])
            decoded_body += sum(len(p.indices) for p in arrived)
            res = core.run_core_timestep(arrived, stim_row, t, t_start)
            jobs_by_core[core.coord] = res.jobs
            fired.extend(res.fired_globals)
            updates += res.update_count
            accum_events += res.accum_events
            busy_max = max(busy_max, res.busy_ps)
            barrier.core_done(core.coord, t_start + res.busy_ps)

        delivered, drain_ps, gen_done = noc.run_timestep(jobs_by_core, t_start, t)
        for coord, done_ps in gen_done.items():
            busy_max = max(busy_max, done_ps - t_start)
            barrier.core_done(coord, done_ps)
        barrier.noc_drained(drain_ps)
        t_end = barrier.advance()

        inbox = {}
        for packet, _ in delivered:
            inbox.setdefault(packet.dest, []).append(packet)
        fired.sort()
        steps.append(tuple(fired))

        hops_t = ledger.timestep_total("flit_hops", t)
        dyn = energy.dynamic(flit_hops=hops_t, updates=updates,
                             decoded_body_flits=decoded_body,
                             sram_read_bytes=accum_events * 4 + updates * 24,
                             sram_write_bytes=updates * 24)
        stat = energy.static(n_cores, n_cores, t_end - t_start)
        dynamic_total += dyn
        static_total += stat
        rows.append(TimestepRow(
            t, ledger.timestep_total("injected_flits", t), hops_t,
            ledger.timestep_total("packets", t), busy_max, t_end - t_start,
            dyn, stat))
        t_start = t_end

    train = SpikeTrain(graph.neuron_count, tuple(steps))
    red = redundancy_profile(packet_records)
    report = RunReport(
        workload=workload,
        mode=cfg.mode,
        partitioner=cfg.partitioner,
        config_digest=config_digest,
        timesteps=cfg.timesteps,
        modeled_time_ps=t_start,
        spike_digest=train.digest(),
        total_spikes=train.total_spikes(),
        traffic=dict(ledger.totals),
        energy={"dynamic": dynamic_total, "static": static_total,
                "total": dynamic_total + static_total},
        redundancy={"total_packets": red.total_packets,
                    "effective_packets": red.effective_packets,
                    "payload_flits": red.payload_flits,
                    "ratio": red.ratio, "empty": red.empty},
        per_timestep=rows)
    return RunResult(report, train, packet_records, flit_trace)


@dataclass
class ComparisonResult:
    reports: dict[tuple[str, str], RunReport]
    trains: dict[tuple[str, str], SpikeTrain]
    ratios: dict[str, dict[str, float]]     # per partitioner, baseline/unispike
    spike_digests_equal: bool


def run_comparison(graph: SnnGraph, cfg: SystemConfig,
                   modes=(MODE_BASELINE, MODE_UNISPIKE),
                   partitioners=PARTITIONERS,
                   workload: str = "", config_digest: str = ""
                   ) -> ComparisonResult:
    """Run every (mode, partitioner) cell on identical stimulus."""
    stimulus = build_stimulus(cfg.stimulus, graph.neuron_count, cfg.timesteps,
                              graph.frac_bits)
    reports = {}
    trains = {}
    for part_name in partitioners:
        bundle = deploy(graph, replace(cfg, partitioner=part_name))
        for mode in modes:
            cell_cfg = replace(cfg, partitioner=part_name, mode=mode)
            result = run_experiment(bundle, cell_cfg, stimulus,
                                    workload, config_digest)
            reports[(mode, part_name)] = result.report
            trains[(mode, part_name)] = result.train
    digests = {t.digest() for t in trains.values()}
    ratios = {}
    if MODE_BASELINE in modes and MODE_UNISPIKE in modes:
        for part_name in partitioners:
            ratios[part_name] = compare_reports(
                reports[(MODE_BASELINE, part_name)],
                reports[(MODE_UNISPIKE, part_name)])
    return ComparisonResult(reports, trains, ratios, len(digests) == 1)
