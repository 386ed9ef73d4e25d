"""Experiment configuration: an INI document with five sections.

Every key has a default, so an empty file is a valid experiment.  Unknown
sections or keys are rejected with the offending line number rather than
silently ignored, since a typo like `n_ecx` would otherwise change the
experiment without warning.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field

from .core import CoreTiming, MODE_BASELINE, MODE_UNISPIKE
from .graph import (ConvLayerSpec, SnnGraph, build_brunel, build_conv_topology,
                    build_vogels, load_graph)
from .metrics import EnergyCostTable
from .neurons import params_from_fields
from .noc import MeshConfig
from .partition import MemoryBudget
from .stimulus import StimulusSpec
from .system import PARTITIONERS, SystemConfig


class ConfigError(ValueError):
    """Raised for malformed, unknown, or out-of-range configuration."""


WORKLOAD_KINDS = ("brunel", "vogels", "conv", "file")
MODELS = ("lif", "izhikevich", "adex")


@dataclass(frozen=True)
class WorkloadConfig:
    kind: str = "brunel"
    n_exc: int = 200
    n_inh: int = 50
    conn_prob: float = 0.1
    w_exc: float = 0.1
    w_inh: float = -0.5
    seed: int = 1
    model: str = "lif"
    frac_bits: int = 8
    layers: str = "1x8x8, 4x8x8 k3 s1 p1"
    w_lo: float = 0.05
    w_hi: float = 0.2
    path: str = ""


@dataclass(frozen=True)
class RunConfig:
    mode: str = MODE_UNISPIKE
    timesteps: int = 20
    dt: float = 1.0
    stimulus: str = "poisson"
    stim_amplitude: float = 12.0    # one hit lifts a default LIF past threshold
    stim_rate: float = 0.1
    stim_at: str = "0"
    stim_neurons: str = "all"
    stim_seed: int = 0
    trace: bool = False


@dataclass(frozen=True)
class PartitionConfig:
    partitioner: str = "hsfc-sss"
    placement: str = "hilbert"
    seed: int = 0
    seg_ratio: float = 0.1
    sss_iters: int = 0          # 0 selects the size-scaled default
    sss_t0: float = 0.0         # 0 selects a tenth of the starting objective
    sss_cooling: float = 0.995
    synapse_bytes: int = 103168
    neuron_bytes: int = 3072
    post_conn_bytes: int = 33408
    checking_table_bytes: int = 1152
    bytes_per_synapse: int = 1
    bytes_per_neuron_state: int = 24


@dataclass(frozen=True)
class MeshSection:
    width: int = 4
    height: int = 4
    vcs: int = 4
    vc_buffer_depth: int = 4
    router_pipeline_cycles: int = 2
    link_cycles: int = 1
    noc_period_ps: int = 6250
    watchdog_cycles: int = 50000


@dataclass(frozen=True)
class CoreSection:
    core_period_ps: int = 2000
    update_cycles: int = 4
    decode_cycles_per_accum: int = 1
    gen_cycles_per_flit: int = 1
    max_body: int = 16
    output_queue_packets: int = 8


@dataclass(frozen=True)
class EnergySection:
    router_per_flit: float = 5.0
    link_per_flit: float = 3.0
    neuron_update: float = 10.0
    decode_per_body_flit: float = 2.0
    sram_read_per_byte: float = 0.05
    sram_write_per_byte: float = 0.05
    core_static_per_ps: float = 2e-4
    router_static_per_ps: float = 1e-4


@dataclass(frozen=True)
class ExperimentConfig:
    workload: WorkloadConfig = WorkloadConfig()
    run: RunConfig = RunConfig()
    partition: PartitionConfig = PartitionConfig()
    mesh: MeshSection = MeshSection()
    core: CoreSection = CoreSection()
    energy: EnergySection = EnergySection()

    def digest(self) -> str:
        return hashlib.sha256(render_config(self).encode()).hexdigest()[:16]


_SECTIONS: dict[str, type] = {
    "workload": WorkloadConfig,
    "run": RunConfig,
    "partition": PartitionConfig,
    "mesh": MeshSection,
    "core": CoreSection,
    "energy": EnergySection,
}


def _parse_value(raw: str, target_type: type, where: str):
    raw = raw.strip()
    try:
        if target_type is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if target_type is int:
            return int(raw, 0)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as "
                          f"{target_type.__name__}") from None


def _line_of(text: str, section: str, key: str | None) -> int:
    """Best-effort line number of a section header or of a key inside it."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
            if key is None and current == section:
                return lineno
        elif key is not None and current == section and stripped \
                and not stripped.startswith(("#", ";")):
            name = stripped.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return lineno
    return 0


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    kwargs: dict[str, object] = {}
    for section in parser.sections():
        name = section.lower()
        if name not in _SECTIONS:
            line = _line_of(text, name, None)
            raise ConfigError(f"{source}:{line}: unknown section [{section}]")
        cls = _SECTIONS[name]
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values: dict[str, object] = {}
        for key, raw in parser.items(section):
            if key not in fields:
                line = _line_of(text, name, key)
                raise ConfigError(
                    f"{source}:{line}: unknown key {key!r} in [{section}]")
            values[key] = _parse_value(raw, _field_type(cls, key),
                                       f"{source}: [{section}] {key}")
        kwargs[name] = cls(**values)
    cfg = ExperimentConfig(**kwargs)
    _validate(cfg, source)
    return cfg


def _field_type(cls: type, name: str) -> type:
    default = getattr(cls(), name)
    return type(default)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def _validate(cfg: ExperimentConfig, source: str) -> None:
    w, r, p = cfg.workload, cfg.run, cfg.partition
    if w.kind not in WORKLOAD_KINDS:
        raise ConfigError(f"{source}: workload.kind must be one of "
                          f"{', '.join(WORKLOAD_KINDS)}; got {w.kind!r}")
    if w.model not in MODELS:
        raise ConfigError(f"{source}: workload.model must be one of "
                          f"{', '.join(MODELS)}; got {w.model!r}")
    if w.kind == "file" and not w.path:
        raise ConfigError(f"{source}: workload.kind=file requires workload.path")
    if r.mode not in (MODE_BASELINE, MODE_UNISPIKE):
        raise ConfigError(f"{source}: run.mode must be {MODE_BASELINE} or "
                          f"{MODE_UNISPIKE}; got {r.mode!r}")
    if r.timesteps <= 0:
        raise ConfigError(f"{source}: run.timesteps must be positive")
    if r.stimulus not in ("poisson", "pulse", "constant", "none"):
        raise ConfigError(f"{source}: run.stimulus must be poisson, pulse, "
                          f"constant, or none; got {r.stimulus!r}")
    if p.partitioner not in PARTITIONERS:
        raise ConfigError(f"{source}: partition.partitioner must be one of "
                          f"{', '.join(PARTITIONERS)}; got {p.partitioner!r}")
    if p.placement not in ("hilbert", "row-major"):
        raise ConfigError(f"{source}: partition.placement must be hilbert or "
                          f"row-major; got {p.placement!r}")
    if cfg.mesh.width <= 0 or cfg.mesh.height <= 0:
        raise ConfigError(f"{source}: mesh dimensions must be positive")
    try:
        parse_layers(w.layers)
        parse_int_list(r.stim_at)
        if r.stim_neurons != "all":
            parse_id_set(r.stim_neurons)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_layers(text: str) -> tuple[ConvLayerSpec, ...]:
    """Parse `CxWxH [kK] [sS] [pP]` layer descriptions separated by commas."""
    layers = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        tokens = part.split()
        dims = tokens[0].lower().split("x")
        if len(dims) != 3:
            raise ValueError(f"layer {part!r}: expected CxWxH")
        channels, width, height = (int(d) for d in dims)
        kernel, stride, padding = 1, 1, 0
        for tok in tokens[1:]:
            tok = tok.lower()
            if tok.startswith("k"):
                kernel = int(tok[1:])
            elif tok.startswith("s"):
                stride = int(tok[1:])
            elif tok.startswith("p"):
                padding = int(tok[1:])
            else:
                raise ValueError(f"layer {part!r}: unknown token {tok!r}")
        layers.append(ConvLayerSpec(channels, width, height, kernel, stride,
                                    padding))
    if not layers:
        raise ValueError("layers: at least one layer required")
    return tuple(layers)


def parse_int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            out.append(int(part))
    return tuple(out)


def parse_id_set(text: str) -> tuple[int, ...]:
    """Parse `0-15, 64, 100-103` style neuron id lists."""
    ids: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"id range {part!r} is reversed")
            ids.update(range(lo_i, hi_i + 1))
        else:
            ids.add(int(part))
    return tuple(sorted(ids))


def build_graph(cfg: ExperimentConfig) -> SnnGraph:
    w = cfg.workload
    model = params_from_fields(w.model, {})
    if w.kind == "brunel":
        return build_brunel(w.n_exc, w.n_inh, w.conn_prob, w.w_exc, w.w_inh,
                            seed=w.seed, model=model, frac_bits=w.frac_bits)
    if w.kind == "vogels":
        return build_vogels(w.n_exc, w.n_inh, w.conn_prob, w.w_exc, w.w_inh,
                            seed=w.seed, model=model, frac_bits=w.frac_bits)
    if w.kind == "conv":
        return build_conv_topology(parse_layers(w.layers), seed=w.seed,
                                   model=model, frac_bits=w.frac_bits,
                                   w_lo=w.w_lo, w_hi=w.w_hi)
    return load_graph(w.path)


def make_stimulus_spec(cfg: ExperimentConfig) -> StimulusSpec:
    r = cfg.run
    neurons = None if r.stim_neurons == "all" else parse_id_set(r.stim_neurons)
    return StimulusSpec(kind=r.stimulus, amplitude=r.stim_amplitude,
                        rate=r.stim_rate, at=parse_int_list(r.stim_at),
                        neurons=neurons, seed=r.stim_seed)


def to_system_config(cfg: ExperimentConfig) -> SystemConfig:
    p, m, c, e = cfg.partition, cfg.mesh, cfg.core, cfg.energy
    return SystemConfig(
        mesh=MeshConfig(m.width, m.height, m.vcs, m.vc_buffer_depth,
                        m.router_pipeline_cycles, m.link_cycles,
                        m.noc_period_ps, m.watchdog_cycles),
        timing=CoreTiming(c.core_period_ps, c.update_cycles,
                          c.decode_cycles_per_accum, c.gen_cycles_per_flit,
                          c.max_body, c.output_queue_packets),
        energy=EnergyCostTable(e.router_per_flit, e.link_per_flit,
                               e.neuron_update, e.decode_per_body_flit,
                               e.sram_read_per_byte, e.sram_write_per_byte,
                               e.core_static_per_ps, e.router_static_per_ps),
        budget=MemoryBudget(p.synapse_bytes, p.neuron_bytes, p.post_conn_bytes,
                            p.checking_table_bytes, p.bytes_per_synapse,
                            p.bytes_per_neuron_state),
        stimulus=make_stimulus_spec(cfg),
        mode=cfg.run.mode,
        partitioner=p.partitioner,
        placement=p.placement,
        timesteps=cfg.run.timesteps,
        dt=cfg.run.dt,
        partition_seed=p.seed,
        seg_ratio=p.seg_ratio,
        sss_iters=p.sss_iters or None,
        sss_t0=p.sss_t0 or None,
        sss_cooling=p.sss_cooling,
        trace=cfg.run.trace,
    )


def override_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Retarget every stochastic stage (workload, refinement, stimulus)."""
    return dataclasses.replace(
        cfg,
        workload=dataclasses.replace(cfg.workload, seed=seed),
        partition=dataclasses.replace(cfg.partition, seed=seed),
        run=dataclasses.replace(cfg.run, stim_seed=seed))


def render_config(cfg: ExperimentConfig) -> str:
    """Render the fully resolved configuration as an INI document."""
    out = io.StringIO()
    for section, cls in _SECTIONS.items():
        obj = getattr(cfg, section)
        out.write(f"[{section}]\n")
        for f in dataclasses.fields(cls):
            value = getattr(obj, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            out.write(f"{f.name} = {value}\n")
        out.write("\n")
    return out.getvalue()
