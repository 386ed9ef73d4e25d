"""Per-core deployment artifacts and the on-disk bundle.

A core artifact carries everything one core needs at runtime: its neuron
roster, the incoming synapse table keyed by (source core, source-local
index), per-destination connection bitmaps, and the execution queue plus
checking table produced by the scheduler.  The binary layout is little-endian
throughout (u16/u32 integer widths as noted field by field below).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, asdict

from .graph import SnnGraph, load_binary, save_binary
from .partition import CoreMap, MemoryBudget, Partition, memory_cost
from .schedule import build_checking_table, complete_queue, validate_schedule

Coord = tuple[int, int]


class ArtifactError(Exception):
    """Malformed or internally inconsistent deployment artifact."""


@dataclass(frozen=True)
class SizeReport:
    synapse_bytes: int
    neuron_bytes: int
    post_conn_bytes: int
    checking_table_bytes: int
    synapse_fits: bool
    neuron_fits: bool
    post_conn_fits: bool
    checking_table_fits: bool


@dataclass
class CoreArtifact:
    coord: Coord
    neuron_ids: tuple[int, ...]
    # (src core coord, src local index) -> ((local post index, raw weight), ...)
    # the core's own coord keys its intra-core fan-out
    synapse_table: dict[tuple[Coord, int], tuple[tuple[int, int], ...]]
    dest_map: dict[Coord, frozenset[int]]
    conn_bitmaps: dict[Coord, int]
    exec_queue: tuple[int, ...]
    checking_table: dict[int, tuple[Coord, ...]]
    size_report: SizeReport

    @property
    def local_count(self) -> int:
        return len(self.neuron_ids)

    def local_dests(self, idx: int) -> tuple[Coord, ...]:
        """Remote destinations of one local neuron, row-major order."""
        out = [c for c, members in self.dest_map.items() if idx in members]
        return tuple(sorted(out, key=lambda c: (c[1], c[0])))


@dataclass
class DeploymentBundle:
    mesh_width: int
    mesh_height: int
    frac_bits: int
    graph_digest: str
    budget: MemoryBudget
    cores: list[CoreArtifact]
    graph: SnnGraph

    def core_at(self, coord: Coord) -> CoreArtifact:
        for c in self.cores:
            if c.coord == coord:
                return c
        raise KeyError(coord)


def _checking_table_bytes(table: dict[int, tuple[Coord, ...]]) -> int:
    # 2-byte entry count; per entry a 2-byte neuron index, 2-byte destination
    # count and 4 bytes (x, y as u16) per bound destination
    return 2 + sum(4 + 4 * len(v) for v in table.values())


def build_bundle(graph: SnnGraph, partition: Partition, core_map: CoreMap,
                 budget: MemoryBudget) -> DeploymentBundle:
    """Assemble per-core artifacts from a placed partition.

    Fails if any cluster exceeds its memory budget; the checking-table size
    is reported against its budget but does not fail the build.
    """
    coords = [core_map.coord_of(ci) for ci in range(len(partition.clusters))]
    local_index: dict[int, int] = {}
    for cluster in partition.clusters:
        for i, n in enumerate(cluster):
            local_index[n] = i

    cores = []
    for ci, cluster in enumerate(partition.clusters):
        coord = coords[ci]
        table: dict[tuple[Coord, int], list[tuple[int, int]]] = {}
        dest_sets: dict[Coord, set[int]] = {}
        for i, n in enumerate(cluster):
            for post, raw in graph.posts(n):
                pc = partition.cluster_of[post]
                if pc == ci:
                    key = (coord, i)
                    table.setdefault(key, []).append((local_index[post], raw))
                else:
                    dest_sets.setdefault(coords[pc], set()).add(i)
        # incoming remote edges keyed by the sender's coordinates
        for i, n in enumerate(cluster):
            for pre, raw in graph.reverse_adjacency[n]:
                pc = partition.cluster_of[pre]
                if pc != ci:
                    key = (coords[pc], local_index[pre])
                    table.setdefault(key, []).append((i, raw))

        dest_map = {c: frozenset(m) for c, m in dest_sets.items()}
        queue, check = build_checking_table(dest_map)
        queue = complete_queue(queue, len(cluster))
        problems = validate_schedule(queue, check, dest_map, len(cluster))
        if problems:
            raise ArtifactError(f"core {coord}: {problems[0]}")
        bitmaps = {}
        for c, members in dest_map.items():
            mask = 0
            for i in members:
                mask |= 1 << i
            bitmaps[c] = mask

        cost = memory_cost(cluster, graph, budget, partition.cluster_of)
        if not cost.fits:
            raise ArtifactError(f"core {coord}: cluster exceeds memory budget")
        check_t = {n: tuple(v) for n, v in check.items()}
        ct_bytes = _checking_table_bytes(check_t)
        report = SizeReport(
            cost.synapse_bytes, cost.neuron_bytes, cost.post_conn_bytes, ct_bytes,
            cost.synapse_bytes <= budget.synapse_bytes,
            cost.neuron_bytes <= budget.neuron_bytes,
            cost.post_conn_bytes <= budget.post_conn_bytes,
            ct_bytes <= budget.checking_table_bytes)
        cores.append(CoreArtifact(
            coord=coord,
            neuron_ids=tuple(cluster),
            synapse_table={k: tuple(v) for k, v in sorted(table.items())},
            dest_map=dict(sorted(dest_map.items(), key=lambda kv: (kv[0][1], kv[0][0]))),
            conn_bitmaps=dict(sorted(bitmaps.items(), key=lambda kv: (kv[0][1], kv[0][0]))),
            exec_queue=tuple(queue),
            checking_table=check_t,
            size_report=report))

    return DeploymentBundle(core_map.mesh_width, core_map.mesh_height,
                            graph.frac_bits, graph.digest(), budget, cores, graph)


# ---------------------------------------------------------------------------
# binary core image

_CORE_MAGIC = b"SNCR"


def core_to_bytes(core: CoreArtifact) -> bytes:
    p = [_CORE_MAGIC, struct.pack("<HHHI", 1, core.coord[0], core.coord[1],
                                  core.local_count)]
    p.append(struct.pack(f"<{core.local_count}I", *core.neuron_ids))
    p.append(struct.pack("<I", len(core.synapse_table)))
    for (src, idx), pairs in core.synapse_table.items():
        p.append(struct.pack("<HHHH", src[0], src[1], idx, len(pairs)))
        for post, raw in pairs:
            p.append(struct.pack("<Hh", post, raw))
    bitmap_len = (core.local_count + 7) // 8
    p.append(struct.pack("<I", len(core.conn_bitmaps)))
    for coord, mask in core.conn_bitmaps.items():
        p.append(struct.pack("<HH", coord[0], coord[1]))
        p.append(mask.to_bytes(bitmap_len, "little"))
    p.append(struct.pack("<I", len(core.exec_queue)))
    p.append(struct.pack(f"<{len(core.exec_queue)}H", *core.exec_queue))
    p.append(struct.pack("<H", len(core.checking_table)))
    for n, coords in core.checking_table.items():
        p.append(struct.pack("<HH", n, len(coords)))
        for c in coords:
            p.append(struct.pack("<HH", c[0], c[1]))
    return b"".join(p)


def core_from_bytes(buf: bytes, budget: MemoryBudget) -> CoreArtifact:
    if buf[:4] != _CORE_MAGIC:
        raise ArtifactError("bad core image magic")
    off = 4
    version, x, y, n_local = struct.unpack_from("<HHHI", buf, off)
    off += 10
    if version != 1:
        raise ArtifactError(f"unsupported core image version {version}")
    ids = struct.unpack_from(f"<{n_local}I", buf, off)
    off += 4 * n_local
    (n_entries,) = struct.unpack_from("<I", buf, off)
    off += 4
    table = {}
    for _ in range(n_entries):
        sx, sy, idx, n_pairs = struct.unpack_from("<HHHH", buf, off)
        off += 8
        pairs = []
        for _ in range(n_pairs):
            post, raw = struct.unpack_from("<Hh", buf, off)
            off += 4
            pairs.append((post, raw))
        table[((sx, sy), idx)] = tuple(pairs)
    bitmap_len = (n_local + 7) // 8
    (n_dests,) = struct.unpack_from("<I", buf, off)
    off += 4
    bitmaps = {}
    for _ in range(n_dests):
        dx, dy = struct.unpack_from("<HH", buf, off)
        off += 4
        mask = int.from_bytes(buf[off:off + bitmap_len], "little")
        off += bitmap_len
        bitmaps[(dx, dy)] = mask
    (qlen,) = struct.unpack_from("<I", buf, off)
    off += 4
    queue = struct.unpack_from(f"<{qlen}H", buf, off)
    off += 2 * qlen
    (n_check,) = struct.unpack_from("<H", buf, off)
    off += 2
    check = {}
    for _ in range(n_check):
        n, n_coords = struct.unpack_from("<HH", buf, off)
        off += 4
        coords = []
        for _ in range(n_coords):
            cx, cy = struct.unpack_from("<HH", buf, off)
            off += 4
            coords.append((cx, cy))
        check[n] = tuple(coords)

    dest_map = {c: frozenset(i for i in range(n_local) if mask >> i & 1)
                for c, mask in bitmaps.items()}
    syn = sum(len(v) for v in table.values()) * budget.bytes_per_synapse
    neu = n_local * budget.bytes_per_neuron_state
    post_b = len(bitmaps) * budget.dest_entry_bytes
    ct_bytes = _checking_table_bytes(check)
    report = SizeReport(syn, neu, post_b, ct_bytes,
                        syn <= budget.synapse_bytes, neu <= budget.neuron_bytes,
                        post_b <= budget.post_conn_bytes,
                        ct_bytes <= budget.checking_table_bytes)
    return CoreArtifact((x, y), tuple(ids), table, dest_map, bitmaps,
                        tuple(queue), check, report)


def save_bundle(bundle: DeploymentBundle, path: str) -> None:
    os.makedirs(os.path.join(path, "cores"), exist_ok=True)
    save_binary(bundle.graph, os.path.join(path, "graph.snnb"))
    manifest = {
        "version": 1,
        "mesh_width": bundle.mesh_width,
        "mesh_height": bundle.mesh_height,
        "frac_bits": bundle.frac_bits,
        "graph_digest": bundle.graph_digest,
        "budget": asdict(bundle.budget),
        "cores": [],
    }
    for core in bundle.cores:
        blob = core_to_bytes(core)
        name = f"core_{core.coord[0]}_{core.coord[1]}.bin"
        with open(os.path.join(path, "cores", name), "wb") as f:
            f.write(blob)
        manifest["cores"].append({
            "coord": list(core.coord),
            "file": f"cores/{name}",
            "neurons": core.local_count,
            "sha256": hashlib.sha256(blob).hexdigest(),
            "size_report": asdict(core.size_report),
        })
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_bundle(path: str) -> DeploymentBundle:
    with open(os.path.join(path, "manifest.json")) as f:
        manifest = json.load(f)
    if manifest.get("version") != 1:
        raise ArtifactError("unsupported bundle version")
    budget = MemoryBudget(**manifest["budget"])
    graph = load_binary(os.path.join(path, "graph.snnb"))
    if graph.digest() != manifest["graph_digest"]:
        raise ArtifactError("graph file does not match manifest digest")
    cores = []
    for entry in manifest["cores"]:
        with open(os.path.join(path, entry["file"]), "rb") as f:
            blob = f.read()
        if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise ArtifactError(f"{entry['file']}: checksum mismatch")
        cores.append(core_from_bytes(blob, budget))
    return DeploymentBundle(manifest["mesh_width"], manifest["mesh_height"],
                            manifest["frac_bits"], manifest["graph_digest"],
                            budget, cores, graph)


def validate_bundle(bundle: DeploymentBundle) -> list[str]:
    """Cross-check every core's schedule, bitmaps and sizes; returns violations."""
    problems = []
    seen: dict[int, Coord] = {}
    for core in bundle.cores:
        prefix = f"core {core.coord}"
        for nid in core.neuron_ids:
            if nid in seen:
                problems.append(f"{prefix}: neuron {nid} also on core {seen[nid]}")
            seen[nid] = core.coord
        for coord, members in core.dest_map.items():
            if coord == core.coord:
                problems.append(f"{prefix}: destination map points at itself")
            mask = core.conn_bitmaps.get(coord)
            want = 0
            for i in members:
                want |= 1 << i
            if mask != want:
                problems.append(f"{prefix}: bitmap for {coord} disagrees with map")
        problems += [f"{prefix}: {v}" for v in validate_schedule(
            list(core.exec_queue), {k: list(v) for k, v in core.checking_table.items()},
            core.dest_map, core.local_count)]
        r = core.size_report
        if not (r.synapse_fits and r.neuron_fits and r.post_conn_fits):
            problems.append(f"{prefix}: memory budget exceeded")
    missing = [n for n in range(bundle.graph.neuron_count) if n not in seen]
    if missing:
        problems.append(f"neurons {missing[:8]} not deployed on any core")
    return problems
