"""Deployment partitioning: budgeted clustering of neurons onto cores.

The pipeline is: order neurons along a locality-preserving curve, cut the
order greedily into clusters that fit the per-core memory budget, optionally
refine by annealed segment swaps that minimise the number of distinct remote
destination clusters, then place clusters onto mesh coordinates.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .graph import SnnGraph
from .hilbert import hilbert_cells, hilbert_index, order_for

Coord = tuple[int, int]


@dataclass(frozen=True)
class MemoryBudget:
    """Per-core SRAM budgets in bytes plus the cost coefficients.

    A destination entry stores a 2-byte core coordinate plus a connection
    bitmap over the core's neuron capacity, so its size follows from the
    neuron budget.
    """

    synapse_bytes: int = 103168        # 100.75 KB
    neuron_bytes: int = 3072           # 3 KB
    post_conn_bytes: int = 33408       # 32.625 KB
    checking_table_bytes: int = 1152   # 1.125 KB
    bytes_per_synapse: int = 1
    bytes_per_neuron_state: int = 24

    def __post_init__(self):
        for name in ("synapse_bytes", "neuron_bytes", "post_conn_bytes",
                     "checking_table_bytes", "bytes_per_synapse",
                     "bytes_per_neuron_state"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def neuron_capacity(self) -> int:
        return self.neuron_bytes // self.bytes_per_neuron_state

    @property
    def dest_entry_bytes(self) -> int:
        return 2 + (self.neuron_capacity + 7) // 8


@dataclass(frozen=True)
class Partition:
    """Exact cover of all neurons by ordered clusters."""

    clusters: tuple[tuple[int, ...], ...]
    neuron_count: int
    cluster_of: tuple[int, ...]

    @staticmethod
    def from_clusters(clusters, neuron_count: int) -> "Partition":
        of = [-1] * neuron_count
        for ci, cluster in enumerate(clusters):
            for n in cluster:
                if not (0 <= n < neuron_count):
                    raise ValueError(f"neuron {n} out of range")
                if of[n] != -1:
                    raise ValueError(f"neuron {n} assigned twice")
                of[n] = ci
        missing = of.count(-1)
        if missing:
            raise ValueError(f"{missing} neurons left unassigned")
        return Partition(tuple(tuple(c) for c in clusters), neuron_count, tuple(of))


@dataclass(frozen=True)
class CoreMap:
    """Cluster index -> mesh coordinate placement."""

    mesh_width: int
    mesh_height: int
    placement: tuple[Coord, ...]

    def coord_of(self, cluster_idx: int) -> Coord:
        return self.placement[cluster_idx]


@dataclass(frozen=True)
class MemoryCost:
    synapse_bytes: int
    neuron_bytes: int
    post_conn_bytes: int
    fits: bool


def memory_cost(cluster, graph: SnnGraph, budget: MemoryBudget,
                cluster_of) -> MemoryCost:
    """Cost of one cluster under a complete assignment.

    ``cluster_of`` maps every neuron to its cluster index; the cluster's own
    index is taken from its first member.  Destination entries count distinct
    remote clusters only, since local fan-out lives in the core's own synapse
    table.
    """
    members = list(cluster)
    if not members:
        return MemoryCost(0, 0, 0, True)
    self_idx = cluster_of[members[0]]
    syn = sum(graph.in_degree(n) for n in members) * budget.bytes_per_synapse
    neu = len(members) * budget.bytes_per_neuron_state
    dests = set()
    for n in members:
        for post, _ in graph.posts(n):
            pc = cluster_of[post]
            if pc != self_idx:
                dests.add(pc)
    post_bytes = len(dests) * budget.dest_entry_bytes
    fits = (syn <= budget.synapse_bytes and neu <= budget.neuron_bytes
            and post_bytes <= budget.post_conn_bytes)
    return MemoryCost(syn, neu, post_bytes, fits)


def hsfc_order(graph: SnnGraph) -> list[int]:
    """Locality order: (layer, curve index within the layer grid, channel).

    Neurons of a tagged graph that share a spatial position end up adjacent
    regardless of channel.  Untagged graphs keep id order.
    """
    if graph.layer_tags is None:
        return list(range(graph.neuron_count))
    dims: dict[int, tuple[int, int]] = {}
    for tag in graph.layer_tags:
        w, h = dims.get(tag.layer, (0, 0))
        dims[tag.layer] = (max(w, tag.x + 1), max(h, tag.y + 1))
    orders = {layer: order_for(w, h) for layer, (w, h) in dims.items()}

    def key(nid: int):
        t = graph.layer_tags[nid]
        return (t.layer, hilbert_index(t.x, t.y, orders[t.layer]), t.channel, nid)

    return sorted(range(graph.neuron_count), key=key)


def _greedy_cut(order, graph: SnnGraph, budget: MemoryBudget,
                cap_limit: int) -> list[list[int]]:
    # Destinations not yet assigned are estimated as one shared future entry;
    # the caller re-validates with the final assignment and tightens cap_limit
    # if the estimate was too optimistic.
    FUTURE = -1
    assigned: dict[int, int] = {}
    clusters: list[list[int]] = []
    cur: list[int] = []
    cur_syn = 0
    cur_dests: set[int] = set()

    def flush():
        nonlocal cur, cur_syn, cur_dests
        if cur:
            clusters.append(cur)
            cur = []
            cur_syn = 0
            cur_dests = set()

    for n in order:
        ci = len(clusters)
        add_syn = graph.in_degree(n) * budget.bytes_per_synapse
        trial = cur_dests | {assigned.get(post, FUTURE) for post, _ in graph.posts(n)}
        trial.discard(ci)
        ok = (len(cur) < cap_limit
              and cur_syn + add_syn <= budget.synapse_bytes
              and (len(cur) + 1) * budget.bytes_per_neuron_state <= budget.neuron_bytes
              and len(trial) * budget.dest_entry_bytes <= budget.post_conn_bytes)
        if not ok and cur:
            flush()
            ci = len(clusters)
            trial = {assigned.get(post, FUTURE) for post, _ in graph.posts(n)}
            trial.discard(ci)
        cur.append(n)
        assigned[n] = ci
        cur_syn += add_syn
        cur_dests = trial
    flush()
    return clusters


def initial_partition(order, graph: SnnGraph, budget: MemoryBudget) -> Partition:
    """Greedy segmentation of the given neuron order under the budget."""
    order = list(order)
    if sorted(order) != list(range(graph.neuron_count)):
        raise ValueError("order must be a permutation of all neurons")
    for n in range(graph.neuron_count):
        has_remote = any(post != n for post, _ in graph.posts(n))
        if (graph.in_degree(n) * budget.bytes_per_synapse > budget.synapse_bytes
                or budget.bytes_per_neuron_state > budget.neuron_bytes
                or (has_remote and budget.dest_entry_bytes > budget.post_conn_bytes)):
            raise ValueError(f"neuron {n} alone exceeds the memory budget")

    cap = max(1, budget.neuron_capacity)
    while True:
        clusters = _greedy_cut(order, graph, budget, cap)
        part = Partition.from_clusters(clusters, graph.neuron_count)
        bad = [ci for ci, c in enumerate(part.clusters)
               if not memory_cost(c, graph, budget, part.cluster_of).fits]
        if not bad:
            return part
        if cap == 1:
            raise ValueError(f"cluster of neuron {part.clusters[bad[0]][0]} cannot "
                             "be made to fit the budget")
        cap = max(1, cap // 2)


def destination_objective(partition: Partition, graph: SnnGraph) -> int:
    """Total over clusters of the number of distinct remote destination
    clusters; the quantity minimised by segment-swap refinement."""
    j = 0
    for ci, cluster in enumerate(partition.clusters):
        dests = set()
        for n in cluster:
            for post, _ in graph.posts(n):
                pc = partition.cluster_of[post]
                if pc != ci:
                    dests.add(pc)
        j += len(dests)
    return j


class _SwapState:
    """Incremental bookkeeping for segment-swap proposals.

    Per cluster we keep a multiset of destination clusters over all outgoing
    synapses (self included) plus the incoming-synapse byte load, so both the
    objective delta and the budget check of a proposal are O(degree of the
    moved neurons) instead of O(synapses).
    """

    def __init__(self, partition: Partition, graph: SnnGraph, budget: MemoryBudget):
        self.graph = graph
        self.budget = budget
        self.clusters = [list(c) for c in partition.clusters]
        self.cluster_of = list(partition.cluster_of)
        self.out_count: list[dict[int, int]] = [dict() for _ in self.clusters]
        self.in_syn = [0] * len(self.clusters)
        self.j_total = 0
        for ci, cluster in enumerate(self.clusters):
            for n in cluster:
                self.in_syn[ci] += graph.in_degree(n)
                for post, _ in graph.posts(n):
                    self._inc(ci, self.cluster_of[post])

    def _inc(self, c: int, k: int) -> None:
        m = self.out_count[c]
        if k in m:
            m[k] += 1
        else:
            m[k] = 1
            if k != c:
                self.j_total += 1

    def _dec(self, c: int, k: int) -> None:
        m = self.out_count[c]
        v = m[k] - 1
        if v == 0:
            del m[k]
            if k != c:
                self.j_total -= 1
        else:
            m[k] = v

    def move(self, n: int, to: int) -> None:
        frm = self.cluster_of[n]
        posts = self.graph.posts(n)
        rev = self.graph.reverse_adjacency[n]
        for post, _ in posts:
            self._dec(frm, self.cluster_of[post])
        for pre, _ in rev:
            if pre != n:
                self._dec(self.cluster_of[pre], frm)
        self.cluster_of[n] = to
        for post, _ in posts:
            self._inc(to, self.cluster_of[post])
        for pre, _ in rev:
            if pre != n:
                self._inc(self.cluster_of[pre], to)
        deg = len(rev)
        self.in_syn[frm] -= deg
        self.in_syn[to] += deg

    def fits(self, c: int) -> bool:
        b = self.budget
        dest_entries = sum(1 for k in self.out_count[c] if k != c)
        return (self.in_syn[c] * b.bytes_per_synapse <= b.synapse_bytes
                and len(self.clusters[c]) * b.bytes_per_neuron_state <= b.neuron_bytes
                and dest_entries * b.dest_entry_bytes <= b.post_conn_bytes)


def sss_refine(partition: Partition, graph: SnnGraph, budget: MemoryBudget,
               seed: int = 0, iters: int | None = None, t0: float | None = None,
               cooling: float = 0.995, seg_ratio: float = 0.1) -> Partition:
    """Stochastic segment swaps between clusters, annealed on the destination
    objective.

    Each proposal exchanges equal-length contiguous segments between two
    uniformly chosen clusters; it is accepted only if every cluster whose
    memory cost changed still fits the budget, and the objective change
    passes the usual Metropolis rule.  Returns the best partition observed.
    """
    k = len(partition.clusters)
    if k < 2:
        return partition
    rng = random.Random(seed)
    state = _SwapState(partition, graph, budget)
    min_size = min(len(c) for c in state.clusters)
    seg_len = max(1, min(min_size, math.floor(seg_ratio * min_size)))
    if iters is None:
        iters = 200 * k
    j0 = state.j_total
    if t0 is None:
        t0 = j0 / 10.0
    temp = float(t0)
    best_j = j0
    best = [list(c) for c in state.clusters]

    for _ in range(iters):
        a = rng.randrange(k)
        b = rng.randrange(k - 1)
        if b >= a:
            b += 1
        ca, cb = state.clusters[a], state.clusters[b]
        sa = rng.randrange(len(ca) - seg_len + 1)
        sb = rng.randrange(len(cb) - seg_len + 1)
        seg_a = ca[sa:sa + seg_len]
        seg_b = cb[sb:sb + seg_len]
        j_before = state.j_total
        for n in seg_a:
            state.move(n, b)
        for n in seg_b:
            state.move(n, a)
        ca[sa:sa + seg_len] = seg_b
        cb[sb:sb + seg_len] = seg_a
        dj = state.j_total - j_before

        affected = {a, b}
        for n in seg_a + seg_b:
            for pre, _ in graph.reverse_adjacency[n]:
                affected.add(state.cluster_of[pre])
        accept = all(state.fits(c) for c in sorted(affected))
        if accept and dj >= 0:
            if temp > 0.0:
                prob = math.exp(-dj / temp)
            else:
                prob = 1.0 if dj == 0 else 0.0
            accept = rng.random() < prob
        if accept:
            if state.j_total < best_j:
                best_j = state.j_total
                best = [list(c) for c in state.clusters]
        else:
            ca[sa:sa + seg_len] = seg_a
            cb[sb:sb + seg_len] = seg_b
            for n in seg_b:
                state.move(n, b)
            for n in seg_a:
                state.move(n, a)
        temp *= cooling

    return Partition.from_clusters(best, graph.neuron_count)


def map_clusters(partition: Partition, mesh_width: int, mesh_height: int,
                 policy: str = "hilbert") -> CoreMap:
    """Place clusters onto mesh coordinates in curve or row-major order, so
    that clusters adjacent in the partition land on nearby cores."""
    k = len(partition.clusters)
    if mesh_width < 1 or mesh_height < 1:
        raise ValueError("mesh dimensions must be positive")
    if k > mesh_width * mesh_height:
        raise ValueError(f"{k} clusters exceed {mesh_width}x{mesh_height} mesh")
    if policy == "hilbert":
        cells = hilbert_cells(mesh_width, mesh_height)
    elif policy == "row-major":
        cells = [(x, y) for y in range(mesh_height) for x in range(mesh_width)]
    else:
        raise ValueError(f"unknown placement policy {policy!r}")
    return CoreMap(mesh_width, mesh_height, tuple(cells[:k]))
