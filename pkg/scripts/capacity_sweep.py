#!/usr/bin/env python3
"""Sweep per-core neuron capacity and measure how the merged transmission
mode's advantage scales with mesh pressure.

Smaller cores spread a fixed network over more routers, so the same spike
volume turns into more remote packets and more contention.  Merged dispatch
removes duplicate head flits, which matters more the hotter the mesh gets;
this sweep makes that trend visible in one table.

Example:
    python scripts/capacity_sweep.py --capacities 32,64,128 --timesteps 20
"""

import argparse
import csv
import math
import sys
import time
from dataclasses import replace

from spikenoc.config import parse_layers
from spikenoc.core import MODE_BASELINE, MODE_UNISPIKE
from spikenoc.graph import build_conv_topology, reference_simulate
from spikenoc.metrics import compare_reports
from spikenoc.neurons import LifParams
from spikenoc.noc import MeshConfig
from spikenoc.partition import MemoryBudget, hsfc_order, initial_partition
from spikenoc.stimulus import StimulusSpec, build_stimulus
from spikenoc.system import SystemConfig, deploy, run_experiment


def mesh_dims(clusters: int) -> tuple[int, int]:
    w = max(1, math.ceil(math.sqrt(clusters)))
    return w, math.ceil(clusters / w)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--layers", default="1x16x16, 8x16x16 k3 s1 p1",
                    help="conv topology (CxWxH [kK] [sS] [pP], ...)")
    ap.add_argument("--capacities", default="32,48,64,96,128",
                    help="neurons per core, comma separated")
    ap.add_argument("--timesteps", type=int, default=20)
    ap.add_argument("--amplitude", type=float, default=12.0,
                    help="constant drive on the input layer")
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", help="also write the table as CSV")
    args = ap.parse_args(argv)

    layers = parse_layers(args.layers)
    graph = build_conv_topology(layers, seed=args.seed,
                                model=LifParams(refractory_steps=0))
    input_neurons = tuple(range(layers[0].channels * layers[0].width
                                * layers[0].height))
    spec = StimulusSpec(kind="constant", amplitude=args.amplitude,
                        neurons=input_neurons)
    stimulus = build_stimulus(spec, graph.neuron_count, args.timesteps,
                              graph.frac_bits)
    reference = reference_simulate(graph, stimulus, args.timesteps, 1.0)
    print(f"network: {graph.neuron_count} neurons, {graph.synapse_count} "
          f"synapses, {reference.total_spikes()} reference spikes over "
          f"{args.timesteps} steps")

    header = ["capacity", "cores", "mesh", "saving", "speedup",
              "energy_eff", "lossless", "seconds"]
    print("  ".join(f"{h:>10}" for h in header))
    rows = []
    for cap in (int(c) for c in args.capacities.split(",")):
        budget = MemoryBudget(neuron_bytes=cap * 24)
        clusters = len(initial_partition(hsfc_order(graph), graph,
                                         budget).clusters)
        w, h = mesh_dims(clusters)
        cfg = SystemConfig(mesh=MeshConfig(w, h), budget=budget,
                           stimulus=spec, timesteps=args.timesteps,
                           partitioner="hsfc")
        t0 = time.monotonic()
        bundle = deploy(graph, cfg)
        base = run_experiment(bundle, replace(cfg, mode=MODE_BASELINE),
                              stimulus)
        uni = run_experiment(bundle, replace(cfg, mode=MODE_UNISPIKE),
                             stimulus)
        seconds = time.monotonic() - t0
        ratios = compare_reports(base.report, uni.report)
        lossless = (base.train.digest() == uni.train.digest()
                    == reference.digest())
        row = [cap, len(bundle.cores), f"{w}x{h}",
               f"{ratios['traffic_saving']:.3f}",
               f"{ratios['speedup']:.3f}",
               f"{ratios['energy_efficiency']:.3f}",
               "yes" if lossless else "NO", f"{seconds:.1f}"]
        rows.append(row)
        print("  ".join(f"{str(v):>10}" for v in row))
        if not lossless:
            print("error: spike trains diverged, aborting", file=sys.stderr)
            return 1

    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
