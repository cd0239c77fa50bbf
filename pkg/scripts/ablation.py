"""Node attributes alone vs node plus summed edge vectors.

Runs the link-prediction detector twice on the same DoS-shaped logs, once
with node features cut down to the one-hot type block, and prints the
per-seed F1 of both variants.

    python scripts/ablation.py --seeds 10
"""

from __future__ import annotations

import argparse

import numpy as np

from rigkit.auditlog import parse_text
from rigkit.gae import GAEConfig, run_protocol
from rigkit.graph import build_graph
from rigkit.labeler import label_edges
from rigkit.syscalls import load_syscall_table
from rigkit.synth import ScenarioSpec, generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--attack", default="dos")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--mode", choices=["pseudo", "tree"], default="pseudo")
    ap.add_argument("--epochs", type=int, default=10_000)
    ap.add_argument("--duration", type=float, default=900.0)
    args = ap.parse_args()
    width = load_syscall_table("x86-64").width

    full, node = [], []
    print("seed,f1_node_edge,f1_node_only")
    for seed in range(args.seeds):
        s = generate(ScenarioSpec(attack=args.attack, seed=seed, duration=args.duration))
        events, _ = parse_text(s.text)
        g, _ = build_graph(events, args.mode)
        labels, _ = label_edges(g, s.window)
        f1 = [run_protocol(g, labels, width, GAEConfig(epochs=args.epochs, seed=seed,
                                                        node_attrs_only=only)).classification.metrics.f1
              for only in (False, True)]
        full.append(f1[0])
        node.append(f1[1])
        print(f"{seed},{f1[0]:.6f},{f1[1]:.6f}", flush=True)
    print(f"mean,{np.mean(full):.6f},{np.mean(node):.6f}")


if __name__ == "__main__":
    main()
