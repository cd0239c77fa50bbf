"""Vertex, edge and interaction counts as a log is replayed.

Writes one CSV per (workload, mode) into --out-dir:

* ``fixed``: long-running programs over a fixed set of files, so vertex and
  edge counts level off while interactions keep climbing;
* ``mixed``: the default workload, whose short-lived helpers add a fresh
  process node per run in tree mode only.

    python scripts/growth_curves.py --out-dir growth/
"""

from __future__ import annotations

import argparse
from pathlib import Path

from rigkit.auditlog import parse_text
from rigkit.growth import growth, series_to_csv
from rigkit.synth import ScenarioSpec, default_profiles, generate


def workloads(duration: float, seed: int) -> dict[str, ScenarioSpec]:
    fixed = default_profiles()
    for p in fixed:
        p.short_lived, p.temp_rate = False, 0.0
    return {
        "fixed": ScenarioSpec(duration=duration, profiles=fixed, noise_rate=0.0, seed=seed),
        "mixed": ScenarioSpec(duration=duration, seed=seed),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--duration", type=float, default=1800.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--stride", type=int, default=200)
    ap.add_argument("--out-dir", default="growth")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in workloads(args.duration, args.seed).items():
        events, _ = parse_text(generate(spec).text)
        for mode in ("pseudo", "tree"):
            series = growth(events, mode, stride=args.stride)
            path = out / f"{name}_{mode}.csv"
            path.write_text(series_to_csv(series))
            last = series.points[-1]
            print(f"{path}: {last.events} events, {last.vertices} vertices, {last.edges} edges, "
                  f"{last.interactions} interactions")


if __name__ == "__main__":
    main()
