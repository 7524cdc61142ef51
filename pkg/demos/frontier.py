"""Compare every method on a few seeds and print the accuracy/token frontier."""

from __future__ import annotations

import argparse

from scenemem.evaluation import family_table, frontier_report
from scenemem.harness import METHODS, RunConfig, build_dataset, evaluate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--env", choices=("gridworld", "textadv"), default="gridworld")
    ap.add_argument("--seeds", type=int, default=4, help="use seeds 1..N")
    args = ap.parse_args()

    seeds = tuple(range(1, args.seeds + 1))
    ds = build_dataset(args.env, seeds)
    reports = []
    for method in METHODS:
        reports.append(evaluate(RunConfig(env=args.env, seeds=seeds, method=method), ds).report)
    rtk = RunConfig(env=args.env, seeds=seeds, method="graph_noreader", rtk=True, label="graph_noreader+rtk")
    reports.append(evaluate(rtk, ds).report)

    print(f"{len(ds.questions)} questions over {len(seeds)} {args.env} episodes\n")
    print(frontier_report(reports))
    print()
    print(family_table([r for r in reports if (r.label or r.method) in ("s3mem", "vanilla_rag", "summarize",
                                                                         "graph_noreader+rtk")]))


if __name__ == "__main__":
    main()
