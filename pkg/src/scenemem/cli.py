"""Command-line entry point: dataset generation, memory inspection, single answers, runs and reports."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from .anchor import extract_anchors
from .answer import PROTOCOLS
from .evaluation import RunReport, family_table, frontier_report
from .harness import (
    DEFAULT_PER_FAMILY,
    ENVS,
    METHODS,
    QA_SEED,
    Dataset,
    RunConfig,
    evaluate,
    load_dataset,
    questions_path,
    run_ablation_suite,
    run_eval,
    trajectories_path,
)
from .env_sim import simulate
from .mem_write import WRITE_MODES, dump_store, write_trajectory
from .qa_gen import QAItem, generate_questions, save_questions
from .traj_model import convert_archive_to_pseudo_trajectory, load_archive, load_trajectories, save_trajectories


def parse_seeds(text: str) -> List[int]:
    """"1-24", "1..24" or "1,3,5" (ranges inclusive)."""
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip().replace("..", "-")
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.from_text(Path(args.config).read_text())
        return replace(cfg, output_dir=args.output_dir or cfg.output_dir, data_dir=args.data_dir or cfg.data_dir)
    cfg = RunConfig(env=args.env, seeds=tuple(args.seeds), method=args.method, protocol=args.protocol,
                    write_mode=args.write_mode, budget=args.budget, rtk=args.rtk,
                    output_dir=args.output_dir or "runs", data_dir=args.data_dir or "data", label=args.label)
    r = cfg.retrieval
    r = replace(r, top_k=args.top_k or r.top_k, seed_injection=not args.no_seed)
    return replace(cfg, retrieval=r, compress=not args.no_compress)


def _sim_overrides(path: Optional[str]) -> dict:
    """Simulator config overrides from a key=value file; integer values are converted."""
    if not path:
        return {}
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SystemExit(f"bad config line {raw!r} in {path}")
        value = value.strip()
        out[key.strip()] = int(value) if value.lstrip("-").isdigit() else value
    return out


def cmd_gen_env(args) -> int:
    overrides = _sim_overrides(args.config)
    trajs = [simulate(args.env, s, **overrides) for s in args.seeds]
    out = Path(args.out) if args.out else trajectories_path(args.data_dir, args.env)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_trajectories(out, trajs)
    print(f"wrote {len(trajs)} trajectories to {out}")
    return 0


def cmd_gen_qa(args) -> int:
    trajs = load_trajectories(args.traj or trajectories_path(args.data_dir, args.env))
    skipped: List[str] = []
    items: List[QAItem] = []
    for t in trajs:
        items.extend(generate_questions(t, args.per_family, args.qa_seed, skipped))
    out = Path(args.out) if args.out else questions_path(args.data_dir, args.env)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_questions(out, items)
    for msg in skipped:
        print(msg, file=sys.stderr)
    print(f"wrote {len(items)} questions to {out}")
    return 0


def _episode(args):
    ds = load_dataset(args.data_dir, args.env)
    for t in ds.trajectories:
        if t.episode_id == args.episode:
            return ds, t
    raise SystemExit(f"no episode {args.episode!r} in {trajectories_path(args.data_dir, args.env)}")


def cmd_build_memory(args) -> int:
    trajs = load_trajectories(trajectories_path(args.data_dir, args.env))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t in trajs:
        dump_store(out / f"{t.episode_id}.{args.write_mode}.jsonl", write_trajectory(t, args.write_mode))
    print(f"wrote {len(trajs)} memory stores to {out}")
    return 0


def cmd_dump_memory(args) -> int:
    _, t = _episode(args)
    store = write_trajectory(t, args.write_mode)
    units = store.units if args.step is None else [store.units[args.step]]
    for u in units:
        print(json.dumps(u.to_dict(), sort_keys=True))
    return 0


def cmd_parse_anchor(args) -> int:
    question = args.question_opt or args.question
    if not question:
        raise SystemExit("parse-anchor needs a question")
    print(extract_anchors(question).to_json())
    return 0


def cmd_answer(args) -> int:
    args.data_dir = args.data_dir or "data"
    ds, t = _episode(args)
    q = QAItem(qid="cli/0", episode_id=t.episode_id, question=args.question, gold_answer="", family="adhoc")
    cfg = replace(_config(args), seeds=(t.seed,))
    result = evaluate(cfg, Dataset(ds.env, (t,), (q,)), keep_packs=True)
    pack = result.packs[q.qid]
    print(json.dumps({"answer": result.records[0].pred, "anchors": extract_anchors(args.question).to_dict(),
                      "tokens": pack.token_cost, "evidence": [line for _, line in pack.lines]}, indent=1))
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    report = run_eval(cfg)
    print(report.to_json())
    return 0


def cmd_ablate(args) -> int:
    reports = run_ablation_suite(_config(args))
    print(frontier_report(reports))
    return 0


def cmd_convert_archive(args) -> int:
    items = load_archive(args.input)
    t = convert_archive_to_pseudo_trajectory(items, episode_id=args.episode_id)
    save_trajectories(args.out, [t])
    print(f"wrote {len(t.steps)} pseudo-steps to {args.out}")
    return 0


def cmd_report(args) -> int:
    paths = sorted(Path(args.runs_dir).glob("*.report.json"))
    if not paths:
        raise SystemExit(f"no *.report.json files in {args.runs_dir}")
    reports = [RunReport.from_dict(json.loads(p.read_text())) for p in paths]
    if args.json:
        print(frontier_report(reports, as_json=True))
    else:
        print(frontier_report(reports))
        print()
        print(family_table(reports))
    return 0


def _add_data(p) -> None:
    p.add_argument("--env", choices=ENVS, default="gridworld")
    p.add_argument("--data-dir", default="data")


def _add_run(p) -> None:
    p.add_argument("--env", choices=ENVS, default="gridworld")
    p.add_argument("--seeds", type=parse_seeds, default=list(range(1, 25)))
    p.add_argument("--method", choices=METHODS, default="s3mem")
    p.add_argument("--protocol", choices=PROTOCOLS, default="current")
    p.add_argument("--write-mode", choices=WRITE_MODES, default="full")
    p.add_argument("--budget", type=int, default=192)
    p.add_argument("--top-k", type=int, default=None, help="defaults to the per-env preset")
    p.add_argument("--rtk", type=_on_off, default=False, metavar="{on,off}")
    p.add_argument("--no-seed", action="store_true", help="disable anchor seed injection")
    p.add_argument("--no-compress", action="store_true", help="emit full lines instead of a budgeted pack")
    p.add_argument("--config", default=None, help="key=value run config file")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--label", default="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenemem", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="simulate trajectories")
    _add_data(p)
    p.add_argument("--seeds", type=parse_seeds, default=list(range(1, 25)))
    p.add_argument("--config", default=None, help="key=value simulator overrides, e.g. step_budget=30")
    p.add_argument("--out", default=None, help="defaults to <data-dir>/<env>.trajectories.jsonl")
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("gen-qa", help="generate questions for saved trajectories")
    _add_data(p)
    p.add_argument("--per-family", type=int, default=DEFAULT_PER_FAMILY)
    p.add_argument("--qa-seed", "--seed", dest="qa_seed", type=int, default=QA_SEED)
    p.add_argument("--traj", default=None, help="defaults to <data-dir>/<env>.trajectories.jsonl")
    p.add_argument("--out", default=None, help="defaults to <data-dir>/<env>.questions.jsonl")
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("build-memory", help="write memory stores for every trajectory")
    _add_data(p)
    p.add_argument("--write-mode", choices=WRITE_MODES, default="full")
    p.add_argument("--out", default="memory")
    p.set_defaults(func=cmd_build_memory)

    p = sub.add_parser("dump-memory", help="print memory units of one episode")
    _add_data(p)
    p.add_argument("--episode", required=True)
    p.add_argument("--write-mode", choices=WRITE_MODES, default="full")
    p.add_argument("--step", type=int, default=None)
    p.set_defaults(func=cmd_dump_memory)

    p = sub.add_parser("parse-anchor", help="extract the anchor tuple of a question")
    p.add_argument("question", nargs="?")
    p.add_argument("--question", dest="question_opt", default=None)
    p.set_defaults(func=cmd_parse_anchor)

    p = sub.add_parser("answer", help="answer one question against one episode")
    _add_run(p)
    p.add_argument("--episode", required=True)
    p.add_argument("question")
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("run", help="evaluate one configuration")
    _add_run(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="run the structured-memory ablation grid")
    _add_run(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("convert-archive", help="turn a timestamped archive into a pseudo-trajectory")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--episode-id", default="archive")
    p.set_defaults(func=cmd_convert_archive)

    p = sub.add_parser("report", help="frontier and per-family tables over saved reports")
    p.add_argument("--runs-dir", default="runs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
