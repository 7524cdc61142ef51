from __future__ import annotations

import json
from dataclasses import replace

import pytest

from scenemem.baselines import no_memory_interface
from scenemem.cli import main, parse_seeds
from scenemem.harness import (
    ABLATION_VARIANTS,
    ENV_TOP_K,
    RunConfig,
    ablation_configs,
    build_dataset,
    evaluate,
    load_dataset,
    run_ablation_suite,
    run_eval,
    save_dataset,
)
from scenemem.mem_write import WRITE_MODES
from scenemem.retrieval import RetrievalConfig
from scenemem.traj_model import iter_jsonl

SEEDS = (1, 2, 3)


def _cfg(ds, **kw):
    return RunConfig(env=ds.env, seeds=SEEDS, **kw)


def test_registry_violations_fail_fast():
    for kw in (dict(env="mars"), dict(method="oracle"), dict(protocol="llm"), dict(write_mode="dense"),
               dict(budget=0), dict(seeds=())):
        with pytest.raises(ValueError):
            RunConfig(**kw)


def test_env_presets():
    assert RunConfig(env="gridworld").retrieval.top_k == ENV_TOP_K["gridworld"] == 32
    assert RunConfig(env="textadv").retrieval.top_k == 24


def test_config_text_round_trip_and_hash():
    cfg = RunConfig(env="textadv", seeds=(4, 5), method="s3mem", write_mode="event_only", budget=96,
                    retrieval=RetrievalConfig(top_k=7, seed_injection=False), rtk=True, compress=False,
                    output_dir="out", data_dir="d", label="x")
    back = RunConfig.from_text(cfg.to_text())
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert replace(cfg, output_dir="elsewhere", label="y").config_hash() == cfg.config_hash()
    assert replace(cfg, budget=192).config_hash() != cfg.config_hash()


def test_missing_files_name_the_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="gridworld.trajectories.jsonl"):
        run_eval(RunConfig(data_dir=str(tmp_path), output_dir=str(tmp_path)))


def test_no_memory_tokens_are_final_observation_cost(small_dataset):
    r = evaluate(_cfg(small_dataset, method="no_memory"), small_dataset).report
    by_ep = {t.episode_id: no_memory_interface(t).token_cost for t in small_dataset.trajectories}
    want = sum(by_ep[q.episode_id] for q in small_dataset.questions) / len(small_dataset.questions)
    assert r.avg_tokens == pytest.approx(want)


def test_rerun_gives_identical_records(tmp_path, small_dataset):
    cfg = _cfg(small_dataset, output_dir=str(tmp_path / "a"))
    run_eval(cfg, small_dataset)
    first = (tmp_path / "a" / f"{cfg.name}.records.jsonl").read_bytes()
    run_eval(cfg, small_dataset)
    assert (tmp_path / "a" / f"{cfg.name}.records.jsonl").read_bytes() == first
    report = json.loads((tmp_path / "a" / f"{cfg.name}.report.json").read_text())
    assert report["config_hash"] == cfg.config_hash()
    rows = list(iter_jsonl(tmp_path / "a" / f"{cfg.name}.records.jsonl"))
    assert set(rows[0]) == {"qid", "family", "pred", "gold", "correct", "tokens", "evidence_steps"}


def test_gold_executor_is_complete(small_dataset):
    res = evaluate(_cfg(small_dataset, protocol="gold_executor"), small_dataset)
    non_adv = [r for r in res.records if r.family != "adversarial"]
    assert sum(r.correct for r in non_adv) / len(non_adv) >= 0.99


def test_env_mismatch_rejected(small_dataset):
    other = "textadv" if small_dataset.env == "gridworld" else "gridworld"
    with pytest.raises(ValueError):
        evaluate(RunConfig(env=other, seeds=SEEDS), small_dataset)


def test_dataset_round_trip_and_checksum(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path)
    back = load_dataset(tmp_path, small_dataset.env)
    assert back.checksum() == small_dataset.checksum()
    sub = load_dataset(tmp_path, small_dataset.env, seeds=(2,))
    assert [t.seed for t in sub.trajectories] == [2]
    assert all(q.episode_id == sub.trajectories[0].episode_id for q in sub.questions)


def test_ablation_grid_shape():
    cfgs = ablation_configs(RunConfig(env="gridworld", seeds=SEEDS))
    assert len(cfgs) == len(ABLATION_VARIANTS) * len(WRITE_MODES) == 20
    assert len({c.config_hash() for c in cfgs}) == 20
    by_label = {c.label: c for c in cfgs}
    assert by_label["gridworld-no_seed-full"].retrieval.seed_injection is False
    assert by_label["gridworld-no_compress-full"].compress is False
    assert by_label["gridworld-top_k16-full"].retrieval.top_k == 16
    assert by_label["gridworld-budget96-full"].budget == 96


def test_no_compress_agrees_with_full_when_gold_evidence_packed(small_dataset):
    full = evaluate(_cfg(small_dataset), small_dataset, keep_packs=True)
    nc = evaluate(_cfg(small_dataset, compress=False), small_dataset, keep_packs=True)
    gold = {q.qid: set(q.gold_evidence_steps) for q in small_dataset.questions}
    checked = 0
    for a, b in zip(full.records, nc.records):
        if gold[a.qid] <= set(a.evidence_steps) and gold[a.qid] <= set(b.evidence_steps):
            assert a.pred == b.pred
            checked += 1
    assert checked > 0


def test_ablation_suite_runs(tmp_path, small_dataset):
    reports = run_ablation_suite(_cfg(small_dataset, output_dir=str(tmp_path)), small_dataset)
    assert len(reports) == 20
    assert len(list(tmp_path.glob("*.report.json"))) == 20


def test_parse_seeds():
    assert parse_seeds("1-3,7") == [1, 2, 3, 7]


# --- CLI smoke --------------------------------------------------------------

def test_cli_end_to_end(tmp_path, capsys):
    data, runs = str(tmp_path / "data"), str(tmp_path / "runs")
    assert main(["gen-env", "--env", "textadv", "--seeds", "1-2", "--data-dir", data]) == 0
    assert main(["gen-qa", "--env", "textadv", "--data-dir", data, "--per-family", "2"]) == 0
    assert main(["build-memory", "--env", "textadv", "--data-dir", data, "--out", str(tmp_path / "mem")]) == 0
    assert len(list((tmp_path / "mem").glob("*.jsonl"))) == 2
    capsys.readouterr()

    assert main(["dump-memory", "--env", "textadv", "--data-dir", data, "--episode", "textadv-seed1",
                 "--step", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["step"] == 0

    assert main(["parse-anchor", "Where was the agent at step 14?"]) == 0
    assert json.loads(capsys.readouterr().out)["target_step"] == 14

    assert main(["answer", "--env", "textadv", "--data-dir", data, "--episode", "textadv-seed1",
                 "What action was executed at step 3?"]) == 0
    out = json.loads(capsys.readouterr().out)
    ds = load_dataset(data, "textadv")
    assert out["answer"] == ds.trajectories[0].steps[3].action

    for method in ("s3mem", "graph_noreader"):
        assert main(["run", "--env", "textadv", "--seeds", "1-2", "--method", method, "--data-dir", data,
                     "--output-dir", runs]) == 0
    capsys.readouterr()
    assert main(["report", "--runs-dir", runs]) == 0
    text = capsys.readouterr().out
    assert "s3mem" in text and "graph_noreader" in text
    assert main(["report", "--runs-dir", runs, "--json"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 2


def test_cli_convert_archive(tmp_path, capsys):
    arch = tmp_path / "a.jsonl"
    arch.write_text("\n".join(json.dumps(d) for d in [
        {"item_id": "b", "timestamp": 2, "kind": "email", "body": "second"},
        {"item_id": "a", "timestamp": 1, "kind": "image", "body": "first"}]) + "\n")
    out = tmp_path / "t.jsonl"
    assert main(["convert-archive", "--input", str(arch), "--out", str(out)]) == 0
    row = next(iter_jsonl(out))
    assert [s["observation"] for s in row["steps"]] == ["first", "second"]


def test_cli_config_file(tmp_path, small_dataset, capsys):
    data = tmp_path / "d"
    save_dataset(small_dataset, data)
    cfg = RunConfig(env=small_dataset.env, seeds=(1,), method="summarize", data_dir=str(data),
                    output_dir=str(tmp_path / "r"))
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_text())
    assert main(["run", "--config", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["config_hash"] == cfg.config_hash()


def test_cli_explicit_paths_and_flags(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("step_budget=30\n")
    traj, qs = tmp_path / "t.jsonl", tmp_path / "q" / "questions.jsonl"
    assert main(["gen-env", "--env", "gridworld", "--seeds", "1..2", "--config", str(cfg), "--out", str(traj)]) == 0
    assert [len(r["steps"]) for r in iter_jsonl(traj)] == [30, 30]
    assert main(["gen-qa", "--traj", str(traj), "--per-family", "1", "--seed", "5", "--out", str(qs)]) == 0
    assert len(list(iter_jsonl(qs))) > 0
    capsys.readouterr()
    assert main(["parse-anchor", "--question", "Where was the agent at step 2?"]) == 0
    assert json.loads(capsys.readouterr().out)["queried_field"] == "location"
