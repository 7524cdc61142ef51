"""Frozen run configurations, dataset persistence, evaluation runs and ablation sweeps."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .anchor import extract_anchors
from .answer import PROTOCOLS, answer_with
from .baselines import (
    build_chunk_index,
    build_neighbor_store,
    full_history_interface,
    graph_build,
    graph_retrieve,
    neighbor_retrieve,
    no_memory_interface,
    rtk_compress,
    summarize_then_answer_interface,
    vanilla_rag_retrieve,
)
from .env_sim import simulate
from .evaluation import RunReport, exact_match, score_run
from .mem_write import WRITE_MODES, write_trajectory
from .packer import DEFAULT_BUDGET, TIGHT_BUDGET, EvidencePack, no_compress_interface, pack_evidence
from .qa_gen import QAItem, generate_questions, load_questions, save_questions
from .retrieval import RetrievalConfig, retrieve
from .traj_model import Trajectory, load_trajectories, save_trajectories, write_jsonl

ENVS = ("gridworld", "textadv")
METHODS = ("no_memory", "vanilla_rag", "graph_noreader", "full_history", "summarize", "s3mem",
           "amem_like", "memoryos_like", "lightmem_like")
ABLATION_VARIANTS = ("full", "no_seed", "no_compress", "top_k16", "budget96")
ENV_TOP_K = {"gridworld": 32, "textadv": 24}
DEFAULT_SEEDS = tuple(range(1, 25))
DEFAULT_PER_FAMILY = 3
QA_SEED = 0


def env_retrieval(env: str) -> RetrievalConfig:
    return RetrievalConfig(top_k=ENV_TOP_K[env])


@dataclass(frozen=True)
class RunConfig:
    env: str = "gridworld"
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    method: str = "s3mem"
    protocol: str = "current"
    write_mode: str = "full"
    retrieval: Optional[RetrievalConfig] = None  # None selects the per-env preset
    budget: int = DEFAULT_BUDGET
    rtk: bool = False
    compress: bool = True
    output_dir: str = "runs"
    data_dir: str = "data"
    label: str = ""

    def __post_init__(self) -> None:
        check = (("env", self.env, ENVS), ("method", self.method, METHODS),
                 ("protocol", self.protocol, PROTOCOLS), ("write_mode", self.write_mode, WRITE_MODES))
        for name, value, registry in check:
            if value not in registry:
                raise ValueError(f"{name} {value!r} not in registry {registry}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.retrieval is None:
            object.__setattr__(self, "retrieval", env_retrieval(self.env))

    def frozen_fields(self) -> Dict[str, str]:
        """Everything that can change a result; paths and labels are excluded."""
        r = self.retrieval
        return {
            "env": self.env,
            "seeds": ",".join(map(str, self.seeds)),
            "method": self.method,
            "protocol": self.protocol,
            "write_mode": self.write_mode,
            "top_k": str(r.top_k),
            "short_window": str(r.short_window),
            "lambda_a": repr(r.lambda_a),
            "lambda_c": repr(r.lambda_c),
            "seed_injection": str(r.seed_injection).lower(),
            "budget": str(self.budget),
            "rtk": str(self.rtk).lower(),
            "compress": str(self.compress).lower(),
        }

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.frozen_fields().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        fields = dict(self.frozen_fields(), output_dir=self.output_dir, data_dir=self.data_dir, label=self.label)
        return "".join(f"{k}={v}\n" for k, v in fields.items())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kv: Dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"bad config line {raw!r}")
            kv[key.strip()] = value.strip()
        env = kv.get("env", "gridworld")
        base = env_retrieval(env) if env in ENVS else RetrievalConfig()
        retrieval = RetrievalConfig(
            top_k=int(kv.get("top_k", base.top_k)),
            short_window=int(kv.get("short_window", base.short_window)),
            lambda_a=float(kv.get("lambda_a", base.lambda_a)),
            lambda_c=float(kv.get("lambda_c", base.lambda_c)),
            seed_injection=kv.get("seed_injection", "true") == "true",
        )
        seeds = tuple(int(s) for s in kv["seeds"].split(",")) if "seeds" in kv else DEFAULT_SEEDS
        return cls(
            env=env, seeds=seeds, method=kv.get("method", "s3mem"), protocol=kv.get("protocol", "current"),
            write_mode=kv.get("write_mode", "full"), retrieval=retrieval,
            budget=int(kv.get("budget", DEFAULT_BUDGET)), rtk=kv.get("rtk", "false") == "true",
            compress=kv.get("compress", "true") == "true", output_dir=kv.get("output_dir", "runs"),
            data_dir=kv.get("data_dir", "data"), label=kv.get("label", ""),
        )

    @property
    def name(self) -> str:
        return self.label or f"{self.env}-{self.method}-{self.config_hash()}"


# ----------------------------------------------------------------------------
# datasets
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    env: str
    trajectories: Tuple[Trajectory, ...]
    questions: Tuple[QAItem, ...]

    def by_episode(self) -> Dict[str, Trajectory]:
        return {t.episode_id: t for t in self.trajectories}

    def checksum(self) -> str:
        h = hashlib.sha256()
        for t in self.trajectories:
            h.update(json.dumps(t.to_dict(), sort_keys=True).encode())
        for q in self.questions:
            h.update(json.dumps(q.to_dict(), sort_keys=True).encode())
        return h.hexdigest()[:16]


def trajectories_path(data_dir, env: str) -> Path:
    return Path(data_dir) / f"{env}.trajectories.jsonl"


def questions_path(data_dir, env: str) -> Path:
    return Path(data_dir) / f"{env}.questions.jsonl"


def build_dataset(env: str, seeds: Sequence[int] = DEFAULT_SEEDS, per_family: int = DEFAULT_PER_FAMILY,
                  qa_seed: int = QA_SEED) -> Dataset:
    trajs = tuple(simulate(env, s) for s in seeds)
    questions = tuple(q for t in trajs for q in generate_questions(t, per_family, qa_seed))
    return Dataset(env, trajs, questions)


def save_dataset(ds: Dataset, data_dir) -> None:
    os.makedirs(data_dir, exist_ok=True)
    save_trajectories(trajectories_path(data_dir, ds.env), ds.trajectories)
    save_questions(questions_path(data_dir, ds.env), ds.questions)


def load_dataset(data_dir, env: str, seeds: Optional[Sequence[int]] = None) -> Dataset:
    tp, qp = trajectories_path(data_dir, env), questions_path(data_dir, env)
    for p in (tp, qp):
        if not p.exists():
            raise FileNotFoundError(f"missing dataset file: {p}")
    trajs = load_trajectories(tp)
    if seeds is not None:
        wanted = set(seeds)
        trajs = [t for t in trajs if t.seed in wanted]
    ids = {t.episode_id for t in trajs}
    questions = [q for q in load_questions(qp) if q.episode_id in ids]
    return Dataset(env, tuple(trajs), tuple(questions))


# ----------------------------------------------------------------------------
# running
# ----------------------------------------------------------------------------

class _Interfaces:
    """Per-trajectory structures for one method, built once and reused across questions."""

    def __init__(self, cfg: RunConfig, t: Trajectory):
        self.cfg = cfg
        self.t = t
        m = cfg.method
        if m == "s3mem":
            self.store = write_trajectory(t, cfg.write_mode)
        elif m == "vanilla_rag":
            self.index = build_chunk_index(t)
        elif m == "graph_noreader":
            self.graph = graph_build(t)
        elif m in ("amem_like", "memoryos_like", "lightmem_like"):
            self.neighbor = build_neighbor_store(m, t)
        self._static: Optional[EvidencePack] = None

    def pack(self, question: str, anchors) -> EvidencePack:
        cfg, m = self.cfg, self.cfg.method
        if m == "s3mem":
            ranked = retrieve(self.store, anchors, question, cfg.retrieval)
            if cfg.compress:
                return pack_evidence(ranked, anchors, cfg.budget)
            return no_compress_interface(ranked, self.t.steps)
        if m == "vanilla_rag":
            return vanilla_rag_retrieve(self.index, question)
        if m == "graph_noreader":
            return graph_retrieve(self.graph, question)
        if m in ("amem_like", "memoryos_like", "lightmem_like"):
            return neighbor_retrieve(self.neighbor, question, cfg.retrieval.top_k, cfg.budget)
        if self._static is None:
            build = {"no_memory": no_memory_interface, "full_history": full_history_interface,
                     "summarize": summarize_then_answer_interface}[m]
            self._static = build(self.t)
        return self._static


@dataclass(frozen=True)
class QuestionRecord:
    qid: str
    family: str
    pred: str
    gold: str
    correct: int
    tokens: int
    evidence_steps: Tuple[int, ...]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["evidence_steps"] = list(self.evidence_steps)
        return d


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    report: RunReport
    records: Tuple[QuestionRecord, ...]
    packs: Dict[str, EvidencePack] = field(default_factory=dict, compare=False, repr=False)

    def correctness(self) -> List[int]:
        return [r.correct for r in self.records]


def evaluate(cfg: RunConfig, dataset: Dataset, keep_packs: bool = False) -> RunResult:
    """Run one frozen configuration over an in-memory dataset."""
    if dataset.env != cfg.env:
        raise ValueError(f"dataset env {dataset.env!r} does not match config env {cfg.env!r}")
    episodes = dataset.by_episode()
    built: Dict[str, _Interfaces] = {}
    rows = []
    records = []
    packs: Dict[str, EvidencePack] = {}
    for q in sorted(dataset.questions, key=lambda q: q.qid):
        if q.episode_id not in episodes:
            raise ValueError(f"dataset mismatch: no trajectory for {q.episode_id}")
        t = episodes[q.episode_id]
        iface = built.get(q.episode_id)
        if iface is None:
            iface = built[q.episode_id] = _Interfaces(cfg, t)
        anchors = extract_anchors(q.question)
        pack = iface.pack(q.question, anchors)
        if cfg.rtk:
            pack = rtk_compress(pack, q.question, cfg.budget)
        ans = answer_with(cfg.protocol, pack, anchors, q.question, t)
        rows.append((q, ans, pack))
        records.append(QuestionRecord(q.qid, q.family, ans.text, q.gold_answer,
                                      exact_match(ans.text, q.gold_answer), pack.token_cost, pack.steps))
        if keep_packs:
            packs[q.qid] = pack
    report = score_run(rows, method=cfg.method, protocol=cfg.protocol, config_hash=cfg.config_hash(),
                       episodes=episodes, label=cfg.label)
    return RunResult(cfg, report, tuple(records), packs)


def write_result(result: RunResult) -> Path:
    out = Path(result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    write_jsonl(out / f"{name}.records.jsonl", (r.to_dict() for r in result.records))
    (out / f"{name}.report.json").write_text(result.report.to_json() + "\n")
    (out / f"{name}.config").write_text(result.config.to_text())
    return out / f"{name}.records.jsonl"


def run_eval(cfg: RunConfig, dataset: Optional[Dataset] = None, write: bool = True) -> RunReport:
    """Load (or take) the dataset, evaluate, and persist per-question records and the report."""
    if dataset is None:
        dataset = load_dataset(cfg.data_dir, cfg.env, cfg.seeds)
    result = evaluate(cfg, dataset)
    if write:
        write_result(result)
    return result.report


def ablation_configs(base: RunConfig) -> List[RunConfig]:
    """{full, no_seed, no_compress, top_k16, budget96} x every write mode."""
    out = []
    for mode in WRITE_MODES:
        for variant in ABLATION_VARIANTS:
            cfg = replace(base, method="s3mem", write_mode=mode, label=f"{base.env}-{variant}-{mode}")
            if variant == "no_seed":
                cfg = replace(cfg, retrieval=replace(cfg.retrieval, seed_injection=False))
            elif variant == "no_compress":
                cfg = replace(cfg, compress=False)
            elif variant == "top_k16":
                cfg = replace(cfg, retrieval=replace(cfg.retrieval, top_k=16))
            elif variant == "budget96":
                cfg = replace(cfg, budget=TIGHT_BUDGET)
            out.append(cfg)
    return out


def run_ablation_suite(base: RunConfig, dataset: Optional[Dataset] = None, write: bool = True) -> List[RunReport]:
    if dataset is None:
        dataset = load_dataset(base.data_dir, base.env, base.seeds)
    reports = []
    for cfg in ablation_configs(base):
        result = evaluate(cfg, dataset)
        if write:
            write_result(result)
        reports.append(result.report)
    return reports
