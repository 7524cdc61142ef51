"""Structured episodic memory over agent trajectories, with an evaluation harness.

Trajectories are written into per-step scene-event units, questions are parsed
into anchor tuples, evidence is retrieved with anchor-aware reranking and packed
under a token budget, and a deterministic answerer reads the pack.
"""

from __future__ import annotations

from .anchor import AnchorTuple, extract_anchors
from .answer import Answer, answer_current, answer_generic, compile_program, execute_program
from .env_sim import GridWorldConfig, TextAdvConfig, simulate, simulate_gridworld, simulate_textadventure
from .evaluation import RunReport, bootstrap_ci, exact_match, normalize_answer, paired_bootstrap, score_run
from .harness import RunConfig, build_dataset, run_ablation_suite, run_eval
from .mem_write import MemoryStore, MemoryUnit, lookup, write_trajectory
from .packer import EvidencePack, PackObjective, no_compress_interface, pack_evidence
from .qa_gen import QAItem, generate_questions
from .retrieval import RetrievalConfig, ScoredUnit, retrieve
from .text import token_count
from .traj_model import EventFact, Step, Trajectory, serialize_step_plain, validate_trajectory

__all__ = [
    "AnchorTuple", "Answer", "EventFact", "EvidencePack", "GridWorldConfig", "MemoryStore", "MemoryUnit",
    "PackObjective", "QAItem", "RetrievalConfig", "RunConfig", "RunReport", "ScoredUnit", "Step",
    "TextAdvConfig", "Trajectory", "answer_current", "answer_generic", "bootstrap_ci", "build_dataset",
    "compile_program", "exact_match", "execute_program", "extract_anchors", "generate_questions", "lookup",
    "no_compress_interface", "normalize_answer", "pack_evidence", "paired_bootstrap", "retrieve",
    "run_ablation_suite", "run_eval", "score_run", "serialize_step_plain", "simulate", "simulate_gridworld",
    "simulate_textadventure", "token_count", "validate_trajectory", "write_trajectory",
]
