from __future__ import annotations

import re
from collections import Counter

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from scenemem.baselines import (
    build_chunk_index,
    build_hier_store,
    build_light_store,
    build_note_store,
    full_history_interface,
    graph_build,
    graph_retrieve,
    graph_seeds,
    neighbor_retrieve,
    no_memory_interface,
    rtk_compress,
    summarize_then_answer_interface,
    vanilla_rag_retrieve,
)
from scenemem.env_sim import simulate
from scenemem.packer import make_pack
from scenemem.qa_gen import generate_questions
from scenemem.text import token_count
from scenemem.traj_model import Step, Trajectory, serialize_step_plain

TRAJS = {(env, seed): simulate(env, seed) for env in ("gridworld", "textadv") for seed in (1, 2)}
QS = {k: [q.question for q in generate_questions(t, 2, 0)] for k, t in TRAJS.items()}
CASES = [(k, q) for k in TRAJS for q in QS[k]]


def _toks(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def _f1(a, b):
    common = sum((Counter(a) & Counter(b)).values())
    if not common:
        return 0.0
    p, r = common / len(b), common / len(a)
    return 2 * p * r / (p + r)


def _plain(t, i):
    return serialize_step_plain(t.steps[i])


# --- context controls -------------------------------------------------------

def test_no_memory_on_single_step():
    t = Trajectory("one", "gridworld", (Step(0, "noop", "a quiet field", "cell_0_0"),))
    p = no_memory_interface(t)
    assert p.steps == (0,) and p.token_cost == token_count(p.lines[0][1])
    assert "a quiet field" in p.lines[0][1]


def test_full_history_costs_and_superset():
    for (env, seed), t in TRAJS.items():
        full = full_history_interface(t)
        assert full.token_cost == sum(token_count(_plain(t, i)) for i in range(len(t.steps)))
        assert full.steps == tuple(range(len(t.steps)))
        assert full.budget is None


def test_summarize_drops_locations():
    t = TRAJS[("gridworld", 1)]
    p = summarize_then_answer_interface(t)
    assert all(re.fullmatch(r"\[\d+\] act=\S+", line) for _, line in p.lines)
    assert not any("cell_" in line for _, line in p.lines)
    assert p.token_cost < full_history_interface(t).token_cost


# --- vanilla RAG ------------------------------------------------------------

def test_chunks_cover_every_step():
    t = TRAJS[("textadv", 1)]
    idx = build_chunk_index(t)
    covered = [i for (lo, hi), _ in idx.chunks for i in range(lo, hi + 1)]
    assert covered == list(range(len(t.steps)))
    for (lo, hi), text in idx.chunks:
        assert text == "\n".join(_plain(t, i) for i in range(lo, hi + 1))


def test_verbatim_chunk_ranks_first_and_zero_overlap_by_position():
    t = TRAJS[("gridworld", 2)]
    idx = build_chunk_index(t)
    p = vanilla_rag_retrieve(idx, idx.chunks[10][1], top_k=1)
    assert set(p.steps) == set(range(*idx.chunks[10][0])) | {idx.chunks[10][0][1]}
    p = vanilla_rag_retrieve(idx, "zzzz qqqq", top_k=2)
    assert p.steps == tuple(range(6))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CASES), st.integers(1, 8))
def test_vanilla_matches_f1_oracle(case, k):
    key, q = case
    t = TRAJS[key]
    idx = build_chunk_index(t)
    ranked = sorted(range(len(idx.chunks)), key=lambda i: (-_f1(_toks(q), _toks(idx.chunks[i][1])), i))[:k]
    want = sorted({s for i in ranked for s in range(idx.chunks[i][0][0], idx.chunks[i][0][1] + 1)})
    assert list(vanilla_rag_retrieve(idx, q, k).steps) == want


# --- graph ------------------------------------------------------------------

def test_graph_structure():
    t = TRAJS[("textadv", 1)]
    g = graph_build(t)
    steps = {n for n in g.nodes if n[0] == "step"}
    assert len(steps) == len(t.steps)
    nexts = {(a[1], b[1]) for a, p, b in g.edges if p == "next"}
    assert nexts == {(f"step_{i}", f"step_{i + 1}") for i in range(len(t.steps) - 1)}
    assert {p for _, p, _ in g.edges} <= {"at", "has", "did", "mention", "next"}


def test_location_question_hits_every_visit():
    t = TRAJS[("textadv", 1)]
    room = t.steps[5].location
    visits = {s.index for s in t.steps if s.location == room}
    p = graph_retrieve(graph_build(t), f"When was the agent in the {room}?", hops=1)
    assert visits <= set(p.steps)


def test_zero_hops_returns_only_seeded_steps():
    t = TRAJS[("gridworld", 1)]
    g = graph_build(t)
    assert graph_retrieve(g, "What happened at step_3 and step_9?", hops=0).steps == (3, 9)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(CASES), st.integers(0, 3))
def test_graph_matches_bfs_oracle(case, hops):
    key, q = case
    g = graph_build(TRAJS[key])
    G = nx.Graph()
    G.add_nodes_from(g.nodes)
    G.add_edges_from((a, b) for a, _, b in g.edges)
    reach = set()
    for seed in graph_seeds(g, q):
        reach |= set(nx.single_source_shortest_path_length(G, seed, cutoff=hops))
    want = sorted(int(label.split("_")[1]) for kind, label in reach if kind == "step")
    assert list(graph_retrieve(g, q, hops).steps) == want


def test_graph_is_more_verbose_than_vanilla_on_average():
    for key, t in TRAJS.items():
        g, idx = graph_build(t), build_chunk_index(t)
        graph = sum(graph_retrieve(g, q).token_cost for q in QS[key])
        vanilla = sum(vanilla_rag_retrieve(idx, q).token_cost for q in QS[key])
        assert graph >= vanilla


# --- RTK --------------------------------------------------------------------

def test_rtk_deduplicates():
    raw = make_pack([(0, "step=0 action=go loc=hall"), (1, "step=0 action=go loc=hall"),
                     (2, "step=2 action=take loc=hall")])
    p = rtk_compress(raw, "what did the agent take", 192)
    texts = [line for _, line in p.lines]
    assert len(texts) == len(set(texts)) == 2


def test_rtk_groups_consecutive_actions():
    raw = make_pack([(0, "step=0 action=move_n loc=cell_0_1"), (1, "step=1 action=move_n loc=cell_0_2"),
                     (2, "step=2 action=collect loc=cell_0_2")])
    assert rtk_compress(raw, "collect", 192).steps == (0, 2)


def test_rtk_large_budget_keeps_distinct_lines():
    t = TRAJS[("textadv", 2)]
    raw = make_pack([(i, f"[{i}] line {i} alpha") for i in range(6)])
    assert rtk_compress(raw, "alpha", 10_000).lines == raw.lines


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CASES), st.integers(8, 300))
def test_rtk_respects_budget(case, budget):
    key, q = case
    p = rtk_compress(graph_retrieve(graph_build(TRAJS[key]), q), q, budget)
    assert p.token_cost <= budget


# --- neighbor designs -------------------------------------------------------

def _ref_note_order(t, q, top_k):
    """Reference reimplementation of link-aware note retrieval."""
    notes = []
    for s in t.steps:
        objs = ",".join(sorted(s.visible_objects))
        evs = ",".join(sorted(f"{e.kind}({e.object})" for e in s.events))
        text = f"[{s.index}] {s.action} at {s.location}; events: {evs}".rstrip() + f"; objects: {objs}"
        labels = {s.action, s.location} | {e.object for e in s.events} | set(s.visible_objects)
        notes.append((s.index, text.rstrip(), labels))
    links = set()
    for i, (_, _, li) in enumerate(notes):
        found = [j for j in range(i - 1, -1, -1) if len(li & notes[j][2]) >= 2][:3]
        links |= {(j, i) for j in found}
    qt = _toks(q)
    order = [n[0] for n in sorted(notes, key=lambda n: (-_f1(qt, _toks(n[1])), n[0]))[:top_k]]
    picked = set(order)
    for s in list(order):
        for a, b in sorted(links):
            other = b if a == s else a if b == s else None
            if other is not None and other not in picked:
                picked.add(other)
                order.append(other)
    return order, {i: n[1] for i, n in enumerate(notes)}


def _fill(order, text, budget=192):
    kept, used = [], 0
    for i in order:
        c = token_count(text[i])
        if used + c > budget:
            break
        kept.append(i)
        used += c
    return sorted(kept)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CASES), st.integers(1, 24))
def test_note_store_matches_reference(case, k):
    key, q = case
    t = TRAJS[key]
    order, text = _ref_note_order(t, q, k)
    assert list(neighbor_retrieve(build_note_store(t), q, k).steps) == _fill(order, text)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CASES), st.integers(1, 24))
def test_hier_store_matches_reference(case, k):
    key, q = case
    t = TRAJS[key]
    qt = _toks(q)
    store = build_hier_store(t)
    segs = [list(range(i, min(i + 8, len(t.steps)))) for i in range(0, len(t.steps), 8)]
    assert [list(m) for m, _ in store.segments] == segs
    best = sorted(range(len(segs)), key=lambda i: (-_f1(qt, _toks(store.segments[i][1])), i))[:2]
    members = sorted((m for i in best for m in segs[i]), key=lambda m: (-_f1(qt, _toks(store.step_text[m])), m))[:k]
    assert list(neighbor_retrieve(store, q, k).steps) == _fill(members, store.step_text)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CASES), st.integers(1, 24))
def test_light_store_matches_reference_and_is_cheaper(case, k):
    key, q = case
    t = TRAJS[key]
    store = build_light_store(t)
    assert [start for start, _ in store.topics] == list(range(0, len(t.steps), 10))
    order = sorted(store.lines, key=lambda i: (-_f1(_toks(q), _toks(store.lines[i])), i))[:k]
    light = neighbor_retrieve(store, q, k)
    assert list(light.steps) == _fill(order, store.lines)
    assert light.token_cost <= 192


def test_note_store_without_links_is_plain_top_k():
    steps = tuple(Step(i, f"a{i}", "", f"l{i}") for i in range(6))
    t = Trajectory("x", "gridworld", steps)
    store = build_note_store(t)
    assert not store.links
    q = "a3 l3"
    assert neighbor_retrieve(store, q, 2).steps == tuple(sorted(
        sorted(range(6), key=lambda i: (-_f1(_toks(q), _toks(store.notes[i][1])), i))[:2]))


def test_light_lines_are_prefixes_of_note_lines():
    t = TRAJS[("textadv", 1)]
    notes, light = build_note_store(t), build_light_store(t)
    for i, text, _ in notes.notes:
        assert text.startswith(light.lines[i])
        assert token_count(light.lines[i]) <= token_count(text)
