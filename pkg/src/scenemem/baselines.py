"""Comparison interfaces: context controls, lexical and graph retrieval, an
RTK-style text compressor, and three simplified neighbor memory designs.

None of these touch anchors or memory indexes. Each returns an
:class:`EvidencePack` that any answer protocol can consume.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .mem_write import full_summary
from .packer import DEFAULT_BUDGET, EvidencePack, make_pack
from .text import f1_overlap, token_count, truncate_to_budget, words
from .traj_model import Step, Trajectory, serialize_step_plain

CHUNK_SIZE = 3
CHUNK_STRIDE = 3
VANILLA_TOP_K = 4
GRAPH_HOPS = 2
NOTE_LINKS = 3
HIER_SEGMENT = 8
LIGHT_SEGMENT = 10
RTK_LINE_FRACTION = 4  # each line is cut to budget // 4 tokens

STOPWORDS = frozenset(
    "a an the what which where when how many did does do was were is at of to in on by after before "
    "between and or agent happened occur occurred times steps first".split()
)


def keywords(question: str) -> Set[str]:
    return {w for w in words(question) if w not in STOPWORDS}


def _plain_lines(steps: Sequence[Step]) -> List[Tuple[int, str]]:
    return [(s.index, serialize_step_plain(s)) for s in steps]


def _fill(lines: Sequence[Tuple[int, str]], budget: Optional[int]) -> EvidencePack:
    """Keep lines in the given order until the next one does not fit."""
    if budget is None:
        return make_pack(lines)
    kept, used = [], 0
    for step, line in lines:
        cost = token_count(line)
        if used + cost > budget:
            break
        kept.append((step, line))
        used += cost
    return make_pack(kept, budget)


# ----------------------------------------------------------------------------
# context controls
# ----------------------------------------------------------------------------

def no_memory_interface(t: Trajectory) -> EvidencePack:
    """Only the current (final) observation."""
    s = t.steps[-1]
    obs = s.observation.replace("\\", "\\\\").replace("\n", "\\n")
    return make_pack([(s.index, f"step={s.index} obs={obs}")])


def full_history_interface(t: Trajectory) -> EvidencePack:
    return make_pack(_plain_lines(t.steps))


def summarize_then_answer_interface(t: Trajectory) -> EvidencePack:
    """Step index plus action keyword; objects, locations and state are dropped."""
    return make_pack([(s.index, f"[{s.index}] act={s.action.split()[0]}") for s in t.steps])


# ----------------------------------------------------------------------------
# vanilla RAG
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ChunkIndex:
    chunks: Tuple[Tuple[Tuple[int, int], str], ...]  # ((first, last), text)
    chunk_size: int
    stride: int
    lines: Tuple[Tuple[int, str], ...]


def build_chunk_index(t: Trajectory, chunk_size: int = CHUNK_SIZE, stride: int = CHUNK_STRIDE) -> ChunkIndex:
    if chunk_size < 1 or stride < 1 or stride > chunk_size:
        raise ValueError("need 1 <= stride <= chunk_size")
    lines = tuple(_plain_lines(t.steps))
    n = len(lines)
    chunks = []
    start = 0
    while start < n:
        end = min(start + chunk_size, n) - 1
        chunks.append(((start, end), "\n".join(line for _, line in lines[start:end + 1])))
        if end == n - 1:
            break
        start += stride
    return ChunkIndex(tuple(chunks), chunk_size, stride, lines)


def rank_chunks(idx: ChunkIndex, question: str) -> List[int]:
    q = words(question)
    scores = [f1_overlap(q, words(text)) for _, text in idx.chunks]
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def vanilla_rag_retrieve(idx: ChunkIndex, question: str, top_k: int = VANILLA_TOP_K) -> EvidencePack:
    chosen: Dict[int, str] = {}
    for ci in rank_chunks(idx, question)[:top_k]:
        (lo, hi), _ = idx.chunks[ci]
        for step, line in idx.lines[lo:hi + 1]:
            chosen[step] = line
    return make_pack(chosen.items())


# ----------------------------------------------------------------------------
# graph retrieval without a reader
# ----------------------------------------------------------------------------

Node = Tuple[str, str]  # (kind, label)
Edge = Tuple[Node, str, Node]


@dataclass(frozen=True)
class TrajGraph:
    nodes: FrozenSet[Node]
    edges: FrozenSet[Edge]
    lines: Dict[int, str]

    def neighbors(self) -> Dict[Node, Set[Node]]:
        adj: Dict[Node, Set[Node]] = {n: set() for n in self.nodes}
        for src, _, dst in self.edges:
            adj[src].add(dst)
            adj[dst].add(src)
        return adj


def step_node(i: int) -> Node:
    return ("step", f"step_{i}")


def graph_build(t: Trajectory) -> TrajGraph:
    nodes: Set[Node] = set()
    edges: Set[Edge] = set()
    for s in t.steps:
        sn = step_node(s.index)
        nodes.add(sn)
        loc = ("location", s.location)
        nodes.add(loc)
        edges.add((sn, "at", loc))
        for item, n in s.inventory.items():
            if n > 0:
                nodes.add(("entity", item))
                edges.add((sn, "has", ("entity", item)))
        for ev in s.events:
            nodes.add(("entity", ev.object))
            edges.add((sn, "did", ("entity", ev.object)))
        for obj in s.visible_objects:
            nodes.add(("entity", obj))
            edges.add((sn, "mention", ("entity", obj)))
        if s.index + 1 < len(t.steps):
            edges.add((sn, "next", step_node(s.index + 1)))
    return TrajGraph(frozenset(nodes), frozenset(edges), dict(_plain_lines(t.steps)))


def _contains(seq: Sequence[str], sub: Sequence[str]) -> bool:
    k = len(sub)
    return k > 0 and any(list(seq[i:i + k]) == list(sub) for i in range(len(seq) - k + 1))


def graph_seeds(g: TrajGraph, question: str) -> Set[Node]:
    """Nodes whose label, as a word sequence, occurs in the question."""
    q = words(question)
    return {n for n in g.nodes if _contains(q, words(n[1]))}


def graph_retrieve(g: TrajGraph, question: str, hops: int = GRAPH_HOPS) -> EvidencePack:
    adj = g.neighbors()
    seen = set(graph_seeds(g, question))
    frontier = deque((n, 0) for n in sorted(seen))
    while frontier:
        node, d = frontier.popleft()
        if d == hops:
            continue
        for nb in sorted(adj[node]):
            if nb not in seen:
                seen.add(nb)
                frontier.append((nb, d + 1))
    steps = sorted(int(label.split("_")[1]) for kind, label in seen if kind == "step")
    return make_pack([(i, g.lines[i]) for i in steps])


# ----------------------------------------------------------------------------
# RTK-style compression over rendered text
# ----------------------------------------------------------------------------

def _line_step(line: str, fallback: int) -> int:
    for prefix, close in (("step=", " "), ("[", "]")):
        if line.startswith(prefix):
            head = line[len(prefix):].split(close, 1)[0]
            if head.isdigit():
                return int(head)
    return fallback


def _action_key(line: str) -> str:
    """The rendered action text of a line, used to group runs of repeated actions."""
    if " action=" in line:
        return line.split(" action=", 1)[1].split(" loc=", 1)[0]
    return line.split("]", 1)[-1].strip()


def rtk_compress(raw: EvidencePack, question: str, budget: int = DEFAULT_BUDGET) -> EvidencePack:
    """Filter, group, deduplicate and truncate rendered lines; no structure is consulted."""
    texts = [line for _, line in raw.lines]
    seen: Set[str] = set()
    unique = []
    for line in texts:
        if line not in seen:
            seen.add(line)
            unique.append(line)
    grouped = []
    for line in unique:
        if grouped and _action_key(grouped[-1]) == _action_key(line):
            continue
        grouped.append(line)
    kw = keywords(question)
    scored = sorted(enumerate(grouped), key=lambda p: (-len(kw & set(words(p[1]))), p[0]))
    cap = max(1, budget // RTK_LINE_FRACTION)
    out, used = [], 0
    for pos, line in scored:
        cut = truncate_to_budget(line, cap)
        cost = token_count(cut)
        if not cut or used + cost > budget:
            continue
        out.append((_line_step(cut, pos), cut))
        used += cost
    return make_pack(out, budget)


# ----------------------------------------------------------------------------
# neighbor memory designs
# ----------------------------------------------------------------------------

def _labels(s: Step) -> FrozenSet[str]:
    return frozenset({s.action, s.location} | {e.object for e in s.events} | set(s.visible_objects))


@dataclass(frozen=True)
class NoteStore:
    """Per-step notes with keyword links to earlier related notes."""

    notes: Tuple[Tuple[int, str, FrozenSet[str]], ...]
    links: FrozenSet[Tuple[int, int]]


def build_note_store(t: Trajectory, max_links: int = NOTE_LINKS) -> NoteStore:
    notes = []
    links = set()
    for s in t.steps:
        objs = ",".join(sorted(s.visible_objects))
        text = f"[{s.index}] {full_summary(s)}; objects: {objs}".rstrip()
        kws = _labels(s)
        linked = 0
        for j in range(len(notes) - 1, -1, -1):
            if linked == max_links:
                break
            if len(kws & notes[j][2]) >= 2:
                links.add((notes[j][0], s.index))
                linked += 1
        notes.append((s.index, text, kws))
    return NoteStore(tuple(notes), frozenset(links))


def note_order(store: NoteStore, question: str, top_k: int) -> List[int]:
    q = words(question)
    ranked = sorted(store.notes, key=lambda n: (-f1_overlap(q, words(n[1])), n[0]))[:top_k]
    order = [n[0] for n in ranked]
    picked = set(order)
    for step in list(order):
        for a, b in sorted(store.links):
            other = b if a == step else a if b == step else None
            if other is not None and other not in picked:
                picked.add(other)
                order.append(other)
    return order


@dataclass(frozen=True)
class HierStore:
    """Fixed-size segments with a summary line each, over per-step summaries."""

    segments: Tuple[Tuple[Tuple[int, ...], str], ...]
    step_text: Dict[int, str]
    segment_size: int = HIER_SEGMENT


def build_hier_store(t: Trajectory, segment_size: int = HIER_SEGMENT) -> HierStore:
    step_text = {s.index: f"[{s.index}] {full_summary(s)}" for s in t.steps}
    segments = []
    for start in range(0, len(t.steps), segment_size):
        members = t.steps[start:start + segment_size]
        labels = sorted(set().union(*(_labels(s) for s in members)))
        summary = f"segment {members[0].index}-{members[-1].index}: " + " ".join(labels)
        segments.append((tuple(s.index for s in members), summary))
    return HierStore(tuple(segments), step_text, segment_size)


def hier_order(store: HierStore, question: str, top_k: int) -> List[int]:
    q = words(question)
    segs = sorted(range(len(store.segments)),
                  key=lambda i: (-f1_overlap(q, words(store.segments[i][1])), i))[:2]
    members = [m for i in segs for m in store.segments[i][0]]
    return sorted(members, key=lambda m: (-f1_overlap(q, words(store.step_text[m])), m))[:top_k]


@dataclass(frozen=True)
class LightStore:
    """One compressed line per step plus a topic line every ``segment_size`` steps."""

    lines: Dict[int, str]
    topics: Tuple[Tuple[int, str], ...]
    segment_size: int = LIGHT_SEGMENT


def build_light_store(t: Trajectory, segment_size: int = LIGHT_SEGMENT) -> LightStore:
    lines = {s.index: f"[{s.index}] {full_summary(s)}" for s in t.steps}
    topics = []
    for start in range(0, len(t.steps), segment_size):
        members = t.steps[start:start + segment_size]
        acts = sorted({s.action for s in members})
        topics.append((start, f"topic {start}-{members[-1].index}: " + " ".join(acts)))
    return LightStore(lines, tuple(topics), segment_size)


def light_order(store: LightStore, question: str, top_k: int) -> List[int]:
    q = words(question)
    return sorted(store.lines, key=lambda i: (-f1_overlap(q, words(store.lines[i])), i))[:top_k]


NeighborStore = (NoteStore, HierStore, LightStore)


def neighbor_order(store, question: str, top_k: int) -> List[int]:
    if isinstance(store, NoteStore):
        return note_order(store, question, top_k)
    if isinstance(store, HierStore):
        return hier_order(store, question, top_k)
    if isinstance(store, LightStore):
        return light_order(store, question, top_k)
    raise TypeError(f"not a neighbor store: {type(store).__name__}")


def neighbor_text(store, step: int) -> str:
    if isinstance(store, NoteStore):
        return store.notes[step][1]
    if isinstance(store, HierStore):
        return store.step_text[step]
    return store.lines[step]


def neighbor_retrieve(store, question: str, top_k: int = 16, budget: int = DEFAULT_BUDGET) -> EvidencePack:
    order = neighbor_order(store, question, top_k)
    return _fill([(i, neighbor_text(store, i)) for i in order], budget)


def build_neighbor_store(kind: str, t: Trajectory):
    builders = {"amem_like": build_note_store, "memoryos_like": build_hier_store, "lightmem_like": build_light_store}
    if kind not in builders:
        raise ValueError(f"unknown neighbor design {kind!r}")
    return builders[kind](t)
