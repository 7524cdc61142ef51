"""Anchor-sensitive retrieval over a :class:`MemoryStore`.

Stage one ranks units by token-overlap F1 with the question. Stage two injects
anchor-resolved seed units and reranks everything by

    total = s_text + lambda_a * s_anchor + lambda_c * s_chain
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .anchor import AnchorTuple, Occurrence
from .mem_write import MemoryStore, MemoryUnit, lookup, unit_text
from .text import f1_overlap, words

# event kinds treated as state-transition entry points when seeding
TRANSITION_KINDS = frozenset({"gain_item", "unlock", "visit", "observe"})


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 16
    short_window: int = 4
    lambda_a: float = 2.0
    lambda_c: float = 1.0
    seed_injection: bool = True
    text_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.short_window < 0:
            raise ValueError("short_window must be >= 0")


@dataclass(frozen=True)
class ScoredUnit:
    unit: MemoryUnit
    s_text: float
    s_anchor: float = 0.0
    s_chain: float = 0.0
    total: float = 0.0
    anchor_step: bool = False  # step is a resolved anchor (occurrence, target step, offset target)
    anchor_bearing: bool = False
    support: bool = False  # inside the minimal neighborhood the packer must keep
    disambiguation: bool = False  # earlier occurrence needed to pin an ordinal anchor
    view: Optional[MemoryUnit] = None

    @property
    def step(self) -> int:
        return self.unit.step

    @property
    def facts(self) -> MemoryUnit:
        return self.view if self.view is not None else self.unit


@dataclass(frozen=True)
class Resolution:
    """Steps recovered from the anchor tuple against the store indexes."""

    primary: Tuple[int, ...] = ()  # occurrence / target-step anchors
    offset_targets: Tuple[int, ...] = ()
    disambiguation: Tuple[int, ...] = ()  # earlier occurrences needed to pin the k-th
    transitions: Tuple[int, ...] = ()

    @property
    def anchor_steps(self) -> FrozenSet[int]:
        return frozenset(self.primary) | frozenset(self.offset_targets)


def text_candidates(store: MemoryStore, question: str, top_k: int, scale: float = 1.0) -> List[ScoredUnit]:
    q = words(question)
    scored = [(f1_overlap(q, words(unit_text(u))) * scale, u) for u in store.units]
    scored.sort(key=lambda x: (-x[0], x[1].step))
    return [ScoredUnit(unit=u, s_text=s, total=s) for s, u in scored[:top_k]]


def occurrence_steps(store: MemoryStore, kind: str, obj: Optional[str]) -> List[int]:
    steps = lookup(store, "event_kind", kind)
    if obj is None:
        return steps
    return [i for i in steps if any(e.kind == kind and e.object == obj for e in store.units[i].events)]


def resolve_occurrence(store: MemoryStore, kind: str, obj: Optional[str], k: Optional[Occurrence]) -> Optional[int]:
    steps = occurrence_steps(store, kind, obj)
    if not steps:
        return None
    if k is None:
        k = 1  # fallback: strongest direct anchor is the first compatible step
    if k == "last":
        return steps[-1]
    if len(steps) < k:
        return None
    return steps[k - 1]


def resolve(store: MemoryStore, anchors: AnchorTuple) -> Resolution:
    n = len(store.units)
    primary: List[int] = []
    disamb: List[int] = []
    transitions: List[int] = []
    if anchors.target_step is not None and 0 <= anchors.target_step < n:
        primary.append(anchors.target_step)
    aggregate = (anchors.queried_field == "count" and anchors.target_step is None
                 and anchors.occurrence is None and anchors.second_event is None)
    for kind, obj, k in anchors.event_refs():
        steps = occurrence_steps(store, kind, obj)
        if kind in TRANSITION_KINDS:
            transitions.extend(steps)
        if aggregate:
            # a count over all occurrences is anchored on every one of them
            primary.extend(steps)
            continue
        hit = resolve_occurrence(store, kind, obj, k)
        if hit is None:
            continue
        primary.append(hit)
        if k not in (None, "last"):
            disamb.extend(s for s in steps if s < hit)
    offsets = []
    if anchors.temporal_offset:
        for a in primary:
            target = a + anchors.temporal_offset
            if 0 <= target < n:
                offsets.append(target)
    return Resolution(
        primary=tuple(sorted(set(primary))),
        offset_targets=tuple(sorted(set(offsets))),
        disambiguation=tuple(sorted(set(disamb))),
        transitions=tuple(sorted(set(transitions))),
    )


def neighborhood(res: Resolution, anchors: AnchorTuple) -> FrozenSet[int]:
    """Minimal local support: anchor..anchor+offset inclusive, else anchor +/- 1."""
    steps: Set[int] = set(res.disambiguation)
    for a in res.primary:
        if anchors.temporal_offset:
            lo, hi = sorted((a, a + anchors.temporal_offset))
            steps.update(range(lo, hi + 1))
        else:
            steps.update((a - 1, a + 1))
    return frozenset(steps) - res.anchor_steps


def event_match(view: MemoryUnit, anchors: AnchorTuple) -> bool:
    for kind, obj, _ in anchors.event_refs():
        if any(e.kind == kind and (obj is None or e.object == obj) for e in view.events):
            return True
    return False


def anchor_score(view: MemoryUnit, anchors: AnchorTuple, anchor_steps: FrozenSet[int]) -> int:
    objs = set(anchors.objects())
    kinds = {k for k, _, _ in anchors.event_refs()}
    score = 0
    if objs & view.mentions():
        score += 1
    if kinds & view.event_kinds():
        score += 1
    if view.location and view.location in objs:
        score += 1
    if view.step in anchor_steps:
        score += 1
    return score


def is_anchor_bearing(view: MemoryUnit, anchors: AnchorTuple, res: Resolution) -> bool:
    if view.step in res.anchor_steps:
        return True
    if anchors.trigger_event:
        return event_match(view, anchors)
    if anchors.target_step is None and anchors.target_object:
        return anchors.target_object in view.mentions()
    return False


def retrieve(store: MemoryStore, anchors: AnchorTuple, question: str, cfg: RetrievalConfig = RetrievalConfig()
             ) -> List[ScoredUnit]:
    cands = text_candidates(store, question, cfg.top_k, cfg.text_scale)
    res = resolve(store, anchors)
    pool: Dict[int, float] = {c.step: c.s_text for c in cands}
    q = words(question)

    if cfg.seed_injection:
        seeds = set(res.primary) | set(res.offset_targets) | set(res.disambiguation) | set(res.transitions)
        for a in res.anchor_steps:
            lo, hi = max(0, a - cfg.short_window), min(len(store.units) - 1, a + cfg.short_window)
            seeds.update(range(lo, hi + 1))
        for s in seeds:
            if s not in pool:
                pool[s] = f1_overlap(q, words(unit_text(store.units[s]))) * cfg.text_scale

    anchor_steps = res.anchor_steps
    support_steps = neighborhood(res, anchors)
    disamb = frozenset(res.disambiguation) - anchor_steps
    views = store.views
    prelim = []
    for step, s_text in pool.items():
        view = views[step]
        s_anchor = anchor_score(view, anchors, anchor_steps)
        window = 1 if any(abs(step - a) <= cfg.short_window for a in anchor_steps) else 0
        bearing = is_anchor_bearing(view, anchors, res)
        base = s_text + cfg.lambda_a * s_anchor + cfg.lambda_c * window
        prelim.append((base, bearing, step in support_steps, step, s_text, s_anchor, window, view))
    prelim.sort(key=lambda r: (-r[0], not r[1], not r[2], r[3]))

    covered: Set[str] = set()
    scored = []
    for base, bearing, support, step, s_text, s_anchor, window, view in prelim:
        labels = view.state_labels()
        fresh = 1 if anchor_steps and (labels - covered) else 0
        covered |= labels
        s_chain = window + fresh
        total = s_text + cfg.lambda_a * s_anchor + cfg.lambda_c * s_chain
        scored.append(ScoredUnit(
            unit=store.units[step], s_text=s_text, s_anchor=s_anchor, s_chain=s_chain, total=total,
            anchor_step=step in anchor_steps, anchor_bearing=bearing, support=support,
            disambiguation=step in disamb, view=view,
        ))
    scored.sort(key=lambda su: (-su.total, not su.anchor_bearing, not su.support, su.step))
    return scored
