"""Budgeted greedy evidence packing with exact token accounting.

Units are visited in priority order (resolved anchor steps, local support,
remaining anchor-bearing units, state completion; each class in retrieval
rank order). A unit is admitted only
if it is anchor-bearing, lies in the minimal neighborhood of a resolved anchor,
or adds an uncovered state fact. Packing stops at the first admissible unit
whose line no longer fits, so the pack for a budget is always a prefix of the
pack for any larger budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .anchor import AnchorTuple
from .mem_write import MemoryUnit
from .retrieval import ScoredUnit
from .text import token_count, truncate_to_budget
from .traj_model import Step, serialize_step_plain

__all__ = [
    "DEFAULT_BUDGET",
    "EvidencePack",
    "PackObjective",
    "no_compress_interface",
    "objective_value",
    "pack_evidence",
    "pack_order",
    "render_line",
    "token_count",
]

DEFAULT_BUDGET = 192
TIGHT_BUDGET = 96


@dataclass(frozen=True)
class EvidencePack:
    lines: Tuple[Tuple[int, str], ...] = ()
    token_cost: int = 0
    budget: Optional[int] = None  # None means unbounded
    anchor_steps_included: FrozenSet[int] = frozenset()
    truncated: bool = False

    @property
    def steps(self) -> Tuple[int, ...]:
        return tuple(s for s, _ in self.lines)

    def text(self) -> str:
        return "\n".join(line for _, line in self.lines)

    def to_dict(self) -> dict:
        return {
            "lines": [[s, line] for s, line in self.lines],
            "token_cost": self.token_cost,
            "budget": self.budget,
            "anchor_steps_included": sorted(self.anchor_steps_included),
            "truncated": self.truncated,
        }


def make_pack(lines: Iterable[Tuple[int, str]], budget: Optional[int] = None,
              anchor_steps: Iterable[int] = (), truncated: bool = False) -> EvidencePack:
    ordered = tuple(sorted(lines, key=lambda x: x[0]))
    return EvidencePack(
        lines=ordered,
        token_cost=sum(token_count(line) for _, line in ordered),
        budget=budget,
        anchor_steps_included=frozenset(anchor_steps),
        truncated=truncated,
    )


@dataclass(frozen=True)
class PackObjective:
    w_anchor: float = 4.0
    w_neighborhood: float = 2.0
    w_statefact: float = 1.0
    w_redundancy: float = 1.0

    def __post_init__(self) -> None:
        for name in ("w_anchor", "w_neighborhood", "w_statefact", "w_redundancy"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative")


def _digest(unit: MemoryUnit, anchors: AnchorTuple) -> str:
    """Query-focused field digest: held counts of the queried objects, when state is stored."""
    projects_count = anchors.queried_field == "count" and anchors.second_event is None and (
        anchors.target_step is not None or anchors.occurrence is not None)
    if not projects_count or not (unit.relations or unit.inventory or unit.state_facts):
        return ""
    return " ".join(f"inv={o}:{unit.inventory.get(o, 0)}" for o in anchors.objects())


def render_line(unit: MemoryUnit, anchors: AnchorTuple) -> str:
    digest = _digest(unit, anchors)
    line = f"[{unit.step}] {unit.summary}".rstrip()
    return f"{line} | {digest}" if digest else line


def _priority(su: ScoredUnit) -> int:
    # decisive anchors, earlier occurrences pinning them, their neighborhood,
    # other anchor-bearing units, state completion
    if su.anchor_step:
        return 0
    if su.disambiguation:
        return 1
    if su.support:
        return 2
    if su.anchor_bearing:
        return 3
    return 4


def pack_order(ranked: Sequence[ScoredUnit]) -> List[ScoredUnit]:
    """Stable reordering of the ranked list into admission priority classes."""
    return sorted(ranked, key=_priority)


@dataclass
class _Coverage:
    kinds: Set[str]
    mentions: Set[str]
    state: Set[str]

    @classmethod
    def empty(cls) -> "_Coverage":
        return cls(set(), set(), set())

    def add(self, u: MemoryUnit) -> None:
        self.kinds |= u.event_kinds()
        self.mentions |= u.mentions()
        self.state |= u.state_labels()


def admissible(su: ScoredUnit, cov: _Coverage) -> bool:
    """Admission conditions plus the redundancy filter, relative to current coverage."""
    if su.anchor_bearing or su.support:
        return True
    f = su.facts
    if not (f.state_labels() - cov.state):
        return False
    redundant = f.event_kinds() <= cov.kinds and f.mentions() <= cov.mentions and f.state_labels() <= cov.state
    return not redundant


def objective_value(chosen: Sequence[ScoredUnit], obj: PackObjective = PackObjective()) -> float:
    """F(E): weighted anchor, neighborhood and state coverage minus redundancy."""
    anchors = sum(1 for su in chosen if su.anchor_bearing)
    support = sum(1 for su in chosen if su.support and not su.anchor_bearing)
    state: Set[str] = set()
    cov = _Coverage.empty()
    redundant = 0
    for su in pack_order(chosen):
        if not admissible(su, cov):
            redundant += 1
        cov.add(su.facts)
        state |= su.facts.state_labels()
    return (obj.w_anchor * anchors + obj.w_neighborhood * support
            + obj.w_statefact * len(state) - obj.w_redundancy * redundant)


def pack_evidence(ranked: Sequence[ScoredUnit], anchors: AnchorTuple, budget: int = DEFAULT_BUDGET,
                  obj: PackObjective = PackObjective()) -> EvidencePack:
    # obj only scores packs; the greedy order already follows its weight ranking
    if budget < 1:
        raise ValueError("budget must be >= 1")
    cov = _Coverage.empty()
    used = 0
    chosen: List[Tuple[int, str]] = []
    anchor_steps: Set[int] = set()
    for su in pack_order(ranked):
        if not admissible(su, cov):
            continue
        line = render_line(su.unit, anchors)
        cost = token_count(line)
        if used + cost > budget:
            if not chosen and su.anchor_bearing:
                cut = truncate_to_budget(line, budget)
                kept = {su.step} if su.anchor_step else set()
                return make_pack([(su.step, cut)], budget, kept, truncated=True)
            break
        chosen.append((su.step, line))
        used += cost
        cov.add(su.facts)
        if su.anchor_step:
            anchor_steps.add(su.step)
    return make_pack(chosen, budget, anchor_steps)


def no_compress_interface(ranked: Sequence[ScoredUnit], steps: Sequence[Step]) -> EvidencePack:
    """Every ranked unit's full plain line, unbounded."""
    by_index = {s.index: s for s in steps}
    lines = [(su.step, serialize_step_plain(by_index[su.step])) for su in ranked]
    return make_pack(lines, None, {su.step for su in ranked if su.anchor_step})
