"""Template-based construction of trajectory-grounded questions.

Gold answers and gold evidence are computed by scanning the trajectory
directly; no memory method is involved. Each emitted item is paired with the
template parameters it was built from (an :class:`AnchorTuple`), which lets
tests check that the anchor extractor inverts the templates exactly.
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .anchor import AnchorTuple, event_surface, ordinal_surface
from .env_sim import vocabulary
from .traj_model import EventFact, Trajectory, iter_jsonl, write_jsonl

log = logging.getLogger(__name__)

NOT_ANSWERABLE = "not answerable"

FAMILIES: Tuple[str, ...] = (
    "step_lookup",
    "occurrence",
    "state_query",
    "spatial",
    "inventory",
    "temporal_offset",
    "temporal_interval",
    "event_ordering",
    "counting",
    "multi_hop",
    "aggregation",
    "adversarial",
)

# evidence for counting/aggregation must stay small enough to pack
MAX_COUNT = 4
OCCURRENCES = (1, 2, "last")
OFFSETS = (1, 2, 3)
# kinds whose location after the event is non-trivial
MULTI_HOP_KINDS = ("gain_item", "craft", "unlock", "use_item", "observe")


@dataclass(frozen=True)
class QAItem:
    qid: str
    episode_id: str
    question: str
    gold_answer: str
    family: str
    gold_evidence_steps: Tuple[int, ...] = ()
    answerable: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gold_evidence_steps"] = list(self.gold_evidence_steps)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QAItem":
        return cls(
            qid=d["qid"],
            episode_id=d["episode_id"],
            question=d["question"],
            gold_answer=d["gold_answer"],
            family=d["family"],
            gold_evidence_steps=tuple(d["gold_evidence_steps"]),
            answerable=bool(d["answerable"]),
        )


@dataclass
class _Draft:
    question: str
    answer: str
    evidence: Tuple[int, ...]
    anchors: AnchorTuple
    group: str = ""


# ----------------------------------------------------------------------------
# trajectory scans
# ----------------------------------------------------------------------------

class _Scan:
    def __init__(self, t: Trajectory):
        self.t = t
        self.n = len(t.steps)
        self.occ: Dict[Tuple[str, str], List[int]] = defaultdict(list)
        self.by_kind: Dict[str, List[int]] = defaultdict(list)
        for s in t.steps:
            kinds = set()
            for ev in s.events:
                self.occ[(ev.kind, ev.object)].append(s.index)
                kinds.add(ev.kind)
            for k in kinds:
                self.by_kind[k].append(s.index)

    def pick(self, key, k) -> Optional[Tuple[int, Tuple[int, ...]]]:
        """Anchor step for occurrence ``k`` plus the steps needed to disambiguate it."""
        steps = self.occ.get(key, [])
        if k == "last":
            return (steps[-1], (steps[-1],)) if steps else None
        if len(steps) < k:
            return None
        return steps[k - 1], tuple(steps[:k])

    def gains(self, i: int) -> List[str]:
        return sorted(ev.object for ev in self.t.steps[i].events if ev.kind == "gain_item")


# ----------------------------------------------------------------------------
# family builders: each returns every candidate draft for the trajectory
# ----------------------------------------------------------------------------

def _ev_phrase(k, kind, obj) -> str:
    return f"the {ordinal_surface(k)} {event_surface(kind, obj)}"


def _step_lookup(sc: _Scan) -> List[_Draft]:
    return [
        _Draft(f"What action was executed at step {s.index}?", s.action, (s.index,),
               AnchorTuple(queried_field="action", target_step=s.index))
        for s in sc.t.steps
    ]


def _occurrence(sc: _Scan) -> List[_Draft]:
    out = []
    for (kind, obj), steps in sorted(sc.occ.items()):
        for k in OCCURRENCES:
            if k == "last" and len(steps) < 2:
                continue
            hit = sc.pick((kind, obj), k)
            if hit is None:
                continue
            step, ev = hit
            out.append(_Draft(
                f"At which step did {_ev_phrase(k, kind, obj)} occur?", str(step), ev,
                AnchorTuple(queried_field="step", trigger_event=kind, target_object=obj, occurrence=k),
                group=kind,
            ))
    return out


def _state_query(sc: _Scan) -> List[_Draft]:
    items = sorted({i for s in sc.t.steps for i in s.inventory})
    out = []
    for s in sc.t.steps:
        for item in items:
            out.append(_Draft(
                f"How many {item} did the agent hold at step {s.index}?",
                str(s.inventory.get(item, 0)), (s.index,),
                AnchorTuple(queried_field="count", target_object=item, target_step=s.index),
                group=item,
            ))
    return out


def _spatial(sc: _Scan) -> List[_Draft]:
    return [
        _Draft(f"Where was the agent at step {s.index}?", s.location, (s.index,),
               AnchorTuple(queried_field="location", target_step=s.index))
        for s in sc.t.steps
    ]


def _inventory(sc: _Scan) -> List[_Draft]:
    out = []
    for s in sc.t.steps:
        gains = sc.gains(s.index)
        if len(gains) == 1:
            out.append(_Draft(f"What item did the agent gain at step {s.index}?", gains[0], (s.index,),
                              AnchorTuple(queried_field="item", target_step=s.index), group=gains[0]))
    return out


def _temporal_offset(sc: _Scan) -> List[_Draft]:
    out = []
    for (kind, obj), _ in sorted(sc.occ.items()):
        for k in OCCURRENCES:
            hit = sc.pick((kind, obj), k)
            if hit is None:
                continue
            anchor, chain = hit
            for n in OFFSETS:
                for direction, sign in (("after", 1), ("before", -1)):
                    target = anchor + sign * n
                    if not 0 <= target < sc.n:
                        continue
                    unit = "step" if n == 1 else "steps"
                    evidence = tuple(sorted(set(chain) | {target}))
                    s = sc.t.steps[target]
                    for f, phrase, answer in (
                        ("action", "What action was executed", s.action),
                        ("location", "Where was the agent", s.location),
                    ):
                        out.append(_Draft(
                            f"{phrase} {n} {unit} {direction} {_ev_phrase(k, kind, obj)}?", answer, evidence,
                            AnchorTuple(queried_field=f, trigger_event=kind, target_object=obj,
                                        occurrence=k, temporal_offset=sign * n),
                            group=kind,
                        ))
    return out


def _pairs(sc: _Scan):
    keys = sorted(sc.occ)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            if a[1] == b[1]:
                continue
            for ka in (1, "last"):
                for kb in (1, "last"):
                    ha, hb = sc.pick(a, ka), sc.pick(b, kb)
                    if ha and hb and ha[0] != hb[0]:
                        yield a, ka, ha, b, kb, hb


def _temporal_interval(sc: _Scan) -> List[_Draft]:
    out = []
    for a, ka, ha, b, kb, hb in _pairs(sc):
        out.append(_Draft(
            f"How many steps passed between {_ev_phrase(ka, *a)} and {_ev_phrase(kb, *b)}?",
            str(abs(hb[0] - ha[0])), tuple(sorted(set(ha[1]) | set(hb[1]))),
            AnchorTuple(queried_field="count", trigger_event=a[0], target_object=a[1], occurrence=ka,
                        second_event=b[0], second_object=b[1], second_occurrence=kb),
            group=f"{a[0]}-{b[0]}",
        ))
    return out


def _event_ordering(sc: _Scan) -> List[_Draft]:
    out = []
    for a, ka, ha, b, kb, hb in _pairs(sc):
        # present the pair in both orders so the answer is not always the first mention
        for (x, kx, hx), (y, ky, hy) in (((a, ka, ha), (b, kb, hb)), ((b, kb, hb), (a, ka, ha))):
            first = x[1] if hx[0] < hy[0] else y[1]
            out.append(_Draft(
                f"Which happened first: {_ev_phrase(kx, *x)} or {_ev_phrase(ky, *y)}?",
                first, tuple(sorted(set(hx[1]) | set(hy[1]))),
                AnchorTuple(queried_field="order", trigger_event=x[0], target_object=x[1], occurrence=kx,
                            second_event=y[0], second_object=y[1], second_occurrence=ky),
                group=f"{x[0]}-{y[0]}",
            ))
    return out


def _counting(sc: _Scan) -> List[_Draft]:
    out = []
    for (kind, obj), steps in sorted(sc.occ.items()):
        if len(steps) > MAX_COUNT:
            continue
        if kind == "visit":
            q = f"How many times did the agent visit {obj}?"
        else:
            q = f"How many times did {event_surface(kind, obj)} occur?"
        out.append(_Draft(q, str(len(steps)), tuple(steps),
                          AnchorTuple(queried_field="count", trigger_event=kind, target_object=obj), group=kind))
    return out


def _multi_hop(sc: _Scan) -> List[_Draft]:
    out = []
    for (kind, obj), _ in sorted(sc.occ.items()):
        if kind not in MULTI_HOP_KINDS:
            continue
        for k in OCCURRENCES:
            hit = sc.pick((kind, obj), k)
            if hit is None:
                continue
            step, chain = hit
            s = sc.t.steps[step]
            out.append(_Draft(
                f"Where was the agent when {_ev_phrase(k, kind, obj)} occurred?", s.location, chain,
                AnchorTuple(queried_field="location", trigger_event=kind, target_object=obj, occurrence=k),
                group="location",
            ))
            if kind == "gain_item":
                out.append(_Draft(
                    f"How many {obj} did the agent hold after {_ev_phrase(k, kind, obj)}?",
                    str(s.inventory.get(obj, 0)), chain,
                    AnchorTuple(queried_field="count", trigger_event=kind, target_object=obj, occurrence=k),
                    group="inventory",
                ))
    return out


def _aggregation(sc: _Scan) -> List[_Draft]:
    out = []
    for kind, steps in sorted(sc.by_kind.items()):
        total = sum(1 for i in steps for ev in sc.t.steps[i].events if ev.kind == kind)
        if total != len(steps) or total > MAX_COUNT:
            continue
        out.append(_Draft(f"How many {kind} events occurred in total?", str(total), tuple(steps),
                          AnchorTuple(queried_field="count", trigger_event=kind), group=kind))
    return out


def _env_vocab(t: Trajectory) -> Dict[str, Tuple[str, ...]]:
    """Candidate objects per event kind, used to build absent-event questions."""
    v = vocabulary()
    if t.env_kind == "gridworld":
        return {"gain_item": v["gridworld"], "craft": ("table", "pickaxe", "torch", "sword"),
                "visit": tuple(f"cell_{x}_{y}" for x in range(12) for y in range(12))}
    if t.env_kind == "textadventure":
        from .env_sim import ITEM_NAMES, ROOM_NAMES
        return {"gain_item": ITEM_NAMES, "visit": ROOM_NAMES,
                "unlock": tuple(f"door_{r}" for r in ROOM_NAMES) + ("vault",), "use_item": ITEM_NAMES}
    return {"observe": tuple(f"item_{i:04d}" for i in range(50))}


def _adversarial(sc: _Scan) -> List[_Draft]:
    out = []
    for kind, objs in sorted(_env_vocab(sc.t).items()):
        for obj in objs:
            if (kind, obj) in sc.occ:
                continue
            na = AnchorTuple
            out.append(_Draft(f"At which step did {_ev_phrase(1, kind, obj)} occur?", NOT_ANSWERABLE, (),
                              na(queried_field="step", trigger_event=kind, target_object=obj, occurrence=1),
                              group=kind))
            if kind == "unlock":
                out.append(_Draft(f"At which step did the agent unlock the {obj}?", NOT_ANSWERABLE, (),
                                  na(queried_field="step", trigger_event=kind, target_object=obj), group=kind))
            out.append(_Draft(f"How many times did {event_surface(kind, obj)} occur?", NOT_ANSWERABLE, (),
                              na(queried_field="count", trigger_event=kind, target_object=obj), group=kind))
            out.append(_Draft(f"Where was the agent when {_ev_phrase(1, kind, obj)} occurred?", NOT_ANSWERABLE,
                              (), na(queried_field="location", trigger_event=kind, target_object=obj, occurrence=1),
                              group=kind))
            out.append(_Draft(f"What action was executed 2 steps after {_ev_phrase(1, kind, obj)}?",
                              NOT_ANSWERABLE, (),
                              na(queried_field="action", trigger_event=kind, target_object=obj, occurrence=1,
                                 temporal_offset=2), group=kind))
    return out


BUILDERS = {
    "step_lookup": _step_lookup,
    "occurrence": _occurrence,
    "state_query": _state_query,
    "spatial": _spatial,
    "inventory": _inventory,
    "temporal_offset": _temporal_offset,
    "temporal_interval": _temporal_interval,
    "event_ordering": _event_ordering,
    "counting": _counting,
    "multi_hop": _multi_hop,
    "aggregation": _aggregation,
    "adversarial": _adversarial,
}


def _sample(rng: random.Random, drafts: List[_Draft], n: int) -> List[_Draft]:
    """Round-robin over draft groups so one frequent event kind cannot crowd out the rest."""
    seen = set()
    unique = []
    for d in drafts:
        if d.question not in seen:
            seen.add(d.question)
            unique.append(d)
    groups: Dict[str, List[_Draft]] = defaultdict(list)
    for d in unique:
        groups[d.group].append(d)
    order = sorted(groups)
    for g in order:
        rng.shuffle(groups[g])
    rng.shuffle(order)
    picked = []
    while len(picked) < n and any(groups[g] for g in order):
        for g in order:
            if groups[g] and len(picked) < n:
                picked.append(groups[g].pop())
    return picked


def generate_with_anchors(
    t: Trajectory, per_family: int, seed: int, log_sink: Optional[List[str]] = None
) -> List[Tuple[QAItem, AnchorTuple]]:
    """Questions plus the template parameters each one was built from."""
    if per_family < 1:
        raise ValueError("per_family must be >= 1")
    sc = _Scan(t)
    out = []
    for family in FAMILIES:
        drafts = BUILDERS[family](sc)
        if not drafts:
            msg = f"{t.episode_id}: family {family} skipped (no valid template instance)"
            log.info(msg)
            if log_sink is not None:
                log_sink.append(msg)
            continue
        rng = random.Random(f"{seed}|{t.episode_id}|{family}")
        picked = _sample(rng, drafts, per_family)
        picked.sort(key=lambda d: d.question)
        for i, d in enumerate(picked):
            item = QAItem(
                qid=f"{t.episode_id}/{family}/{i:03d}",
                episode_id=t.episode_id,
                question=d.question,
                gold_answer=d.answer,
                family=family,
                gold_evidence_steps=tuple(d.evidence),
                answerable=family != "adversarial",
            )
            out.append((item, d.anchors))
    return out


def generate_questions(t: Trajectory, per_family: int, seed: int,
                       log_sink: Optional[List[str]] = None) -> List[QAItem]:
    return [item for item, _ in generate_with_anchors(t, per_family, seed, log_sink)]


def filter_invalid(items: Sequence[QAItem], t: Trajectory) -> List[QAItem]:
    n = len(t.steps)
    return [q for q in items if all(0 <= s < n for s in q.gold_evidence_steps)]


def load_questions(path) -> List[QAItem]:
    return [QAItem.from_dict(d) for d in iter_jsonl(path)]


def save_questions(path, items: Sequence[QAItem]) -> None:
    write_jsonl(path, (q.to_dict() for q in items))
