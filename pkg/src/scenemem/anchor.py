"""Rule-based extraction of question anchors.

The extractor recovers the small cue set needed for anchor-sensitive retrieval:
target object, trigger event, queried field, occurrence index, temporal offset
and an explicit target step. Questions mentioning two events (intervals,
ordering) additionally fill the ``second_*`` fields.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Tuple, Union

from .traj_model import EVENT_KINDS

Occurrence = Union[int, str]  # 1, 2, 3 or "last"

QUERIED_FIELDS = ("action", "location", "item", "count", "step", "order", "answerability")

ORDINALS = {"first": 1, "1st": 1, "second": 2, "2nd": 2, "third": 3, "3rd": 3, "last": "last"}
ORDINAL_SURFACE = {1: "1st", 2: "2nd", 3: "3rd", "last": "last"}
NUMBER_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6}

VERB_KINDS = {
    "visit": "visit",
    "unlock": "unlock",
    "gain": "gain_item",
    "obtain": "gain_item",
    "get": "gain_item",
    "take": "gain_item",
    "collect": "collect",
    "craft": "craft",
    "use": "use_item",
    "observe": "observe",
    "see": "observe",
}


@dataclass(frozen=True)
class AnchorTuple:
    queried_field: str = "answerability"
    target_object: Optional[str] = None
    trigger_event: Optional[str] = None
    occurrence: Optional[Occurrence] = None
    temporal_offset: Optional[int] = None
    target_step: Optional[int] = None
    second_event: Optional[str] = None
    second_object: Optional[str] = None
    second_occurrence: Optional[Occurrence] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def event_refs(self) -> Tuple[Tuple[str, Optional[str], Optional[Occurrence]], ...]:
        refs = []
        if self.trigger_event:
            refs.append((self.trigger_event, self.target_object, self.occurrence))
        if self.second_event:
            refs.append((self.second_event, self.second_object, self.second_occurrence))
        return tuple(refs)

    def objects(self) -> Tuple[str, ...]:
        return tuple(o for o in (self.target_object, self.second_object) if o)


def ordinal_surface(k: Occurrence) -> str:
    return ORDINAL_SURFACE[k]


def event_surface(kind: str, obj: str) -> str:
    return f"{kind}({obj})"


_LABEL = r"[a-z0-9_:.\-]+"
_ORD = r"(first|1st|second|2nd|third|3rd|last)"
_NUM = r"(\d+|one|two|three|four|five|six)"


def _normalize(question: str) -> str:
    return re.sub(r"\s+", " ", question.strip().lower())


def _number(tok: str) -> int:
    return NUMBER_WORDS[tok] if tok in NUMBER_WORDS else int(tok)


def _event_mentions(q: str, kinds: frozenset):
    """Yield (position, kind, object, occurrence) for every event mention in order."""
    found = []
    for m in re.finditer(rf"(?:{_ORD} )?([a-z_]+)\(({_LABEL})\)", q):
        ordinal, kind, obj = m.group(1), m.group(2), m.group(3)
        if kind in kinds:
            found.append((m.start(), kind, obj, ORDINALS[ordinal] if ordinal else None))
    verbs = "|".join(sorted(VERB_KINDS, key=len, reverse=True))
    for m in re.finditer(rf"\bdid the agent ({verbs}) (?:the |a |an )?(?!(?:at|in|on|after|before|between|during)\b)({_LABEL})", q):
        kind = VERB_KINDS[m.group(1)]
        if kind in kinds:
            found.append((m.start(), kind, m.group(2), None))
    found.sort()
    return found


def _queried_field(q: str) -> Optional[str]:
    if "which happened first" in q or "which came first" in q:
        return "order"
    if q.startswith("how many") or " how many " in q:
        return "count"
    if "what action" in q or "what did the agent do" in q:
        return "action"
    if q.startswith("where") or " where " in q:
        return "location"
    if "what item" in q:
        return "item"
    if "which step" in q or "what step" in q or q.startswith("when "):
        return "step"
    return None


def extract_anchors(question: str, event_kinds: Iterable[str] = EVENT_KINDS) -> AnchorTuple:
    if not question or not question.strip():
        raise ValueError("question must be nonempty")
    q = _normalize(question)
    kinds = frozenset(event_kinds)
    field = _queried_field(q)
    mentions = _event_mentions(q, kinds)

    target_step = None
    m = re.search(r"\bat step (\d+)\b", q)
    if m:
        target_step = int(m.group(1))

    offset = None
    m = re.search(rf"\b{_NUM} steps? (after|before)\b", q)
    if m:
        n = _number(m.group(1))
        offset = n if m.group(2) == "after" else -n

    held = re.search(rf"\bhow many ({_LABEL}) did the agent (?:hold|have)\b", q)
    total = re.search(r"\bhow many ([a-z_]+) events\b", q)
    if total and total.group(1) in kinds and not mentions:
        mentions = [(total.start(), total.group(1), None, None)]

    if field is None and not mentions and target_step is None:
        return AnchorTuple()
    if field is None:
        field = "answerability"

    kwargs = dict(queried_field=field, target_step=target_step, temporal_offset=offset)
    if mentions:
        _, kind, obj, occ = mentions[0]
        kwargs.update(trigger_event=kind, target_object=obj, occurrence=occ)
        if len(mentions) > 1:
            _, kind2, obj2, occ2 = mentions[1]
            kwargs.update(second_event=kind2, second_object=obj2, second_occurrence=occ2)
    if held:
        kwargs["target_object"] = held.group(1)
    return AnchorTuple(**kwargs)
