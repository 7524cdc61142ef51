"""Answer-time protocols: the structured current answerer, a degraded generic
answerer, and a program executor that reads the full trajectory.

The current answerer and the executor share one program engine; they differ
only in where step records come from (rendered pack lines vs. the trajectory).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

from .anchor import AnchorTuple, Occurrence
from .packer import EvidencePack
from .qa_gen import NOT_ANSWERABLE
from .text import words
from .traj_model import EventFact, Trajectory, parse_events, plain_fields

PROTOCOLS = ("current", "generic", "gold_executor")


class EvidenceCorrupt(ValueError):
    def __init__(self, line: str = ""):
        super().__init__("evidence corrupt" + (f": {line[:60]!r}" if line else ""))


class InvalidProgram(ValueError):
    def __init__(self, why: str = ""):
        super().__init__("invalid program" + (f": {why}" if why else ""))


@dataclass(frozen=True)
class Answer:
    text: str
    protocol: str
    resolved: bool

    @classmethod
    def of(cls, text: Optional[str], protocol: str) -> "Answer":
        if text is None or text == NOT_ANSWERABLE:
            return cls(NOT_ANSWERABLE, protocol, False)
        return cls(text, protocol, True)


# ----------------------------------------------------------------------------
# programs
# ----------------------------------------------------------------------------

EventRef = Tuple[str, Optional[str], Optional[Occurrence]]


@dataclass(frozen=True)
class SelectStep:
    step: int


@dataclass(frozen=True)
class SelectOccurrence:
    event: str
    obj: Optional[str]
    k: Optional[Occurrence] = None


@dataclass(frozen=True)
class Offset:
    delta: int


@dataclass(frozen=True)
class Project:
    field: str  # action | location | item | step | count
    obj: Optional[str] = None


@dataclass(frozen=True)
class CountEvents:
    event: str
    obj: Optional[str] = None


@dataclass(frozen=True)
class Interval:
    first: EventRef
    second: EventRef


@dataclass(frozen=True)
class CompareOrder:
    first: EventRef
    second: EventRef


Instruction = Union[SelectStep, SelectOccurrence, Offset, Project, CountEvents, Interval, CompareOrder]
_SELECT = (SelectStep, SelectOccurrence)
_TERMINAL = (Project, CountEvents, Interval, CompareOrder)
PROJECT_FIELDS = ("action", "location", "item", "step", "count")


@dataclass(frozen=True)
class Program:
    ops: Tuple[Instruction, ...] = ()

    def validate(self) -> None:
        if not self.ops:
            return  # unanswerable tuple: nothing to select
        terminals = [op for op in self.ops if isinstance(op, _TERMINAL)]
        if len(terminals) != 1 or not isinstance(self.ops[-1], _TERMINAL):
            raise InvalidProgram("exactly one terminal instruction, placed last")
        body = self.ops[:-1]
        stage = 0
        for op in body:
            rank = 0 if isinstance(op, _SELECT) else 1 if isinstance(op, Offset) else None
            if rank is None or rank < stage:
                raise InvalidProgram("selection must precede offset")
            stage = rank
        if isinstance(self.ops[-1], Project):
            if self.ops[-1].field not in PROJECT_FIELDS:
                raise InvalidProgram(f"unknown field {self.ops[-1].field!r}")
            if sum(isinstance(op, _SELECT) for op in body) != 1:
                raise InvalidProgram("projection needs exactly one selection")
        elif body:
            raise InvalidProgram("aggregate instructions take no selection")


def compile_program(anchors: AnchorTuple) -> Program:
    f = anchors.queried_field
    refs = anchors.event_refs()
    if f == "answerability":
        return Program(())
    if f == "order":
        return Program((CompareOrder(refs[0], refs[1]),)) if len(refs) == 2 else Program(())
    if f == "count":
        if len(refs) == 2:
            return Program((Interval(refs[0], refs[1]),))
        if anchors.target_step is not None:
            return Program((SelectStep(anchors.target_step), Project("count", anchors.target_object)))
        if anchors.trigger_event and anchors.occurrence is not None:
            return Program((SelectOccurrence(*refs[0]), Project("count", anchors.target_object)))
        if anchors.trigger_event:
            return Program((CountEvents(anchors.trigger_event, anchors.target_object),))
        return Program(())
    ops: List[Instruction] = []
    if anchors.target_step is not None:
        ops.append(SelectStep(anchors.target_step))
    elif anchors.trigger_event:
        ops.append(SelectOccurrence(*refs[0]))
    else:
        return Program(())
    if anchors.temporal_offset:
        ops.append(Offset(anchors.temporal_offset))
    ops.append(Project(f))
    return Program(tuple(ops))


# ----------------------------------------------------------------------------
# step records and the shared engine
# ----------------------------------------------------------------------------

@dataclass
class Record:
    """What is known about one step; ``None`` marks a field the evidence does not carry."""

    step: int
    action: Optional[str] = None
    location: Optional[str] = None
    events: Optional[FrozenSet[EventFact]] = None
    inventory: Dict[str, int] = field(default_factory=dict)
    inventory_complete: bool = False

    def merge(self, other: "Record") -> None:
        self.action = self.action or other.action
        self.location = self.location or other.location
        if other.events is not None:
            self.events = (self.events or frozenset()) | other.events
        self.inventory.update(other.inventory)
        self.inventory_complete = self.inventory_complete or other.inventory_complete

    def held(self, obj: Optional[str]) -> Optional[int]:
        if obj is None:
            return None
        if obj in self.inventory:
            return self.inventory[obj]
        return 0 if self.inventory_complete else None


def records_from_trajectory(t: Trajectory) -> Dict[int, Record]:
    return {
        s.index: Record(s.index, s.action, s.location, frozenset(s.events), dict(s.inventory), True)
        for s in t.steps
    }


class Engine:
    def __init__(self, records: Mapping[int, Record]):
        self.records = dict(records)
        self.order = sorted(self.records)

    def occurrences(self, kind: str, obj: Optional[str]) -> List[int]:
        out = []
        for i in self.order:
            evs = self.records[i].events
            if evs:
                out.extend(i for e in evs if e.kind == kind and (obj is None or e.object == obj))
        return out

    def occurrence(self, ref: EventRef) -> Optional[int]:
        kind, obj, k = ref
        steps = sorted(set(self.occurrences(kind, obj)))
        if not steps:
            return None
        if k is None:
            k = 1
        if k == "last":
            return steps[-1]
        return steps[k - 1] if len(steps) >= k else None

    def project(self, step: int, op: Project) -> Optional[str]:
        r = self.records[step]
        if op.field == "step":
            return str(step)
        if op.field == "action":
            return r.action or None
        if op.field == "location":
            return r.location or None
        if op.field == "item":
            if r.events is None:
                return None
            gains = sorted(e.object for e in r.events if e.kind == "gain_item")
            return gains[0] if len(gains) == 1 else None
        n = r.held(op.obj)
        return None if n is None else str(n)

    def run(self, program: Program) -> Optional[str]:
        program.validate()
        cur: Optional[int] = None
        for op in program.ops:
            if isinstance(op, SelectStep):
                cur = op.step if op.step in self.records else None
            elif isinstance(op, SelectOccurrence):
                cur = self.occurrence((op.event, op.obj, op.k))
            elif isinstance(op, Offset):
                target = cur + op.delta
                cur = target if target in self.records else None
            elif isinstance(op, Project):
                return self.project(cur, op)
            elif isinstance(op, CountEvents):
                n = len(self.occurrences(op.event, op.obj))
                return str(n) if n else None
            elif isinstance(op, Interval):
                a, b = self.occurrence(op.first), self.occurrence(op.second)
                return None if a is None or b is None else str(abs(b - a))
            elif isinstance(op, CompareOrder):
                a, b = self.occurrence(op.first), self.occurrence(op.second)
                if a is None or b is None or a == b:
                    return None
                return op.first[1] if a < b else op.second[1]
            if cur is None:
                return None
        return None


def execute_program(p: Program, t: Trajectory) -> Answer:
    return Answer.of(Engine(records_from_trajectory(t)).run(p), "gold_executor")


# ----------------------------------------------------------------------------
# pack line parsing
# ----------------------------------------------------------------------------

_TAGGED = re.compile(r"^\[(\d+)\] ?(.*)$", re.S)
_FULL = re.compile(r"^(?P<action>.+?) at (?P<loc>\S+); events:(?P<ev>.*)$")
_OBJ = re.compile(r"^at (?P<loc>\S+); objects:")
_KV = re.compile(r"^(?:[a-z_]+=\S*)(?: [a-z_]+=\S*)*$")


def _plain_record(step: int, body: str) -> Record:
    f = plain_fields(body)
    r = Record(step)
    if "action" in f:
        r.action = f["action"].strip() or None
    if "loc" in f:
        r.location = f["loc"].strip() or None
    if "events" in f:
        r.events = frozenset(parse_events(f["events"]))
    if "inv" in f:
        r.inventory = _inventory(f["inv"].strip())
        r.inventory_complete = True
    return r


def _inventory(text: str) -> Dict[str, int]:
    inv = {}
    for part in text.split(","):
        name, sep, count = part.rpartition(":")
        if sep and name and count.isdigit():
            inv[name] = int(count)
    return inv


def _kv_record(step: int, body: str) -> Record:
    r = Record(step)
    for tok in body.split():
        key, _, value = tok.partition("=")
        if key == "act":
            r.action = value or None
        elif key == "loc":
            r.location = value or None
        elif key == "ev":
            r.events = frozenset(parse_events(value))
        elif key == "inv":
            r.inventory.update(_inventory(value))
    return r


def parse_line(line: str) -> Record:
    """One rendered evidence line to a record; raises :class:`EvidenceCorrupt`."""
    if line.startswith("step="):
        m = re.match(r"step=(\d+)", line)
        if not m:
            raise EvidenceCorrupt(line)
        return _plain_record(int(m.group(1)), line)
    m = _TAGGED.match(line)
    if not m:
        raise EvidenceCorrupt(line)
    step, body = int(m.group(1)), m.group(2)
    summary, sep, digest = body.rpartition(" | ")
    if not sep:
        summary, digest = body, ""
    if body.endswith(" |"):
        summary, digest = body[:-2], ""
    if summary.startswith("step="):
        r = _plain_record(step, summary)
    elif summary.startswith("events:"):
        r = Record(step, events=frozenset(parse_events(summary)))
    elif _OBJ.match(summary):
        r = Record(step, location=_OBJ.match(summary).group("loc"))
    elif _FULL.match(summary):
        g = _FULL.match(summary)
        r = Record(step, action=g["action"], location=g["loc"], events=frozenset(parse_events(g["ev"])))
    elif _KV.match(summary):
        r = _kv_record(step, summary)
    elif summary == "":
        r = Record(step)
    else:
        raise EvidenceCorrupt(line)
    if digest:
        if not _KV.match(digest):
            raise EvidenceCorrupt(line)
        r.merge(_kv_record(step, digest))
    return r


def pack_records(pack: EvidencePack) -> Dict[int, Record]:
    records: Dict[int, Record] = {}
    for _, line in pack.lines:
        try:
            r = parse_line(line)
        except EvidenceCorrupt:
            if pack.truncated:
                continue
            raise
        if r.step in records:
            records[r.step].merge(r)
        else:
            records[r.step] = r
    return records


def answer_current(pack: EvidencePack, anchors: AnchorTuple) -> Answer:
    engine = Engine(pack_records(pack))
    return Answer.of(engine.run(compile_program(anchors)), "current")


def answer_gold(anchors: AnchorTuple, t: Trajectory) -> Answer:
    return execute_program(compile_program(anchors), t)


# ----------------------------------------------------------------------------
# generic answerer
# ----------------------------------------------------------------------------

STOPWORDS = frozenset(
    "a an the what which where when how many did does do was were is at of to in on by after before "
    "between and or agent step steps times occur occurred happened first".split()
)


def answer_generic(pack: EvidencePack, question: str) -> Answer:
    """Token after the best-matching question keyword in the highest-overlap line."""
    keywords = [w for w in words(question) if w not in STOPWORDS]
    kwset = set(keywords)
    if not kwset:
        return Answer.of(None, "generic")
    best: Optional[List[str]] = None
    best_overlap = 0
    for _, line in pack.lines:
        toks = words(line)
        overlap = len(kwset & set(toks))
        if overlap > best_overlap:
            best, best_overlap = toks, overlap
    if best is None:
        return Answer.of(None, "generic")
    for kw in sorted(kwset & set(best), key=lambda w: (-len(w), w)):
        i = best.index(kw)
        if i + 1 < len(best):
            return Answer.of(best[i + 1], "generic")
    return Answer.of(None, "generic")


def answer_with(protocol: str, pack: EvidencePack, anchors: AnchorTuple, question: str,
                trajectory: Optional[Trajectory] = None) -> Answer:
    if protocol == "current":
        return answer_current(pack, anchors)
    if protocol == "generic":
        return answer_generic(pack, question)
    if protocol == "gold_executor":
        if trajectory is None:
            raise ValueError("gold_executor needs the trajectory")
        return answer_gold(anchors, trajectory)
    raise ValueError(f"unknown protocol {protocol!r}")
