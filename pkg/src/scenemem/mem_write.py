"""Structured scene-event memory: per-step units, write modes and inverted indexes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .traj_model import (
    EventFact,
    Step,
    Trajectory,
    parse_events,
    parse_inventory,
    plain_fields,
    serialize_step_plain,
    write_jsonl,
)

WRITE_MODES = ("full", "event_only", "object_only", "plain_chunk")
# plain_chunk keeps this many whitespace-delimited words of the plain step line
PLAIN_CHUNK_WORDS = 20

Relation = Tuple[str, str, str]


@dataclass(frozen=True)
class MemoryUnit:
    step: int
    action: str = ""
    objects: FrozenSet[str] = frozenset()
    events: FrozenSet[EventFact] = frozenset()
    relations: FrozenSet[Relation] = frozenset()
    inventory: Mapping[str, int] = field(default_factory=dict)
    state_facts: FrozenSet[str] = frozenset()
    location: str = ""
    summary: str = ""

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "action": self.action,
            "objects": sorted(self.objects),
            "events": [e.to_dict() for e in sorted(self.events)],
            "relations": [list(r) for r in sorted(self.relations)],
            "state": {"inventory": dict(sorted(self.inventory.items())), "facts": sorted(self.state_facts)},
            "location": self.location,
            "summary": self.summary,
        }

    def state_labels(self) -> FrozenSet[str]:
        """State facts plus ``has:<item>`` for every held item."""
        return frozenset(self.state_facts) | frozenset(f"has:{k}" for k, v in self.inventory.items() if v > 0)

    def event_kinds(self) -> FrozenSet[str]:
        return frozenset(e.kind for e in self.events)

    def mentions(self) -> FrozenSet[str]:
        """Every entity label this unit carries in a structured field."""
        labels = set(self.objects) | {e.object for e in self.events} | set(self.inventory)
        if self.location:
            labels.add(self.location)
        return frozenset(labels)


@dataclass(frozen=True)
class MemoryStore:
    episode_id: str
    units: Tuple[MemoryUnit, ...]
    write_mode: str
    index_object: Mapping[str, Tuple[int, ...]]
    index_event: Mapping[str, Tuple[int, ...]]
    index_location: Mapping[str, Tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.units)

    @cached_property
    def views(self) -> Tuple[MemoryUnit, ...]:
        """Units as seen by anchor matching: plain-text units are read back into fields.

        Indexes are never rebuilt from these views, so plain-text memory still
        cannot resolve occurrences through :func:`lookup`.
        """
        return tuple(exposed_view(u) for u in self.units)

    def unit(self, step: int) -> Optional[MemoryUnit]:
        if 0 <= step < len(self.units):
            return self.units[step]
        return None


def _events_text(events) -> str:
    return ",".join(sorted(e.render() for e in events))


def full_summary(s: Step) -> str:
    return f"{s.action} at {s.location}; events: {_events_text(s.events)}".rstrip()


def _relations(s: Step, last: bool) -> FrozenSet[Relation]:
    rel = {("agent", "at", s.location)}
    rel |= {("agent", "has", k) for k, v in s.inventory.items() if v > 0}
    if not last:
        rel.add((f"step_{s.index}", "next", f"step_{s.index + 1}"))
    return frozenset(rel)


def write_unit(s: Step, mode: str, last: bool = False) -> MemoryUnit:
    if mode == "full":
        return MemoryUnit(
            step=s.index,
            action=s.action,
            objects=frozenset(s.visible_objects),
            events=frozenset(s.events),
            relations=_relations(s, last),
            inventory=dict(s.inventory),
            state_facts=frozenset(s.state_facts),
            location=s.location,
            summary=full_summary(s),
        )
    if mode == "event_only":
        return MemoryUnit(step=s.index, events=frozenset(s.events),
                          summary=f"events: {_events_text(s.events)}".rstrip())
    if mode == "object_only":
        objs = ",".join(sorted(s.visible_objects))
        return MemoryUnit(step=s.index, objects=frozenset(s.visible_objects), location=s.location,
                          summary=f"at {s.location}; objects: {objs}".rstrip())
    if mode == "plain_chunk":
        words = serialize_step_plain(s).split(" ")
        return MemoryUnit(step=s.index, summary=" ".join(words[:PLAIN_CHUNK_WORDS]))
    raise ValueError(f"unknown write mode {mode!r}")


def _build_index(units: Sequence[MemoryUnit], keys_of) -> Dict[str, Tuple[int, ...]]:
    idx: Dict[str, List[int]] = {}
    for u in units:
        for key in sorted(keys_of(u)):
            idx.setdefault(key, []).append(u.step)
    return {k: tuple(v) for k, v in sorted(idx.items())}


def write_trajectory(t: Trajectory, mode: str = "full") -> MemoryStore:
    if mode not in WRITE_MODES:
        raise ValueError(f"unknown write mode {mode!r}")
    n = len(t.steps)
    units = tuple(write_unit(s, mode, last=(i == n - 1)) for i, s in enumerate(t.steps))
    return MemoryStore(
        episode_id=t.episode_id,
        units=units,
        write_mode=mode,
        index_object=_build_index(units, lambda u: u.objects),
        index_event=_build_index(units, lambda u: u.event_kinds()),
        index_location=_build_index(units, lambda u: {u.location} if u.location else set()),
    )


def lookup(store: MemoryStore, key_kind: str, key: str) -> List[int]:
    """Ascending steps whose unit carries ``key`` in the field named by ``key_kind``."""
    if key_kind == "object":
        idx = store.index_object
    elif key_kind == "event_kind":
        idx = store.index_event
    elif key_kind == "location":
        idx = store.index_location
    else:
        raise ValueError(f"unknown key kind {key_kind!r}")
    return list(idx.get(key, ()))


def _split(text: str) -> FrozenSet[str]:
    return frozenset(p for p in text.split(",") if p)


def exposed_view(u: MemoryUnit) -> MemoryUnit:
    if not u.summary.startswith("step=") or u.action or u.events or u.objects or u.location:
        return u
    f = plain_fields(u.summary)
    try:
        inventory = parse_inventory(f.get("inv", "").strip())
    except ValueError:
        inventory = {}
    return MemoryUnit(
        step=u.step,
        action=f.get("action", "").strip(),
        objects=_split(f.get("objs", "").strip()),
        events=frozenset(parse_events(f.get("events", ""))),
        inventory=inventory,
        state_facts=_split(f.get("state", "").strip()),
        location=f.get("loc", "").strip(),
        summary=u.summary,
    )


def unit_text(u: MemoryUnit) -> str:
    """Text used for lexical matching: step tag, summary and every populated field."""
    parts = [f"step {u.step}", u.summary]
    if u.objects:
        parts.append("objs " + " ".join(sorted(u.objects)))
    if u.inventory:
        parts.append("inv " + " ".join(f"{k} {v}" for k, v in sorted(u.inventory.items())))
    if u.state_facts:
        parts.append("state " + " ".join(sorted(u.state_facts)))
    return " ".join(parts)


def dump_store(path, store: MemoryStore) -> None:
    write_jsonl(path, (u.to_dict() for u in store.units))
