"""Canonical trajectory representation, validation, plain serialization and archive conversion."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Union

EVENT_KINDS: FrozenSet[str] = frozenset(
    {"gain_item", "visit", "unlock", "collect", "craft", "use_item", "observe"}
)
ENV_KINDS: FrozenSet[str] = frozenset({"gridworld", "textadventure", "archive"})
ARCHIVE_KINDS: FrozenSet[str] = frozenset({"email", "image", "video", "other"})

# labels appear inside comma lists and kind(object@loc) mentions, so they must avoid those separators
LABEL_RE = re.compile(r"^[a-z0-9_:.\-]+$")


@dataclass(frozen=True, order=True)
class EventFact:
    kind: str
    object: str
    location: str = ""

    def render(self) -> str:
        if self.location:
            return f"{self.kind}({self.object}@{self.location})"
        return f"{self.kind}({self.object})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "object": self.object, "location": self.location}


@dataclass(frozen=True)
class Step:
    index: int
    action: str
    observation: str
    location: str
    visible_objects: FrozenSet[str] = frozenset()
    inventory: Mapping[str, int] = field(default_factory=dict)
    events: FrozenSet[EventFact] = frozenset()
    state_facts: FrozenSet[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "action": self.action,
            "observation": self.observation,
            "location": self.location,
            "visible_objects": sorted(self.visible_objects),
            "inventory": {k: self.inventory[k] for k in sorted(self.inventory)},
            "events": [e.to_dict() for e in sorted(self.events)],
            "state_facts": sorted(self.state_facts),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Step":
        return cls(
            index=int(d["index"]),
            action=d["action"],
            observation=d["observation"],
            location=d["location"],
            visible_objects=frozenset(d.get("visible_objects", ())),
            inventory=dict(d.get("inventory", {})),
            events=frozenset(
                EventFact(e["kind"], e["object"], e.get("location", "")) for e in d.get("events", ())
            ),
            state_facts=frozenset(d.get("state_facts", ())),
        )


@dataclass(frozen=True)
class Trajectory:
    episode_id: str
    env_kind: str
    steps: Sequence[Step]
    seed: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "env_kind": self.env_kind,
            "steps": [s.to_dict() for s in self.steps],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Trajectory":
        return cls(
            episode_id=d["episode_id"],
            env_kind=d["env_kind"],
            steps=tuple(Step.from_dict(s) for s in d["steps"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class ArchiveItem:
    item_id: str
    timestamp: float
    kind: str
    body: str

    @classmethod
    def from_dict(cls, d: Mapping) -> "ArchiveItem":
        return cls(d["item_id"], d["timestamp"], d["kind"], d["body"])

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "timestamp": self.timestamp, "kind": self.kind, "body": self.body}


class ArchiveError(ValueError):
    pass


def validate_trajectory(t: Trajectory, event_kinds: Iterable[str] = EVENT_KINDS) -> List[str]:
    """Return every invariant violation found in ``t``; an empty list means valid.

    Violations are reported as data so callers can log them all at once.
    """
    kinds = frozenset(event_kinds)
    problems: List[str] = []
    if not t.steps:
        return ["steps nonempty"]
    if t.env_kind not in ENV_KINDS:
        problems.append(f"unknown env_kind {t.env_kind!r}")
    expected = 0
    for s in t.steps:
        if s.index != expected:
            if s.index > expected:
                for missing in range(expected, s.index):
                    problems.append(f"gap at index {missing}")
            else:
                problems.append(f"step {s.index}: index out of order (expected {expected})")
        expected = max(expected, s.index) + 1
        where = f"step {s.index}"
        for item, count in s.inventory.items():
            if not isinstance(count, int) or isinstance(count, bool) or count < 0:
                problems.append(f"{where}: inventory count for {item!r} must be a non-negative integer")
            if not LABEL_RE.match(item):
                problems.append(f"{where}: bad inventory label {item!r}")
        for ev in s.events:
            if ev.kind not in kinds:
                problems.append(f"{where}: event kind {ev.kind!r} not in registry")
            if not LABEL_RE.match(ev.object) or (ev.location and not LABEL_RE.match(ev.location)):
                problems.append(f"{where}: bad event label {ev.render()!r}")
        for label in list(s.visible_objects) + list(s.state_facts) + [s.location]:
            if not LABEL_RE.match(label):
                problems.append(f"{where}: bad label {label!r}")
        if not s.action or "\n" in s.action or "=" in s.action:
            problems.append(f"{where}: bad action {s.action!r}")
    return problems


def is_valid(t: Trajectory) -> bool:
    return not validate_trajectory(t)


# ----------------------------------------------------------------------------
# plain serialization
# ----------------------------------------------------------------------------

def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(text: str) -> str:
    return re.sub(r"\\(.)", lambda m: "\n" if m.group(1) == "n" else m.group(1), text)


def serialize_step_plain(s: Step) -> str:
    objs = ",".join(sorted(s.visible_objects))
    inv = ",".join(f"{k}:{s.inventory[k]}" for k in sorted(s.inventory))
    events = ",".join(sorted(e.render() for e in s.events))
    state = ",".join(sorted(s.state_facts))
    return (
        f"step={s.index} action={s.action} loc={s.location} objs={objs} inv={inv} "
        f"events={events} state={state} obs={_escape(s.observation)}"
    )


_PLAIN_RE = re.compile(
    r"^step=(?P<step>\d+) action=(?P<action>.*?) loc=(?P<loc>\S*) objs=(?P<objs>\S*) "
    r"inv=(?P<inv>\S*) events=(?P<events>\S*) state=(?P<state>\S*) obs=(?P<obs>.*)$",
    re.S,
)
_EVENT_RE = re.compile(r"([a-z0-9_]+)\(([^()@,\s]+)(?:@([^()@,\s]+))?\)")


def parse_events(text: str) -> List[EventFact]:
    return [EventFact(k, o, loc or "") for k, o, loc in _EVENT_RE.findall(text)]


def _split(text: str) -> List[str]:
    return [p for p in text.split(",") if p]


def parse_inventory(text: str) -> Dict[str, int]:
    inv: Dict[str, int] = {}
    for part in _split(text):
        name, _, count = part.rpartition(":")
        inv[name] = int(count)
    return inv


def parse_step_plain(line: str) -> Step:
    """Inverse of :func:`serialize_step_plain` for complete lines."""
    m = _PLAIN_RE.match(line)
    if m is None:
        raise ValueError(f"not a plain step line: {line[:60]!r}")
    return Step(
        index=int(m["step"]),
        action=m["action"],
        observation=_unescape(m["obs"]),
        location=m["loc"],
        visible_objects=frozenset(_split(m["objs"])),
        inventory=parse_inventory(m["inv"]),
        events=frozenset(parse_events(m["events"])),
        state_facts=frozenset(_split(m["state"])),
    )


_PLAIN_KEYS = ("step", "action", "loc", "objs", "inv", "events", "state", "obs")


def plain_fields(text: str) -> Dict[str, str]:
    """Fields present in a possibly truncated plain line, keyed by their plain name.

    A key is reported only if its ``key=`` marker survived truncation; the value of
    the last surviving key may itself be cut short (only ``obs`` in practice, since
    truncation happens on whitespace and labels carry no spaces).
    """
    positions = []
    for key in _PLAIN_KEYS:
        marker = f"{key}=" if key == "step" else f" {key}="
        if key == "step":
            pos = 0 if text.startswith("step=") else -1
        else:
            pos = text.find(marker)
        if pos >= 0:
            positions.append((pos, key, pos + len(marker)))
    positions.sort()
    out: Dict[str, str] = {}
    for i, (_, key, start) in enumerate(positions):
        end = positions[i + 1][0] if i + 1 < len(positions) else len(text)
        out[key] = text[start:end]
    return out


# ----------------------------------------------------------------------------
# archives
# ----------------------------------------------------------------------------

def convert_archive_to_pseudo_trajectory(
    items: Sequence[ArchiveItem], episode_id: str = "archive", seed: int = 0
) -> Trajectory:
    if not items:
        raise ArchiveError("empty archive")
    keys = [(it.timestamp, it.item_id) for it in items]
    if len(set(keys)) != len(keys):
        raise ArchiveError("non-orderable archive")
    ordered = sorted(items, key=lambda it: (it.timestamp, it.item_id))
    steps = tuple(
        Step(
            index=i,
            action="observe",
            observation=it.body,
            location=it.kind,
            events=frozenset({EventFact("observe", it.item_id)}),
        )
        for i, it in enumerate(ordered)
    )
    return Trajectory(episode_id=episode_id, env_kind="archive", steps=steps, seed=seed)


# ----------------------------------------------------------------------------
# JSON-lines persistence
# ----------------------------------------------------------------------------

PathLike = Union[str, Path]


def iter_jsonl(path: PathLike) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path: PathLike, rows: Iterable[Mapping]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_trajectories(path: PathLike) -> List[Trajectory]:
    trajs = [Trajectory.from_dict(d) for d in iter_jsonl(path)]
    ids = [t.episode_id for t in trajs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate episode_id")
    return trajs


def save_trajectories(path: PathLike, trajs: Iterable[Trajectory]) -> None:
    write_jsonl(path, (t.to_dict() for t in trajs))


def load_archive(path: PathLike) -> List[ArchiveItem]:
    return [ArchiveItem.from_dict(d) for d in iter_jsonl(path)]


def find_step(t: Trajectory, index: int) -> Optional[Step]:
    if 0 <= index < len(t.steps):
        return t.steps[index]
    return None
