"""Deterministic miniature environments that emit trajectories with known ground truth.

Two families are provided: a survival-style grid world (spatial displacement,
item collection, crafting) and a small text adventure (rooms, keys, locked
doors, item use). Both are pure functions of their config.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .traj_model import EventFact, Step, Trajectory

# ----------------------------------------------------------------------------
# grid world
# ----------------------------------------------------------------------------

GRID_ACTIONS = ("move_n", "move_s", "move_e", "move_w", "collect", "craft")
MOVES = {"move_n": (0, -1), "move_s": (0, 1), "move_e": (1, 0), "move_w": (-1, 0)}
HEADINGS = {"move_n": "n", "move_s": "s", "move_e": "e", "move_w": "w"}

# site object -> resource it yields
SITE_RESOURCES = {"tree": "wood", "rock": "stone", "coal_vein": "coal", "iron_vein": "iron", "pond": "water"}
SITE_WEIGHTS = {"tree": 4, "rock": 3, "coal_vein": 2, "iron_vein": 1, "pond": 2}

# checked in order; the first feasible recipe is crafted
RECIPES: Tuple[Tuple[str, Tuple[Tuple[str, int], ...]], ...] = (
    ("table", (("wood", 2),)),
    ("pickaxe", (("wood", 1), ("stone", 1))),
    ("torch", (("wood", 1), ("coal", 1))),
    ("sword", (("wood", 1), ("iron", 1))),
)

DAY_LENGTH = 60


@dataclass(frozen=True)
class GridWorldConfig:
    width: int = 9
    height: int = 9
    n_object_sites: int = 12
    step_budget: int = 180
    seed: int = 1
    policy: str = "scripted_gather"

    def __post_init__(self) -> None:
        if self.width < 3 or self.height < 3:
            raise ValueError("width and height must be >= 3")
        if self.step_budget < 10:
            raise ValueError("step_budget must be >= 10")
        if self.policy not in ("valid_random", "scripted_gather"):
            raise ValueError(f"unknown gridworld policy {self.policy!r}")
        if self.n_object_sites > self.width * self.height:
            raise ValueError("more object sites than cells")


def cell_label(x: int, y: int) -> str:
    return f"cell_{x}_{y}"


def grid_layout(cfg: GridWorldConfig) -> Tuple[Dict[Tuple[int, int], str], Tuple[int, int]]:
    """Site placement and start cell, derived from the seed alone."""
    rng = random.Random(f"grid-layout-{cfg.seed}")
    cells = [(x, y) for x in range(cfg.width) for y in range(cfg.height)]
    chosen = rng.sample(cells, cfg.n_object_sites)
    names = list(SITE_WEIGHTS)
    weights = [SITE_WEIGHTS[n] for n in names]
    sites = {c: rng.choices(names, weights)[0] for c in chosen}
    # guarantee at least one tree so crafting is reachable
    if sites and "tree" not in sites.values():
        sites[chosen[0]] = "tree"
    start = rng.choice(cells)
    return sites, start


def feasible_recipe(inventory: Dict[str, int]) -> Optional[Tuple[str, Tuple[Tuple[str, int], ...]]]:
    for product, needs in RECIPES:
        if all(inventory.get(item, 0) >= n for item, n in needs):
            return product, needs
    return None


def _grid_visible(sites: Dict[Tuple[int, int], str], x: int, y: int) -> FrozenSet[str]:
    seen = set()
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            name = sites.get((x + dx, y + dy))
            if name:
                seen.add(name)
    return frozenset(seen)


def _grid_observation(x, y, heading, visible, inventory, time_of_day, site_here) -> str:
    dirs = {"n": "north", "s": "south", "e": "east", "w": "west"}
    parts = [f"You stand on {cell_label(x, y)} facing {dirs[heading]} under a {time_of_day} sky."]
    if site_here:
        parts.append(f"Right here there is a {site_here.replace('_', ' ')}.")
    if visible:
        parts.append("Nearby you notice " + ", ".join(sorted(v.replace("_", " ") for v in visible)) + ".")
    else:
        parts.append("The surrounding grass is empty and quiet.")
    if inventory:
        held = ", ".join(f"{k} x{v}" for k, v in sorted(inventory.items()))
        parts.append(f"Your pack holds {held}.")
    else:
        parts.append("Your pack is empty.")
    return " ".join(parts)


def _grid_valid_actions(cfg, sites, pos, inventory) -> List[str]:
    x, y = pos
    acts = []
    for a, (dx, dy) in MOVES.items():
        if 0 <= x + dx < cfg.width and 0 <= y + dy < cfg.height:
            acts.append(a)
    if pos in sites:
        acts.append("collect")
    if feasible_recipe(inventory):
        acts.append("craft")
    return acts


def _step_toward(pos, target) -> str:
    (x, y), (tx, ty) = pos, target
    if tx > x:
        return "move_e"
    if tx < x:
        return "move_w"
    if ty > y:
        return "move_s"
    return "move_n"


def _scripted_choice(rng, cfg, sites, pos, inventory, valid) -> str:
    recipe = feasible_recipe(inventory)
    if recipe and inventory.get(recipe[0], 0) < 2 and rng.random() < 0.5:
        return "craft"
    here = sites.get(pos)
    if here and inventory.get(SITE_RESOURCES[here], 0) < 2 and rng.random() < 0.7:
        return "collect"
    if rng.random() < 0.15:
        return rng.choice([a for a in valid if a in MOVES])
    wanted = [c for c, n in sites.items() if c != pos and inventory.get(SITE_RESOURCES[n], 0) < 2]
    if not wanted:
        wanted = [c for c in sites if c != pos]
    if not wanted:
        return rng.choice([a for a in valid if a in MOVES])
    dist = lambda c: abs(c[0] - pos[0]) + abs(c[1] - pos[1])
    best = min(dist(c) for c in wanted)
    target = rng.choice(sorted(c for c in wanted if dist(c) == best))
    return _step_toward(pos, target)


def grid_transition(cfg, sites, pos, heading, inventory, action):
    """Apply one action; returns (pos, heading, inventory, events)."""
    inventory = dict(inventory)
    events = set()
    x, y = pos
    if action in MOVES:
        dx, dy = MOVES[action]
        heading = HEADINGS[action]
        nx, ny = x + dx, y + dy
        if 0 <= nx < cfg.width and 0 <= ny < cfg.height:
            pos = (nx, ny)
            events.add(EventFact("visit", cell_label(nx, ny)))
    elif action == "collect":
        site = sites.get(pos)
        if site:
            res = SITE_RESOURCES[site]
            inventory[res] = inventory.get(res, 0) + 1
            events.add(EventFact("gain_item", res))
    elif action == "craft":
        recipe = feasible_recipe(inventory)
        if recipe:
            product, needs = recipe
            for item, n in needs:
                inventory[item] -= n
                if inventory[item] == 0:
                    del inventory[item]
            inventory[product] = inventory.get(product, 0) + 1
            events.add(EventFact("craft", product))
            events.add(EventFact("gain_item", product))
    else:
        raise ValueError(f"unknown gridworld action {action!r}")
    return pos, heading, inventory, frozenset(events)


def simulate_gridworld(cfg: GridWorldConfig) -> Trajectory:
    sites, pos = grid_layout(cfg)
    rng = random.Random(f"grid-policy-{cfg.policy}-{cfg.seed}")
    heading = "s"
    inventory: Dict[str, int] = {}
    steps = []
    for t in range(cfg.step_budget):
        valid = _grid_valid_actions(cfg, sites, pos, inventory)
        if cfg.policy == "valid_random":
            action = rng.choice(valid)
        else:
            action = _scripted_choice(rng, cfg, sites, pos, inventory, valid)
        pos, heading, inventory, events = grid_transition(cfg, sites, pos, heading, inventory, action)
        time_of_day = "day" if (t // DAY_LENGTH) % 2 == 0 else "night"
        visible = _grid_visible(sites, *pos)
        steps.append(
            Step(
                index=t,
                action=action,
                observation=_grid_observation(*pos, heading, visible, inventory, time_of_day, sites.get(pos)),
                location=cell_label(*pos),
                visible_objects=visible,
                inventory=dict(inventory),
                events=events,
                state_facts=frozenset({f"facing:{heading}", f"time:{time_of_day}"}),
            )
        )
    return Trajectory(f"gridworld-seed{cfg.seed}", "gridworld", tuple(steps), cfg.seed)


# ----------------------------------------------------------------------------
# text adventure
# ----------------------------------------------------------------------------

ROOM_NAMES = (
    "kitchen", "hall", "cellar", "library", "attic", "garden",
    "study", "pantry", "gallery", "chapel", "tower", "stable",
)
ITEM_NAMES = (
    "lamp", "rope", "coin", "book", "candle", "map",
    "apple", "bottle", "shovel", "ring", "feather", "mirror",
)
ROOM_FLAVOR = {
    "kitchen": "Copper pots hang above a cold hearth.",
    "hall": "A long hall lined with faded portraits.",
    "cellar": "Damp stone walls drip in the darkness.",
    "library": "Shelves of mouldering books reach the ceiling.",
    "attic": "Dust motes drift under the sloping roof.",
    "garden": "Overgrown hedges surround a dry fountain.",
    "study": "A heavy desk is buried under old letters.",
    "pantry": "Empty jars line the narrow shelves.",
    "gallery": "Statues stare blankly from their plinths.",
    "chapel": "Broken pews face a cracked altar.",
    "tower": "Wind howls through the arrow slits.",
    "stable": "Straw covers the floor of the empty stalls.",
}


@dataclass(frozen=True)
class TextAdvConfig:
    n_rooms: int = 8
    n_items: int = 7
    n_locked_doors: int = 2
    step_budget: int = 60
    seed: int = 1
    policy: str = "expert"

    def __post_init__(self) -> None:
        if self.n_rooms < 2:
            raise ValueError("n_rooms must be >= 2")
        if self.n_rooms > len(ROOM_NAMES):
            raise ValueError(f"at most {len(ROOM_NAMES)} rooms")
        if self.n_locked_doors > self.n_items:
            raise ValueError("n_locked_doors must not exceed n_items")
        if self.n_locked_doors > self.n_rooms - 1:
            raise ValueError("at most n_rooms - 1 locked doors")
        if self.n_items - self.n_locked_doors > len(ITEM_NAMES):
            raise ValueError(f"at most {len(ITEM_NAMES)} plain items")
        if self.policy not in ("valid_random", "expert"):
            raise ValueError(f"unknown text-adventure policy {self.policy!r}")


@dataclass(frozen=True)
class TextWorld:
    rooms: Tuple[str, ...]
    edges: FrozenSet[FrozenSet[str]]
    locked: Dict[FrozenSet[str], str]  # edge -> door label
    placement: Dict[str, str]  # item -> room
    start: str

    def neighbors(self, room: str) -> List[str]:
        return sorted(next(iter(e - {room})) for e in self.edges if room in e)


def door_label(room: str) -> str:
    return f"door_{room}"


def key_label(room: str) -> str:
    return f"key_{room}"


def build_text_world(cfg: TextAdvConfig) -> TextWorld:
    rng = random.Random(f"text-world-{cfg.seed}")
    rooms = tuple(rng.sample(ROOM_NAMES, cfg.n_rooms))
    edges = set()
    parent = {}
    for i in range(1, len(rooms)):
        p = rooms[rng.randrange(i)]
        parent[rooms[i]] = p
        edges.add(frozenset({p, rooms[i]}))
    start = rooms[0]
    locked_rooms = rng.sample(list(rooms[1:]), cfg.n_locked_doors)
    locked = {frozenset({parent[r], r}): door_label(r) for r in locked_rooms}

    # rooms reachable from the start without crossing any locked door
    open_region = {start}
    frontier = deque([start])
    while frontier:
        r = frontier.popleft()
        for e in edges:
            if r in e and e not in locked:
                other = next(iter(e - {r}))
                if other not in open_region:
                    open_region.add(other)
                    frontier.append(other)
    placement = {}
    for r in locked_rooms:
        placement[key_label(r)] = rng.choice(sorted(open_region))
    for item in rng.sample(ITEM_NAMES, cfg.n_items - cfg.n_locked_doors):
        placement[item] = rng.choice(rooms)
    return TextWorld(rooms, frozenset(edges), locked, placement, start)


@dataclass
class _TextState:
    room: str
    inventory: Dict[str, int]
    room_items: Dict[str, List[str]]
    unlocked: set


def _text_valid_actions(world: TextWorld, st: _TextState) -> List[str]:
    acts = []
    for n in world.neighbors(st.room):
        edge = frozenset({st.room, n})
        door = world.locked.get(edge)
        if door is None or door in st.unlocked:
            acts.append(f"go {n}")
        elif key_label(door[len("door_"):]) in st.inventory:
            acts.append(f"unlock {door}")
    for item in sorted(st.room_items.get(st.room, [])):
        acts.append(f"take {item}")
    for item in sorted(st.inventory):
        if not item.startswith("key_"):
            acts.append(f"use {item}")
    return acts


def text_transition(world: TextWorld, st: _TextState, action: str) -> FrozenSet[EventFact]:
    """Mutates ``st``; raises on an invalid action."""
    verb, _, arg = action.partition(" ")
    if verb == "go":
        edge = frozenset({st.room, arg})
        if edge not in world.edges:
            raise ValueError(f"no edge {st.room}->{arg}")
        door = world.locked.get(edge)
        if door is not None and door not in st.unlocked:
            raise ValueError(f"{door} is locked")
        st.room = arg
        return frozenset({EventFact("visit", arg)})
    if verb == "take":
        here = st.room_items.get(st.room, [])
        if arg not in here:
            raise ValueError(f"{arg} not in {st.room}")
        here.remove(arg)
        st.inventory[arg] = st.inventory.get(arg, 0) + 1
        return frozenset({EventFact("gain_item", arg)})
    if verb == "unlock":
        room = arg[len("door_"):]
        if key_label(room) not in st.inventory:
            raise ValueError(f"no key for {arg}")
        if not any(d == arg and st.room in e for e, d in world.locked.items()):
            raise ValueError(f"{arg} not adjacent")
        st.unlocked.add(arg)
        return frozenset({EventFact("unlock", arg)})
    if verb == "use":
        if arg not in st.inventory:
            raise ValueError(f"{arg} not held")
        return frozenset({EventFact("use_item", arg)})
    raise ValueError(f"unknown text action {action!r}")


def _text_visible(world: TextWorld, st: _TextState) -> FrozenSet[str]:
    seen = set(st.room_items.get(st.room, []))
    for e, d in world.locked.items():
        if st.room in e:
            seen.add(d)
    return frozenset(seen)


def _text_observation(world: TextWorld, st: _TextState) -> str:
    parts = [f"You are in the {st.room}.", ROOM_FLAVOR[st.room]]
    items = sorted(st.room_items.get(st.room, []))
    if items:
        parts.append("You see " + ", ".join(i.replace("_", " ") for i in items) + " here.")
    else:
        parts.append("There is nothing useful lying around.")
    parts.append("Exits lead to " + ", ".join(world.neighbors(st.room)) + ".")
    for e, d in sorted(world.locked.items(), key=lambda kv: kv[1]):
        if st.room in e:
            status = "open" if d in st.unlocked else "locked"
            parts.append(f"The {d.replace('_', ' ')} is {status}.")
    return " ".join(parts)


def _bfs_path(world: TextWorld, st: _TextState, start: str, goal: str) -> Optional[List[str]]:
    prev = {start: None}
    q = deque([start])
    while q:
        r = q.popleft()
        if r == goal:
            path = []
            while r != start:
                path.append(r)
                r = prev[r]
            return path[::-1]
        for n in world.neighbors(r):
            door = world.locked.get(frozenset({r, n}))
            if door is not None and door not in st.unlocked:
                continue
            if n not in prev:
                prev[n] = r
                q.append(n)
    return None


def _expert_choice(rng, world: TextWorld, st: _TextState, visited: set, used: set) -> str:
    valid = _text_valid_actions(world, st)
    takes = [a for a in valid if a.startswith("take ")]
    if takes:
        return takes[0]
    unlocks = [a for a in valid if a.startswith("unlock ")]
    if unlocks:
        return unlocks[0]
    uses = [a for a in valid if a.startswith("use ") and a[4:] not in used]
    if uses and rng.random() < 0.5:
        return uses[0]
    # goals: rooms with items, rooms adjacent to an unlockable door, unvisited rooms
    goals = set(r for r, items in st.room_items.items() if items)
    for e, d in world.locked.items():
        if d not in st.unlocked and key_label(d[len("door_"):]) in st.inventory:
            goals |= set(e)
    goals |= set(world.rooms) - visited
    goals.discard(st.room)
    best = None
    for g in sorted(goals):
        path = _bfs_path(world, st, st.room, g)
        if path and (best is None or len(path) < len(best)):
            best = path
    if best:
        return f"go {best[0]}"
    if uses:
        return uses[0]
    goes = [a for a in valid if a.startswith("go ")]
    return rng.choice(goes or valid)


def simulate_textadventure(cfg: TextAdvConfig) -> Trajectory:
    world = build_text_world(cfg)
    rng = random.Random(f"text-policy-{cfg.policy}-{cfg.seed}")
    room_items: Dict[str, List[str]] = {}
    for item, room in sorted(world.placement.items()):
        room_items.setdefault(room, []).append(item)
    st = _TextState(world.start, {}, room_items, set())
    visited = {world.start}
    used: set = set()
    steps = []
    for t in range(cfg.step_budget):
        if cfg.policy == "valid_random":
            # pick a verb first so the many "use" options do not dominate
            valid = _text_valid_actions(world, st)
            verbs = sorted({a.split(" ", 1)[0] for a in valid})
            verb = rng.choice(verbs)
            action = rng.choice([a for a in valid if a.startswith(verb + " ")])
        else:
            action = _expert_choice(rng, world, st, visited, used)
        events = text_transition(world, st, action)
        visited.add(st.room)
        if action.startswith("use "):
            used.add(action[4:])
        state = frozenset(
            f"{d}:{'unlocked' if d in st.unlocked else 'locked'}" for d in world.locked.values()
        )
        steps.append(
            Step(
                index=t,
                action=action,
                observation=_text_observation(world, st),
                location=st.room,
                visible_objects=_text_visible(world, st),
                inventory=dict(st.inventory),
                events=events,
                state_facts=state,
            )
        )
    return Trajectory(f"textadv-seed{cfg.seed}", "textadventure", tuple(steps), cfg.seed)


def vocabulary() -> Dict[str, Tuple[str, ...]]:
    """Every object/location label either simulator can emit, for question generation."""
    grid_objects = tuple(SITE_RESOURCES) + tuple(SITE_RESOURCES.values()) + tuple(p for p, _ in RECIPES)
    text_objects = ITEM_NAMES + tuple(key_label(r) for r in ROOM_NAMES) + tuple(door_label(r) for r in ROOM_NAMES)
    return {"gridworld": grid_objects, "textadventure": text_objects + ROOM_NAMES}


def simulate(env: str, seed: int, **overrides) -> Trajectory:
    if env == "gridworld":
        return simulate_gridworld(GridWorldConfig(seed=seed, **overrides))
    if env in ("textadv", "textadventure"):
        return simulate_textadventure(TextAdvConfig(seed=seed, **overrides))
    raise ValueError(f"unknown env {env!r}")


def simulate_many(env: str, seeds: Sequence[int], **overrides) -> List[Trajectory]:
    return [simulate(env, s, **overrides) for s in seeds]
