"""Deterministic text-adventure engine with replay-based, stateless queries.

Every query replays a command sequence from the initial state, so concurrent
callers never share mutable state. Definitions are immutable after load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

DIRECTIONS = ("north", "south", "east", "west")
_OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east"}

PLAYER = "player"

# Refusal feedback lines; commands producing these consumed a turn but changed
# nothing. Kept as a closed set so admissibility checks can recognize them.
REFUSAL_UNKNOWN_VERB = "That's not a verb I recognise."
REFUSAL_NO_EXIT = "You can't go that way."
REFUSAL_NOT_VISIBLE = "You can't see any such thing."
REFUSAL_NOT_PORTABLE = "You can't take that."
REFUSAL_NOT_HELD = "You're not carrying that."
REFUSAL_NOT_SUPPORT = "You can't put things on that."
REFUSAL_INEDIBLE = "That's plainly inedible."

_REFUSALS = {
    REFUSAL_UNKNOWN_VERB,
    REFUSAL_NO_EXIT,
    REFUSAL_NOT_VISIBLE,
    REFUSAL_NOT_PORTABLE,
    REFUSAL_NOT_HELD,
    REFUSAL_NOT_SUPPORT,
    REFUSAL_INEDIBLE,
}

THE_END = "*** The End ***"
SCORE_UP = "Your score has just gone up by one point."


def is_refusal(feedback: str) -> bool:
    return feedback in _REFUSALS


@dataclass(frozen=True)
class Room:
    name: str
    description: str
    exits: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class GameObject:
    name: str
    location: str  # "player", "floor:<room>", or "on:<support>"
    portable: bool = True
    edible: bool = False
    support: bool = False


@dataclass(frozen=True)
class QuestStep:
    """One scored predicate: at(room), holding(object), or on(object, support)."""

    kind: str
    object: str = ""
    support: str = ""
    room: str = ""

    def satisfied(self, state: "GameState") -> bool:
        if self.kind == "at":
            return state.current_room == self.room
        if self.kind == "holding":
            return state.locations.get(self.object) == PLAYER
        if self.kind == "on":
            return state.locations.get(self.object) == f"on:{self.support}"
        raise ValueError(f"unknown quest step kind '{self.kind}'")


@dataclass(frozen=True)
class GameDefinition:
    game_id: str
    intro_text: str
    start_room: str
    rooms: dict[str, Room]
    objects: dict[str, GameObject]
    quest: tuple[QuestStep, ...]
    max_score: int

    def __post_init__(self) -> None:
        if not self.quest:
            raise ValueError(f"game '{self.game_id}': quest must be non-empty")
        if self.max_score != len(self.quest):
            raise ValueError(f"game '{self.game_id}': max_score must equal quest length")
        if self.start_room not in self.rooms:
            raise ValueError(f"game '{self.game_id}': unknown start room '{self.start_room}'")
        for room in self.rooms.values():
            for direction, target in room.exits.items():
                if direction not in DIRECTIONS:
                    raise ValueError(f"game '{self.game_id}': bad direction '{direction}'")
                if target not in self.rooms:
                    raise ValueError(f"game '{self.game_id}': exit to unknown room '{target}'")


@dataclass
class GameState:
    current_room: str
    locations: dict[str, str]  # object name -> location string
    completed_steps: int
    score: int
    turns: int
    finished: bool

    def inventory(self) -> list[str]:
        return sorted(name for name, loc in self.locations.items() if loc == PLAYER)


class GameSession:
    """Mutable play-through of one definition; replay() folds commands over it."""

    def __init__(self, definition: GameDefinition) -> None:
        self.definition = definition
        self.state = GameState(
            current_room=definition.start_room,
            locations={name: obj.location for name, obj in definition.objects.items()},
            completed_steps=0,
            score=0,
            turns=1,  # the opening look counts as the first turn
            finished=False,
        )

    # -- queries ---------------------------------------------------------

    def _objects_at(self, location: str) -> list[str]:
        return sorted(n for n, loc in self.state.locations.items() if loc == location)

    def _floor_objects(self, room: str) -> list[str]:
        defs = self.definition.objects
        return [n for n in self._objects_at(f"floor:{room}") if not defs[n].support]

    def _supports_in(self, room: str) -> list[str]:
        defs = self.definition.objects
        return [n for n in self._objects_at(f"floor:{room}") if defs[n].support]

    def _visible_objects(self) -> list[str]:
        """Objects in the current room (floor, supports, and their contents) plus held."""
        room = self.state.current_room
        names = set(self._objects_at(f"floor:{room}"))
        for support in self._supports_in(room):
            names.update(self._objects_at(f"on:{support}"))
        names.update(self.state.inventory())
        return sorted(names)

    def describe_room(self) -> str:
        room = self.definition.rooms[self.state.current_room]
        parts = [f"-= {room.name} =-", room.description]
        for support in self._supports_in(room.name):
            for item in self._objects_at(f"on:{support}"):
                parts.append(f"On the {support} you see a {item}.")
        for item in self._floor_objects(room.name):
            parts.append(f"There is a {item} on the floor.")
        return "\n\n".join(parts)

    def intro(self) -> str:
        return self.definition.intro_text + "\n\n" + self.describe_room()

    # -- stepping --------------------------------------------------------

    def step(self, command: str) -> str:
        """Apply one command; refusals consume a turn but change nothing."""
        self.state.turns += 1
        feedback = self._apply(command.strip().lower())
        feedback = self._advance_quest(feedback)
        return feedback

    def _apply(self, command: str) -> str:
        words = command.split()
        if not words:
            return REFUSAL_UNKNOWN_VERB
        verb, rest = words[0], words[1:]

        if verb == "look" and not rest:
            return self.describe_room()
        if verb == "inventory" and not rest:
            held = self.state.inventory()
            if not held:
                return "You are carrying nothing."
            return "You are carrying: " + ", ".join(f"a {n}" for n in held) + "."
        if verb == "go" and len(rest) == 1:
            return self._go(rest[0])
        if verb in ("get", "take"):
            return self._take(rest)
        if verb == "put":
            return self._put(rest)
        if verb == "drop" and rest:
            return self._drop(" ".join(rest))
        if verb == "examine" and rest:
            return self._examine(" ".join(rest))
        if verb == "eat" and rest:
            return self._eat(" ".join(rest))
        return REFUSAL_UNKNOWN_VERB

    def _go(self, direction: str) -> str:
        room = self.definition.rooms[self.state.current_room]
        target = room.exits.get(direction)
        if target is None:
            return REFUSAL_NO_EXIT
        self.state.current_room = target
        return self.describe_room()

    def _take(self, rest: list[str]) -> str:
        # accept "take <obj>" and "take <obj> from <support>"
        if "from" in rest:
            split = rest.index("from")
            name = " ".join(rest[:split])
            source = " ".join(rest[split + 1 :])
        else:
            name = " ".join(rest)
            source = None
        if not name:
            return REFUSAL_UNKNOWN_VERB
        obj = self.definition.objects.get(name)
        location = self.state.locations.get(name)
        room = self.state.current_room
        reachable = {f"floor:{room}"} | {f"on:{s}" for s in self._supports_in(room)}
        if obj is None or location not in reachable:
            return REFUSAL_NOT_VISIBLE
        if source is not None and location != f"on:{source}":
            return REFUSAL_NOT_VISIBLE
        if not obj.portable:
            return REFUSAL_NOT_PORTABLE
        self.state.locations[name] = PLAYER
        if location.startswith("on:"):
            return f"You take the {name} from the {location[3:]}."
        return f"You pick up the {name} from the ground."

    def _put(self, rest: list[str]) -> str:
        if "on" not in rest:
            return REFUSAL_UNKNOWN_VERB
        split = rest.index("on")
        name = " ".join(rest[:split])
        support = " ".join(rest[split + 1 :])
        if not name or not support:
            return REFUSAL_UNKNOWN_VERB
        if self.state.locations.get(name) != PLAYER:
            return REFUSAL_NOT_HELD
        if support not in self._supports_in(self.state.current_room):
            return REFUSAL_NOT_SUPPORT
        self.state.locations[name] = f"on:{support}"
        return f"You put the {name} on the {support}."

    def _drop(self, name: str) -> str:
        if self.state.locations.get(name) != PLAYER:
            return REFUSAL_NOT_HELD
        self.state.locations[name] = f"floor:{self.state.current_room}"
        return f"You drop the {name} on the ground."

    def _examine(self, name: str) -> str:
        if name not in self._visible_objects():
            return REFUSAL_NOT_VISIBLE
        return f"There's nothing special about the {name}."

    def _eat(self, name: str) -> str:
        if self.state.locations.get(name) != PLAYER:
            return REFUSAL_NOT_HELD
        if not self.definition.objects[name].edible:
            return REFUSAL_INEDIBLE
        del self.state.locations[name]
        return f"You eat the {name}. Not bad."

    def _advance_quest(self, feedback: str) -> str:
        quest = self.definition.quest
        while self.state.completed_steps < len(quest) and quest[self.state.completed_steps].satisfied(
            self.state
        ):
            self.state.completed_steps += 1
            self.state.score += 1
            feedback += "\n\n" + SCORE_UP
        if self.state.completed_steps == len(quest) and not self.state.finished:
            self.state.finished = True
            feedback += (
                f"\n\nYou scored {self.state.score} out of a possible "
                f"{self.definition.max_score}, in {self.state.turns} turns."
                f"\n\n{THE_END}"
            )
        return feedback


def replay(definition: GameDefinition, commands: Iterable[str]) -> tuple[GameState, list[str]]:
    """Replay *commands* from the initial state; transcript[0] is the intro."""
    session = GameSession(definition)
    transcript = [session.intro()]
    for command in commands:
        transcript.append(session.step(command))
    return session.state, transcript


def admissible_commands(definition: GameDefinition, commands: Iterable[str]) -> list[str]:
    """Commands executable (without refusal) in the replayed state, sorted."""
    session = GameSession(definition)
    for command in commands:
        session.step(command)
    state = session.state
    room = state.current_room
    out = {"look", "inventory"}
    for direction in sorted(definition.rooms[room].exits):
        out.add(f"go {direction}")
    supports = session._supports_in(room)
    for name in session._floor_objects(room):
        if definition.objects[name].portable:
            out.add(f"take {name}")
    for support in supports:
        for item in session._objects_at(f"on:{support}"):
            out.add(f"take {item} from {support}")
    for held in state.inventory():
        out.add(f"drop {held}")
        if definition.objects[held].edible:
            out.add(f"eat {held}")
        for support in supports:
            out.add(f"put {held} on {support}")
    for name in session._visible_objects():
        out.add(f"examine {name}")
    return sorted(out)


def describe(definition: GameDefinition, commands: Iterable[str]) -> str:
    session = GameSession(definition)
    for command in commands:
        session.step(command)
    return session.describe_room()


def possible_commands(definition: GameDefinition) -> list[str]:
    """The full grammar instantiated over the definition, independent of state."""
    out = {"look", "inventory"}
    directions = {d for room in definition.rooms.values() for d in room.exits}
    out.update(f"go {d}" for d in directions)
    portables = [n for n, o in definition.objects.items() if o.portable]
    supports = [n for n, o in definition.objects.items() if o.support]
    for name in portables:
        out.add(f"take {name}")
        out.add(f"drop {name}")
        if definition.objects[name].edible:
            out.add(f"eat {name}")
        for support in supports:
            out.add(f"take {name} from {support}")
            out.add(f"put {name} on {support}")
    for name in definition.objects:
        out.add(f"examine {name}")
    return sorted(out)


# -- loading ---------------------------------------------------------------


def game_from_dict(raw: dict) -> GameDefinition:
    rooms = {
        name: Room(name=name, description=r["description"], exits=dict(r.get("exits", {})))
        for name, r in raw["rooms"].items()
    }
    objects = {
        name: GameObject(
            name=name,
            location=o["location"],
            portable=o.get("portable", True),
            edible=o.get("edible", False),
            support=o.get("support", False),
        )
        for name, o in raw["objects"].items()
    }
    quest = tuple(
        QuestStep(
            kind=q["kind"],
            object=q.get("object", ""),
            support=q.get("support", ""),
            room=q.get("room", ""),
        )
        for q in raw["quest"]
    )
    return GameDefinition(
        game_id=str(raw["game_id"]),
        intro_text=raw["intro_text"],
        start_room=raw["start_room"],
        rooms=rooms,
        objects=objects,
        quest=quest,
        max_score=raw.get("max_score", len(quest)),
    )


def load_game(path: str | Path) -> GameDefinition:
    with open(path, encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))


class GameStore:
    def __init__(self, games: Iterable[GameDefinition] = ()) -> None:
        self._games: dict[str, GameDefinition] = {}
        for game in games:
            self.add(game)

    def add(self, game: GameDefinition) -> None:
        if game.game_id in self._games:
            raise ValueError(f"duplicate game id '{game.game_id}'")
        self._games[game.game_id] = game

    def get(self, game_id: str) -> Optional[GameDefinition]:
        return self._games.get(game_id)

    def ids(self) -> list[str]:
        return sorted(self._games)
