"""Seed-based generator for small fixture games.

Produces simple fetch-and-place quests over a random room tree. This is a
desk-scale stand-in for a full game generator, intended for property tests
and demos rather than benchmark fidelity.
"""

from __future__ import annotations

import random

from .engine import DIRECTIONS, _OPPOSITE, GameDefinition, GameObject, QuestStep, Room

_ROOM_NAMES = [
    "Pantry", "Scullery", "Attic", "Workshop", "Parlour", "Laundry",
    "Greenhouse", "Vault", "Studio", "Cloakroom", "Bedchamber", "Lounge",
]
_ITEM_NAMES = [
    "lantern", "spoon", "ribbon", "pebble", "candle", "notebook",
    "apple", "biscuit", "marble", "feather", "thimble", "button",
]
_SUPPORT_NAMES = ["table", "bench", "crate", "dresser", "stand"]
_EDIBLE = {"apple", "biscuit"}


def generate_game(seed: int, n_rooms: int = 4, n_items: int = 3) -> GameDefinition:
    rng = random.Random(seed)
    n_rooms = max(2, min(n_rooms, len(_ROOM_NAMES)))
    room_names = rng.sample(_ROOM_NAMES, n_rooms)

    exits: dict[str, dict[str, str]] = {name: {} for name in room_names}
    for i in range(1, n_rooms):
        child = room_names[i]
        # attach to a random earlier room through a free direction pair
        candidates = [
            (parent, d)
            for parent in room_names[:i]
            for d in DIRECTIONS
            if d not in exits[parent] and _OPPOSITE[d] not in exits[child]
        ]
        parent, direction = rng.choice(candidates)
        exits[parent][direction] = child
        exits[child][_OPPOSITE[direction]] = parent

    rooms = {}
    for name in room_names:
        doors = ", ".join(f"an exit to the {d}" for d in sorted(exits[name]))
        rooms[name] = Room(
            name=name,
            description=f"You are in the {name.lower()}. There is {doors}.",
            exits=exits[name],
        )

    objects: dict[str, GameObject] = {}
    support_name = rng.choice(_SUPPORT_NAMES)
    support_room = rng.choice(room_names)
    objects[support_name] = GameObject(
        name=support_name, location=f"floor:{support_room}", portable=False, support=True
    )
    item_names = rng.sample(_ITEM_NAMES, max(1, n_items))
    for item in item_names:
        room = rng.choice(room_names)
        objects[item] = GameObject(
            name=item, location=f"floor:{room}", portable=True, edible=item in _EDIBLE
        )

    # items spawn on floors, so neither quest step is satisfied at the start
    target = item_names[0]
    quest = (
        QuestStep(kind="holding", object=target),
        QuestStep(kind="on", object=target, support=support_name),
    )
    start_room = room_names[0]

    intro = (
        f"Welcome to a tiny fixture game! Find the {target}, pick it up, and "
        f"rest it on the {support_name} in the {support_room.lower()}. Good luck!"
    )
    return GameDefinition(
        game_id=f"generated-{seed}",
        intro_text=intro,
        start_room=start_room,
        rooms=rooms,
        objects=objects,
        quest=quest,
        max_score=len(quest),
    )
