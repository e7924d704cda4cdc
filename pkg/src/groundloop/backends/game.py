"""Game-world interface backends speaking the "game id | commands" protocol."""

from __future__ import annotations

from ..game.engine import GameStore, admissible_commands, describe, possible_commands, replay
from ..interfaces import InterfaceResult


def _format_hint(start_tag: str, end_tag: str) -> str:
    return (
        f"Invalid query format. Please use the format "
        f"{start_tag}game id | command1, command2, ... {end_tag}."
    )


def parse_commands(text: str) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


class _ReplayBackend:
    """Shared parsing for the three replay-shaped game interfaces."""

    def __init__(self, store: GameStore, start_tag: str, end_tag: str) -> None:
        self.store = store
        self.hint = _format_hint(start_tag, end_tag)

    def __call__(self, query: str) -> InterfaceResult:
        game_id, sep, command_text = query.partition("|")
        if not sep:
            return InterfaceResult(body=self.hint, is_error=True)
        game_id = game_id.strip()
        game = self.store.get(game_id)
        if game is None:
            return InterfaceResult(body=f"Unknown game id '{game_id}'.", is_error=True)
        return self.answer(game, parse_commands(command_text))

    def answer(self, game, commands) -> InterfaceResult:
        raise NotImplementedError


class FeedbackBackend(_ReplayBackend):
    """Text observation produced by the last command (the intro when none)."""

    def __init__(self, store: GameStore, start_tag: str = "<feedback>", end_tag: str = "</feedback>") -> None:
        super().__init__(store, start_tag, end_tag)

    def answer(self, game, commands) -> InterfaceResult:
        _, transcript = replay(game, commands)
        return InterfaceResult(body=transcript[-1])


class DescriptionBackend(_ReplayBackend):
    def __init__(self, store: GameStore, start_tag: str = "<description>", end_tag: str = "</description>") -> None:
        super().__init__(store, start_tag, end_tag)

    def answer(self, game, commands) -> InterfaceResult:
        return InterfaceResult(body=describe(game, commands))


class AdmissibleBackend(_ReplayBackend):
    def __init__(
        self,
        store: GameStore,
        start_tag: str = "<admissiblecommand>",
        end_tag: str = "</admissiblecommand>",
    ) -> None:
        super().__init__(store, start_tag, end_tag)

    def answer(self, game, commands) -> InterfaceResult:
        return InterfaceResult(body=repr(admissible_commands(game, commands)))


class PossibleBackend:
    """Query is a bare game id; no command sequence."""

    def __init__(self, store: GameStore) -> None:
        self.store = store

    def __call__(self, query: str) -> InterfaceResult:
        game_id = query.strip()
        game = self.store.get(game_id)
        if game is None:
            return InterfaceResult(body=f"Unknown game id '{game_id}'.", is_error=True)
        return InterfaceResult(body=repr(possible_commands(game)))
