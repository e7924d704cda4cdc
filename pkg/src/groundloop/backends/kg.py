"""Knowledge-graph triple store with relation and tail-entity lookups."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..interfaces import InterfaceResult


@dataclass(frozen=True)
class Triple:
    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        if not (self.head and self.relation and self.tail):
            raise ValueError("triple fields must be non-empty")


def load_triples(path: str | Path) -> list[Triple]:
    triples: list[Triple] = []
    seen: set[tuple[str, str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            key = (raw["head"], raw["relation"], raw["tail"])
            if key in seen:  # set semantics
                continue
            seen.add(key)
            triples.append(Triple(*key))
    return triples


class TripleStore:
    def __init__(self, triples: Iterable[Triple]) -> None:
        self.triples = list(triples)

    def relations(self, entity: str) -> list[str]:
        """Sorted unique relations leaving *entity*."""
        return sorted({t.relation for t in self.triples if t.head == entity})

    def tails(self, entity: str, relation: str) -> list[str]:
        """Tails of matching triples, store order, deduplicated."""
        out: list[str] = []
        for t in self.triples:
            if t.head == entity and t.relation == relation and t.tail not in out:
                out.append(t.tail)
        return out


class RelationBackend:
    """Query: an entity name. Answers with the sorted relation list."""

    def __init__(self, store: TripleStore) -> None:
        self.store = store

    def __call__(self, query: str) -> InterfaceResult:
        return InterfaceResult(body=repr(self.store.relations(query.strip())))


class TailEntityBackend:
    """Query: "head entity, relation", split on the last comma.

    Relations never contain commas, so the last comma is unambiguous even
    when the head entity itself has one.
    """

    def __init__(self, store: TripleStore, start_tag: str = "<entity>", end_tag: str = "</entity>") -> None:
        self.store = store
        self.format_hint = (
            f"Invalid query format. Please use the format {start_tag}head entity, relation{end_tag}."
        )

    def __call__(self, query: str) -> InterfaceResult:
        head, sep, relation = query.rpartition(",")
        if not sep or not head.strip() or not relation.strip():
            return InterfaceResult(body=self.format_hint, is_error=True)
        return InterfaceResult(body=repr(self.store.tails(head.strip(), relation.strip())))
