from __future__ import annotations

import pytest

from groundloop.config import fixture_path, load_runtime
from groundloop.interfaces import InterfaceRegistry, InterfaceSpec


@pytest.fixture(scope="session")
def qa_runtime():
    return load_runtime(fixture_path("configs", "qa.json"))


@pytest.fixture(scope="session")
def full_runtime():
    return load_runtime(fixture_path("configs", "full.json"))


class SpyBackend:
    """Counts calls and replays canned bodies."""

    def __init__(self, body="ok", is_error=False):
        self.calls: list[str] = []
        self.body = body
        self.is_error = is_error

    def __call__(self, query: str):
        self.calls.append(query)
        return (self.body, self.is_error)


def make_spec(name="Retrieval Information", tag="retrieval", limit=5, description="test interface"):
    return InterfaceSpec(
        name=name,
        description=description,
        start_tag=f"<{tag}>",
        end_tag=f"</{tag}>",
        invoke_limit=limit,
        backend_id="test",
    )


def make_registry(*entries) -> tuple[InterfaceRegistry, dict[str, SpyBackend]]:
    """entries: (name, tag, limit) triples backed by spies."""
    registry = InterfaceRegistry()
    spies = {}
    for name, tag, limit in entries:
        spy = SpyBackend(body=f"{tag} result")
        registry.register(make_spec(name, tag, limit), spy)
        spies[name] = spy
    return registry, spies
