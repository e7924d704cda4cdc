"""Runtime configuration: interface sets, backends, policy, and knobs.

Config files are JSON with the following top-level keys (all optional unless
noted): "interfaces" (required, list), "policy", "rollout", "grpo", "server",
"seed", "prompt_template". See README for the field-by-field schema.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .backends.code_exec import CodeExecutor
from .backends.game import AdmissibleBackend, DescriptionBackend, FeedbackBackend, PossibleBackend
from .backends.kg import RelationBackend, TailEntityBackend, TripleStore, load_triples
from .backends.retrieval import RetrievalBackend, load_corpus
from .backends.tables import HeaderBackend, ColumnBackend, RowBackend, load_tables
from .game.engine import GameStore, load_game
from .interfaces import InterfaceRegistry, InterfaceSpec
from .policy import Policy, RemotePolicy, ScriptedPolicy, load_scripts
from .prompts import PromptTemplate, load_template
from .rewards import GrpoConfig
from .rollout import RolloutConfig

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def fixture_path(*parts: str) -> Path:
    """Path to a bundled fixture file."""
    return Path(resources.files("groundloop").joinpath("fixtures", *parts))


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    async_threshold: int = 32
    auth_token: Optional[str] = None


@dataclass
class Runtime:
    """Everything a rollout or evaluation needs, built from one config file."""

    registry: InterfaceRegistry
    policy: Policy
    rollout: RolloutConfig
    grpo: GrpoConfig
    server: ServerConfig
    games: Optional[GameStore] = None


def _resolve(path_text: str, base: Optional[Path]) -> Path:
    if path_text.startswith("fixtures/"):
        return fixture_path(*path_text.split("/")[1:])
    path = Path(path_text)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


def _build_game_store(settings: dict, base: Optional[Path]) -> GameStore:
    store = GameStore()
    for game_path in settings.get("game_paths", []):
        store.add(load_game(_resolve(game_path, base)))
    if settings.get("generated_seeds"):
        from .game.generate import generate_game

        for seed in settings["generated_seeds"]:
            store.add(generate_game(int(seed)))
    return store


def build_runtime(raw: dict, base: Optional[Path] = None) -> Runtime:
    interfaces = raw.get("interfaces")
    if not interfaces:
        raise ConfigError("config must declare at least one interface")

    registry = InterfaceRegistry()
    shared_games: Optional[GameStore] = None

    for entry in interfaces:
        try:
            spec = InterfaceSpec(
                name=entry["name"],
                description=entry["description"],
                start_tag=entry["start_tag"],
                end_tag=entry["end_tag"],
                invoke_limit=int(entry["invoke_limit"]),
                backend_id=entry["backend"]["id"],
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad interface entry: {exc}") from exc

        settings = entry["backend"]
        kind = settings["id"]
        if kind == "retrieval":
            docs = load_corpus(_resolve(settings["corpus_path"], base))
            backend = RetrievalBackend(
                docs,
                top_k=settings.get("top_k", 3),
                excerpt_chars=settings.get("excerpt_chars", 600),
            )
        elif kind == "code":
            backend = CodeExecutor(
                interpreter=settings.get("interpreter"),
                timeout_seconds=settings.get("timeout_seconds", 5.0),
                output_cap_bytes=settings.get("output_cap_bytes", 4096),
                workers=settings.get("workers", 2),
            )
        elif kind in ("kg_relations", "kg_tails"):
            store = TripleStore(load_triples(_resolve(settings["triples_path"], base)))
            if kind == "kg_relations":
                backend = RelationBackend(store)
            else:
                backend = TailEntityBackend(store, spec.start_tag, spec.end_tag)
        elif kind in ("table_headers", "table_column", "table_row"):
            paths = [_resolve(p, base) for p in settings["table_paths"]]
            table_store = load_tables(paths)
            backend = {
                "table_headers": HeaderBackend,
                "table_column": ColumnBackend,
                "table_row": RowBackend,
            }[kind](table_store)
        elif kind in ("game_feedback", "game_description", "game_admissible", "game_possible"):
            if shared_games is None:
                shared_games = _build_game_store(settings, base)
            if kind == "game_possible":
                backend = PossibleBackend(shared_games)
            else:
                cls = {
                    "game_feedback": FeedbackBackend,
                    "game_description": DescriptionBackend,
                    "game_admissible": AdmissibleBackend,
                }[kind]
                backend = cls(shared_games, spec.start_tag, spec.end_tag)
        else:
            raise ConfigError(f"unknown backend id '{kind}'")
        registry.register(spec, backend)

    policy = _build_policy(raw.get("policy", {}), base)

    template = PromptTemplate()
    if raw.get("prompt_template"):
        template = load_template(_resolve(raw["prompt_template"], base))

    ro = raw.get("rollout", {})
    rollout = RolloutConfig(
        group_size=ro.get("group_size", 8),
        max_prompt_tokens=ro.get("max_prompt_tokens", 2048),
        max_response_tokens=ro.get("max_response_tokens", 12288),
        temperature=ro.get("temperature", 1.0),
        seed=raw.get("seed", 0),
        parallel_width=ro.get("parallel_width", 4),
        template=template,
    )

    gr = raw.get("grpo", {})
    grpo = GrpoConfig(
        eps_min=gr.get("eps_min", 0.2),
        eps_max=gr.get("eps_max", 0.28),
        mask_injected=gr.get("mask_injected", True),
    )

    sv = raw.get("server", {})
    token = None
    if sv.get("auth_token_env"):
        token = os.environ.get(sv["auth_token_env"])
    server = ServerConfig(
        host=sv.get("host", "127.0.0.1"),
        port=sv.get("port", 8080),
        async_threshold=sv.get("async_threshold", 32),
        auth_token=token,
    )

    return Runtime(
        registry=registry,
        policy=policy,
        rollout=rollout,
        grpo=grpo,
        server=server,
        games=shared_games,
    )


def _build_policy(settings: dict, base: Optional[Path]) -> Policy:
    kind = settings.get("kind", "scripted")
    if kind == "scripted":
        script_path = settings.get("script_path", "fixtures/scripts/smoke_policy.json")
        return ScriptedPolicy(load_scripts(_resolve(script_path, base)))
    if kind == "remote":
        token = None
        if settings.get("auth_token_env"):
            token = os.environ.get(settings["auth_token_env"])
        return RemotePolicy(
            endpoint=settings["endpoint"],
            timeout_seconds=settings.get("timeout_seconds", 30.0),
            retries=settings.get("retries", 3),
            backoff_seconds=settings.get("backoff_seconds", 0.25),
            auth_token=token,
        )
    raise ConfigError(f"unknown policy kind '{kind}'")


def load_runtime(path: str | Path) -> Runtime:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    return build_runtime(raw, base=path.parent)
