"""Uniform generation contract over scripted fixture policies and remote servers."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

import requests

from .parsing import TokenCounter, truncate_to_tokens, whitespace_token_count

logger = logging.getLogger(__name__)

STOP_SEQUENCE = "stop_sequence"
LENGTH = "length"
END = "end"


class PolicyTransportError(RuntimeError):
    """Remote generation failed after all retries; the rollout aborts."""


@dataclass
class GenerationRequest:
    prompt: str
    stop_sequences: list[str]
    max_new_tokens: int
    temperature: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass
class GenerationReply:
    text: str
    stop_reason: str  # STOP_SEQUENCE, LENGTH, or END
    stop_index: Optional[int] = None
    token_count: int = 0
    token_logprobs: Optional[list[float]] = None


class Policy(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationReply: ...


def apply_stops(
    raw: str,
    stops: Sequence[str],
    max_new_tokens: int,
    counter: TokenCounter = whitespace_token_count,
) -> GenerationReply:
    """Normalize raw emitted text to stop-sequence semantics.

    The earliest stop occurrence wins and is included in the reply. A stop
    that begins inside the token budget is kept whole even if its tail runs
    past the budget (at most one terminal overshoot); otherwise the text is
    cut at the budget and attributed to length.
    """
    best_at, best_idx = len(raw) + 1, None
    for idx, stop in enumerate(stops):
        at = raw.find(stop)
        if at >= 0 and at < best_at:
            best_at, best_idx = at, idx

    budget_text = truncate_to_tokens(raw, max_new_tokens, counter)
    if best_idx is not None and best_at < max(len(budget_text), 1):
        text = raw[: best_at + len(stops[best_idx])]
        return GenerationReply(
            text=text, stop_reason=STOP_SEQUENCE, stop_index=best_idx, token_count=counter(text)
        )
    if counter(raw) > max_new_tokens:
        return GenerationReply(text=budget_text, stop_reason=LENGTH, token_count=counter(budget_text))
    return GenerationReply(text=raw, stop_reason=END, token_count=counter(raw))


class ScriptedPolicy:
    """Deterministic fixture policy that replays pre-authored chunks.

    Scripts map a question to one or more variants; a variant is the ordered
    list of chunks the policy emits across successive generate calls. The
    policy is stateless: progress is recovered from the prompt itself by
    locating previously emitted chunks in order, so concurrent rollouts and
    restarts are safe. Variant choice is seed % len(variants).
    """

    def __init__(
        self,
        scripts: dict[str, list[list[str]]],
        counter: TokenCounter = whitespace_token_count,
    ) -> None:
        if not scripts:
            raise ValueError("scripts must not be empty")
        self.scripts = scripts
        self.counter = counter
        # longest question first so the most specific key wins
        self._keys = sorted(scripts, key=len, reverse=True)

    def _variant_for(self, prompt: str, seed: int) -> list[str]:
        for key in self._keys:
            if key in prompt:
                variants = self.scripts[key]
                return variants[seed % len(variants)]
        raise KeyError("no script matches the prompt")

    def generate(self, request: GenerationRequest) -> GenerationReply:
        seed = request.seed or 0
        chunks = self._variant_for(request.prompt, seed)
        cursor = 0
        for chunk in chunks:
            emitted = apply_stops(chunk, request.stop_sequences, 10**9, self.counter).text
            found = request.prompt.find(emitted, cursor) if emitted else cursor
            if found < 0:
                return apply_stops(chunk, request.stop_sequences, request.max_new_tokens, self.counter)
            cursor = found + len(emitted)
        return GenerationReply(text="", stop_reason=END, token_count=0)


def load_scripts(path: str | Path) -> dict[str, list[list[str]]]:
    """Script file: {question: [[chunk, ...], ...]} (one list per variant)."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    scripts: dict[str, list[list[str]]] = {}
    for question, variants in raw.items():
        if variants and isinstance(variants[0], str):  # single-variant shorthand
            variants = [variants]
        scripts[question] = [list(chunks) for chunks in variants]
    return scripts


class RemotePolicy:
    """JSON-over-HTTP completion client.

    Request fields: prompt, stop, max_tokens, temperature, logprobs, seed.
    Reply fields: text, stop_reason ("stop" | "length" | "end"), token_count
    (optional), token_logprobs (optional). Replies are re-normalized locally
    so stop-sequence semantics hold regardless of server behavior.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_seconds: float = 30.0,
        retries: int = 3,
        backoff_seconds: float = 0.25,
        auth_token: Optional[str] = None,
        counter: TokenCounter = whitespace_token_count,
        want_logprobs: bool = True,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout_seconds = timeout_seconds
        self.retries = retries
        self.backoff_seconds = backoff_seconds
        self.auth_token = auth_token
        self.counter = counter
        self.want_logprobs = want_logprobs
        self._session = requests.Session()

    def generate(self, request: GenerationRequest) -> GenerationReply:
        payload = {
            "prompt": request.prompt,
            "stop": request.stop_sequences,
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "logprobs": self.want_logprobs,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff_seconds * (2 ** (attempt - 1))
                logger.warning("remote policy retry %d after %.2fs: %s", attempt, delay, last_error)
                time.sleep(delay)
            try:
                resp = self._session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_seconds
                )
                if resp.status_code >= 500:
                    last_error = RuntimeError(f"server error {resp.status_code}")
                    continue
                resp.raise_for_status()
                raw = resp.json()
            except (requests.ConnectionError, requests.Timeout, json.JSONDecodeError) as exc:
                last_error = exc
                continue
            reply = apply_stops(
                str(raw.get("text", "")), request.stop_sequences, request.max_new_tokens, self.counter
            )
            if "token_count" in raw and reply.stop_reason == END:
                reply.token_count = int(raw["token_count"])
            if raw.get("token_logprobs") is not None:
                reply.token_logprobs = [float(x) for x in raw["token_logprobs"]][: reply.token_count]
            return reply
        raise PolicyTransportError(f"remote policy unreachable after {self.retries + 1} attempts: {last_error}")
