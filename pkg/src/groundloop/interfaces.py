"""Registry of environment interfaces: prompt rendering, dispatch, and invoke limits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

logger = logging.getLogger(__name__)

# A backend maps a query string to (body, is_error). Backends never raise for
# bad queries; they report problems in-band so the rollout keeps going.
Backend = Callable[[str], "tuple[str, bool] | InterfaceResult"]

LIMIT_MESSAGE = "Invoke limit exceeded for interface '{name}'. No result."


class RegistrationError(ValueError):
    """Duplicate name or tag collision while registering an interface."""


@dataclass(frozen=True)
class InterfaceSpec:
    """One registered interface: what the policy sees and how queries route."""

    name: str
    description: str
    start_tag: str
    end_tag: str
    invoke_limit: int
    backend_id: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("interface name must be non-empty")
        if not self.start_tag or not self.end_tag:
            raise ValueError(f"interface '{self.name}': tags must be non-empty")
        if self.start_tag == self.end_tag:
            raise ValueError(f"interface '{self.name}': start and end tags must differ")
        expected_end = "</" + self.start_tag[1:] if self.start_tag.startswith("<") else None
        if expected_end is None or self.end_tag != expected_end:
            raise ValueError(
                f"interface '{self.name}': end tag must be the start tag with '/' "
                f"after '<' (expected {expected_end!r}, got {self.end_tag!r})"
            )
        if self.invoke_limit < 1:
            raise ValueError(f"interface '{self.name}': invoke limit must be >= 1")

    @property
    def tag_key(self) -> str:
        """Bare tag word, e.g. "retrieval" for "<retrieval>"."""
        return self.start_tag[1:-1]


@dataclass
class InterfaceResult:
    """Backend reply, rendered in-band as "<result> body </result>"."""

    body: str
    is_error: bool = False

    def rendered(self) -> str:
        return "<result> " + self.body + " </result>"


@dataclass
class InvokeLedger:
    """Per-trajectory accounting of executed, failed, and over-limit queries."""

    counts: Dict[str, int] = field(default_factory=dict)
    errors: Dict[str, int] = field(default_factory=dict)
    over_limit: Dict[str, int] = field(default_factory=dict)

    def total_counts(self) -> int:
        return sum(self.counts.values())

    def total_errors(self) -> int:
        return sum(self.errors.values())

    def as_dict(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "errors": dict(sorted(self.errors.items())),
            "over_limit": dict(sorted(self.over_limit.items())),
        }


def render_prompt_block(specs: Sequence[InterfaceSpec]) -> str:
    """Render the per-interface prompt blocks, in registration order."""
    if not specs:
        raise ValueError("at least one interface spec is required")
    blocks = []
    for spec in specs:
        blocks.append(
            f"Interface For {spec.name}\n"
            f"- Description: {spec.description}\n"
            f"- Query Format: {spec.start_tag} ...query... {spec.end_tag}.\n"
            f"- Invoke Limit {spec.invoke_limit}."
        )
    return "\n\n".join(blocks)


class InterfaceRegistry:
    """Immutable-after-construction set of interfaces bound to backends.

    Safe to share across concurrent rollouts; all per-trajectory mutation
    lives in the InvokeLedger the caller passes to dispatch().
    """

    def __init__(self) -> None:
        self._specs: list[InterfaceSpec] = []
        self._by_name: Dict[str, InterfaceSpec] = {}
        self._by_tag_key: Dict[str, InterfaceSpec] = {}
        self._backends: Dict[str, Backend] = {}

    def register(self, spec: InterfaceSpec, backend: Backend) -> "InterfaceRegistry":
        if spec.name in self._by_name:
            raise RegistrationError(f"duplicate interface name '{spec.name}'")
        for existing in self._specs:
            if spec.start_tag in (existing.start_tag, existing.end_tag) or spec.end_tag in (
                existing.start_tag,
                existing.end_tag,
            ):
                raise RegistrationError(
                    f"tag collision between '{spec.name}' and '{existing.name}'"
                )
        self._specs.append(spec)
        self._by_name[spec.name] = spec
        self._by_tag_key[spec.tag_key] = spec
        self._backends[spec.name] = backend
        return self

    @property
    def specs(self) -> list[InterfaceSpec]:
        return list(self._specs)

    def __len__(self) -> int:
        return len(self._specs)

    def resolve(self, name: str) -> Optional[InterfaceSpec]:
        """Look up by registered name or by bare tag key."""
        return self._by_name.get(name) or self._by_tag_key.get(name)

    def backend_for(self, name: str) -> Backend:
        spec = self.resolve(name)
        if spec is None:
            raise KeyError(name)
        return self._backends[spec.name]

    def subset(self, names: Sequence[str]) -> "InterfaceRegistry":
        sub = InterfaceRegistry()
        for raw in names:
            spec = self.resolve(raw)
            if spec is None:
                raise KeyError(f"unknown interface '{raw}'")
            sub.register(spec, self._backends[spec.name])
        return sub

    def prompt_block(self) -> str:
        return render_prompt_block(self._specs)

    def dispatch(self, name: str, query: str, ledger: InvokeLedger) -> InterfaceResult:
        """Route one query, enforcing the per-trajectory invoke limit.

        Over-limit attempts never reach the backend: they are tallied in
        ledger.over_limit and answered with the fixed limit message. Unknown
        names come back as in-band error results, not exceptions.
        """
        spec = self.resolve(name)
        if spec is None:
            known = ", ".join(s.name for s in self._specs) or "(none)"
            ledger.errors[name] = ledger.errors.get(name, 0) + 1
            return InterfaceResult(
                body=f"Unknown interface '{name}'. Available interfaces: {known}.",
                is_error=True,
            )

        used = ledger.counts.get(spec.name, 0)
        if used >= spec.invoke_limit:
            ledger.over_limit[spec.name] = ledger.over_limit.get(spec.name, 0) + 1
            return InterfaceResult(body=LIMIT_MESSAGE.format(name=spec.name), is_error=False)

        ledger.counts[spec.name] = used + 1
        outcome = self._backends[spec.name](query)
        if isinstance(outcome, InterfaceResult):
            result = outcome
        else:
            body, is_error = outcome
            result = InterfaceResult(body=body, is_error=is_error)
        if result.is_error:
            ledger.errors[spec.name] = ledger.errors.get(spec.name, 0) + 1
        return result
