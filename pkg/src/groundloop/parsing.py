"""Incremental scanning of policy output for interface queries and the final answer block.

All functions here are pure: they never touch backends or mutate shared state,
so they are safe under unrestricted concurrency.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .interfaces import InterfaceSpec

CONCLUSION_START = "<conclusion>"
CONCLUSION_END = "</conclusion>"

POLICY = "policy"
INJECTED = "injected"

TokenCounter = Callable[[str], int]

_WORD = re.compile(r"\S+")


def whitespace_token_count(text: str) -> int:
    """Default token counter: number of whitespace-delimited words."""
    return len(_WORD.findall(text))


def tokenize_length(text: str, counter: TokenCounter = whitespace_token_count) -> int:
    return counter(text)


def truncate_to_tokens(text: str, max_tokens: int, counter: TokenCounter = whitespace_token_count) -> str:
    """Cut *text* after its max_tokens-th word under the default counter.

    Custom counters fall back to a binary search over prefixes so the result
    stays consistent with whatever notion of token the counter implements.
    """
    if max_tokens <= 0:
        return ""
    if counter is whitespace_token_count:
        matches = list(_WORD.finditer(text))
        if len(matches) <= max_tokens:
            return text
        return text[: matches[max_tokens - 1].end()]
    if counter(text) <= max_tokens:
        return text
    lo, hi = 0, len(text)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if counter(text[:mid]) <= max_tokens:
            lo = mid
        else:
            hi = mid - 1
    return text[:lo]


@dataclass
class Segment:
    """One contiguous stretch of trajectory text with its provenance.

    Injected segments are environment feedback and always look like
    "<result> ... </result>"; policy segments are raw generation.
    """

    text: str
    provenance: str  # POLICY or INJECTED
    token_length: int

    def __post_init__(self) -> None:
        if self.provenance == INJECTED:
            if not (self.text.startswith("<result>") and self.text.endswith("</result>")):
                raise ValueError("injected segment must be wrapped in <result>...</result>")


@dataclass(frozen=True)
class InterfaceQueryEvent:
    name: str
    query: str
    span: tuple[int, int]  # [start of start_tag, end of end_tag)


@dataclass(frozen=True)
class ConclusionEndEvent:
    span: tuple[int, int]  # [start of </conclusion>, end of </conclusion>)


def find_next_event(buffer: str, specs: Sequence[InterfaceSpec]):
    """Return the earliest-closing complete event in *buffer*, or None.

    Candidates are complete "<tag>...</tag>" interface spans and a bare
    "</conclusion>". The winner is the candidate whose closing tag ends first.
    For an interface span, the opening tag is the last start tag before the
    first end tag, so nested same-interface opens resolve to the innermost
    query. A start tag with no matching end tag is inert text.
    """
    best = None
    best_close = len(buffer) + 1

    for spec in specs:
        end_at = buffer.find(spec.end_tag)
        if end_at < 0:
            continue
        start_at = buffer.rfind(spec.start_tag, 0, end_at)
        if start_at < 0:
            continue
        close = end_at + len(spec.end_tag)
        if close < best_close:
            query = buffer[start_at + len(spec.start_tag) : end_at].strip()
            best = InterfaceQueryEvent(name=spec.name, query=query, span=(start_at, close))
            best_close = close

    conclusion_at = buffer.find(CONCLUSION_END)
    if conclusion_at >= 0:
        close = conclusion_at + len(CONCLUSION_END)
        if close < best_close:
            best = ConclusionEndEvent(span=(conclusion_at, close))

    return best


def iter_events(buffer: str, specs: Sequence[InterfaceSpec]):
    """Yield every event in *buffer* in order, consuming past each span."""
    offset = 0
    while True:
        event = find_next_event(buffer[offset:], specs)
        if event is None:
            return
        start, end = event.span
        if isinstance(event, InterfaceQueryEvent):
            yield InterfaceQueryEvent(event.name, event.query, (offset + start, offset + end))
        else:
            yield ConclusionEndEvent((offset + start, offset + end))
        offset += end


def extract_boxed(text: str) -> Optional[str]:
    """Content of the last balanced "\\boxed{...}" in *text*, by brace depth.

    Brace counting (rather than a regex) keeps nested answers such as
    "\\boxed{\\frac{1}{2}}" intact.
    """
    marker = "\\boxed{"
    starts = [m.start() for m in re.finditer(re.escape(marker), text)]
    for start in reversed(starts):
        depth = 1
        i = start + len(marker)
        while i < len(text):
            ch = text[i]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start + len(marker) : i]
            i += 1
    return None


def check_format(response: str) -> tuple[bool, Optional[str], Optional[str]]:
    """Format predicate over a complete response.

    True iff exactly one well-ordered <conclusion>...</conclusion> block exists
    and it contains at least one balanced \\boxed{...}. The extracted pieces are
    returned best-effort even when the predicate fails (a correct boxed answer
    inside a malformed response still deserves answer credit).
    """
    n_start = response.count(CONCLUSION_START)
    n_end = response.count(CONCLUSION_END)

    conclusion: Optional[str] = None
    last_end = response.rfind(CONCLUSION_END)
    if last_end >= 0:
        last_start = response.rfind(CONCLUSION_START, 0, last_end)
        if last_start >= 0:
            conclusion = response[last_start + len(CONCLUSION_START) : last_end].strip()

    boxed = extract_boxed(conclusion) if conclusion is not None else None

    ok = n_start == 1 and n_end == 1 and conclusion is not None and boxed is not None
    return ok, conclusion, boxed


def has_trailing_text(response: str) -> bool:
    """True when non-whitespace text follows the final </conclusion>."""
    last_end = response.rfind(CONCLUSION_END)
    if last_end < 0:
        return False
    return bool(response[last_end + len(CONCLUSION_END) :].strip())
