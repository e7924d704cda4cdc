"""The generate -> detect -> dispatch -> inject loop producing trajectories."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .interfaces import InterfaceRegistry, InvokeLedger
from .parsing import (
    CONCLUSION_END,
    INJECTED,
    POLICY,
    ConclusionEndEvent,
    InterfaceQueryEvent,
    Segment,
    TokenCounter,
    check_format,
    find_next_event,
    truncate_to_tokens,
    whitespace_token_count,
)
from .policy import (
    END,
    LENGTH,
    STOP_SEQUENCE,
    GenerationRequest,
    Policy,
    PolicyTransportError,
)
from .prompts import PromptTemplate, build_prompt
from .rewards import STRING_EM, RewardRecord, group_advantages, score_trajectory

logger = logging.getLogger(__name__)

TRAJECTORY_SCHEMA_VERSION = 1


@dataclass
class RolloutConfig:
    group_size: int = 8
    max_prompt_tokens: int = 2048
    max_response_tokens: int = 12288
    temperature: float = 1.0
    seed: int = 0
    parallel_width: int = 4
    template: PromptTemplate = field(default_factory=PromptTemplate)


@dataclass
class Trajectory:
    question: str
    segments: list[Segment] = field(default_factory=list)
    conclusion: Optional[str] = None
    boxed_answer: Optional[str] = None
    format_ok: bool = False
    truncated: bool = False
    aborted: bool = False
    ledger: InvokeLedger = field(default_factory=InvokeLedger)
    wall_time: float = 0.0
    sample_index: int = 0

    @property
    def token_length(self) -> int:
        return sum(s.token_length for s in self.segments)

    def response_text(self) -> str:
        return "".join(s.text for s in self.segments)

    def policy_text(self) -> str:
        return "".join(s.text for s in self.segments if s.provenance == POLICY)

    def to_record(self) -> dict:
        """JSON-safe log record. Wall time is deliberately omitted so logs of
        seeded runs are byte-identical."""
        return {
            "schema_version": TRAJECTORY_SCHEMA_VERSION,
            "question": self.question,
            "sample_index": self.sample_index,
            "segments": [
                {"text": s.text, "provenance": s.provenance, "token_length": s.token_length}
                for s in self.segments
            ],
            "conclusion": self.conclusion,
            "boxed_answer": self.boxed_answer,
            "format_ok": self.format_ok,
            "truncated": self.truncated,
            "aborted": self.aborted,
            "token_length": self.token_length,
            "ledger": self.ledger.as_dict(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Trajectory":
        traj = cls(
            question=record["question"],
            segments=[
                Segment(s["text"], s["provenance"], s["token_length"])
                for s in record["segments"]
            ],
            conclusion=record.get("conclusion"),
            boxed_answer=record.get("boxed_answer"),
            format_ok=record.get("format_ok", False),
            truncated=record.get("truncated", False),
            aborted=record.get("aborted", False),
            sample_index=record.get("sample_index", 0),
        )
        ledger = record.get("ledger", {})
        traj.ledger = InvokeLedger(
            counts=dict(ledger.get("counts", {})),
            errors=dict(ledger.get("errors", {})),
            over_limit=dict(ledger.get("over_limit", {})),
        )
        return traj


def loss_mask(trajectory: Trajectory) -> list[bool]:
    """Per-token flags, True exactly on policy-provenance tokens."""
    mask: list[bool] = []
    for segment in trajectory.segments:
        mask.extend([segment.provenance == POLICY] * segment.token_length)
    return mask


def rollout_one(
    question: str,
    policy: Policy,
    registry: InterfaceRegistry,
    config: RolloutConfig,
    sample_index: int = 0,
    counter: TokenCounter = whitespace_token_count,
) -> Trajectory:
    """Run one interleaved trajectory for *question*.

    Generation stops at interface end tags (queries are dispatched and their
    results injected into the context) and at the conclusion end tag. Injected
    results count against the response token budget because they occupy
    context. Every generated and injected character is preserved verbatim.
    """
    if len(registry) == 0:
        raise ValueError("registry must hold at least one interface")
    prompt = build_prompt(config.template, registry.specs, question)
    if counter(prompt) > config.max_prompt_tokens:
        raise ValueError(
            f"prompt is {counter(prompt)} tokens, over the {config.max_prompt_tokens} budget"
        )

    specs = registry.specs
    stops = [s.end_tag for s in specs] + [CONCLUSION_END]
    seed = config.seed * 100003 + sample_index

    traj = Trajectory(question=question, sample_index=sample_index)
    started = time.monotonic()
    context = prompt

    while True:
        used = traj.token_length
        budget_left = config.max_response_tokens - used
        if budget_left <= 0:
            traj.truncated = True
            break
        request = GenerationRequest(
            prompt=context,
            stop_sequences=list(stops),
            max_new_tokens=budget_left,
            temperature=config.temperature,
            seed=seed,
        )
        try:
            reply = policy.generate(request)
        except PolicyTransportError as exc:
            logger.warning("trajectory aborted: %s", exc)
            traj.aborted = True
            break

        if reply.text:
            traj.segments.append(Segment(reply.text, POLICY, counter(reply.text)))
            context += reply.text

        if reply.stop_reason == LENGTH:
            traj.truncated = True
            break
        if reply.stop_reason == END:
            if not reply.text.endswith(CONCLUSION_END):
                traj.truncated = True  # generation ran dry before a conclusion
            break

        event = find_next_event(reply.text, specs)
        if isinstance(event, ConclusionEndEvent):
            break
        if isinstance(event, InterfaceQueryEvent):
            result = registry.dispatch(event.name, event.query, traj.ledger)
            injected = result.rendered()
            remaining = config.max_response_tokens - traj.token_length
            if counter(injected) > remaining:
                body_budget = remaining - counter("<result>  </result>")
                injected = "<result> " + truncate_to_tokens(result.body, max(body_budget, 0), counter) + " </result>"
                traj.segments.append(Segment(injected, INJECTED, counter(injected)))
                context += injected
                traj.truncated = True
                break
            traj.segments.append(Segment(injected, INJECTED, counter(injected)))
            context += injected
        # else: a stop fired but no complete span exists (dangling end tag);
        # the text stays inert and generation continues

    traj.wall_time = time.monotonic() - started
    ok, conclusion, boxed = check_format(traj.response_text())
    traj.conclusion = conclusion
    traj.boxed_answer = boxed
    traj.format_ok = ok and not traj.aborted and not traj.truncated
    return traj


@dataclass
class GroupBatch:
    """G trajectories for one question, with optional reward annotations."""

    question: str
    trajectories: list[Trajectory]
    rewards: Optional[list[RewardRecord]] = None
    advantages: Optional[list[float]] = None  # per trajectory, constant per token

    @property
    def group_size(self) -> int:
        return len(self.trajectories)

    @property
    def trainable(self) -> bool:
        return self.group_size >= 2

    def masks(self, mask_injected: bool = True) -> list[list[bool]]:
        if mask_injected:
            return [loss_mask(t) for t in self.trajectories]
        return [[True] * t.token_length for t in self.trajectories]


def rollout_group(
    question: str,
    policy: Policy,
    registry: InterfaceRegistry,
    config: RolloutConfig,
    group_size: Optional[int] = None,
) -> GroupBatch:
    """Sample G independent trajectories; order follows the sample index.

    G=1 is accepted for evaluation but the batch is flagged not trainable.
    Aborted trajectories are kept; the reward layer scores them.
    """
    g = config.group_size if group_size is None else group_size
    if g < 1:
        raise ValueError("group size must be >= 1")

    def run(i: int) -> Trajectory:
        return rollout_one(question, policy, registry, config, sample_index=i)

    if config.parallel_width > 1 and g > 1:
        with ThreadPoolExecutor(max_workers=config.parallel_width) as pool:
            trajectories = list(pool.map(run, range(g)))
    else:
        trajectories = [run(i) for i in range(g)]
    return GroupBatch(question=question, trajectories=trajectories)


def attach_rewards(
    batch: GroupBatch, gold: Union[str, Sequence[str]], mode: str = STRING_EM
) -> GroupBatch:
    """Score every trajectory and, when the group is trainable, add advantages."""
    batch.rewards = [score_trajectory(t, gold, mode) for t in batch.trajectories]
    if batch.trainable:
        batch.advantages = group_advantages([r.reward for r in batch.rewards])
    else:
        batch.advantages = None
    return batch


def write_trajectory_log(path, batches: Sequence[GroupBatch]) -> None:
    """One JSON line per trajectory; reward fields appended when present."""
    with open(path, "w", encoding="utf-8") as fh:
        for batch in batches:
            for i, traj in enumerate(batch.trajectories):
                record = traj.to_record()
                if batch.rewards is not None:
                    record.update(batch.rewards[i].as_dict())
                if batch.advantages is not None:
                    record["advantage"] = batch.advantages[i]
                fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def read_trajectory_log(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
