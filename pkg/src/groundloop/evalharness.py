"""Batch evaluation: dataset loading, accuracy metrics, and batch statistics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .game.engine import GameStore, replay
from .interfaces import InterfaceRegistry
from .policy import Policy
from .rewards import NUMERIC, STRING_EM, check_answer
from .rollout import GroupBatch, RolloutConfig, Trajectory, rollout_group

logger = logging.getLogger(__name__)

TASK_KINDS = ("qa", "math", "kbqa", "tableqa", "game")

# answer-check mode per task kind; overridable from the CLI
DEFAULT_MODES = {
    "qa": STRING_EM,
    "math": NUMERIC,
    "kbqa": STRING_EM,
    "tableqa": STRING_EM,
    "game": STRING_EM,
}

DEFAULT_REFLECTION_LEXICON = ("wait", "let me double-check", "verify", "re-examine")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    task_kind: str
    game_id: str = ""
    table_id: str = ""

    def __post_init__(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"item '{self.id}': unknown task kind '{self.task_kind}'")
        if not self.gold_answers and self.task_kind != "game":
            raise ValueError(f"item '{self.id}': gold answers required for non-game tasks")


def load_dataset(path: str | Path) -> list[BenchmarkItem]:
    items: list[BenchmarkItem] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                items.append(
                    BenchmarkItem(
                        id=str(raw["id"]),
                        question=raw["question"],
                        gold_answers=tuple(raw.get("gold_answers", [])),
                        task_kind=raw["task_kind"],
                        game_id=raw.get("game_id", ""),
                        table_id=raw.get("table_id", ""),
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return items


@dataclass
class BatchStats:
    mean_response_length: float = 0.0
    invocations: dict[str, int] = field(default_factory=dict)
    invoke_errors: int = 0
    over_limit: int = 0
    reflection_score: float = 0.0

    def as_dict(self) -> dict:
        return {
            "mean_response_length": self.mean_response_length,
            "invocations": dict(sorted(self.invocations.items())),
            "invoke_errors": self.invoke_errors,
            "over_limit": self.over_limit,
            "reflection_score": self.reflection_score,
        }


def reflection_count(text: str, lexicon: Sequence[str] = DEFAULT_REFLECTION_LEXICON) -> int:
    lowered = text.lower()
    return sum(lowered.count(marker.lower()) for marker in lexicon)


def compute_batch_stats(
    trajectories: Sequence[Trajectory],
    lexicon: Sequence[str] = DEFAULT_REFLECTION_LEXICON,
) -> BatchStats:
    """Aggregate ledgers, lengths, and reflection markers over a batch.

    Reflection markers are counted over policy-provenance text only, so
    injected results never inflate the score.
    """
    stats = BatchStats()
    if not trajectories:
        return stats
    total_len = 0
    total_reflection = 0
    for traj in trajectories:
        total_len += traj.token_length
        total_reflection += reflection_count(traj.policy_text(), lexicon)
        for name, n in traj.ledger.counts.items():
            stats.invocations[name] = stats.invocations.get(name, 0) + n
        stats.invoke_errors += traj.ledger.total_errors()
        stats.over_limit += sum(traj.ledger.over_limit.values())
    stats.mean_response_length = total_len / len(trajectories)
    stats.reflection_score = total_reflection / len(trajectories)
    return stats


@dataclass
class ItemResult:
    item: BenchmarkItem
    batch: GroupBatch
    sample_correct: list[bool]
    passed: Optional[bool] = None  # game items only

    @property
    def first_correct(self) -> bool:
        return bool(self.sample_correct and self.sample_correct[0])

    @property
    def predicted(self) -> Optional[str]:
        return self.batch.trajectories[0].boxed_answer if self.batch.trajectories else None


@dataclass
class MetricReport:
    k: int
    results: list[ItemResult]
    metrics: dict
    stats: BatchStats

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "k": self.k,
            "metrics": self.metrics,
            "batch_stats": self.stats.as_dict(),
            "items": [
                {
                    "id": r.item.id,
                    "task_kind": r.item.task_kind,
                    "predicted": r.predicted,
                    "first_correct": r.first_correct,
                    "correct_count": sum(r.sample_correct),
                    "samples": len(r.sample_correct),
                    "passed": r.passed,
                }
                for r in self.results
            ],
        }


def _game_pass(item: BenchmarkItem, traj: Trajectory, games: Optional[GameStore]) -> bool:
    """Replay the concluded command sequence; pass iff it reaches full score."""
    if games is None or traj.boxed_answer is None:
        return False
    game = games.get(item.game_id)
    if game is None:
        return False
    commands = [c.strip() for c in traj.boxed_answer.split(",") if c.strip()]
    state, _ = replay(game, commands)
    return state.score == game.max_score


def run_benchmark(
    items: Sequence[BenchmarkItem],
    policy: Policy,
    registry: InterfaceRegistry,
    k: int = 1,
    config: Optional[RolloutConfig] = None,
    games: Optional[GameStore] = None,
    modes: Optional[dict] = None,
    lexicon: Sequence[str] = DEFAULT_REFLECTION_LEXICON,
) -> MetricReport:
    """Run k rollouts per item and reduce to the standard metric set.

    EM scores the first sample of each item; avg@k averages correctness over
    all k samples; hits@1 asks whether the predicted answer hits any gold
    alias (kbqa items); pass rate replays concluded command sequences (game
    items).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    config = config or RolloutConfig()
    modes = {**DEFAULT_MODES, **(modes or {})}

    results: list[ItemResult] = []
    for item in items:
        batch = rollout_group(item.question, policy, registry, config, group_size=k)
        if item.task_kind == "game":
            correct = [_game_pass(item, t, games) for t in batch.trajectories]
            passed = correct[0]
        else:
            mode = modes[item.task_kind]
            correct = [
                check_answer(t.boxed_answer, item.gold_answers, mode) for t in batch.trajectories
            ]
            passed = None
        results.append(ItemResult(item=item, batch=batch, sample_correct=correct, passed=passed))

    def mean(values: list[float]) -> Optional[float]:
        return sum(values) / len(values) if values else None

    em = mean([1.0 if r.first_correct else 0.0 for r in results])
    avg_at_k = mean([sum(r.sample_correct) / len(r.sample_correct) for r in results])
    hits = mean([1.0 if r.first_correct else 0.0 for r in results if r.item.task_kind == "kbqa"])
    pass_rate = mean([1.0 if r.passed else 0.0 for r in results if r.item.task_kind == "game"])

    trajectories = [t for r in results for t in r.batch.trajectories]
    stats = compute_batch_stats(trajectories, lexicon)
    metrics = {"em": em, "avg_at_k": avg_at_k, "hits_at_1": hits, "pass_rate": pass_rate}
    return MetricReport(k=k, results=results, metrics=metrics, stats=stats)
