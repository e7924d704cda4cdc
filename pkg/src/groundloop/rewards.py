"""Verifiable rewards, group-mean advantages, and the clipped surrogate objective.

All operations are pure over their inputs. The surrogate is stated as a value
to MAXIMIZE; a host training loop negates it for gradient descent.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

STRING_EM = "string_em"
NUMERIC = "numeric"

REWARD_CORRECT = 1.0
REWARD_FORMAT_ONLY = 0.0
REWARD_NEITHER = -0.1

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class RewardRecord:
    c_format: bool
    c_answer: bool
    reward: float

    def as_dict(self) -> dict:
        return {"c_format": self.c_format, "c_answer": self.c_answer, "reward": self.reward}


@dataclass(frozen=True)
class GrpoConfig:
    eps_min: float = 0.2
    eps_max: float = 0.28
    mask_injected: bool = True

    def __post_init__(self) -> None:
        if not (0 < self.eps_min < 1 and 0 < self.eps_max < 1):
            raise ValueError("clipping bounds must lie in (0, 1)")


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


_FRAC = re.compile(r"^(-?)\\d?frac\{(-?[0-9]+)\}\{(-?[0-9]+)\}$")


def parse_number(text: str) -> Optional[Fraction]:
    """Exact rational from integers, decimals, a/b, and \\frac{a}{b} notation."""
    t = text.strip().strip("$").strip()
    t = re.sub(r"(?<=\d),(?=\d{3}\b)", "", t)  # thousands separators
    m = _FRAC.match(t)
    if m:
        sign = -1 if m.group(1) else 1
        try:
            return sign * Fraction(int(m.group(2)), int(m.group(3)))
        except ZeroDivisionError:
            return None
    if re.fullmatch(r"-?\d+\s*/\s*-?\d+", t):
        num, den = t.split("/")
        try:
            return Fraction(int(num), int(den))
        except ZeroDivisionError:
            return None
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        return None


def check_answer(predicted: Optional[str], gold: Union[str, Sequence[str]], mode: str = STRING_EM) -> bool:
    """Exact-match predicate; a missing prediction is always wrong.

    string_em compares normalized strings. numeric compares exact rationals
    and falls back to normalized string equality when either side does not
    parse. A sequence of golds matches if any member matches.
    """
    if predicted is None:
        return False
    golds = [gold] if isinstance(gold, str) else list(gold)
    for candidate in golds:
        if mode == NUMERIC:
            p, g = parse_number(predicted), parse_number(candidate)
            if p is not None and g is not None:
                if p == g:
                    return True
                continue
        if normalize_answer(predicted) == normalize_answer(candidate):
            return True
    return False


def reward_from_flags(c_format: bool, c_answer: bool) -> RewardRecord:
    """The piecewise verifiable reward.

    A correct answer scores 1.0 unconditionally: the first branch carries no
    format condition, so broken format with a correct boxed answer still earns
    full reward.
    """
    if c_answer:
        value = REWARD_CORRECT
    elif c_format:
        value = REWARD_FORMAT_ONLY
    else:
        value = REWARD_NEITHER
    return RewardRecord(c_format=c_format, c_answer=c_answer, reward=value)


def score_trajectory(trajectory, gold: Union[str, Sequence[str]], mode: str = STRING_EM) -> RewardRecord:
    """RewardRecord for a finalized trajectory; aborted/truncated never pass format."""
    c_format = bool(trajectory.format_ok) and not trajectory.aborted and not trajectory.truncated
    c_answer = check_answer(trajectory.boxed_answer, gold, mode)
    return reward_from_flags(c_format, c_answer)


# -- advantages --------------------------------------------------------------


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """Mean-centered group rewards: a_i = r_i - mean(r).

    Deliberately no division by the group standard deviation.
    """
    if len(rewards) < 2:
        raise ValueError("advantages need a group of at least 2 trajectories")
    mean = math.fsum(rewards) / len(rewards)
    return [r - mean for r in rewards]


def broadcast_advantages(per_trajectory: Sequence[float], lengths: Sequence[int]) -> list[np.ndarray]:
    """Expand per-trajectory advantages to one constant value per token."""
    if len(per_trajectory) != len(lengths):
        raise ValueError("advantage/length count mismatch")
    return [np.full(n, a, dtype=np.float64) for a, n in zip(per_trajectory, lengths)]


# -- clipped surrogate --------------------------------------------------------


@dataclass
class LogProbBatch:
    """Per-token old/new log-probabilities and loss masks for one group."""

    old_logprobs: list[np.ndarray]
    new_logprobs: list[np.ndarray]
    masks: list[np.ndarray]

    def __post_init__(self) -> None:
        if not (len(self.old_logprobs) == len(self.new_logprobs) == len(self.masks)):
            raise ValueError("trajectory count mismatch across batch fields")
        norm_old, norm_new, norm_mask = [], [], []
        for old, new, mask in zip(self.old_logprobs, self.new_logprobs, self.masks):
            old = np.asarray(old, dtype=np.float64)
            new = np.asarray(new, dtype=np.float64)
            mask = np.asarray(mask, dtype=bool)
            if not (old.shape == new.shape == mask.shape):
                raise ValueError("per-trajectory shapes disagree")
            if mask.any() and not (
                np.isfinite(old[mask]).all() and np.isfinite(new[mask]).all()
            ):
                raise ValueError("non-finite log-probability at a masked-in position")
            norm_old.append(old)
            norm_new.append(new)
            norm_mask.append(mask)
        self.old_logprobs, self.new_logprobs, self.masks = norm_old, norm_new, norm_mask

    def __len__(self) -> int:
        return len(self.old_logprobs)


def _per_token_advantages(
    adv: Union[Sequence[float], Sequence[np.ndarray]], batch: LogProbBatch
) -> list[np.ndarray]:
    if len(adv) != len(batch):
        raise ValueError("advantage/batch trajectory count mismatch")
    rows = []
    for a, new in zip(adv, batch.new_logprobs):
        arr = np.asarray(a, dtype=np.float64)
        if arr.ndim == 0:
            arr = np.full(new.shape, float(arr))
        if arr.shape != new.shape:
            raise ValueError("per-token advantage shape mismatch")
        rows.append(arr)
    return rows


def surrogate_token_terms(
    batch: LogProbBatch,
    adv: Union[Sequence[float], Sequence[np.ndarray]],
    cfg: GrpoConfig = GrpoConfig(),
) -> list[np.ndarray]:
    """Normalized per-token surrogate terms; masked-out positions are zero.

    term[i][j] = min(rho * a, clip(rho, 1 - eps_min, 1 + eps_max) * a)
                 / (masked token count of trajectory i) / G
    so that the objective is exactly the sum of all terms.
    """
    rows = _per_token_advantages(adv, batch)
    g = len(batch)
    out = []
    for old, new, mask, a in zip(batch.old_logprobs, batch.new_logprobs, batch.masks, rows):
        terms = np.zeros_like(new)
        denom = int(mask.sum())
        if denom:
            rho = np.exp(new[mask] - old[mask])
            clipped = np.clip(rho, 1.0 - cfg.eps_min, 1.0 + cfg.eps_max)
            terms[mask] = np.minimum(rho * a[mask], clipped * a[mask]) / denom / g
        out.append(terms)
    return out


def grpo_loss(
    batch: LogProbBatch,
    adv: Union[Sequence[float], Sequence[np.ndarray]],
    cfg: GrpoConfig = GrpoConfig(),
) -> tuple[float, list[np.ndarray]]:
    """Surrogate objective and its analytic gradient w.r.t. new log-probs.

    The gradient is rho * a / |t_i|_masked / G wherever the unclipped branch
    is selected by the min (ties go to the unclipped branch), zero on the
    clipped branch and at masked-out positions. There is no KL term.
    """
    rows = _per_token_advantages(adv, batch)
    g = len(batch)
    objective = 0.0
    grads = []
    for old, new, mask, a in zip(batch.old_logprobs, batch.new_logprobs, batch.masks, rows):
        grad = np.zeros_like(new)
        denom = int(mask.sum())
        if denom:
            rho = np.exp(new[mask] - old[mask])
            a_in = a[mask]
            unclipped = rho * a_in
            clipped = np.clip(rho, 1.0 - cfg.eps_min, 1.0 + cfg.eps_max) * a_in
            terms = np.minimum(unclipped, clipped)
            objective += float(terms.sum()) / denom / g
            active = unclipped <= clipped
            slot = np.zeros_like(rho)
            slot[active] = unclipped[active] / denom / g
            grad[mask] = slot
        grads.append(grad)
    return objective, grads
