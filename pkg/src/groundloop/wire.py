"""JSON wire encoding for group batches: flat arrays with per-trajectory offsets."""

from __future__ import annotations

from typing import Optional

from .rewards import RewardRecord
from .rollout import GroupBatch, Trajectory

WIRE_SCHEMA_VERSION = 1


def group_to_wire(batch: GroupBatch, mask_injected: bool = True) -> dict:
    """Flatten a batch for transport.

    token_offsets has G+1 entries; trajectory i owns flat indices
    [token_offsets[i], token_offsets[i+1]). Advantage values are broadcast per
    token so hosts can consume them directly.
    """
    masks = batch.masks(mask_injected)
    offsets = [0]
    mask_flat: list[int] = []
    adv_flat: list[float] = []
    for i, traj in enumerate(batch.trajectories):
        offsets.append(offsets[-1] + traj.token_length)
        mask_flat.extend(int(m) for m in masks[i])
        if batch.advantages is not None:
            adv_flat.extend([batch.advantages[i]] * traj.token_length)
    payload = {
        "schema_version": WIRE_SCHEMA_VERSION,
        "question": batch.question,
        "g": batch.group_size,
        "trainable": batch.trainable,
        "trajectories": [t.to_record() for t in batch.trajectories],
        "token_offsets": offsets,
        "mask_flat": mask_flat,
        "rewards": [r.as_dict() for r in batch.rewards] if batch.rewards is not None else None,
        "advantages": list(batch.advantages) if batch.advantages is not None else None,
        "advantages_flat": adv_flat if batch.advantages is not None else None,
    }
    return payload


def group_from_wire(payload: dict) -> GroupBatch:
    trajectories = [Trajectory.from_record(r) for r in payload["trajectories"]]
    rewards: Optional[list[RewardRecord]] = None
    if payload.get("rewards") is not None:
        rewards = [
            RewardRecord(c_format=r["c_format"], c_answer=r["c_answer"], reward=r["reward"])
            for r in payload["rewards"]
        ]
    return GroupBatch(
        question=payload["question"],
        trajectories=trajectories,
        rewards=rewards,
        advantages=list(payload["advantages"]) if payload.get("advantages") is not None else None,
    )
