/** Wire types mirroring the server's group-batch JSON schema, field for field. */

export interface WireSegment {
    text: string;
    provenance: "policy" | "injected";
    token_length: number;
}

export interface WireLedger {
    counts: Record<string, number>;
    errors: Record<string, number>;
    over_limit: Record<string, number>;
}

export interface WireTrajectory {
    schema_version: number;
    question: string;
    sample_index: number;
    segments: WireSegment[];
    conclusion: string | null;
    boxed_answer: string | null;
    format_ok: boolean;
    truncated: boolean;
    aborted: boolean;
    token_length: number;
    ledger: WireLedger;
}

export interface WireReward {
    c_format: boolean;
    c_answer: boolean;
    reward: number;
}

export interface WireGroup {
    schema_version: number;
    question: string;
    g: number;
    trainable: boolean;
    trajectories: WireTrajectory[];
    token_offsets: number[];
    mask_flat: number[];
    rewards: WireReward[] | null;
    advantages: number[] | null;
    advantages_flat: number[] | null;
}

/** Decoded group with per-trajectory views sliced out of the flat arrays. */
export interface ClientGroup {
    question: string;
    g: number;
    trainable: boolean;
    trajectories: WireTrajectory[];
    rewards: WireReward[] | null;
    /** Per-trajectory advantage (constant over that trajectory's tokens). */
    advantages: number[] | null;
    /** token_offsets[i] .. token_offsets[i+1] spans trajectory i's tokens. */
    offsets: number[];
    /** 1 for policy tokens, 0 for injected ones; length offsets[g]. */
    mask: number[];
}

export function decodeGroup(wire: WireGroup): ClientGroup {
    const total = wire.token_offsets[wire.token_offsets.length - 1];
    if (wire.mask_flat.length !== total) {
        throw new Error(
            `mask_flat length ${wire.mask_flat.length} disagrees with offsets total ${total}`,
        );
    }
    if (wire.token_offsets.length !== wire.g + 1) {
        throw new Error("token_offsets must have G+1 entries");
    }
    return {
        question: wire.question,
        g: wire.g,
        trainable: wire.trainable,
        trajectories: wire.trajectories,
        rewards: wire.rewards,
        advantages: wire.advantages,
        offsets: wire.token_offsets,
        mask: wire.mask_flat,
    };
}
