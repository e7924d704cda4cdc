/**
 * Host-side clipped-surrogate arithmetic, numerically identical to the
 * server's objective so training loops can differentiate through it natively.
 */

export interface SurrogateConfig {
    epsMin: number; // lower clip: ratios below 1 - epsMin are clipped
    epsMax: number; // upper clip: ratios above 1 + epsMax are clipped
}

export const DEFAULT_CONFIG: SurrogateConfig = { epsMin: 0.2, epsMax: 0.28 };

export interface SurrogateInput {
    /** Flat per-token arrays; trajectory i spans offsets[i]..offsets[i+1]. */
    offsets: number[];
    oldLogprobs: number[];
    newLogprobs: number[];
    /** 1 to include the token, 0 to exclude it from sums and normalizers. */
    mask: number[];
    /** Either one advantage per trajectory, or one per token (flat). */
    advantages: number[];
}

export interface SurrogateResult {
    /** Normalized per-token terms (flat); masked-out positions are zero. */
    terms: number[];
    /** Sum of all terms: the objective to maximize. */
    objective: number;
}

function clip(x: number, lo: number, hi: number): number {
    return Math.min(Math.max(x, lo), hi);
}

/**
 * term[t] = min(rho * a, clip(rho, 1-epsMin, 1+epsMax) * a) / |t_i|masked / G
 * with rho = exp(new - old). Matches the server's grpo objective exactly:
 * the objective equals the plain sum of the returned terms.
 */
export function surrogateTerms(
    input: SurrogateInput,
    cfg: SurrogateConfig = DEFAULT_CONFIG,
): SurrogateResult {
    const { offsets, oldLogprobs, newLogprobs, mask, advantages } = input;
    const g = offsets.length - 1;
    const total = offsets[g];
    if (
        oldLogprobs.length !== total ||
        newLogprobs.length !== total ||
        mask.length !== total
    ) {
        throw new Error("flat array lengths disagree with offsets");
    }
    const perToken = advantages.length === total;
    if (!perToken && advantages.length !== g) {
        throw new Error(
            `advantages must have ${g} (per trajectory) or ${total} (per token) entries`,
        );
    }

    const terms = new Array<number>(total).fill(0);
    let objective = 0;
    const lo = 1.0 - cfg.epsMin;
    const hi = 1.0 + cfg.epsMax;

    for (let i = 0; i < g; i++) {
        let denom = 0;
        for (let t = offsets[i]; t < offsets[i + 1]; t++) {
            if (mask[t]) denom += 1;
        }
        if (denom === 0) continue;
        for (let t = offsets[i]; t < offsets[i + 1]; t++) {
            if (!mask[t]) continue;
            const a = perToken ? advantages[t] : advantages[i];
            if (!Number.isFinite(oldLogprobs[t]) || !Number.isFinite(newLogprobs[t])) {
                throw new Error(`non-finite log-probability at flat index ${t}`);
            }
            const rho = Math.exp(newLogprobs[t] - oldLogprobs[t]);
            const term = Math.min(rho * a, clip(rho, lo, hi) * a) / denom / g;
            terms[t] = term;
            objective += term;
        }
    }
    return { terms, objective };
}
