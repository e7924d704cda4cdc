/** HTTP client for the rollout service. */

import { ClientGroup, WireGroup, decodeGroup } from "./wire.js";

export interface ClientOptions {
    retries?: number;
    backoffMs?: number;
    timeoutMs?: number;
    authToken?: string;
}

export interface RolloutOptions {
    gold?: string | string[];
    mode?: "string_em" | "numeric";
    seed?: number;
    interfaces?: string[];
}

export class ServiceError extends Error {
    constructor(
        message: string,
        public readonly status?: number,
        public readonly detail?: unknown,
    ) {
        super(message);
        this.name = "ServiceError";
    }
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class RolloutClient {
    private readonly endpoint: string;
    private readonly retries: number;
    private readonly backoffMs: number;
    private readonly timeoutMs: number;
    private readonly authToken?: string;

    constructor(endpoint: string, options: ClientOptions = {}) {
        this.endpoint = endpoint.replace(/\/$/, "");
        this.retries = options.retries ?? 3;
        this.backoffMs = options.backoffMs ?? 100;
        this.timeoutMs = options.timeoutMs ?? 30_000;
        this.authToken = options.authToken;
    }

    private headers(): Record<string, string> {
        const headers: Record<string, string> = { "Content-Type": "application/json" };
        if (this.authToken) headers["Authorization"] = `Bearer ${this.authToken}`;
        return headers;
    }

    /**
     * POST with retry on network failures and 5xx. 4xx responses surface the
     * server's field-level message immediately (they will not heal on retry).
     */
    private async post(path: string, body: unknown): Promise<any> {
        let lastError: unknown;
        for (let attempt = 0; attempt <= this.retries; attempt++) {
            if (attempt > 0) await sleep(this.backoffMs * 2 ** (attempt - 1));
            try {
                const resp = await fetch(this.endpoint + path, {
                    method: "POST",
                    headers: this.headers(),
                    body: JSON.stringify(body),
                    signal: AbortSignal.timeout(this.timeoutMs),
                });
                if (resp.status >= 500) {
                    lastError = new ServiceError(`server error ${resp.status}`, resp.status);
                    continue;
                }
                const payload = (await resp.json()) as any;
                if (!resp.ok) {
                    throw new ServiceError(
                        `request failed (${resp.status}): ${JSON.stringify(payload.error ?? payload)}`,
                        resp.status,
                        payload.error,
                    );
                }
                return payload;
            } catch (error) {
                if (error instanceof ServiceError && error.status && error.status < 500) throw error;
                lastError = error;
            }
        }
        throw new ServiceError(
            `service unreachable after ${this.retries + 1} attempts: ${String(lastError)}`,
        );
    }

    async health(): Promise<{ status: string }> {
        const resp = await fetch(this.endpoint + "/v1/health", {
            headers: this.headers(),
            signal: AbortSignal.timeout(this.timeoutMs),
        });
        return (await resp.json()) as { status: string };
    }

    /** Submit one rollout group and decode the reply's flat arrays. */
    async requestGroup(
        question: string,
        g: number,
        options: RolloutOptions = {},
    ): Promise<ClientGroup> {
        if (!Number.isInteger(g) || g < 1) {
            throw new RangeError(`group size must be a positive integer, got ${g}`);
        }
        if (!question) {
            throw new RangeError("question must be non-empty");
        }
        const payload = await this.post("/v1/rollout", {
            question,
            g,
            gold: options.gold,
            mode: options.mode,
            seed: options.seed,
            interfaces: options.interfaces,
        });
        const wire = payload.groups[0] as WireGroup;
        return decodeGroup(wire);
    }

    /** Server-side surrogate evaluation; the cross-implementation oracle. */
    async serverSurrogate(input: {
        offsets: number[];
        oldFlat: number[];
        newFlat: number[];
        maskFlat: number[];
        advantages?: number[];
        advantagesFlat?: number[];
        epsMin?: number;
        epsMax?: number;
    }): Promise<{ objective: number; terms_flat: number[]; gradient_flat: number[] }> {
        return this.post("/v1/grpo", {
            offsets: input.offsets,
            old_flat: input.oldFlat,
            new_flat: input.newFlat,
            mask_flat: input.maskFlat,
            advantages: input.advantages,
            advantages_flat: input.advantagesFlat,
            eps_min: input.epsMin,
            eps_max: input.epsMax,
        });
    }

    async score(
        response: string,
        gold: string | string[],
        mode: "string_em" | "numeric" = "string_em",
    ): Promise<{ c_format: boolean; c_answer: boolean; reward: number }> {
        return this.post("/v1/score", { response, gold, mode });
    }
}
