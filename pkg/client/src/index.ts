export { RolloutClient, ServiceError } from "./client.js";
export type { ClientOptions, RolloutOptions } from "./client.js";
export { surrogateTerms, DEFAULT_CONFIG } from "./surrogate.js";
export type { SurrogateConfig, SurrogateInput, SurrogateResult } from "./surrogate.js";
export { decodeGroup } from "./wire.js";
export type {
    ClientGroup,
    WireGroup,
    WireLedger,
    WireReward,
    WireSegment,
    WireTrajectory,
} from "./wire.js";
