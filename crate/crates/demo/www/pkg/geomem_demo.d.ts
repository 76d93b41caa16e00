/* tslint:disable */
/* eslint-disable */

/**
 * A camera walking a seeded terrain with a spatial memory attached.
 */
export class Explorer {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Current view depth, row-major with row 0 at the bottom; 0 is sky.
     */
    depth(): Float32Array;
    /**
     * Ingests the current view without moving.
     */
    ingest(): StepReport;
    constructor(seed: bigint, width: number, height: number);
    /**
     * `[x, y, z, pitch, yaw]` of the camera.
     */
    pose(): Float64Array;
    /**
     * Frames the memory would retrieve for the current pose, with votes
     * interleaved as `[id, votes, id, votes, ...]`.
     */
    retrieve(): Uint32Array;
    /**
     * Moves the camera, re-renders, and ingests the new view.
     */
    step(action: string): StepReport;
    readonly height: number;
    readonly keyframes: number;
    readonly points: number;
    readonly width: number;
}

/**
 * Outcome of feeding one view into the memory.
 */
export class StepReport {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly coverage: number;
    readonly frame: number;
    readonly keyframe: boolean;
    readonly retrieved: Uint32Array;
}

/**
 * Recovers `truth` from a synthetic pair of depth maps where the new map
 * carries multiplicative `noise` and `outliers` of its pixels are
 * low-confidence garbage. Returns `[estimate, kept pairs]`.
 */
export function fit_scale(truth: number, noise: number, outliers: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_explorer_free: (a: number, b: number) => void;
    readonly __wbg_stepreport_free: (a: number, b: number) => void;
    readonly explorer_depth: (a: number) => [number, number];
    readonly explorer_height: (a: number) => number;
    readonly explorer_ingest: (a: number) => [number, number, number];
    readonly explorer_keyframes: (a: number) => number;
    readonly explorer_new: (a: bigint, b: number, c: number) => [number, number, number];
    readonly explorer_points: (a: number) => number;
    readonly explorer_pose: (a: number) => [number, number];
    readonly explorer_retrieve: (a: number) => [number, number];
    readonly explorer_step: (a: number, b: number, c: number) => [number, number, number];
    readonly explorer_width: (a: number) => number;
    readonly fit_scale: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly stepreport_coverage: (a: number) => number;
    readonly stepreport_frame: (a: number) => number;
    readonly stepreport_keyframe: (a: number) => number;
    readonly stepreport_retrieved: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
