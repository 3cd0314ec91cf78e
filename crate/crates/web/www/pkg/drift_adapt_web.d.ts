/* tslint:disable */
/* eslint-disable */

/**
 * Synthesizes one ground motion with peak acceleration `pga` (m/s²), runs it
 * through a building and labels each story.
 * `building` is "3" or "5".
 */
export function simulate_building(building: string, seed: bigint, dominant_freq_hz: number, ground_damping: number, pga: number, duration: number): string;

/**
 * Normalized source weights for a fixed kernel width, as JSON.
 */
export function source_weights(source_physics: Float64Array, target_physics: number, sigma: number): string;

/**
 * Weights over a log-spaced sigma grid, row-major `[n_sigma][n_sources]`.
 */
export function weight_sweep(source_physics: Float64Array, target_physics: number, sigma_min: number, sigma_max: number, n_sigma: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly simulate_building: (a: number, b: number, c: bigint, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly source_weights: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly weight_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
