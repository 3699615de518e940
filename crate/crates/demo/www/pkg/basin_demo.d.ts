/* tslint:disable */
/* eslint-disable */

export function separation_trial(p: number, epsilon: number, seeds: number, root_seed: bigint): Float64Array;

export function toy_heatmap(d1: number, d2: number, r: number, nx: number, ny: number): Float64Array;

export function toy_slice(theta2: number, d1: number, d2: number, r: number, n: number): Float64Array;

export function toy_slice_minima(theta2: number, d1: number, d2: number, r: number, n: number): Uint32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly separation_trial: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly toy_heatmap: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly toy_slice: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly toy_slice_minima: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
