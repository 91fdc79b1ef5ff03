/* tslint:disable */
/* eslint-disable */

/**
 * Final statevector of the feature-map + ansatz circuit, interleaved
 * as `[re_0, im_0, re_1, im_1, …]` over the `2^n` basis states
 * (little-endian: qubit 0 is the least significant index bit).
 */
export function qlayer_amplitudes(n_qubits: number, feature_map_reps: number, ansatz_reps: number, features: Float64Array, params: Float64Array): Float64Array;

/**
 * Evaluate the quantum layer. Returns a flat vector:
 * `[p, dp/dθ_0 … dp/dθ_{k-1}, dp/dx_0 … dp/dx_{n-1}]`
 * (probability, then one exact parameter-shift derivative per ansatz
 * angle, then one chained derivative per input feature).
 */
export function qlayer_eval(n_qubits: number, feature_map_reps: number, ansatz_reps: number, features: Float64Array, params: Float64Array): Float64Array;

/**
 * Ansatz parameter count for a layer shape — lets the page build the
 * right number of sliders.
 */
export function qlayer_param_count(n_qubits: number, ansatz_reps: number): number;

/**
 * One gradient-descent step of the binary cross-entropy toward
 * `target` (0 or 1), using the exact parameter-shift gradient.
 * Returns the updated ansatz angles.
 */
export function qlayer_train_step(n_qubits: number, feature_map_reps: number, ansatz_reps: number, features: Float64Array, params: Float64Array, target: number, learning_rate: number): Float64Array;

/**
 * ROC demo over two synthetic score clouds. Negative scores are drawn
 * near 0.5 − separation/2 and positives near 0.5 + separation/2 (both
 * with noise, squashed into (0, 1)). Returns
 * `[auc, fpr_0, tpr_0, fpr_1, tpr_1, …]`.
 */
export function roc_demo(n_per_class: number, separation: number, seed: bigint): Float64Array;

/**
 * One synthetic volume pair, concatenated: the first `side³` values
 * are the class-0 background, the next `side³` its class-1 lesioned
 * copy. Identical to what the dataset generator writes for
 * `(seed, pair_index)`.
 */
export function volume_pair(side: number, difficulty: number, seed: bigint, pair_index: bigint): Float32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly qlayer_amplitudes: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly qlayer_eval: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly qlayer_param_count: (a: number, b: number) => number;
    readonly qlayer_train_step: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly roc_demo: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly volume_pair: (a: number, b: number, c: bigint, d: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
