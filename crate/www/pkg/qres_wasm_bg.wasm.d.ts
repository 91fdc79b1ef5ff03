/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const qlayer_amplitudes: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const qlayer_eval: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const qlayer_param_count: (a: number, b: number) => number;
export const qlayer_train_step: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const roc_demo: (a: number, b: number, c: bigint) => [number, number, number, number];
export const volume_pair: (a: number, b: number, c: bigint, d: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
