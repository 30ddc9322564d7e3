/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_triagedemo_free: (a: number, b: number) => void;
export const triagedemo_evaluate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const triagedemo_new: (a: number, b: number) => [number, number, number];
export const triagedemo_rank: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const triagedemo_summary: (a: number) => [number, number, number];
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
