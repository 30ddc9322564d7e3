/* tslint:disable */
/* eslint-disable */

export class TriageDemo {
    free(): void;
    [Symbol.dispose](): void;
    evaluate(task: string, model: string): any;
    constructor(households: number, seed: number);
    /**
     * `tau` of zero or less means the per-record default band.
     */
    rank(w_prob: number, w_discrepancy: number, w_proximity: number, tau: number, limit: number): any;
    summary(): any;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_triagedemo_free: (a: number, b: number) => void;
    readonly triagedemo_evaluate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly triagedemo_new: (a: number, b: number) => [number, number, number];
    readonly triagedemo_rank: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly triagedemo_summary: (a: number) => [number, number, number];
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
