/* tslint:disable */
/* eslint-disable */

/**
 * A solved ground state plus the grid it lives on.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `{verdict, rule, gamma, beta_lower, beta_upper}`.
     */
    classify(a1: number, a2: number, beta: number, offset: number): string;
    /**
     * `{thresholds, ts, kappa, inf, t_min}`.
     */
    kappa_curve(a1: number, a2: number, beta: number, points: number): string;
    /**
     * Solves for the ground state on `[-L, L)` with `n` points.
     */
    constructor(n: number, half_length: number);
    /**
     * `{a_star, pohozaev, iterations, xs, q}`.
     */
    profile(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_classify: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_kappa_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_profile: (a: number) => [number, number, number, number];
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
