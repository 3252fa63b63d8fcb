/* tslint:disable */
/* eslint-disable */

/**
 * A rendered synthetic scene with its measured inventory.
 */
export class DemoScene {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA pixels of the label raster in false colour.
     */
    labels_rgba(): Uint8Array;
    /**
     * RGBA pixels of the synthetic photo.
     */
    photo_rgba(): Uint8Array;
    /**
     * JSON: sun, per-tree measurements next to the generating truth, warnings.
     */
    report(): string;
    /**
     * RGBA pixels of the HSV shadow candidates recovered from the photo.
     */
    shadow_mask_rgba(): Uint8Array;
    readonly height: number;
    readonly width: number;
}

/**
 * Renders a random orchard under the sun at `timestamp`, then measures it back.
 */
export function simulate(timestamp: string, lat_deg: number, lon_deg: number, n_trees: number, seed: number, trunk_offset_m: number, form_factor: number, mode: string): DemoScene;

/**
 * Solar position and, when the sun is up, the unit shadow direction in image axes.
 */
export function solar(timestamp: string, lat_deg: number, lon_deg: number): string;

/**
 * Height and biovolume for one tree.
 */
export function tree_estimate(shadow_length_m: number, elevation_deg: number, crown_area_m2: number, trunk_offset_m: number, form_factor: number, mode: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demoscene_free: (a: number, b: number) => void;
    readonly demoscene_height: (a: number) => number;
    readonly demoscene_labels_rgba: (a: number) => [number, number];
    readonly demoscene_photo_rgba: (a: number) => [number, number];
    readonly demoscene_report: (a: number) => [number, number];
    readonly demoscene_shadow_mask_rgba: (a: number) => [number, number];
    readonly demoscene_width: (a: number) => number;
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
    readonly solar: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly tree_estimate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
