/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demoscene_free: (a: number, b: number) => void;
export const demoscene_height: (a: number) => number;
export const demoscene_labels_rgba: (a: number) => [number, number];
export const demoscene_photo_rgba: (a: number) => [number, number];
export const demoscene_report: (a: number) => [number, number];
export const demoscene_shadow_mask_rgba: (a: number) => [number, number];
export const demoscene_width: (a: number) => number;
export const simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
export const solar: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const tree_estimate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
