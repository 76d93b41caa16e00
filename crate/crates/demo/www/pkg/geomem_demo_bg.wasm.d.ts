/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_explorer_free: (a: number, b: number) => void;
export const __wbg_stepreport_free: (a: number, b: number) => void;
export const explorer_depth: (a: number) => [number, number];
export const explorer_height: (a: number) => number;
export const explorer_ingest: (a: number) => [number, number, number];
export const explorer_keyframes: (a: number) => number;
export const explorer_new: (a: bigint, b: number, c: number) => [number, number, number];
export const explorer_points: (a: number) => number;
export const explorer_pose: (a: number) => [number, number];
export const explorer_retrieve: (a: number) => [number, number];
export const explorer_step: (a: number, b: number, c: number) => [number, number, number];
export const explorer_width: (a: number) => number;
export const fit_scale: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const stepreport_coverage: (a: number) => number;
export const stepreport_frame: (a: number) => number;
export const stepreport_keyframe: (a: number) => number;
export const stepreport_retrieved: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
