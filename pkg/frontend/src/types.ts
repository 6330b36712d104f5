/** Shared types for the mask-studio editor and the /v1 service client. */

export type ConditionKind = "segmentation" | "scribble" | "edge";

export interface ClassesInfo {
  kind: ConditionKind;
  labels: string[];
  palette: [number, number, number][];
  proxy_palette: [number, number, number][];
  mask_size: number;
}

export interface SynthesizeResponse {
  image: string; // base64 PNG
  proxy_mask: string; // base64 indexed PNG
  latency_ms: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
}

/** Immutable editor state; all transitions go through reduce(). */
export interface EditorState {
  /** Class id per pixel, row-major, size*size entries. */
  raster: Uint8Array;
  size: number;
  numClasses: number;
  activeClass: number;
  brushRadius: number;
  styleSeed: number;
  /** Previous rasters, oldest first; bounded length. */
  undoStack: Uint8Array[];
  redoStack: Uint8Array[];
}

export type EditorEvent =
  | { type: "stroke"; stroke: Stroke }
  | { type: "fill" }
  | { type: "clear" }
  | { type: "undo" }
  | { type: "redo" }
  | { type: "setClass"; classId: number }
  | { type: "setBrush"; radius: number }
  | { type: "setSeed"; seed: number }
  | { type: "importRaster"; raster: Uint8Array };
