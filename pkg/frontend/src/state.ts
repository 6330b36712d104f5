import { stampStroke } from "./brush.js";
import type { EditorEvent, EditorState } from "./types.js";

/** Undo depth; at least 20 levels are kept. */
export const UNDO_LIMIT = 32;

export function initialState(size: number, numClasses: number): EditorState {
  return {
    raster: new Uint8Array(size * size),
    size,
    numClasses,
    activeClass: 1,
    brushRadius: 4,
    styleSeed: 0,
    undoStack: [],
    redoStack: [],
  };
}

function pushUndo(state: EditorState, raster: Uint8Array): EditorState {
  const undoStack = [...state.undoStack, state.raster].slice(-UNDO_LIMIT);
  return { ...state, raster, undoStack, redoStack: [] };
}

/**
 * Pure state transition. Every branch returns either the unchanged input
 * state or a fresh object; rasters are never mutated in place, so replaying
 * an event log always reproduces the same canvas.
 */
export function reduce(state: EditorState, event: EditorEvent): EditorState {
  switch (event.type) {
    case "stroke": {
      if (event.stroke.points.length === 0) return state;
      const raster = state.raster.slice();
      stampStroke(raster, state.size, event.stroke, state.brushRadius, state.activeClass);
      if (rastersEqual(raster, state.raster)) return state;
      return pushUndo(state, raster);
    }
    case "fill": {
      const raster = new Uint8Array(state.size * state.size).fill(state.activeClass);
      return pushUndo(state, raster);
    }
    case "clear": {
      return pushUndo(state, new Uint8Array(state.size * state.size));
    }
    case "undo": {
      if (state.undoStack.length === 0) return state;
      const undoStack = state.undoStack.slice(0, -1);
      const raster = state.undoStack[state.undoStack.length - 1];
      return {
        ...state,
        raster,
        undoStack,
        redoStack: [...state.redoStack, state.raster],
      };
    }
    case "redo": {
      if (state.redoStack.length === 0) return state;
      const redoStack = state.redoStack.slice(0, -1);
      const raster = state.redoStack[state.redoStack.length - 1];
      return {
        ...state,
        raster,
        redoStack,
        undoStack: [...state.undoStack, state.raster],
      };
    }
    case "setClass": {
      if (event.classId < 0 || event.classId >= state.numClasses) return state;
      return { ...state, activeClass: event.classId };
    }
    case "setBrush": {
      if (event.radius < 1) return state;
      return { ...state, brushRadius: Math.floor(event.radius) };
    }
    case "setSeed": {
      return { ...state, styleSeed: Math.floor(event.seed) };
    }
    case "importRaster": {
      if (event.raster.length !== state.size * state.size) return state;
      return pushUndo(state, event.raster.slice());
    }
  }
}

export function rastersEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}
