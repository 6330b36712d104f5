import { describe, expect, it } from "vitest";
import { initialState, reduce, UNDO_LIMIT, rastersEqual } from "../src/state.js";
import type { EditorEvent, EditorState } from "../src/types.js";

const SIZE = 16;

function fresh(): EditorState {
  return initialState(SIZE, 6);
}

function dot(state: EditorState, x: number, y: number): EditorState {
  return reduce(state, { type: "stroke", stroke: { points: [{ x, y }] } });
}

describe("reduce", () => {
  it("starts with an all-background raster", () => {
    const s = fresh();
    expect(s.raster.length).toBe(SIZE * SIZE);
    expect(s.raster.every((v) => v === 0)).toBe(true);
    expect(s.activeClass).toBe(1);
  });

  it("an empty stroke returns the same state object", () => {
    const s = fresh();
    expect(reduce(s, { type: "stroke", stroke: { points: [] } })).toBe(s);
  });

  it("a stroke that changes nothing does not push an undo entry", () => {
    let s = fresh();
    s = dot(s, 4, 4);
    const before = s;
    s = dot(s, 4, 4); // repaint same class over same pixels
    expect(s).toBe(before);
    expect(s.undoStack.length).toBe(1);
  });

  it("a stroke paints the active class", () => {
    let s = reduce(fresh(), { type: "setBrush", radius: 1 });
    s = dot(s, 3, 5);
    expect(s.raster[5 * SIZE + 3]).toBe(1);
  });

  it("fill covers the whole canvas with the active class", () => {
    let s = reduce(fresh(), { type: "setClass", classId: 3 });
    s = reduce(s, { type: "fill" });
    expect(s.raster.every((v) => v === 3)).toBe(true);
  });

  it("clear restores all-background but is undoable", () => {
    let s = reduce(fresh(), { type: "fill" });
    s = reduce(s, { type: "clear" });
    expect(s.raster.every((v) => v === 0)).toBe(true);
    s = reduce(s, { type: "undo" });
    expect(s.raster.every((v) => v === 1)).toBe(true);
  });

  it("undo restores the previous raster bitwise", () => {
    let s = fresh();
    s = dot(s, 2, 2);
    const painted = s.raster.slice();
    s = dot(s, 9, 9);
    s = reduce(s, { type: "undo" });
    expect(rastersEqual(s.raster, painted)).toBe(true);
  });

  it("redo reapplies an undone edit and a new edit clears redo", () => {
    let s = fresh();
    s = dot(s, 2, 2);
    const after = s.raster.slice();
    s = reduce(s, { type: "undo" });
    s = reduce(s, { type: "redo" });
    expect(rastersEqual(s.raster, after)).toBe(true);
    s = reduce(s, { type: "undo" });
    s = dot(s, 12, 12);
    expect(s.redoStack.length).toBe(0);
  });

  it("undo on an empty stack is a no-op", () => {
    const s = fresh();
    expect(reduce(s, { type: "undo" })).toBe(s);
    expect(reduce(s, { type: "redo" })).toBe(s);
  });

  it("supports at least 20 undo levels", () => {
    let s = fresh();
    const snapshots: Uint8Array[] = [s.raster.slice()];
    for (let i = 0; i < 20; i++) {
      s = reduce(s, { type: "setClass", classId: (i % 5) + 1 });
      s = dot(s, i % SIZE, Math.floor(i / SIZE) + 1);
      snapshots.push(s.raster.slice());
    }
    for (let i = 19; i >= 0; i--) {
      s = reduce(s, { type: "undo" });
      expect(rastersEqual(s.raster, snapshots[i])).toBe(true);
    }
  });

  it("caps the undo stack at UNDO_LIMIT", () => {
    let s = fresh();
    for (let i = 0; i < UNDO_LIMIT + 10; i++) {
      s = reduce(s, { type: "setClass", classId: (i % 5) + 1 });
      s = reduce(s, { type: "fill" });
    }
    expect(s.undoStack.length).toBe(UNDO_LIMIT);
  });

  it("reducers never mutate the input state", () => {
    const s = fresh();
    const rasterBefore = s.raster.slice();
    reduce(s, { type: "fill" });
    reduce(s, { type: "stroke", stroke: { points: [{ x: 1, y: 1 }] } });
    expect(rastersEqual(s.raster, rasterBefore)).toBe(true);
    expect(s.undoStack.length).toBe(0);
  });

  it("replaying the same event log reproduces the same raster", () => {
    const log: EditorEvent[] = [
      { type: "setClass", classId: 2 },
      { type: "stroke", stroke: { points: [{ x: 1, y: 1 }, { x: 10, y: 6 }] } },
      { type: "setClass", classId: 4 },
      { type: "setBrush", radius: 3 },
      { type: "stroke", stroke: { points: [{ x: 8, y: 8 }] } },
      { type: "undo" },
      { type: "redo" },
    ];
    const a = log.reduce(reduce, fresh());
    const b = log.reduce(reduce, fresh());
    expect(rastersEqual(a.raster, b.raster)).toBe(true);
  });

  it("rejects out-of-range class ids and bad imports", () => {
    const s = fresh();
    expect(reduce(s, { type: "setClass", classId: 6 })).toBe(s);
    expect(reduce(s, { type: "setClass", classId: -1 })).toBe(s);
    expect(reduce(s, { type: "importRaster", raster: new Uint8Array(7) })).toBe(s);
  });

  it("importRaster replaces the canvas and is undoable", () => {
    const imported = new Uint8Array(SIZE * SIZE).fill(5);
    let s = reduce(fresh(), { type: "importRaster", raster: imported });
    expect(s.raster.every((v) => v === 5)).toBe(true);
    s = reduce(s, { type: "undo" });
    expect(s.raster.every((v) => v === 0)).toBe(true);
  });
});
