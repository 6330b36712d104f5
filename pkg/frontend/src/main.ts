/**
 * DOM wiring for the mask editor. All logic lives in the pure modules
 * (state, brush, png, api); this file only translates browser events into
 * reducer events and paints state onto canvases.
 */

import { SynthClient, PreviewScheduler, ApiError, validateRaster } from "./api.js";
import { reduce, initialState } from "./state.js";
import { encodeMaskPng, decodeMaskPng } from "./png.js";
import type { ClassesInfo, EditorEvent, Point } from "./types.js";

const SCALE = 8; // canvas pixels per mask pixel

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const client = new SynthClient("");
  const statusEl = byId<HTMLElement>("status");

  let info: ClassesInfo;
  try {
    await client.getHealth();
    info = await client.getClasses();
  } catch (err) {
    // Service down: keep the editor usable with a sane default palette so
    // nothing painted is lost; previews resume when the service returns.
    statusEl.textContent = err instanceof Error ? `service unavailable: ${err.message}` : "service unavailable";
    info = {
      kind: "segmentation",
      labels: ["background", "class 1", "class 2", "class 3", "class 4", "class 5"],
      palette: [
        [0, 0, 0],
        [230, 60, 60],
        [60, 180, 75],
        [60, 90, 220],
        [240, 200, 50],
        [170, 90, 200],
      ],
      proxy_palette: [],
      mask_size: 64,
    };
  }

  let state = initialState(info.mask_size, info.labels.length);

  const maskCanvas = byId<HTMLCanvasElement>("mask-canvas");
  maskCanvas.width = state.size * SCALE;
  maskCanvas.height = state.size * SCALE;
  const maskCtx = maskCanvas.getContext("2d")!;
  const previewImg = byId<HTMLImageElement>("preview-image");
  const overlayImg = byId<HTMLImageElement>("proxy-overlay");
  const latencyEl = byId<HTMLElement>("latency");

  const scheduler = new PreviewScheduler(client, (result) => {
    if (result.ok) {
      previewImg.src = `data:image/png;base64,${result.response.image}`;
      overlayImg.src = `data:image/png;base64,${result.response.proxy_mask}`;
      latencyEl.textContent = `${result.response.latency_ms.toFixed(0)} ms`;
      statusEl.textContent = "";
    } else {
      statusEl.textContent =
        result.error instanceof ApiError
          ? `rejected (${result.error.status}): ${result.error.message}`
          : `preview failed: ${result.error.message}`;
    }
  });

  function paint(): void {
    const img = maskCtx.createImageData(state.size, state.size);
    for (let i = 0; i < state.raster.length; i++) {
      const [r, g, b] = info.palette[state.raster[i]] ?? [255, 0, 255];
      img.data[4 * i] = r;
      img.data[4 * i + 1] = g;
      img.data[4 * i + 2] = b;
      img.data[4 * i + 3] = 255;
    }
    createImageBitmap(img).then((bmp) => {
      maskCtx.imageSmoothingEnabled = false;
      maskCtx.drawImage(bmp, 0, 0, maskCanvas.width, maskCanvas.height);
    });
  }

  function requestPreview(): void {
    try {
      validateRaster(state.raster, state.size, info);
    } catch (err) {
      statusEl.textContent = err instanceof Error ? err.message : String(err);
      return;
    }
    scheduler.schedule({
      kind: info.kind,
      maskPng: encodeMaskPng(state.raster, state.size, info.palette),
      styleSeed: state.styleSeed,
    });
  }

  function dispatch(event: EditorEvent): void {
    const next = reduce(state, event);
    const changed = next !== state;
    state = next;
    if (changed) {
      paint();
      requestPreview();
    }
  }

  // --- brush input --------------------------------------------------------
  let strokePoints: Point[] | null = null;

  function canvasPoint(ev: MouseEvent): Point {
    const rect = maskCanvas.getBoundingClientRect();
    return {
      x: Math.floor(((ev.clientX - rect.left) / rect.width) * state.size),
      y: Math.floor(((ev.clientY - rect.top) / rect.height) * state.size),
    };
  }

  maskCanvas.addEventListener("mousedown", (ev) => {
    strokePoints = [canvasPoint(ev)];
  });
  maskCanvas.addEventListener("mousemove", (ev) => {
    if (strokePoints) strokePoints.push(canvasPoint(ev));
  });
  const endStroke = () => {
    if (!strokePoints) return;
    dispatch({ type: "stroke", stroke: { points: strokePoints } });
    strokePoints = null;
  };
  maskCanvas.addEventListener("mouseup", endStroke);
  maskCanvas.addEventListener("mouseleave", endStroke);

  // --- toolbar ------------------------------------------------------------
  const classPicker = byId<HTMLElement>("class-picker");
  info.labels.forEach((label, i) => {
    const btn = document.createElement("button");
    const [r, g, b] = info.palette[i] ?? [128, 128, 128];
    btn.style.background = `rgb(${r},${g},${b})`;
    btn.title = label;
    btn.addEventListener("click", () => dispatch({ type: "setClass", classId: i }));
    classPicker.appendChild(btn);
  });

  byId<HTMLButtonElement>("undo-btn").addEventListener("click", () => dispatch({ type: "undo" }));
  byId<HTMLButtonElement>("redo-btn").addEventListener("click", () => dispatch({ type: "redo" }));
  byId<HTMLButtonElement>("clear-btn").addEventListener("click", () => dispatch({ type: "clear" }));

  const brushInput = byId<HTMLInputElement>("brush-size");
  brushInput.addEventListener("input", () => dispatch({ type: "setBrush", radius: Number(brushInput.value) }));

  const seedInput = byId<HTMLInputElement>("style-seed");
  seedInput.addEventListener("change", () => dispatch({ type: "setSeed", seed: Number(seedInput.value) }));

  byId<HTMLButtonElement>("export-btn").addEventListener("click", () => {
    const png = encodeMaskPng(state.raster, state.size, info.palette);
    const blob = new Blob([png.buffer as ArrayBuffer], { type: "image/png" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "mask.png";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const importInput = byId<HTMLInputElement>("import-input");
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    if (!file) return;
    try {
      const decoded = decodeMaskPng(new Uint8Array(await file.arrayBuffer()));
      if (decoded.size !== state.size) {
        throw new Error(`mask must be ${state.size}x${state.size}, got ${decoded.size}x${decoded.size}`);
      }
      dispatch({ type: "importRaster", raster: decoded.raster });
    } catch (err) {
      statusEl.textContent = err instanceof Error ? err.message : String(err);
    }
    importInput.value = "";
  });

  paint();
}

boot().catch((err) => {
  const statusEl = document.getElementById("status");
  if (statusEl) statusEl.textContent = String(err);
});
