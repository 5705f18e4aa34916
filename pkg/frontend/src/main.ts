/**
 * DOM wiring for the annotator. All labeling logic lives in session.ts and
 * grid.ts; this file only renders state and translates events.
 */

import { ApiError, Client } from "./api.js";
import { clampZoom, tint, uvToIndex } from "./grid.js";
import { AnnotationSession } from "./session.js";

const FOREGROUND_TINT: [number, number, number, number] = [40, 180, 170, 0.5];
const LABEL_TINT: [number, number, number, number] = [230, 60, 60, 0.6];

function el<T extends HTMLElement>(selector: string): T {
  return document.querySelector<T>(selector)!;
}

const canvas = el<HTMLCanvasElement>("#view");
const frameInput = el<HTMLInputElement>("#frame");
const epsInput = el<HTMLInputElement>("#eps");
const fgButton = el<HTMLButtonElement>("#fg");
const eraseButton = el<HTMLButtonElement>("#erase");
const prevButton = el<HTMLButtonElement>("#prev");
const nextButton = el<HTMLButtonElement>("#next");
const zoomLabel = el<HTMLSpanElement>("#zoom-label");
const statusSpan = el<HTMLSpanElement>("#status");
const banner = el<HTMLDivElement>("#banner");
const toastDiv = el<HTMLDivElement>("#toast");

const serverBase =
  new URLSearchParams(location.search).get("server") ?? "http://127.0.0.1:8765";
const client = new Client(serverBase);

let session: AnnotationSession;
let zoom = 4;
let showForeground = false;
let cursor: [number, number] = [0, 0];
let busy = false;

// per-frame caches; base images and foreground masks never change server-side
const baseImages = new Map<number, ImageData>();
const foregroundCache = new Map<number, number[]>();

let toastHandle: ReturnType<typeof setTimeout> | undefined;
function toast(message: string): void {
  toastDiv.textContent = message;
  toastDiv.style.opacity = "1";
  if (toastHandle !== undefined) clearTimeout(toastHandle);
  toastHandle = setTimeout(() => (toastDiv.style.opacity = "0"), 1800);
}

function showBanner(message: string): void {
  el<HTMLSpanElement>("#banner-text").textContent = message;
  banner.style.display = "block";
}

function hideBanner(): void {
  banner.style.display = "none";
}

/** Network failures keep all local state; the banner offers a retry. */
function reportError(err: unknown): void {
  if (err instanceof ApiError) {
    if (err.status === 422) toast("no point at that pixel");
    else toast(err.message);
    return;
  }
  showBanner(`server unreachable at ${serverBase}: ${String(err)}`);
}

async function baseImage(frame: number): Promise<ImageData> {
  const cached = baseImages.get(frame);
  if (cached !== undefined) return cached;
  const image = new Image();
  image.crossOrigin = "anonymous";
  image.src = client.intensityUrl(frame);
  await image.decode();
  const scratch = document.createElement("canvas");
  scratch.width = image.naturalWidth;
  scratch.height = image.naturalHeight;
  const ctx = scratch.getContext("2d")!;
  ctx.drawImage(image, 0, 0);
  const data = ctx.getImageData(0, 0, scratch.width, scratch.height);
  baseImages.set(frame, data);
  return data;
}

async function foreground(frame: number): Promise<number[]> {
  let indices = foregroundCache.get(frame);
  if (indices === undefined) {
    indices = await client.foreground(frame);
    foregroundCache.set(frame, indices);
  }
  return indices;
}

async function render(): Promise<void> {
  const frame = session.index;
  const base = await baseImage(frame);
  const draft = await session.draft(frame);

  const composite = new ImageData(
    new Uint8ClampedArray(base.data),
    base.width,
    base.height,
  );
  if (showForeground) tint(composite, await foreground(frame), FOREGROUND_TINT);
  tint(composite, draft, LABEL_TINT);

  const w = base.width;
  const h = base.height;
  canvas.width = w * zoom;
  canvas.height = h * zoom;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;

  const scratch = document.createElement("canvas");
  scratch.width = w;
  scratch.height = h;
  scratch.getContext("2d")!.putImageData(composite, 0, 0);
  ctx.drawImage(scratch, 0, 0, canvas.width, canvas.height);

  const [cu, cv] = cursor;
  ctx.strokeStyle = "#ffe14b";
  ctx.lineWidth = 1;
  ctx.strokeRect(cu * zoom + 0.5, cv * zoom + 0.5, zoom - 1, zoom - 1);

  frameInput.value = String(frame);
  zoomLabel.textContent = `${zoom}x`;
  eraseButton.setAttribute("aria-pressed", String(session.eraseMode));
  fgButton.setAttribute("aria-pressed", String(showForeground));
  prevButton.disabled = frame === 0;
  nextButton.disabled = frame === session.frameCount - 1;

  const dirty = session.dirtyList();
  const marker = session.isDirty(frame) ? ` <span class="dirty">unsaved</span>` : "";
  const pending =
    dirty.length > 0 ? ` &middot; dirty: ${dirty.join(", ")}` : "";
  statusSpan.innerHTML =
    `t=${session.timestamp(frame).toFixed(2)}s &middot; ` +
    `${draft.size} px labeled${marker}${pending}`;
}

function rerender(): void {
  render().catch(reportError);
}

async function goTo(frame: number): Promise<void> {
  session.index = Math.max(0, Math.min(session.frameCount - 1, frame));
  await render();
}

async function act(u: number, v: number): Promise<void> {
  if (busy) return;
  busy = true;
  try {
    cursor = [u, v];
    const result = await session.click(u, v);
    if (result.truncated) toast("region hit the size cap");
    else if (result.changed === 0)
      toast(session.eraseMode ? "nothing to erase there" : "already labeled");
    await render();
  } catch (err) {
    reportError(err);
  } finally {
    busy = false;
  }
}

function moveCursor(du: number, dv: number): void {
  const s = session.meta.sensor;
  cursor = [
    (cursor[0] + du + s.w) % s.w, // azimuth wraps
    Math.max(0, Math.min(s.h - 1, cursor[1] + dv)),
  ];
  rerender();
}

async function save(): Promise<void> {
  try {
    const count = await session.save();
    hideBanner();
    toast(`saved frame ${session.index} (${count} px)`);
    await render();
  } catch (err) {
    reportError(err); // draft and dirty flag survive, retry with s
  }
}

canvas.addEventListener("click", (event) => {
  const rect = canvas.getBoundingClientRect();
  const u = Math.floor((event.clientX - rect.left) / zoom);
  const v = Math.floor((event.clientY - rect.top) / zoom);
  const s = session.meta.sensor;
  if (u < 0 || u >= s.w || v < 0 || v >= s.h) return;
  void act(u, v);
});

document.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement) return;
  if (session === undefined) return;
  const plain = !event.ctrlKey && !event.metaKey && !event.altKey;
  const key = event.key;
  let handled = true;
  if (key === "ArrowLeft" && plain) void goTo(session.index - 1);
  else if (key === "ArrowRight" && plain) void goTo(session.index + 1);
  else if (key === "j" && plain) moveCursor(-1, 0);
  else if (key === "l" && plain) moveCursor(1, 0);
  else if (key === "i" && plain) moveCursor(0, -1);
  else if (key === "k" && plain) moveCursor(0, 1);
  else if ((key === "Enter" || key === " ") && plain)
    void act(cursor[0], cursor[1]);
  else if (key === "g" && plain) {
    showForeground = !showForeground;
    rerender();
  } else if (key === "e" && plain) {
    session.eraseMode = !session.eraseMode;
    rerender();
  } else if ((key === "u" && plain) || (key === "z" && event.ctrlKey)) {
    if (session.undo()) rerender();
    else toast("nothing to undo");
  } else if (key === "s" && plain) void save();
  else if ((key === "-" || key === "_") && plain) {
    zoom = clampZoom(zoom - 1);
    rerender();
  } else if ((key === "+" || key === "=") && plain) {
    zoom = clampZoom(zoom + 1);
    rerender();
  } else if (key === "[" && plain) {
    session.growEps = Math.max(0.05, session.growEps - 0.05);
    epsInput.value = session.growEps.toFixed(2);
    toast(`eps ${session.growEps.toFixed(2)} m`);
  } else if (key === "]" && plain) {
    session.growEps += 0.05;
    epsInput.value = session.growEps.toFixed(2);
    toast(`eps ${session.growEps.toFixed(2)} m`);
  } else handled = false;
  if (handled) event.preventDefault();
});

prevButton.addEventListener("click", () => void goTo(session.index - 1));
nextButton.addEventListener("click", () => void goTo(session.index + 1));
el<HTMLButtonElement>("#zoom-out").addEventListener("click", () => {
  zoom = clampZoom(zoom - 1);
  rerender();
});
el<HTMLButtonElement>("#zoom-in").addEventListener("click", () => {
  zoom = clampZoom(zoom + 1);
  rerender();
});
fgButton.addEventListener("click", () => {
  showForeground = !showForeground;
  rerender();
});
eraseButton.addEventListener("click", () => {
  session.eraseMode = !session.eraseMode;
  rerender();
});
el<HTMLButtonElement>("#undo").addEventListener("click", () => {
  if (session.undo()) rerender();
  else toast("nothing to undo");
});
el<HTMLButtonElement>("#save").addEventListener("click", () => void save());
frameInput.addEventListener("change", () => {
  const n = Number(frameInput.value);
  if (Number.isInteger(n)) void goTo(n).catch(reportError);
});
epsInput.addEventListener("change", () => {
  const eps = Number(epsInput.value);
  if (Number.isFinite(eps) && eps > 0) session.growEps = eps;
  else epsInput.value = session.growEps.toFixed(2);
});
el<HTMLButtonElement>("#retry").addEventListener("click", () => {
  hideBanner();
  if (session === undefined) void boot();
  else rerender();
});

async function boot(): Promise<void> {
  try {
    const meta = await client.meta();
    session = new AnnotationSession(client, meta);
    el<HTMLSpanElement>("#frame-total").textContent = `/ ${meta.frames - 1}`;
    frameInput.max = String(meta.frames - 1);
    epsInput.value = meta.grow_eps.toFixed(2);
    hideBanner();
    await render();
  } catch (err) {
    reportError(err);
  }
}

void boot();
