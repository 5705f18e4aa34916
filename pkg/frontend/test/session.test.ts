import { beforeEach, describe, expect, it } from "vitest";

import { ApiError, GrowResult, LabelLine, Meta } from "../src/api.js";
import { AnnotationSession, LabelBackend } from "../src/session.js";

const W = 16;
const H = 8;

function meta(frames = 5): Meta {
  return {
    frames,
    sensor: { w: W, h: H, beta_up: 0.78, beta_fov: 1.57, rate_hz: 10 },
    timestamps: Array.from({ length: frames }, (_, i) => i / 10),
    grow_eps: 0.4,
  };
}

/** Backend stub: canned labels, a fixed grow blob per pixel, call recording. */
class FakeBackend implements LabelBackend {
  stored = new Map<number, number[]>();
  blobs = new Map<number, number[]>(); // seed index -> grown indices
  growCalls: { frame: number; u: number; v: number; eps?: number }[] = [];
  putCalls: { frame: number; t: number; idx: number[] }[] = [];
  failNextPut = false;

  async label(frame: number): Promise<LabelLine> {
    return { t: frame / 10, idx: this.stored.get(frame) ?? [] };
  }

  async putLabel(frame: number, t: number, idx: number[]): Promise<number> {
    if (this.failNextPut) {
      this.failNextPut = false;
      throw new TypeError("fetch failed");
    }
    this.putCalls.push({ frame, t, idx });
    this.stored.set(frame, idx);
    return idx.length;
  }

  async grow(frame: number, u: number, v: number, eps?: number): Promise<GrowResult> {
    this.growCalls.push({ frame, u, v, eps });
    const blob = this.blobs.get(v * W + u);
    if (blob === undefined) throw new ApiError(422, "pixel has no point");
    return { indices: blob, truncated: false };
  }
}

describe("AnnotationSession", () => {
  let backend: FakeBackend;
  let session: AnnotationSession;

  beforeEach(() => {
    backend = new FakeBackend();
    session = new AnnotationSession(backend, meta());
  });

  it("steps within the sequence and clamps at both ends", () => {
    expect(session.step(-1)).toBe(false);
    expect(session.index).toBe(0);
    expect(session.step(1)).toBe(true);
    expect(session.index).toBe(1);
    session.index = 4;
    expect(session.step(1)).toBe(false);
    expect(session.index).toBe(4);
  });

  it("seeds the draft from the stored label once", async () => {
    backend.stored.set(2, [7, 9]);
    session.index = 2;
    const d1 = await session.draft(2);
    expect([...d1].sort((a, b) => a - b)).toEqual([7, 9]);
    backend.stored.set(2, [1]); // later server change must not clobber the draft
    const d2 = await session.draft(2);
    expect(d2).toBe(d1);
  });

  it("unions grown pixels into the draft and marks the frame dirty", async () => {
    backend.blobs.set(3 * W + 5, [52, 53, 69]);
    const result = await session.click(5, 3);
    expect(result.changed).toBe(3);
    expect([...(await session.draft(0))].sort((a, b) => a - b)).toEqual([52, 53, 69]);
    expect(session.isDirty(0)).toBe(true);
    expect(backend.growCalls[0]).toEqual({ frame: 0, u: 5, v: 3, eps: 0.4 });
  });

  it("passes the adjusted eps to the server", async () => {
    backend.blobs.set(0, [0]);
    session.growEps = 0.75;
    await session.click(0, 0);
    expect(backend.growCalls[0].eps).toBe(0.75);
  });

  it("is idempotent for a repeated click on the same blob", async () => {
    backend.blobs.set(3 * W + 5, [52, 53]);
    await session.click(5, 3);
    const again = await session.click(5, 3);
    expect(again.changed).toBe(0);
    expect((await session.draft(0)).size).toBe(2);
  });

  it("leaves the draft untouched when the server rejects the pixel", async () => {
    backend.blobs.set(0, [0, 1]);
    await session.click(0, 0);
    await expect(session.click(9, 7)).rejects.toMatchObject({ status: 422 });
    expect((await session.draft(0)).size).toBe(2);
    const undone = session.undo(); // only the successful grow is on the stack
    expect(undone).toBe(true);
    expect((await session.draft(0)).size).toBe(0);
  });

  it("undo restores the exact prior set, once per edit", async () => {
    backend.blobs.set(0, [0, 1]);
    backend.blobs.set(5, [5, 6, 7]);
    await session.click(0, 0);
    await session.click(5, 0);
    expect((await session.draft(0)).size).toBe(5);
    expect(session.undo()).toBe(true);
    expect([...(await session.draft(0))].sort((a, b) => a - b)).toEqual([0, 1]);
    expect(session.undo()).toBe(true);
    expect((await session.draft(0)).size).toBe(0);
    expect(session.undo()).toBe(false);
  });

  it("erase removes exactly the clicked component", async () => {
    backend.blobs.set(0, [0, 1, W]); // blob around the origin
    backend.blobs.set(8, [8, 9]); // separate blob on the same row
    await session.click(0, 0);
    await session.click(8, 0);
    session.eraseMode = true;
    const result = await session.click(1, 0);
    expect(result.changed).toBe(3);
    expect([...(await session.draft(0))].sort((a, b) => a - b)).toEqual([8, 9]);
    expect(backend.growCalls.length).toBe(2); // erase never asks the server
  });

  it("erase on an unlabeled pixel is a no-op", async () => {
    session.eraseMode = true;
    const result = await session.click(3, 3);
    expect(result.changed).toBe(0);
    expect(session.isDirty(0)).toBe(false);
  });

  it("save pushes a sorted unique index list with the frame timestamp", async () => {
    backend.blobs.set(2 * W + 4, [40, 36, 37]);
    session.index = 3;
    await session.click(4, 2);
    await session.save();
    expect(backend.putCalls[0]).toEqual({ frame: 3, t: 0.3, idx: [36, 37, 40] });
    expect(session.isDirty(3)).toBe(false);
  });

  it("saving an empty draft is allowed", async () => {
    session.index = 1;
    await session.save();
    expect(backend.putCalls[0]).toEqual({ frame: 1, t: 0.1, idx: [] });
  });

  it("keeps the dirty flag when a save fails", async () => {
    backend.blobs.set(0, [0]);
    await session.click(0, 0);
    backend.failNextPut = true;
    await expect(session.save()).rejects.toThrow();
    expect(session.isDirty(0)).toBe(true);
    await session.save(); // retry succeeds
    expect(session.isDirty(0)).toBe(false);
  });

  it("tracks dirty frames across the sequence", async () => {
    backend.blobs.set(0, [0]);
    await session.click(0, 0);
    session.index = 4;
    await session.click(0, 0);
    expect(session.dirtyList()).toEqual([0, 4]);
    await session.save();
    expect(session.dirtyList()).toEqual([0]);
  });
});
