/**
 * Annotation session state: one draft label per frame, edited locally and
 * pushed to the server on save.
 *
 * The session never computes region growth. A click asks the server to grow
 * from that pixel and unions the answer into the draft; erase mode removes
 * the 8-connected component under the click from the draft. Every mutation
 * pushes a snapshot so undo restores the previous pixel set exactly.
 */

import { ApiError, GrowResult, LabelLine, Meta } from "./api.js";
import { connectedComponent, uvToIndex } from "./grid.js";

/** The slice of the server API the session needs; Client implements it. */
export interface LabelBackend {
  label(frame: number): Promise<LabelLine>;
  putLabel(frame: number, t: number, idx: number[]): Promise<number>;
  grow(frame: number, u: number, v: number, eps?: number): Promise<GrowResult>;
}

export interface EditResult {
  changed: number; // pixels added (grow) or removed (erase)
  truncated: boolean;
}

export class AnnotationSession {
  index = 0;
  growEps: number;
  eraseMode = false;

  private drafts = new Map<number, Set<number>>();
  private undoStacks = new Map<number, number[][]>();
  private dirtyFrames = new Set<number>();

  constructor(
    private client: LabelBackend,
    public readonly meta: Meta,
  ) {
    this.growEps = meta.grow_eps;
  }

  get frameCount(): number {
    return this.meta.frames;
  }

  timestamp(frame: number): number {
    return this.meta.timestamps[frame];
  }

  /** Step the current frame by `delta`, clamped to the sequence. Returns
   * true when the index actually moved. */
  step(delta: number): boolean {
    const next = Math.max(0, Math.min(this.frameCount - 1, this.index + delta));
    if (next === this.index) return false;
    this.index = next;
    return true;
  }

  /** The editable pixel set for a frame, seeded from the server's stored
   * label on first access so reloads round-trip. */
  async draft(frame: number): Promise<Set<number>> {
    let d = this.drafts.get(frame);
    if (d === undefined) {
      const line = await this.client.label(frame);
      d = new Set(line.idx);
      this.drafts.set(frame, d);
    }
    return d;
  }

  isDirty(frame: number): boolean {
    return this.dirtyFrames.has(frame);
  }

  dirtyList(): number[] {
    return [...this.dirtyFrames].sort((a, b) => a - b);
  }

  private pushUndo(frame: number, draft: Set<number>): void {
    let stack = this.undoStacks.get(frame);
    if (stack === undefined) {
      stack = [];
      this.undoStacks.set(frame, stack);
    }
    stack.push([...draft]);
  }

  /**
   * Apply a click at (u, v) on the current frame: grow via the server, or
   * remove the component under the cursor when erase mode is on.
   *
   * Throws ApiError(422) untouched when the pixel holds no point; the draft
   * is only mutated after the server call succeeds.
   */
  async click(u: number, v: number): Promise<EditResult> {
    if (this.eraseMode) return this.erase(u, v);
    const grown = await this.client.grow(this.index, u, v, this.growEps);
    const draft = await this.draft(this.index);
    const before = draft.size;
    this.pushUndo(this.index, draft);
    for (const index of grown.indices) draft.add(index);
    if (draft.size === before) {
      this.undoStacks.get(this.index)!.pop(); // idempotent click, nothing to undo
      return { changed: 0, truncated: grown.truncated };
    }
    this.dirtyFrames.add(this.index);
    return { changed: draft.size - before, truncated: grown.truncated };
  }

  private async erase(u: number, v: number): Promise<EditResult> {
    const draft = await this.draft(this.index);
    const w = this.meta.sensor.w;
    const component = connectedComponent(
      draft,
      uvToIndex(u, v, w),
      w,
      this.meta.sensor.h,
    );
    if (component.size === 0) return { changed: 0, truncated: false };
    this.pushUndo(this.index, draft);
    for (const index of component) draft.delete(index);
    this.dirtyFrames.add(this.index);
    return { changed: component.size, truncated: false };
  }

  /** Revert the last edit on the current frame. Returns false when there is
   * nothing to undo. */
  undo(): boolean {
    const stack = this.undoStacks.get(this.index);
    const snapshot = stack?.pop();
    if (snapshot === undefined) return false;
    this.drafts.set(this.index, new Set(snapshot));
    this.dirtyFrames.add(this.index);
    return true;
  }

  /**
   * Persist the current frame's draft. An empty draft saves too: that is an
   * explicit "nothing moves here". The dirty flag survives a failed save so
   * the work is not silently dropped.
   */
  async save(): Promise<number> {
    const frame = this.index;
    const draft = await this.draft(frame);
    const idx = [...draft].sort((a, b) => a - b);
    const count = await this.client.putLabel(frame, this.timestamp(frame), idx);
    this.dirtyFrames.delete(frame);
    return count;
  }
}

export { ApiError };
