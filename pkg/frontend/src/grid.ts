/**
 * Pixel-index arithmetic for the projected intensity grid.
 *
 * Labels travel as flat indices into the row-major w x h image
 * (index = v * w + u). The grid wraps horizontally: column 0 and column
 * w - 1 are azimuth neighbors, which matters when an object straddles the
 * seam behind the sensor.
 */

export function uvToIndex(u: number, v: number, w: number): number {
  return v * w + u;
}

export function indexToUV(index: number, w: number): [number, number] {
  return [index % w, Math.floor(index / w)];
}

/**
 * 8-connected component of `start` within `marked`, with horizontal wrap.
 *
 * Grown regions arrive from the server as flood fills over these same eight
 * neighbors, so erasing the component containing a clicked pixel removes
 * exactly one grown blob (or a merged union of overlapping ones).
 */
export function connectedComponent(
  marked: ReadonlySet<number>,
  start: number,
  w: number,
  h: number,
): Set<number> {
  const out = new Set<number>();
  if (!marked.has(start)) return out;
  const queue = [start];
  out.add(start);
  while (queue.length > 0) {
    const index = queue.pop()!;
    const u = index % w;
    const v = Math.floor(index / w);
    for (let dv = -1; dv <= 1; dv++) {
      const nv = v + dv;
      if (nv < 0 || nv >= h) continue;
      for (let du = -1; du <= 1; du++) {
        if (du === 0 && dv === 0) continue;
        const nu = (u + du + w) % w;
        const neighbor = nv * w + nu;
        if (marked.has(neighbor) && !out.has(neighbor)) {
          out.add(neighbor);
          queue.push(neighbor);
        }
      }
    }
  }
  return out;
}

/** Minimal ImageData shape so the tint math is testable without a DOM. */
export interface Raster {
  width: number;
  height: number;
  data: Uint8ClampedArray;
}

/**
 * Alpha-blend a flat color over the listed pixels, in place.
 * `rgba` is [r, g, b, alpha] with alpha in [0, 1].
 */
export function tint(
  image: Raster,
  indices: Iterable<number>,
  rgba: [number, number, number, number],
): void {
  const [r, g, b, a] = rgba;
  const size = image.width * image.height;
  for (const index of indices) {
    if (index < 0 || index >= size) continue;
    const o = index * 4;
    image.data[o] = image.data[o] * (1 - a) + r * a;
    image.data[o + 1] = image.data[o + 1] * (1 - a) + g * a;
    image.data[o + 2] = image.data[o + 2] * (1 - a) + b * a;
    image.data[o + 3] = 255;
  }
}

/** Clamp an integer zoom factor to the supported 2..8 range. */
export function clampZoom(zoom: number): number {
  return Math.max(2, Math.min(8, Math.round(zoom)));
}
