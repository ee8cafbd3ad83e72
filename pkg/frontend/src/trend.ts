/**
 * Bounded per-tag history for the trend chart: (request ordinal, value)
 * pairs, never more than the user-set cap.
 */

export interface TrendPoint {
  x: number;
  y: number;
}

export class TrendBuffer {
  private points: TrendPoint[] = [];

  constructor(private cap: number) {
    if (cap < 2) {
      throw new Error("cap must be at least 2");
    }
  }

  push(x: number, y: number): void {
    this.points.push({ x, y });
    while (this.points.length > this.cap) {
      this.points.shift();
    }
  }

  setCap(cap: number): void {
    if (cap < 2) {
      return;
    }
    this.cap = cap;
    while (this.points.length > this.cap) {
      this.points.shift();
    }
  }

  get length(): number {
    return this.points.length;
  }

  snapshot(): TrendPoint[] {
    return this.points.slice();
  }
}

/** Scale points into pixel space for a polyline; y grows downwards. */
export function toPolyline(
  points: TrendPoint[],
  width: number,
  height: number,
  pad = 8,
): Array<[number, number]> {
  if (points.length < 2) {
    return [];
  }
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const spanX = x1 - x0 || 1;
  const spanY = y1 - y0 || 1;
  const w = width - 2 * pad;
  const h = height - 2 * pad;
  return points.map((p) => [
    pad + ((p.x - x0) / spanX) * w,
    pad + h - ((p.y - y0) / spanY) * h,
  ]);
}
