import { describe, expect, it } from "vitest";

import { toPolyline, TrendBuffer } from "../src/trend.js";

describe("TrendBuffer", () => {
  it("never exceeds its cap", () => {
    const buffer = new TrendBuffer(5);
    for (let i = 0; i < 50; i++) {
      buffer.push(i, i * 2);
      expect(buffer.length).toBeLessThanOrEqual(5);
    }
    expect(buffer.snapshot().map((p) => p.x)).toEqual([45, 46, 47, 48, 49]);
  });

  it("shrinks when the cap is lowered", () => {
    const buffer = new TrendBuffer(10);
    for (let i = 0; i < 10; i++) {
      buffer.push(i, i);
    }
    buffer.setCap(3);
    expect(buffer.length).toBe(3);
    expect(buffer.snapshot().map((p) => p.x)).toEqual([7, 8, 9]);
  });

  it("rejects degenerate caps", () => {
    expect(() => new TrendBuffer(1)).toThrow();
  });
});

describe("toPolyline", () => {
  it("maps points into the padded pixel box", () => {
    const line = toPolyline(
      [
        { x: 0, y: 0 },
        { x: 1, y: 50 },
        { x: 2, y: 100 },
      ],
      100,
      100,
      10,
    );
    expect(line).toHaveLength(3);
    expect(line[0]).toEqual([10, 90]); // smallest y at the bottom
    expect(line[2]).toEqual([90, 10]);
    expect(line[1][1]).toBeCloseTo(50);
  });

  it("needs at least two points", () => {
    expect(toPolyline([{ x: 1, y: 1 }], 100, 100)).toEqual([]);
  });

  it("handles a flat series without dividing by zero", () => {
    const line = toPolyline(
      [
        { x: 0, y: 5 },
        { x: 1, y: 5 },
      ],
      100,
      100,
    );
    expect(line.every(([, y]) => Number.isFinite(y))).toBe(true);
  });
});
