/**
 * The gateway's delimited monitor payload: one `value~quality~timestamp`
 * group per tag, groups joined by `;`. Quality 192 is good data.
 */

export interface WireItem {
  value: number;
  quality: number;
  timestamp: string;
}

export const GOOD_QUALITY = 192;

export function parseSnapshot(body: string): WireItem[] {
  if (body === "") {
    throw new Error("empty monitor body");
  }
  return body.split(";").map((chunk) => {
    const fields = chunk.split("~");
    if (fields.length !== 3) {
      throw new Error(`expected 3 fields, got ${fields.length}`);
    }
    const value = Number(fields[0]);
    const quality = Number(fields[1]);
    if (!Number.isFinite(value) || !Number.isInteger(quality)) {
      throw new Error(`bad item ${chunk}`);
    }
    return { value, quality, timestamp: fields[2] };
  });
}

export function joinSetpoints(raw: string[]): string {
  return raw.map((s) => s.trim()).join(";");
}
