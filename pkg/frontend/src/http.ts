/**
 * Minimal HTTP adapter so page logic can be driven by a scripted double in
 * tests. The gateway reports the change sequence in the X-Seq header.
 */

export interface GatewayResponse {
  status: number;
  body: string;
  seq: number | null;
}

export interface Http {
  get(url: string): Promise<GatewayResponse>;
  postForm(url: string, fields: Record<string, string>): Promise<GatewayResponse>;
  postText(url: string, body: string): Promise<GatewayResponse>;
  postJson(url: string, payload: unknown): Promise<GatewayResponse>;
  del(url: string): Promise<GatewayResponse>;
}

async function toGatewayResponse(r: Response): Promise<GatewayResponse> {
  const seqHeader = r.headers.get("X-Seq");
  return {
    status: r.status,
    body: await r.text(),
    seq: seqHeader === null ? null : Number(seqHeader),
  };
}

/** Real adapter over window.fetch; cookies ride along automatically. */
export function fetchHttp(): Http {
  const call = async (url: string, init?: RequestInit) =>
    toGatewayResponse(await fetch(url, { credentials: "same-origin", ...init }));
  return {
    get: (url) => call(url),
    postForm: (url, fields) =>
      call(url, {
        method: "POST",
        headers: { "Content-Type": "application/x-www-form-urlencoded" },
        body: new URLSearchParams(fields).toString(),
      }),
    postText: (url, body) =>
      call(url, { method: "POST", headers: { "Content-Type": "text/plain" }, body }),
    postJson: (url, payload) =>
      call(url, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    del: (url) => call(url, { method: "DELETE" }),
  };
}
