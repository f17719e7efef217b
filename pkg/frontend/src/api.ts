/** Thin HTTP client for the service. fetch is injectable for tests. */

import type { QueryResponse, StateMessage } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${path} failed (${resp.status}): ${detail}`);
    }
    return (await resp.json()) as T;
  }

  async getState(): Promise<StateMessage> {
    const resp = await this.fetchFn(this.baseUrl + "/state");
    if (!resp.ok) throw new Error(`/state failed (${resp.status})`);
    return (await resp.json()) as StateMessage;
  }

  query(text: string, speaker: string | null): Promise<QueryResponse> {
    return this.post<QueryResponse>("/query", { text, speaker });
  }

  fireKeyword(speaker: string | null): Promise<unknown> {
    return this.post("/events", { kind: "keyword", speaker });
  }

  /** Scripted move: the pipeline stays authoritative, the UI only asks. */
  moveEntity(id: string, position: [number, number, number]): Promise<unknown> {
    return this.post("/sim/move", { id, position });
  }

  loadScenario(path: string, mode: string = "interactive"): Promise<unknown> {
    return this.post("/scenario", { path, mode, speed: 0 });
  }
}
