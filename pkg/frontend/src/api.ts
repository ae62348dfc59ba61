/** REST client for the pointing-service endpoints. */

import { Point } from './coords.js';

export interface StatusDoc {
  episode_id: number;
  instruction: string;
  awaiting_points: boolean;
  phase: string;
  episodes_done: number;
  last_outcome: { episode_id: number; success: boolean; reason: string | null } | null;
  debug_targets?: number[][];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function checked(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const doc = await resp.json();
      detail = typeof doc.detail === 'string' ? doc.detail : JSON.stringify(doc.detail);
    } catch {
      // keep statusText
    }
    throw new ApiError(resp.status, detail);
  }
  return resp;
}

export class HarnessClient {
  constructor(private baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  async status(): Promise<StatusDoc> {
    const resp = await checked(await this.fetchFn(`${this.baseUrl}/status`));
    return (await resp.json()) as StatusDoc;
  }

  /** URL for the current observation; the episode id busts stale caches. */
  observationUrl(episodeId: number): string {
    return `${this.baseUrl}/observation?episode=${episodeId}`;
  }

  async fetchObservation(): Promise<Blob> {
    const resp = await checked(await this.fetchFn(`${this.baseUrl}/observation`));
    return await resp.blob();
  }

  async submitPoints(points: Point[]): Promise<void> {
    await checked(
      await this.fetchFn(`${this.baseUrl}/points`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ points: points.map((p) => ({ x: p.x, y: p.y })) }),
      }),
    );
  }

  async setInstruction(text: string): Promise<void> {
    await checked(
      await this.fetchFn(`${this.baseUrl}/instruction`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text }),
      }),
    );
  }
}
