/** Bootstrap: connect to the harness service and poll at 1 Hz. */

import { HarnessClient } from './api.js';
import { ConsoleState } from './state.js';
import { ConsoleView, ViewElements } from './view.js';

const POLL_INTERVAL_MS = 1000;

function requireEl<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

export function start(baseUrl: string): void {
  const state = new ConsoleState();
  const client = new HarnessClient(baseUrl);
  const els: ViewElements = {
    canvas: requireEl<HTMLCanvasElement>('observation'),
    instruction: requireEl('instruction'),
    statusBadge: requireEl('status-badge'),
    banner: requireEl('banner'),
    submitButton: requireEl<HTMLButtonElement>('submit'),
    clearButton: requireEl<HTMLButtonElement>('clear'),
    zoomSelect: requireEl<HTMLSelectElement>('zoom'),
  };
  const view = new ConsoleView(els, state, client);

  let lastEpisode = -2;
  let failures = 0;
  const poll = async () => {
    try {
      const status = await client.status();
      failures = 0;
      const episodeChanged = status.episode_id !== state.episodeId;
      state.applyStatus(status);
      if (episodeChanged && status.episode_id !== lastEpisode) {
        lastEpisode = status.episode_id;
        await view.refreshObservation();
      }
    } catch {
      failures += 1;
      state.markConnectionLost();
    }
    view.render();
    // back off while the service is unreachable, capped at 8s
    const backoff = Math.min(2 ** Math.min(failures, 3), 8);
    setTimeout(() => void poll(), POLL_INTERVAL_MS * backoff);
  };
  void poll();
}

declare global {
  interface Window {
    deskbenchStart: typeof start;
  }
}

if (typeof window !== 'undefined') {
  window.deskbenchStart = start;
}
