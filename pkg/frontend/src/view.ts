/** Canvas rendering and DOM wiring for the console. */

import { HarnessClient } from './api.js';
import { IMAGE_SIZE, imageToScreen, screenToImage } from './coords.js';
import { ConsoleState } from './state.js';

export interface ViewElements {
  canvas: HTMLCanvasElement;
  instruction: HTMLElement;
  statusBadge: HTMLElement;
  banner: HTMLElement;
  submitButton: HTMLButtonElement;
  clearButton: HTMLButtonElement;
  zoomSelect: HTMLSelectElement;
}

export class ConsoleView {
  private zoom = 1;
  private bitmap: ImageBitmap | null = null;

  constructor(
    private els: ViewElements,
    private state: ConsoleState,
    private client: HarnessClient,
  ) {
    els.canvas.addEventListener('click', (ev) => this.onCanvasClick(ev));
    els.clearButton.addEventListener('click', () => {
      this.state.clearPoints();
      this.render();
    });
    els.submitButton.addEventListener('click', () => void this.onSubmit());
    els.zoomSelect.addEventListener('change', () => {
      this.zoom = parseInt(els.zoomSelect.value, 10) || 1;
      this.render();
    });
  }

  async refreshObservation(): Promise<void> {
    const blob = await this.client.fetchObservation();
    this.bitmap = await createImageBitmap(blob);
    this.render();
  }

  private onCanvasClick(ev: MouseEvent): void {
    const rect = this.els.canvas.getBoundingClientRect();
    const p = screenToImage(ev.clientX - rect.left, ev.clientY - rect.top, this.zoom);
    if (this.state.addPoint(p)) {
      this.render();
    }
  }

  private async onSubmit(): Promise<void> {
    if (!this.state.canSubmit()) {
      return;
    }
    const points = this.state.takePointsForSubmit();
    try {
      await this.client.submitPoints(points);
    } catch (err) {
      this.els.banner.textContent = `submit failed: ${(err as Error).message}`;
      this.els.banner.hidden = false;
      this.state.phase = 'awaiting_points';
      this.state.pendingPoints = points;
    }
    this.render();
  }

  render(): void {
    const { canvas, instruction, statusBadge, submitButton, banner } = this.els;
    canvas.width = IMAGE_SIZE * this.zoom;
    canvas.height = IMAGE_SIZE * this.zoom;
    const ctx = canvas.getContext('2d');
    if (!ctx) {
      return;
    }
    ctx.imageSmoothingEnabled = false;
    if (this.bitmap) {
      ctx.drawImage(this.bitmap, 0, 0, canvas.width, canvas.height);
    } else {
      ctx.fillStyle = '#222';
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    }
    for (const p of this.state.pendingPoints) {
      const s = imageToScreen(p.x, p.y, this.zoom);
      ctx.beginPath();
      ctx.arc(s.x + this.zoom / 2, s.y + this.zoom / 2, 5, 0, 2 * Math.PI);
      ctx.lineWidth = 2;
      ctx.strokeStyle = '#ff2d2d';
      ctx.stroke();
    }

    instruction.textContent = this.state.instruction || '(waiting for episode)';
    submitButton.disabled = !this.state.canSubmit();
    banner.hidden = !this.state.connectionLost && banner.textContent === '';

    if (this.state.phase === 'done' && this.state.outcome) {
      statusBadge.textContent = this.state.outcome.success ? 'success' : 'failure';
      statusBadge.className = this.state.outcome.success ? 'badge ok' : 'badge bad';
    } else {
      statusBadge.textContent = this.state.phase;
      statusBadge.className = 'badge';
    }
    if (this.state.connectionLost) {
      banner.textContent = 'connection lost, retrying...';
      banner.hidden = false;
    }
  }
}
