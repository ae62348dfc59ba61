/**
 * Single-page state machine for the pointing console.
 *
 * The state never talks to the network itself; it is advanced by status
 * documents and user clicks, and the caller performs the declared POSTs.
 */

import { StatusDoc } from './api.js';
import { Point, inImageBounds } from './coords.js';

export type Phase = 'connecting' | 'awaiting_points' | 'executing' | 'done' | 'error';

export interface Outcome {
  success: boolean;
  reason: string | null;
}

export class ConsoleState {
  episodeId = -1;
  instruction = '';
  phase: Phase = 'connecting';
  pendingPoints: Point[] = [];
  outcome: Outcome | null = null;
  connectionLost = false;

  applyStatus(doc: StatusDoc): void {
    this.connectionLost = false;
    if (doc.episode_id !== this.episodeId) {
      // a new episode started; stale clicks must not leak into it
      this.episodeId = doc.episode_id;
      this.pendingPoints = [];
      this.outcome = null;
    }
    this.instruction = doc.instruction;
    if (doc.awaiting_points) {
      if (this.phase !== 'executing' || doc.phase === 'awaiting_points') {
        this.phase = 'awaiting_points';
      }
    } else if (doc.phase === 'executing') {
      this.phase = 'executing';
    } else if (doc.phase === 'done' || doc.last_outcome !== null) {
      if (doc.last_outcome !== null && doc.last_outcome.episode_id === this.episodeId) {
        this.phase = 'done';
        this.outcome = {
          success: doc.last_outcome.success,
          reason: doc.last_outcome.reason,
        };
      }
    }
  }

  addPoint(p: Point): boolean {
    if (this.phase !== 'awaiting_points' || !inImageBounds(p)) {
      return false;
    }
    this.pendingPoints.push({ x: p.x, y: p.y });
    return true;
  }

  clearPoints(): void {
    this.pendingPoints = [];
  }

  canSubmit(): boolean {
    return this.phase === 'awaiting_points' && this.pendingPoints.length > 0;
  }

  /** Points leave the state on submit; the caller POSTs them. */
  takePointsForSubmit(): Point[] {
    const points = this.pendingPoints;
    this.pendingPoints = [];
    this.phase = 'executing';
    return points;
  }

  markConnectionLost(): void {
    this.connectionLost = true;
  }
}
