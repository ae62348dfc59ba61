/**
 * Screen <-> image pixel mapping at integer zoom levels.
 *
 * Points are always stored in image coordinates (256x256 native), never in
 * screen coordinates, so the round trip image -> screen -> image is the
 * identity for integer pixels at any integer zoom.
 */

export const IMAGE_SIZE = 256;

export interface Point {
  x: number;
  y: number;
}

export function screenToImage(sx: number, sy: number, zoom: number): Point {
  if (!Number.isInteger(zoom) || zoom < 1) {
    throw new Error(`zoom must be a positive integer, got ${zoom}`);
  }
  return { x: Math.floor(sx / zoom), y: Math.floor(sy / zoom) };
}

export function imageToScreen(ix: number, iy: number, zoom: number): Point {
  if (!Number.isInteger(zoom) || zoom < 1) {
    throw new Error(`zoom must be a positive integer, got ${zoom}`);
  }
  return { x: ix * zoom, y: iy * zoom };
}

export function inImageBounds(p: Point): boolean {
  return p.x >= 0 && p.x < IMAGE_SIZE && p.y >= 0 && p.y < IMAGE_SIZE;
}
