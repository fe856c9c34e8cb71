/** Trajectory strokes: ordered polylines of integer pixel vertices.
 *
 * Vertices snap to the integer grid at entry so the JSON we export is the
 * JSON the service and CLI rasterize, with no fractional drift on a
 * round trip. Import applies the same snapping and the same bounds rule
 * the service enforces (x in [0, w-1], y in [0, h-1]).
 */

import { snap } from "./mask.js";

export interface StrokesDoc {
  version: 1;
  strokes: Array<{ points: Array<[number, number]> }>;
}

export class StrokeSet {
  strokes: Array<Array<[number, number]>> = [];

  isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  /** Start a new stroke; returns its index. */
  addStroke(): number {
    this.strokes.push([]);
    return this.strokes.length - 1;
  }

  /** Snap and append a vertex; rejects points outside the canvas. */
  addVertex(index: number, x: number, y: number, width: number, height: number): [number, number] {
    const stroke = this.strokes[index];
    if (stroke === undefined) throw new Error(`strokes: no stroke ${index}`);
    const px = snap(x);
    const py = snap(y);
    if (px < 0 || px > width - 1 || py < 0 || py > height - 1) {
      throw new Error(`strokes.strokes[${index}].points: leaves the image canvas`);
    }
    stroke.push([px, py]);
    return [px, py];
  }

  deleteStroke(index: number): void {
    this.strokes.splice(index, 1);
  }

  /** Drop strokes that never got a vertex (a click that went nowhere). */
  prune(): void {
    this.strokes = this.strokes.filter((s) => s.length > 0);
  }

  clear(): void {
    this.strokes = [];
  }

  toJSON(): StrokesDoc {
    return {
      version: 1,
      strokes: this.strokes.map((points) => ({ points: points.map((p) => [p[0], p[1]] as [number, number]) })),
    };
  }

  /** Parse + validate a strokes document against a canvas, snapping vertices. */
  static fromJSON(doc: StrokesDoc, width: number, height: number): StrokeSet {
    if (doc.version !== 1) {
      throw new Error(`strokes.version: unsupported value ${JSON.stringify(doc.version)}`);
    }
    if (!Array.isArray(doc.strokes)) {
      throw new Error("strokes.strokes: must be a list");
    }
    const out = new StrokeSet();
    doc.strokes.forEach((entry, i) => {
      const pts = entry && typeof entry === "object" ? entry.points : undefined;
      if (!Array.isArray(pts) || pts.length === 0) {
        throw new Error(`strokes.strokes[${i}].points: missing or empty`);
      }
      const idx = out.addStroke();
      for (const p of pts) {
        if (!Array.isArray(p) || p.length !== 2 || !Number.isFinite(p[0]) || !Number.isFinite(p[1])) {
          throw new Error(`strokes.strokes[${i}].points: must be finite [x, y] pairs`);
        }
        out.addVertex(idx, p[0], p[1], width, height);
      }
    });
    return out;
  }
}
