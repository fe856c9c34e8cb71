/** Brush mask grid shared with the annotation service.
 *
 * This module is the single implementation of what a brush stroke means:
 * a stamped disc covers every integer pixel whose squared distance to the
 * integer center is at most radius^2, and a drag stamps that disc at each
 * rounded point along the segment. All rounding is floor(x + 0.5) (the
 * Math.round rule), never round-half-to-even; the test fixtures are
 * generated against that exact rule. Run-length export is canonical
 * (maximal runs, ascending, row-major), so equal grids serialize to equal
 * bytes, and the PGM export reproduces the service's own encoder byte for
 * byte so the file drops straight into the CLI `--brush` flag.
 */

export interface RunsDoc {
  version: 1;
  height: number;
  width: number;
  runs: Array<[number, number]>;
}

/** floor(x + 0.5): the one rounding rule used for pixel snapping. */
export function snap(x: number): number {
  return Math.floor(x + 0.5);
}

export class MaskGrid {
  readonly height: number;
  readonly width: number;
  readonly bits: Uint8Array;

  constructor(height: number, width: number, bits?: Uint8Array) {
    if (!Number.isInteger(height) || !Number.isInteger(width) || height < 1 || width < 1) {
      throw new Error(`mask: bad dimensions ${height}x${width}`);
    }
    if (bits !== undefined && bits.length !== height * width) {
      throw new Error(`mask: ${bits.length} bits for a ${height}x${width} grid`);
    }
    this.height = height;
    this.width = width;
    this.bits = bits ?? new Uint8Array(height * width);
  }

  get(x: number, y: number): number {
    return this.bits[y * this.width + x] ?? 0;
  }

  /** Stamp a disc of `radius` px at the snapped center; value 1 paints, 0 erases. */
  stampDisc(cx: number, cy: number, radius: number, value: 0 | 1 = 1): void {
    const icx = snap(cx);
    const icy = snap(cy);
    const r = Math.max(0, radius);
    const r2 = r * r;
    const y0 = Math.max(0, Math.ceil(icy - r));
    const y1 = Math.min(this.height - 1, Math.floor(icy + r));
    const x0 = Math.max(0, Math.ceil(icx - r));
    const x1 = Math.min(this.width - 1, Math.floor(icx + r));
    for (let y = y0; y <= y1; y++) {
      const dy = y - icy;
      for (let x = x0; x <= x1; x++) {
        const dx = x - icx;
        if (dx * dx + dy * dy <= r2) {
          this.bits[y * this.width + x] = value;
        }
      }
    }
  }

  /** Drag stroke: stamp the disc at every rounded point along the segment. */
  stampSegment(ax: number, ay: number, bx: number, by: number, radius: number, value: 0 | 1 = 1): void {
    const x0 = snap(ax);
    const y0 = snap(ay);
    const x1 = snap(bx);
    const y1 = snap(by);
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0));
    if (steps === 0) {
      this.stampDisc(x0, y0, radius, value);
      return;
    }
    for (let t = 0; t <= steps; t++) {
      this.stampDisc(snap(x0 + ((x1 - x0) * t) / steps), snap(y0 + ((y1 - y0) * t) / steps), radius, value);
    }
  }

  count(): number {
    let n = 0;
    for (let i = 0; i < this.bits.length; i++) n += this.bits[i]!;
    return n;
  }

  isEmpty(): boolean {
    return this.count() === 0;
  }

  clear(): void {
    this.bits.fill(0);
  }

  clone(): MaskGrid {
    return new MaskGrid(this.height, this.width, this.bits.slice());
  }

  equals(other: MaskGrid): boolean {
    if (other.height !== this.height || other.width !== this.width) return false;
    for (let i = 0; i < this.bits.length; i++) {
      if (this.bits[i] !== other.bits[i]) return false;
    }
    return true;
  }

  /** Canonical run-length document: maximal [start, length] runs, ascending. */
  toRuns(): RunsDoc {
    const runs: Array<[number, number]> = [];
    let start = -1;
    for (let i = 0; i < this.bits.length; i++) {
      if (this.bits[i]) {
        if (start < 0) start = i;
      } else if (start >= 0) {
        runs.push([start, i - start]);
        start = -1;
      }
    }
    if (start >= 0) runs.push([start, this.bits.length - start]);
    return { version: 1, height: this.height, width: this.width, runs };
  }

  /** Parse a run-length document, validating like the service does. */
  static fromRuns(doc: RunsDoc): MaskGrid {
    if (doc.version !== 1) {
      throw new Error(`mask.version: unsupported value ${JSON.stringify(doc.version)}`);
    }
    const grid = new MaskGrid(doc.height, doc.width);
    const total = doc.height * doc.width;
    if (!Array.isArray(doc.runs)) {
      throw new Error("mask.runs: must be a list of [start, length] pairs");
    }
    doc.runs.forEach((run, i) => {
      if (!Array.isArray(run) || run.length !== 2 || !Number.isInteger(run[0]) || !Number.isInteger(run[1])) {
        throw new Error(`mask.runs[${i}]: must be a [start, length] pair`);
      }
      const [start, length] = run;
      if (length < 1 || start < 0 || start + length > total) {
        throw new Error(`mask.runs[${i}]: [${start}, ${length}] leaves the ${total}-pixel grid`);
      }
      grid.bits.fill(1, start, start + length);
    });
    return grid;
  }

  /** Binary PGM (P5, maxval 255, ones as 255); byte-equal to the service encoder. */
  toPgm(): Uint8Array {
    const header = `P5\n${this.width} ${this.height}\n255\n`;
    const out = new Uint8Array(header.length + this.bits.length);
    for (let i = 0; i < header.length; i++) out[i] = header.charCodeAt(i);
    for (let i = 0; i < this.bits.length; i++) out[header.length + i] = this.bits[i] ? 255 : 0;
    return out;
  }

  /** RGBA pixel bytes -> mask via the service's PNG rule: nonzero luminance,
   *  with luminance computed by the integer formula the server's image
   *  library uses: (19595 R + 38470 G + 7471 B + 0x8000) >> 16. */
  static fromRgba(rgba: Uint8ClampedArray | Uint8Array, height: number, width: number): MaskGrid {
    if (rgba.length !== height * width * 4) {
      throw new Error(`mask: ${rgba.length} RGBA bytes for a ${height}x${width} grid`);
    }
    const grid = new MaskGrid(height, width);
    for (let i = 0; i < height * width; i++) {
      const r = rgba[4 * i]!;
      const g = rgba[4 * i + 1]!;
      const b = rgba[4 * i + 2]!;
      const lum = (19595 * r + 38470 * g + 7471 * b + 0x8000) >> 16;
      grid.bits[i] = lum !== 0 ? 1 : 0;
    }
    return grid;
  }
}
