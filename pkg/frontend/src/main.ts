/** Annotation app: wires the canvas, tools, and service client together.
 *
 * All math lives on the server; this file only collects pixels and JSON.
 * Mutations (image, mask, strokes, config) are pushed as they happen and
 * the Client serializes them, so Generate only has to wait for the queue
 * to drain before fetching the preview and metrics.
 */

import { ApiError, Client, type MetricsDoc } from "./api.js";
import { MaskGrid } from "./mask.js";
import { FramePlayer } from "./player.js";
import { StrokeSet } from "./strokes.js";
import { buildZip, type ZipEntry } from "./zip.js";

const UNCONSTRAINED = "unconstrained motion region: mask is nonempty but no strokes are set";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function b64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

async function maskToPngBytes(mask: MaskGrid): Promise<Uint8Array> {
  const canvas = document.createElement("canvas");
  canvas.width = mask.width;
  canvas.height = mask.height;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < mask.bits.length; i++) {
    const v = mask.bits[i] ? 255 : 0;
    img.data[4 * i] = v;
    img.data[4 * i + 1] = v;
    img.data[4 * i + 2] = v;
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  const blob = await new Promise<Blob>((resolve, reject) =>
    canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("mask PNG encode failed"))), "image/png"),
  );
  return new Uint8Array(await blob.arrayBuffer());
}

function download(name: string, data: Uint8Array, type: string): void {
  const url = URL.createObjectURL(new Blob([data as BlobPart], { type }));
  const a = document.createElement("a");
  a.href = url;
  a.download = name;
  a.click();
  setTimeout(() => URL.revokeObjectURL(url), 1000);
}

type Tool = "brush" | "eraser" | "stroke";

class App {
  client = new Client("");
  image: ImageBitmap | null = null;
  imageBytes: Uint8Array | null = null;
  mask: MaskGrid | null = null;
  strokes = new StrokeSet();
  activeStroke = -1;
  tool: Tool = "brush";
  brushRadius = 6;
  scale = 1;
  dragging = false;
  lastPoint: [number, number] | null = null;
  previewFrames: string[] = []; // base64, server order
  player: FramePlayer | null = null;

  canvas = el<HTMLCanvasElement>("canvas");
  previewImg = el<HTMLImageElement>("preview");
  status = el<HTMLDivElement>("status");
  metricsPanel = el<HTMLDivElement>("metrics");
  strokeList = el<HTMLDivElement>("stroke-list");
  generateBtn = el<HTMLButtonElement>("btn-generate");

  start(): void {
    el<HTMLInputElement>("file-image").addEventListener("change", (e) => this.onImageFile(e));
    el<HTMLInputElement>("file-strokes").addEventListener("change", (e) => this.onStrokesFile(e));
    el<HTMLInputElement>("file-mask").addEventListener("change", (e) => this.onMaskFile(e));
    for (const id of ["tool-brush", "tool-eraser", "tool-stroke"]) {
      el<HTMLInputElement>(id).addEventListener("change", () => {
        this.tool = id.replace("tool-", "") as Tool;
        this.endStroke(); // switching tools closes the open polyline
      });
    }
    const radius = el<HTMLInputElement>("brush-radius");
    radius.addEventListener("input", () => {
      this.brushRadius = Number(radius.value);
      el<HTMLSpanElement>("brush-radius-value").textContent = radius.value;
    });
    for (const id of ["cfg-k", "cfg-length", "cfg-power"]) {
      el<HTMLInputElement>(id).addEventListener("change", () => this.pushConfig());
    }
    this.generateBtn.addEventListener("click", () => void this.generate());
    el<HTMLButtonElement>("btn-end-stroke").addEventListener("click", () => this.endStroke());
    el<HTMLButtonElement>("btn-clear-mask").addEventListener("click", () => {
      if (this.mask) {
        this.mask.clear();
        this.pushMask();
        this.redraw();
      }
    });
    el<HTMLButtonElement>("btn-export").addEventListener("click", () => void this.exportZip());
    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    window.addEventListener("pointerup", () => this.onPointerUp());
    window.addEventListener("beforeunload", () => {
      if (this.client.sessionId) void this.client.deleteSession();
    });
    this.refreshControls();
    this.setStatus("upload a reference image to begin");
  }

  // --- status / error surface

  setStatus(text: string, isError = false): void {
    this.status.textContent = text;
    this.status.className = isError ? "error" : "";
  }

  showError(err: unknown): void {
    if (err instanceof DOMException && err.name === "AbortError") return; // stale fetch, superseded
    const text = err instanceof ApiError ? err.detail : String(err);
    this.setStatus(text, true);
  }

  // --- session lifecycle

  async onImageFile(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      const bytes = new Uint8Array(await file.arrayBuffer());
      const bitmap = await createImageBitmap(new Blob([bytes as BlobPart]));
      if (this.client.sessionId) await this.client.deleteSession();
      await this.client.createSession();
      await this.client.uploadImage(bytes);
      this.image = bitmap;
      this.imageBytes = bytes;
      this.mask = new MaskGrid(bitmap.height, bitmap.width);
      this.strokes = new StrokeSet();
      this.activeStroke = -1;
      this.previewFrames = [];
      this.player?.stop();
      this.scale = Math.max(1, Math.floor(512 / Math.max(bitmap.width, bitmap.height)));
      this.canvas.width = bitmap.width * this.scale;
      this.canvas.height = bitmap.height * this.scale;
      this.pushConfig();
      this.setStatus(`session ${this.client.sessionId}: ${bitmap.width}x${bitmap.height}`);
      this.redraw();
      this.refreshControls();
    } catch (err) {
      this.showError(err);
    }
  }

  // --- mutations (fire-and-forget; Client keeps them ordered)

  pushMask(): void {
    if (!this.mask) return;
    this.client.putMaskRuns(this.mask.toRuns()).catch((e) => this.showError(e));
    this.refreshControls();
  }

  pushStrokes(): void {
    const doc = this.strokes.toJSON();
    if (doc.strokes.length === 0) return; // service rejects an empty list; keep its last state
    this.client.putStrokes(doc).catch((e) => this.showError(e));
    this.refreshControls();
  }

  pushConfig(): void {
    if (!this.client.sessionId) return;
    this.client
      .putConfig({
        k: Number(el<HTMLInputElement>("cfg-k").value),
        length: Number(el<HTMLInputElement>("cfg-length").value),
        power: Number(el<HTMLInputElement>("cfg-power").value),
      })
      .catch((e) => this.showError(e));
  }

  // --- canvas tools

  private canvasPoint(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const y = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    return [x / this.scale, y / this.scale];
  }

  onPointerDown(e: PointerEvent): void {
    if (!this.image || !this.mask) return;
    const [x, y] = this.canvasPoint(e);
    if (this.tool === "stroke") {
      try {
        if (this.activeStroke < 0) this.activeStroke = this.strokes.addStroke();
        this.strokes.addVertex(this.activeStroke, x, y, this.mask.width, this.mask.height);
        this.pushStrokes();
        this.redraw();
        this.renderStrokeList();
      } catch (err) {
        this.showError(err);
      }
      return;
    }
    this.dragging = true;
    const value = this.tool === "brush" ? 1 : 0;
    this.mask.stampDisc(x, y, this.brushRadius, value);
    this.lastPoint = [x, y];
    this.redraw();
  }

  onPointerMove(e: PointerEvent): void {
    if (!this.dragging || !this.mask || !this.lastPoint) return;
    const [x, y] = this.canvasPoint(e);
    const value = this.tool === "brush" ? 1 : 0;
    this.mask.stampSegment(this.lastPoint[0], this.lastPoint[1], x, y, this.brushRadius, value);
    this.lastPoint = [x, y];
    this.redraw();
  }

  onPointerUp(): void {
    if (this.dragging) {
      this.dragging = false;
      this.lastPoint = null;
      this.pushMask();
    }
  }

  endStroke(): void {
    this.strokes.prune();
    this.activeStroke = -1;
    this.renderStrokeList();
    this.redraw();
  }

  deleteStroke(index: number): void {
    this.strokes.deleteStroke(index);
    if (this.activeStroke === index) this.activeStroke = -1;
    else if (this.activeStroke > index) this.activeStroke -= 1;
    if (this.strokes.isEmpty()) {
      // the service keeps its last nonempty stroke set; reflect that locally
      this.setStatus("stroke list empty; the service still holds the previous set until new strokes are pushed");
    } else {
      this.pushStrokes();
    }
    this.renderStrokeList();
    this.redraw();
    this.refreshControls();
  }

  // --- imports

  async onStrokesFile(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file || !this.mask) return;
    try {
      const doc = JSON.parse(await file.text());
      this.strokes = StrokeSet.fromJSON(doc, this.mask.width, this.mask.height);
      this.activeStroke = -1;
      this.pushStrokes();
      this.renderStrokeList();
      this.redraw();
      this.setStatus(`imported ${this.strokes.strokes.length} strokes`);
    } catch (err) {
      this.showError(err);
    }
  }

  async onMaskFile(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file || !this.mask) return;
    try {
      const bitmap = await createImageBitmap(new Blob([new Uint8Array(await file.arrayBuffer()) as BlobPart]));
      if (bitmap.width !== this.mask.width || bitmap.height !== this.mask.height) {
        throw new Error(`mask: size ${bitmap.height}x${bitmap.width} does not match image`);
      }
      const off = document.createElement("canvas");
      off.width = bitmap.width;
      off.height = bitmap.height;
      const ctx = off.getContext("2d")!;
      ctx.drawImage(bitmap, 0, 0);
      const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
      this.mask = MaskGrid.fromRgba(data.data, bitmap.height, bitmap.width);
      this.pushMask();
      this.redraw();
      this.setStatus(`imported mask (${this.mask.count()} px)`);
    } catch (err) {
      this.showError(err);
    }
  }

  // --- preview + metrics

  canGenerate(): { ok: boolean; reason: string } {
    if (!this.image) return { ok: false, reason: "no reference image uploaded" };
    if (this.strokes.isEmpty() && this.mask && !this.mask.isEmpty()) {
      return { ok: false, reason: UNCONSTRAINED };
    }
    return { ok: true, reason: "" };
  }

  refreshControls(): void {
    const { ok, reason } = this.canGenerate();
    this.generateBtn.disabled = !ok;
    this.generateBtn.title = reason;
    if (!ok && reason === UNCONSTRAINED) this.setStatus(reason, true);
  }

  async generate(): Promise<void> {
    try {
      this.setStatus("generating preview...");
      await this.client.flush();
      const preview = await this.client.getPreview();
      this.previewFrames = preview.frames;
      this.player?.stop();
      const urls = preview.frames.map((b64) => `data:image/png;base64,${b64}`);
      const fps = Number(el<HTMLInputElement>("cfg-fps").value) || 8;
      this.player = new FramePlayer(urls.length, fps);
      this.player.start((i) => {
        this.previewImg.src = urls[i]!;
      });
      const metrics = await this.client.getMetrics();
      this.renderMetrics(metrics);
      this.setStatus(`preview: ${preview.length} frames at ${fps} fps`);
    } catch (err) {
      this.showError(err);
    }
  }

  renderMetrics(m: MetricsDoc): void {
    this.metricsPanel.innerHTML = "";
    const rows: Array<[string, string]> = [
      ["md_img", m.md_img.toFixed(4)],
      ["md_vid", m.md_vid.toFixed(4)],
      ["frame_consistency", m.frame_consistency.toFixed(4)],
      ["avg_flow_magnitude", m.avg_flow_magnitude.toFixed(4)],
      ["excluded_points", m.excluded_points.length ? m.excluded_points.join(", ") : "none"],
    ];
    for (const [name, value] of rows) {
      const div = document.createElement("div");
      const label = document.createElement("span");
      label.textContent = name;
      const val = document.createElement("strong");
      val.textContent = value;
      div.append(label, val);
      this.metricsPanel.appendChild(div);
    }
  }

  // --- export

  async exportZip(): Promise<void> {
    if (!this.mask) return;
    try {
      const entries: ZipEntry[] = [];
      entries.push({
        name: "strokes.json",
        data: new TextEncoder().encode(JSON.stringify(this.strokes.toJSON(), null, 2) + "\n"),
      });
      entries.push({ name: "mask.pgm", data: this.mask.toPgm() });
      entries.push({ name: "mask.png", data: await maskToPngBytes(this.mask) });
      if (this.imageBytes) entries.push({ name: "reference.png", data: this.imageBytes });
      this.previewFrames.forEach((b64, i) => {
        const n = String(i + 1).padStart(4, "0");
        entries.push({ name: `frames/frame_${n}.png`, data: b64ToBytes(b64) });
      });
      download("session.zip", buildZip(entries), "application/zip");
      this.setStatus(`exported ${entries.length} files`);
    } catch (err) {
      this.showError(err);
    }
  }

  // --- drawing

  renderStrokeList(): void {
    this.strokeList.innerHTML = "";
    this.strokes.strokes.forEach((points, i) => {
      const row = document.createElement("div");
      const label = document.createElement("span");
      label.textContent = `stroke ${i + 1} (${points.length} pts)${i === this.activeStroke ? " *" : ""}`;
      const btn = document.createElement("button");
      btn.textContent = "delete";
      btn.addEventListener("click", () => this.deleteStroke(i));
      row.append(label, btn);
      this.strokeList.appendChild(row);
    });
  }

  redraw(): void {
    const ctx = this.canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.image || !this.mask) return;
    ctx.save();
    ctx.scale(this.scale, this.scale);
    ctx.drawImage(this.image, 0, 0);
    ctx.restore();

    // mask overlay
    const overlay = document.createElement("canvas");
    overlay.width = this.mask.width;
    overlay.height = this.mask.height;
    const octx = overlay.getContext("2d")!;
    const img = octx.createImageData(this.mask.width, this.mask.height);
    for (let i = 0; i < this.mask.bits.length; i++) {
      if (this.mask.bits[i]) {
        img.data[4 * i] = 255;
        img.data[4 * i + 1] = 64;
        img.data[4 * i + 2] = 64;
        img.data[4 * i + 3] = 96;
      }
    }
    octx.putImageData(img, 0, 0);
    ctx.save();
    ctx.scale(this.scale, this.scale);
    ctx.drawImage(overlay, 0, 0);
    ctx.restore();

    // stroke polylines
    ctx.save();
    ctx.lineWidth = 2;
    this.strokes.strokes.forEach((points, si) => {
      ctx.strokeStyle = si === this.activeStroke ? "#ffd426" : "#26d4ff";
      ctx.fillStyle = ctx.strokeStyle;
      ctx.beginPath();
      points.forEach(([x, y], i) => {
        const cx = (x + 0.5) * this.scale;
        const cy = (y + 0.5) * this.scale;
        if (i === 0) ctx.moveTo(cx, cy);
        else ctx.lineTo(cx, cy);
      });
      ctx.stroke();
      points.forEach(([x, y]) => {
        ctx.beginPath();
        ctx.arc((x + 0.5) * this.scale, (y + 0.5) * this.scale, 3, 0, 2 * Math.PI);
        ctx.fill();
      });
    });
    ctx.restore();
  }
}

new App().start();
