/** Minimal store-only ZIP writer for the session export download.
 *
 * No compression: preview PNGs are already deflated, and store-only keeps
 * the writer small and byte-deterministic (fixed DOS timestamp, entries
 * in call order), so the same session always exports the same archive.
 */

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]!) & 0xff]! ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export interface ZipEntry {
  name: string; // forward-slash path, ASCII
  data: Uint8Array;
}

const DOS_DATE = (1 << 5) | 1; // 1980-01-01, the format's epoch
const DOS_TIME = 0;

function ascii(name: string): Uint8Array {
  const out = new Uint8Array(name.length);
  for (let i = 0; i < name.length; i++) {
    const code = name.charCodeAt(i);
    if (code > 0x7f) throw new Error(`zip: non-ASCII entry name ${JSON.stringify(name)}`);
    out[i] = code;
  }
  return out;
}

class ByteWriter {
  private chunks: Uint8Array[] = [];
  length = 0;

  bytes(data: Uint8Array): void {
    this.chunks.push(data);
    this.length += data.length;
  }

  u16(v: number): void {
    this.bytes(new Uint8Array([v & 0xff, (v >>> 8) & 0xff]));
  }

  u32(v: number): void {
    this.bytes(new Uint8Array([v & 0xff, (v >>> 8) & 0xff, (v >>> 16) & 0xff, (v >>> 24) & 0xff]));
  }

  concat(): Uint8Array {
    const out = new Uint8Array(this.length);
    let off = 0;
    for (const c of this.chunks) {
      out.set(c, off);
      off += c.length;
    }
    return out;
  }
}

export function buildZip(entries: ZipEntry[]): Uint8Array {
  const w = new ByteWriter();
  const central: Array<{ name: Uint8Array; crc: number; size: number; offset: number }> = [];

  for (const entry of entries) {
    const name = ascii(entry.name);
    const crc = crc32(entry.data);
    central.push({ name, crc, size: entry.data.length, offset: w.length });
    w.u32(0x04034b50); // local file header
    w.u16(20); // version needed
    w.u16(0); // flags
    w.u16(0); // method: store
    w.u16(DOS_TIME);
    w.u16(DOS_DATE);
    w.u32(crc);
    w.u32(entry.data.length); // compressed
    w.u32(entry.data.length); // uncompressed
    w.u16(name.length);
    w.u16(0); // extra length
    w.bytes(name);
    w.bytes(entry.data);
  }

  const dirStart = w.length;
  for (const rec of central) {
    w.u32(0x02014b50); // central directory header
    w.u16(20); // version made by
    w.u16(20); // version needed
    w.u16(0);
    w.u16(0);
    w.u16(DOS_TIME);
    w.u16(DOS_DATE);
    w.u32(rec.crc);
    w.u32(rec.size);
    w.u32(rec.size);
    w.u16(rec.name.length);
    w.u16(0); // extra
    w.u16(0); // comment
    w.u16(0); // disk
    w.u16(0); // internal attrs
    w.u32(0); // external attrs
    w.u32(rec.offset);
    w.bytes(rec.name);
  }
  const dirSize = w.length - dirStart;

  w.u32(0x06054b50); // end of central directory
  w.u16(0);
  w.u16(0);
  w.u16(central.length);
  w.u16(central.length);
  w.u32(dirSize);
  w.u32(dirStart);
  w.u16(0); // comment length
  return w.concat();
}
