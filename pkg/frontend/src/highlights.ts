import type { HighlightSegment, Mechanism } from "./types.js";

/** One contiguous run of text with every highlight covering it, layered in
 * input order — overlapping segments are never merged into one tag. */
export interface RenderedPiece {
  text: string;
  tags: { mechanism: Mechanism; level: number }[];
}

interface ByteMap {
  /** UTF-8 byte offset -> index (UTF-16 code units) usable with slice(). */
  byteToChar: Map<number, number>;
  totalBytes: number;
}

const encoder = new TextEncoder();

/** Map every valid UTF-8 boundary of `text` to a string index. Offsets inside
 * a multi-byte character are deliberately absent from the map. */
export function buildByteMap(text: string): ByteMap {
  const byteToChar = new Map<number, number>();
  let bytes = 0;
  let units = 0;
  byteToChar.set(0, 0);
  for (const glyph of text) {
    bytes += encoder.encode(glyph).length;
    units += glyph.length;
    byteToChar.set(bytes, units);
  }
  return { byteToChar, totalBytes: bytes };
}

/** Split `text` into runs annotated with the server-provided segments.
 *
 * Byte ranges are used verbatim; a range that is out of bounds, empty, or
 * would split a multi-byte character is skipped with a warning and the text
 * is still rendered in full.
 */
export function renderHighlights(
  text: string,
  segments: HighlightSegment[],
  warn: (message: string) => void = (m) => console.warn(m),
): RenderedPiece[] {
  const map = buildByteMap(text);
  const valid: HighlightSegment[] = [];
  for (const seg of segments) {
    if (
      seg.start < 0 ||
      seg.end > map.totalBytes ||
      seg.start >= seg.end ||
      !map.byteToChar.has(seg.start) ||
      !map.byteToChar.has(seg.end)
    ) {
      warn(`skipping invalid highlight range [${seg.start}, ${seg.end})`);
      continue;
    }
    valid.push(seg);
  }

  const boundaries = new Set<number>([0, text.length]);
  for (const seg of valid) {
    boundaries.add(map.byteToChar.get(seg.start)!);
    boundaries.add(map.byteToChar.get(seg.end)!);
  }
  const cuts = [...boundaries].sort((a, b) => a - b);

  const pieces: RenderedPiece[] = [];
  for (let i = 0; i + 1 < cuts.length; i++) {
    const [from, to] = [cuts[i], cuts[i + 1]];
    const tags = valid
      .filter(
        (seg) =>
          map.byteToChar.get(seg.start)! <= from &&
          to <= map.byteToChar.get(seg.end)!,
      )
      .map((seg) => ({ mechanism: seg.mechanism, level: seg.level }));
    pieces.push({ text: text.slice(from, to), tags });
  }
  if (pieces.length === 0 && text.length === 0) {
    pieces.push({ text: "", tags: [] });
  }
  return pieces;
}
