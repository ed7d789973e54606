/** String-level HTML probes; the views are plain markup so regex suffices. */

export function attrValues(html: string, attr: string): string[] {
  const out: string[] = [];
  const re = new RegExp(`${attr}="([^"]*)"`, "g");
  for (const m of html.matchAll(re)) {
    out.push(m[1]!);
  }
  return out;
}

export function count(html: string, re: RegExp): number {
  return [...html.matchAll(new RegExp(re, "g"))].length;
}

/** Text content of every cell with the given class, in document order. */
export function cellsOf(html: string, cls: string): string[] {
  const out: string[] = [];
  const re = new RegExp(`<td class="${cls}[^"]*"[^>]*>([^<]*)</td>`, "g");
  for (const m of html.matchAll(re)) {
    out.push(m[1]!);
  }
  return out;
}

/** data-raw attribute of every cell with the given class, in order. */
export function rawsOf(html: string, cls: string): string[] {
  const out: string[] = [];
  const re = new RegExp(`<td class="${cls}[^"]*" data-raw="([^"]*)"`, "g");
  for (const m of html.matchAll(re)) {
    out.push(m[1]!);
  }
  return out;
}
