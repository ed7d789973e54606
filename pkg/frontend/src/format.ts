/** Display formatting helpers.
 *
 * The console never computes metrics: every number shown is a service field,
 * either passed through verbatim (data-raw attributes carry `String(field)`)
 * or formatted for humans.  The one arithmetic exception is the similarity
 * score display clamp to [-1, 1], with the raw value kept alongside.
 */

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Fixed-point rendering of a service field. */
export function fmt(value: number, digits = 4): string {
  return value.toFixed(digits);
}

export interface SsDisplay {
  /** clamped to [-1, 1], two decimals */
  text: string;
  /** String(raw service field), for data-raw attributes and hover titles */
  raw: string;
  clamped: boolean;
}

/** Similarity scores are clamped to [-1, 1] for display only. */
export function displaySs(ss: number): SsDisplay {
  const clamped = Math.max(-1, Math.min(1, ss));
  return {
    text: clamped.toFixed(2),
    raw: String(ss),
    clamped: clamped !== ss,
  };
}
