/** Keyboard mapping: 1..scale selects a score, Enter submits, N re-fetches view-only. */

export type KeyAction =
  | { type: "select"; score: number }
  | { type: "submit" }
  | { type: "skip" };

export function mapKey(key: string, scale: number): KeyAction | null {
  if (key === "Enter") return { type: "submit" };
  if (key === "n" || key === "N") return { type: "skip" };
  if (/^[0-9]$/.test(key)) {
    const score = Number(key);
    if (score >= 1 && score <= scale) return { type: "select", score };
  }
  return null;
}
