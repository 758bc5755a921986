// Number formatting matched digit-for-digit to the server's reports, so
// values shown here never disagree with a downloaded report.

const FIXED_MIN_EXP = -4;

/**
 * Render a value with a fixed number of significant figures (default 4),
 * padding with trailing zeros.  Mirrors the server: round half to even,
 * exponential notation outside [1e-4, 10^digits), two-digit exponents,
 * null/NaN as "n/a" and exact zero as "0.000".
 */
export function formatSig(x: number | null | undefined, digits = 4): string {
  if (x === null || x === undefined || Number.isNaN(x)) return "n/a";
  if (x === 0) return "0." + "0".repeat(digits - 1);
  if (!Number.isFinite(x)) return x > 0 ? "inf" : "-inf";
  const neg = x < 0;
  // 30 fractional digits is exact for every magnitude this UI displays,
  // so the half-to-even tie test below sees the true decimal expansion
  const [mantissa, expPart] = Math.abs(x).toExponential(30).split("e");
  let exp = parseInt(expPart!, 10);
  const ds = mantissa!.replace(".", "");
  let head = ds.slice(0, digits);
  const next = ds.charCodeAt(digits) - 48;
  const restNonzero = /[1-9]/.test(ds.slice(digits + 1));
  const lastOdd = (ds.charCodeAt(digits - 1) - 48) % 2 === 1;
  if (next > 5 || (next === 5 && (restNonzero || lastOdd))) {
    const rounded = String(parseInt(head, 10) + 1);
    if (rounded.length > digits) {
      head = rounded.slice(0, digits);
      exp += 1;
    } else {
      head = rounded.padStart(digits, "0");
    }
  }
  let body: string;
  if (exp >= FIXED_MIN_EXP && exp < digits) {
    if (exp === digits - 1) body = head;
    else if (exp >= 0) body = head.slice(0, exp + 1) + "." + head.slice(exp + 1);
    else body = "0." + "0".repeat(-exp - 1) + head;
  } else {
    const sign = exp < 0 ? "-" : "+";
    const mag = String(Math.abs(exp)).padStart(2, "0");
    body = head[0] + "." + head.slice(1) + "e" + sign + mag;
  }
  return (neg ? "-" : "") + body;
}

/** Parse a comma- or whitespace-separated list of numbers. */
export function parseNumberList(text: string): number[] | null {
  const parts = text
    .split(/[,\s]+/)
    .map((p) => p.trim())
    .filter((p) => p.length > 0);
  if (parts.length === 0) return null;
  const out: number[] = [];
  for (const part of parts) {
    const v = Number(part);
    if (!Number.isFinite(v)) return null;
    out.push(v);
  }
  return out;
}
