// Region enumeration for a chosen list of stores. A region is one cell
// of the membership partition: inside every store whose bit is set in
// the mask, outside all the others. The set expression for each region
// is built here as a string and evaluated by the server; this module
// never touches fingerprints.

export const MIN_STORES = 2;
export const MAX_STORES = 6;

export interface Region {
  mask: number; // bit i set = inside stores[i]
  inside: string[];
  outside: string[];
  signature: string; // human form, e.g. "in alpha, beta; not gamma"
  expr: string;
}

const BARE_IDENT = /^[A-Za-z0-9_.-]+$/;

// A lone "-" tokenizes as the difference operator, so it must be quoted.
export function quoteIdent(name: string): string {
  if (BARE_IDENT.test(name) && name !== "-") return name;
  return `"${name.replace(/\\/g, "\\\\").replace(/"/g, '\\"')}"`;
}

export function regionExpr(inside: string[], outside: string[]): string {
  if (inside.length === 0) throw new Error("region needs at least one store");
  const inner = inside.map(quoteIdent).join(" & ");
  if (outside.length === 0) return inner;
  const wrapped = inside.length > 1 ? `(${inner})` : inner;
  return `${wrapped} - (${outside.map(quoteIdent).join(" | ")})`;
}

export function signatureOf(inside: string[], outside: string[]): string {
  const parts = [`in ${inside.join(", ")}`];
  if (outside.length) parts.push(`not ${outside.join(", ")}`);
  return parts.join("; ");
}

export function regionsOf(stores: string[]): Region[] {
  if (stores.length < 1 || stores.length > MAX_STORES) {
    throw new Error(`expected 1-${MAX_STORES} stores, got ${stores.length}`);
  }
  const regions: Region[] = [];
  for (let mask = 1; mask < 1 << stores.length; mask++) {
    const inside: string[] = [];
    const outside: string[] = [];
    stores.forEach((name, i) => {
      if (mask & (1 << i)) inside.push(name);
      else outside.push(name);
    });
    regions.push({
      mask,
      inside,
      outside,
      signature: signatureOf(inside, outside),
      expr: regionExpr(inside, outside),
    });
  }
  return regions;
}

// Mask <-> bit string, char i corresponding to stores[i].
export function maskToString(mask: number, width: number): string {
  let out = "";
  for (let i = 0; i < width; i++) out += mask & (1 << i) ? "1" : "0";
  return out;
}

export function maskFromString(s: string): number {
  let mask = 0;
  for (let i = 0; i < s.length; i++) {
    if (s[i] === "1") mask |= 1 << i;
    else if (s[i] !== "0") throw new Error(`bad region bit ${s[i]}`);
  }
  return mask;
}
