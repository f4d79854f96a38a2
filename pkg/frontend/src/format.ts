/** Display formatting. Rendered text uses fixed significant digits; the
 *  raw value always rides along in a title attribute so nothing rounded
 *  ever feeds back into the service. */

export function sig(value: number, digits = 4): string {
  if (!Number.isFinite(value)) return String(value);
  if (value === 0) return "0";
  return value.toPrecision(digits).replace(/\.?0+$/, "").replace(/\.$/, "");
}

export function percent(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}

export function money(values: number[], components: string[]): string {
  if (!values.length) return "-";
  return values
    .map((v, i) => `${sig(v, 6)} ${components[i] ?? ""}`.trim())
    .join(", ");
}

/** A span whose text is rounded but whose title carries the raw value. */
export function numberCell(doc: Document, value: number, digits = 4): HTMLElement {
  const span = doc.createElement("span");
  span.textContent = sig(value, digits);
  span.title = String(value);
  span.dataset.raw = String(value);
  return span;
}
