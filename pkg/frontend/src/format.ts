// Small presentation helpers shared by the views.

export function money(minorUnits: number): string {
  const sign = minorUnits < 0 ? "-" : "";
  const cents = Math.abs(minorUnits);
  const whole = Math.floor(cents / 100);
  return `${sign}$${whole.toLocaleString("en-US")}.${String(cents % 100).padStart(2, "0")}`;
}

export function shortId(id: string, keep = 10): string {
  return id.length <= keep ? id : `${id.slice(0, keep)}…`;
}

export function versionLabel(version: [number, number] | null): string {
  return version ? `block ${version[0]} tx ${version[1]}` : "creation";
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
