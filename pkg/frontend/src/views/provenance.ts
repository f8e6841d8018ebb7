// Provenance timeline: ownership changes and renovations in commit order,
// exactly as the ledger reports them.

import type { Provenance } from "../api.js";
import { escapeHtml, money, shortId, versionLabel } from "../format.js";

export function renderProvenance(prov: Provenance | null,
                                 names: Map<string, string>): string {
  if (!prov) {
    return `<section class="card"><p class="empty">Unknown commodity.</p></section>`;
  }
  const name = (id?: string) => (id ? escapeHtml(names.get(id) ?? shortId(id)) : "?");
  const entries = prov.timeline.map((event) => {
    if (event.kind === "OWNERSHIP") {
      const via = event.viaListingId === "GENESIS"
        ? "created"
        : `via listing ${shortId(event.viaListingId ?? "", 14)}`;
      return `<li class="ownership"><span class="when">${versionLabel(event.version)}</span>
        owner → <strong>${name(event.owner)}</strong> <span class="via">(${via})</span></li>`;
    }
    return `<li class="renovation"><span class="when">${versionLabel(event.version)}</span>
      renovation on ${escapeHtml(event.date ?? "")} for ${money(event.cost ?? 0)}
      by ${name(event.renovatingOwner)}</li>`;
  }).join("");
  return `
    <section class="card">
      <h2>Provenance of ${shortId(prov.commodityId, 16)}</h2>
      <p>current owner: <strong>${name(prov.owner)}</strong> ·
         ${prov.ownershipHistory.length} owner(s) · ${prov.renovations.length} renovation(s)</p>
      <ol class="timeline">${entries}</ol>
    </section>`;
}
