// Listing board: every row renders committed state only and live-updates
// from the event stream. Sellers additionally get the create-listing form.

import type { Session } from "../api.js";
import { escapeHtml, money, shortId } from "../format.js";
import { closedListings, openListings, reserveMet, type ListingView, type StoreState } from "../store.js";

function stateBadge(listing: ListingView): string {
  if (listing.state === "FOR_SALE") return `<span class="badge open">FOR SALE</span>`;
  if (listing.state === "SOLD") return `<span class="badge sold">SOLD</span>`;
  return `<span class="badge unsold">RESERVE NOT MET</span>`;
}

function row(listing: ListingView): string {
  const maxBid = listing.maxBid ? money(listing.maxBid.bidPrice) : "-";
  const reserve = reserveMet(listing)
    ? `<span class="reserve met">reserve met</span>`
    : `<span class="reserve">below reserve</span>`;
  return `<tr data-listing="${listing.listingId}">
    <td><a href="#/room/${listing.listingId}">${shortId(listing.listingId, 14)}</a></td>
    <td>${escapeHtml(listing.exchangeName)}</td>
    <td>${money(listing.reservePrice)}</td>
    <td class="max-bid">${maxBid}</td>
    <td>${listing.state === "FOR_SALE" ? reserve : ""}</td>
    <td>${stateBadge(listing)}</td>
  </tr>`;
}

export function renderLobby(state: StoreState, session: Session | null): string {
  const open = openListings(state).map(row).join("");
  const closed = closedListings(state).map(row).join("");
  const sellerForm = session && session.role === "MEMBER" ? `
    <section class="card" id="create-listing">
      <h3>List a commodity</h3>
      <form id="listing-form">
        <input name="description" placeholder="description" required>
        <input name="idealPrice" type="number" min="0" value="10000" required>
        <label><input name="trackRenovations" type="checkbox"> track renovations</label>
        <input name="exchangeName" placeholder="exchange" value="fineart" required>
        <input name="reservePrice" type="number" min="0" value="5000" required>
        <input name="auctionId" placeholder="auction id" required>
        <button type="submit">Create commodity &amp; listing</button>
      </form>
      <p class="hint">Creates the commodity, then lists it in the named auction.</p>
      <p class="error" id="listing-error"></p>
    </section>` : "";
  return `
    <section class="card">
      <h2>Open auctions</h2>
      <table class="board">
        <thead><tr><th>listing</th><th>exchange</th><th>reserve</th>
          <th>top bid</th><th></th><th>state</th></tr></thead>
        <tbody>${open || `<tr><td colspan="6" class="empty">no open listings</td></tr>`}</tbody>
      </table>
    </section>
    <section class="card">
      <h2>Concluded</h2>
      <table class="board">
        <tbody>${closed || `<tr><td colspan="6" class="empty">nothing concluded yet</td></tr>`}</tbody>
      </table>
    </section>
    ${sellerForm}`;
}
