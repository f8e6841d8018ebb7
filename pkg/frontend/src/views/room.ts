// Live auction room: the bid ladder grows only as commits stream in.
// Members get a bid box prefilled at the minimum winning price; the
// auctioneer gets the close control; the winner gets the transfer button.
// Every control is re-checked server-side; hiding is cosmetic.

import type { Session } from "../api.js";
import { escapeHtml, money, shortId } from "../format.js";
import { minimumNextBid, reserveMet, type ListingView } from "../store.js";

export function renderRoom(listing: ListingView | undefined,
                           session: Session | null,
                           names: Map<string, string>): string {
  if (!listing) {
    return `<section class="card"><p class="empty">Unknown listing. It may not be committed yet.</p></section>`;
  }
  const name = (id: string | null) =>
    id ? escapeHtml(names.get(id) ?? shortId(id)) : "-";
  const ladder = listing.bids.slice().reverse().map((bid) => `
      <tr><td>${money(bid.bidPrice)}</td><td>${name(bid.member)}</td>
      <td class="mono">${shortId(bid.txId, 12)}</td></tr>`).join("");
  const rejected = listing.rejectedBids.slice(-3).map((bid) =>
    `<p class="rejected">bid ${money(bid.bidPrice)} by ${name(bid.member)} invalidated (${bid.flag})</p>`,
  ).join("");

  let banner = "";
  if (listing.state === "SOLD") {
    banner = `<div class="banner sold">SOLD to ${name(listing.doneBuyer)}
      ${listing.transferred ? "(transferred)" : "(awaiting transfer)"}</div>`;
  } else if (listing.state === "RESERVE_NOT_MET") {
    banner = `<div class="banner unsold">Closed: reserve not met</div>`;
  } else if (reserveMet(listing)) {
    banner = `<div class="banner met">Reserve met</div>`;
  }

  const isMember = session?.role === "MEMBER";
  const isSeller = session?.identityId === listing.sellerId;
  const bidBox = listing.state === "FOR_SALE" && isMember && !isSeller ? `
    <form id="bid-form">
      <input id="bid-price" name="bidPrice" type="number"
             min="${minimumNextBid(listing)}" value="${minimumNextBid(listing)}">
      <button type="submit">Place bid</button>
    </form>` : "";
  const closeControl = listing.state === "FOR_SALE" && session?.role === "AUCTIONEER"
    ? `<button id="close-bidding" class="danger">Close bidding</button>` : "";
  const transferControl = (listing.state === "SOLD" && !listing.transferred
                           && session?.identityId === listing.doneBuyer)
    ? `<button id="transfer-asset">Claim commodity</button>` : "";

  return `
    <section class="card">
      <h2>${escapeHtml(listing.exchangeName)} / ${shortId(listing.listingId, 14)}</h2>
      <p>seller ${name(listing.sellerId)} · reserve ${money(listing.reservePrice)} ·
         commodity <a href="#/provenance/${listing.commodityId}">${shortId(listing.commodityId, 14)}</a></p>
      ${banner}
      <div class="controls">${bidBox}${closeControl}${transferControl}</div>
      <p class="error" id="room-error"></p>
      ${rejected}
      <h3>Bid ladder</h3>
      <table class="board" id="ladder">
        <thead><tr><th>price</th><th>bidder</th><th>tx</th></tr></thead>
        <tbody>${ladder || `<tr><td colspan="3" class="empty">no bids yet</td></tr>`}</tbody>
      </table>
    </section>`;
}
