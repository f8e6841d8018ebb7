// Event-sourced client state. The stream is replayed from seq 0, so every
// listing, bid ladder and ownership change is rebuilt purely from
// committed events; nothing is rendered optimistically.

import type { ListingState, MaxBid } from "./api.js";
import type { EventRecord } from "./stream.js";

export interface LadderEntry {
  offerId: string;
  member: string;
  bidPrice: number;
  txId: string;
}

export interface RejectedBid {
  member: string;
  bidPrice: number;
  flag: string;
  txId: string;
}

export interface ListingView {
  listingId: string;
  exchangeName: string;
  commodityId: string;
  sellerId: string;
  reservePrice: number;
  auctionId: string;
  state: ListingState;
  maxBid: MaxBid | null;
  doneBuyer: string | null;
  transferred: boolean;
  bids: LadderEntry[];
  rejectedBids: RejectedBid[];
}

export interface StoreState {
  listings: Map<string, ListingView>;
  owners: Map<string, string>; // commodityId -> owner after transfers
  lastEventSeq: number;
  lastBlock: number;
}

export function initialState(): StoreState {
  return { listings: new Map(), owners: new Map(), lastEventSeq: 0, lastBlock: 0 };
}

export class Store {
  state: StoreState = initialState();
  private listeners = new Set<() => void>();

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  apply(event: EventRecord): void {
    applyEvent(this.state, event);
    this.notify();
  }
}

export function applyEvent(state: StoreState, event: EventRecord): void {
  if (event.eventSeq <= state.lastEventSeq) return; // replayed duplicate
  state.lastEventSeq = event.eventSeq;
  const payload = event.payload;
  switch (event.kind) {
    case "LISTING_CREATED": {
      state.listings.set(payload.listingId, {
        listingId: payload.listingId,
        exchangeName: payload.exchangeName,
        commodityId: payload.commodityId,
        sellerId: payload.sellerId,
        reservePrice: payload.reservePrice,
        auctionId: payload.auctionId,
        state: "FOR_SALE",
        maxBid: null,
        doneBuyer: null,
        transferred: false,
        bids: [],
        rejectedBids: [],
      });
      break;
    }
    case "BID_ACCEPTED": {
      const listing = state.listings.get(payload.listingId);
      if (!listing) break;
      listing.maxBid = { offerId: payload.offerId, bidPrice: payload.bidPrice };
      listing.bids.push({
        offerId: payload.offerId,
        member: payload.member,
        bidPrice: payload.bidPrice,
        txId: payload.txId,
      });
      break;
    }
    case "BID_REJECTED": {
      const listing = state.listings.get(payload.listingId);
      if (!listing) break;
      listing.rejectedBids.push({
        member: payload.member,
        bidPrice: payload.bidPrice,
        flag: payload.flag,
        txId: payload.txId,
      });
      break;
    }
    case "BIDDING_CLOSED": {
      const listing = state.listings.get(payload.listingId);
      if (!listing) break;
      listing.state = payload.state;
      listing.doneBuyer = payload.doneBuyer;
      break;
    }
    case "ASSET_TRANSFERRED": {
      const listing = state.listings.get(payload.listingId);
      if (payload.outcome === "TRANSFERRED" && listing) {
        listing.transferred = true;
        state.owners.set(listing.commodityId, payload.newOwner);
      }
      break;
    }
    case "BLOCK_COMMITTED": {
      state.lastBlock = payload.number;
      break;
    }
    default:
      break;
  }
}

export function reserveMet(listing: ListingView): boolean {
  return listing.maxBid !== null && listing.maxBid.bidPrice >= listing.reservePrice;
}

export function minimumNextBid(listing: ListingView): number {
  return listing.maxBid ? listing.maxBid.bidPrice + 1 : 1;
}

export function openListings(state: StoreState): ListingView[] {
  return [...state.listings.values()].filter((l) => l.state === "FOR_SALE");
}

export function closedListings(state: StoreState): ListingView[] {
  return [...state.listings.values()].filter((l) => l.state !== "FOR_SALE");
}
