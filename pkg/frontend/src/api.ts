// Typed client for the ledger HTTP API. Mutations are signed with the
// demo scheme: X-Identity plus X-Signature, an HMAC-SHA256 over the exact
// body bytes using the keySecret issued at registration.

export type Role = "MEMBER" | "AUCTIONEER";
export type ListingState = "FOR_SALE" | "SOLD" | "RESERVE_NOT_MET";

export interface Identity {
  identityId: string;
  displayName: string;
  role: Role;
  registeredAtSeq: number;
}

export interface IssuedIdentity extends Identity {
  keySecret: string;
  keyRef: string;
  txId: string;
}

export interface Session {
  identityId: string;
  displayName: string;
  role: Role;
  keySecret: string;
}

export interface MaxBid {
  offerId: string;
  bidPrice: number;
}

export interface Listing {
  listingId: string;
  exchangeName: string;
  commodityId: string;
  sellerId: string;
  reservePrice: number;
  offerIds: string[];
  maxBid: MaxBid | null;
  state: ListingState;
  doneBuyer: string | null;
  auctionId: string;
  transferred: boolean;
}

export interface Commodity {
  commodityId: string;
  description: string;
  idealPrice: number;
  owner: string;
  ownershipHistory: OwnershipRecord[];
  renovationIds: string[];
  trackRenovations: boolean;
  activeListingId: string | null;
}

export interface OwnershipRecord {
  owner: string;
  acquiredAtVersion: [number, number] | null;
  viaListingId: string;
}

export interface TimelineEvent {
  kind: "OWNERSHIP" | "RENOVATION";
  version: [number, number] | null;
  owner?: string;
  viaListingId?: string;
  renovationId?: string;
  date?: string;
  cost?: number;
  renovatingOwner?: string;
}

export interface Provenance {
  commodityId: string;
  owner: string;
  ownershipHistory: OwnershipRecord[];
  renovations: Array<Record<string, unknown>>;
  timeline: TimelineEvent[];
}

export interface AuctionEnvironment {
  auctionId: string;
  activeBuyers: string[];
  activeSellers: string[];
  activeAuctioneer: string;
  open: boolean;
  listingIds: string[];
}

export interface Submitted {
  txId: string;
  result: Record<string, unknown>;
}

export interface TransactionStatus {
  txId: string;
  status: "COMMITTED" | "PENDING";
  validity?: string;
  block?: number;
  result?: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message || code);
  }
}

export async function hmacHex(keySecretHex: string, body: Uint8Array): Promise<string> {
  const keyBytes = new Uint8Array(
    (keySecretHex.match(/.{2}/g) ?? []).map((pair) => parseInt(pair, 16)),
  );
  const key = await crypto.subtle.importKey(
    "raw", keyBytes, { name: "HMAC", hash: "SHA-256" }, false, ["sign"],
  );
  const mac = await crypto.subtle.sign("HMAC", key, body as BufferSource);
  return Array.from(new Uint8Array(mac))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

async function intoError(response: Response): Promise<ApiError> {
  let code = `HTTP_${response.status}`;
  let message = "";
  try {
    const body = await response.json();
    if (typeof body.error === "string") code = body.error;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body: keep the status code
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) throw await intoError(response);
    return (await response.json()) as T;
  }

  async register(displayName: string, role: Role): Promise<IssuedIdentity> {
    const response = await this.fetchFn(`${this.baseUrl}/identities`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ displayName, role }),
    });
    if (!response.ok) throw await intoError(response);
    return (await response.json()) as IssuedIdentity;
  }

  async signedPost(path: string, body: unknown, session: Session): Promise<Submitted> {
    const raw = new TextEncoder().encode(JSON.stringify(body));
    const signature = await hmacHex(session.keySecret, raw);
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-Identity": session.identityId,
        "X-Signature": signature,
      },
      body: raw,
    });
    if (!response.ok) throw await intoError(response);
    return (await response.json()) as Submitted;
  }

  createAuction(buyers: string[], sellers: string[], auctioneer: string,
                session: Session): Promise<Submitted> {
    return this.signedPost("/auctions", {
      buyersLst: buyers, sellersLst: sellers, auctioneer,
    }, session);
  }

  createCommodity(description: string, idealPrice: number,
                  trackRenovations: boolean, session: Session): Promise<Submitted> {
    return this.signedPost("/commodities", {
      description, idealPrice, trackRenovations,
    }, session);
  }

  createListing(exchangeName: string, commodityId: string, reservePrice: number,
                auctionId: string, session: Session): Promise<Submitted> {
    return this.signedPost("/listings", {
      exchangeName, commodityId, reservePrice, auctionId,
    }, session);
  }

  placeBid(listingId: string, bidPrice: number, session: Session): Promise<Submitted> {
    return this.signedPost(`/listings/${listingId}/bids`, { bidPrice }, session);
  }

  closeBidding(listingId: string, session: Session): Promise<Submitted> {
    return this.signedPost(`/listings/${listingId}/close`, {}, session);
  }

  transferAsset(listingId: string, proposedNewOwner: string,
                session: Session): Promise<Submitted> {
    return this.signedPost(`/listings/${listingId}/transfer`,
                           { proposedNewOwner }, session);
  }

  addRenovation(commodityId: string, date: string, cost: number,
                description: string, session: Session): Promise<Submitted> {
    return this.signedPost(`/commodities/${commodityId}/renovations`,
                           { date, cost, description }, session);
  }

  closeAuction(auctionId: string, session: Session): Promise<Submitted> {
    return this.signedPost(`/auctions/${auctionId}/close`, {}, session);
  }

  listings(): Promise<{ listings: Listing[] }> {
    return this.getJson("/listings");
  }

  listing(listingId: string): Promise<Listing> {
    return this.getJson(`/listings/${listingId}`);
  }

  commodity(commodityId: string): Promise<Commodity> {
    return this.getJson(`/commodities/${commodityId}`);
  }

  provenance(commodityId: string): Promise<Provenance> {
    return this.getJson(`/commodities/${commodityId}/provenance`);
  }

  identities(): Promise<{ identities: Identity[] }> {
    return this.getJson("/identities");
  }

  auctions(): Promise<{ auctions: AuctionEnvironment[] }> {
    return this.getJson("/auctions");
  }

  transaction(txId: string): Promise<TransactionStatus> {
    return this.getJson(`/transactions/${txId}`);
  }

  verifyChain(): Promise<{ ok: boolean; height: number }> {
    return this.getJson("/chain/verify");
  }

  async waitCommitted(txId: string, timeoutMs = 5000): Promise<TransactionStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      try {
        const status = await this.transaction(txId);
        if (status.status === "COMMITTED") return status;
      } catch (error) {
        if (!(error instanceof ApiError && error.status === 404)) throw error;
      }
      if (Date.now() > deadline) {
        throw new ApiError(408, "COMMIT_TIMEOUT", `${txId} not committed in time`);
      }
      await new Promise((resolve) => setTimeout(resolve, 25));
    }
  }
}
