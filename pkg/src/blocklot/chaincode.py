"""Deterministic auction chaincode.

Every operation is a pure function of (caller, args, snapshot, txId): it
reads entity records through a read-recording view, returns a result plus
the (readSet, writeSet) pair, and aborts with a ChaincodeError and no
writes on any precondition failure. Fresh entity ids derive from the txId
so independent endorsers produce byte-identical effects.
"""

import copy
from dataclasses import dataclass
from datetime import date

from .canonical import canonical_digest_hex
from .errors import ChaincodeError
from .ledger import Version, version_record

GENESIS_MARKER = "GENESIS"

FOR_SALE = "FOR_SALE"
SOLD = "SOLD"
RESERVE_NOT_MET = "RESERVE_NOT_MET"

TRANSFERRED = "TRANSFERRED"
NO_CHANGE = "NO_CHANGE"

# operation strings are wire format; do not rename
OP_INITIATE_AUCTION = "initiate_auction_environment"
OP_CREATE_COMMODITY = "create_commodity"
OP_CREATE_LISTING = "create_commodity_listing"
OP_MAKE_BID = "make_bid"
OP_CLOSE_BIDDING = "close_bidding"
OP_TRANSFER_ASSETS = "transfer_assets"
OP_ADD_RENOVATION = "add_renovation"
OP_GET_PROVENANCE = "get_provenance"
OP_CLOSE_ENVIRONMENT = "close_environment"
OP_REGISTER_IDENTITY = "register_identity"  # system op, not part of the auction set

READ_ONLY_OPERATIONS = frozenset({OP_GET_PROVENANCE})


def derive_tx_id(creator: str, nonce: int, operation: str, args: dict) -> str:
    return canonical_digest_hex({
        "creator": creator, "nonce": nonce, "operation": operation, "args": args,
    })


class StateView:
    """Read-recording view over a committed snapshot.

    Records the version of every key touched (None for absent keys) so the
    envelope's read set captures exactly what the execution depended on.
    Returned records are deep copies; mutating them never leaks into the
    snapshot.
    """

    def __init__(self, state):
        self._state = state
        self.reads: dict = {}  # rendered key -> Version | None

    def get(self, namespace: str, entity_id: str):
        record, _ = self.get_with_version(namespace, entity_id)
        return record

    def get_with_version(self, namespace: str, entity_id: str):
        key = f"{namespace}/{entity_id}"
        entry = self._state.get(key)
        if key not in self.reads:
            self.reads[key] = entry[1] if entry else None
        if entry is None:
            return None, None
        return copy.deepcopy(entry[0]), entry[1]


class WriteSet:
    def __init__(self):
        self._writes: dict = {}

    def put(self, namespace: str, entity_id: str, record: dict):
        self._writes[f"{namespace}/{entity_id}"] = record

    def delete(self, namespace: str, entity_id: str):
        self._writes[f"{namespace}/{entity_id}"] = None

    def items(self):
        return sorted(self._writes.items())


@dataclass
class ExecutionResult:
    result: dict
    read_set: list  # [(rendered_key, Version | None)] sorted by key
    write_set: list  # [(rendered_key, record | None)] sorted by key


def execute(operation: str, caller: str, args: dict, state, tx_id: str) -> ExecutionResult:
    """Run one chaincode operation against a snapshot."""
    handler = _DISPATCH.get(operation)
    if handler is None:
        raise ChaincodeError("UNKNOWN_OPERATION", f"no such operation {operation!r}")
    _check_args(operation, args)
    view = StateView(state)
    writes = WriteSet()
    result = handler(caller, args, view, writes, tx_id)
    return ExecutionResult(
        result=result,
        read_set=sorted(view.reads.items()),
        write_set=writes.items(),
    )


# -- argument shape checks ----------------------------------------------------

_ARG_SPECS = {
    OP_INITIATE_AUCTION: {"buyersLst": list, "sellersLst": list, "auctioneer": (str, type(None))},
    OP_CREATE_COMMODITY: {"caller": str, "description": str, "idealPrice": int,
                          "trackRenovations": bool},
    OP_CREATE_LISTING: {"exchangeName": str, "commodityId": str, "sellerId": str,
                        "reservePrice": int, "auctionId": str},
    OP_MAKE_BID: {"listingId": str, "potentialBuyer": str, "bidPrice": int},
    OP_CLOSE_BIDDING: {"listingId": str, "caller": str},
    OP_TRANSFER_ASSETS: {"listingId": str, "proposedNewOwner": str},
    OP_ADD_RENOVATION: {"commodityId": str, "caller": str, "date": str, "cost": int,
                        "description": str},
    OP_GET_PROVENANCE: {"commodityId": str},
    OP_CLOSE_ENVIRONMENT: {"auctionId": str, "caller": str},
    OP_REGISTER_IDENTITY: {"identityId": str, "displayName": str, "role": str,
                           "registeredAtSeq": int},
}


def _check_args(operation: str, args):
    spec = _ARG_SPECS[operation]
    if not isinstance(args, dict):
        raise ChaincodeError("BAD_ARGS", "args must be a record")
    missing = set(spec) - set(args)
    extra = set(args) - set(spec)
    if missing or extra:
        raise ChaincodeError(
            "BAD_ARGS", f"missing={sorted(missing)} unexpected={sorted(extra)}"
        )
    for name, kind in spec.items():
        value = args[name]
        if isinstance(value, bool) and kind is int:
            raise ChaincodeError("BAD_ARGS", f"{name} must be an integer")
        if not isinstance(value, kind):
            raise ChaincodeError("BAD_ARGS", f"{name} has the wrong type")


# -- shared lookups -----------------------------------------------------------

def _identity(view: StateView, identity_id: str, error_code: str = "UNKNOWN_IDENTITY"):
    rec = view.get("identity", identity_id)
    if rec is None:
        raise ChaincodeError(error_code, f"identity {identity_id!r} not registered")
    return rec


def _require_role(view: StateView, identity_id: str, role: str):
    rec = _identity(view, identity_id)
    if rec["role"] != role:
        raise ChaincodeError(
            "ROLE_MISMATCH", f"{identity_id} holds {rec['role']}, {role} required"
        )
    return rec


def _require_caller(args_actor: str, caller: str):
    if args_actor != caller:
        raise ChaincodeError(
            "CALLER_MISMATCH",
            f"envelope creator {caller!r} does not match actor {args_actor!r}",
        )


# -- operations ---------------------------------------------------------------

def _initiate_auction_environment(caller, args, view, writes, tx_id):
    buyers, sellers = args["buyersLst"], args["sellersLst"]
    auctioneer = args["auctioneer"]
    if not buyers:
        raise ChaincodeError("EMPTY_BUYERS", "buyersLst must be non-empty")
    if not sellers:
        raise ChaincodeError("EMPTY_SELLERS", "sellersLst must be non-empty")
    if not auctioneer:
        raise ChaincodeError("NULL_AUCTIONEER", "auctioneer must be non-null")
    if len(set(buyers)) != len(buyers) or len(set(sellers)) != len(sellers):
        raise ChaincodeError("DUPLICATE_PARTICIPANT", "buyer/seller lists must be duplicate-free")
    _require_role(view, auctioneer, "AUCTIONEER")
    for member in [*buyers, *sellers]:
        _require_role(view, member, "MEMBER")
    auction_id = f"a-{tx_id[:20]}"
    writes.put("environment", auction_id, {
        "auctionId": auction_id,
        "activeBuyers": list(buyers),
        "activeSellers": list(sellers),
        "activeAuctioneer": auctioneer,
        "open": True,
        "listingIds": [],
    })
    return {"auctionId": auction_id}


def _create_commodity(caller, args, view, writes, tx_id):
    _require_caller(args["caller"], caller)
    _identity(view, caller)
    if args["idealPrice"] < 0:
        raise ChaincodeError("NEGATIVE_PRICE", "idealPrice must be >= 0")
    commodity_id = f"c-{tx_id[:20]}"
    writes.put("commodity", commodity_id, {
        "commodityId": commodity_id,
        "description": args["description"],
        "idealPrice": args["idealPrice"],
        "owner": caller,
        "ownershipHistory": [
            {"owner": caller, "acquiredAtVersion": None, "viaListingId": GENESIS_MARKER},
        ],
        "renovationIds": [],
        "trackRenovations": args["trackRenovations"],
        "activeListingId": None,
    })
    return {"commodityId": commodity_id}


def _create_commodity_listing(caller, args, view, writes, tx_id):
    _require_caller(args["sellerId"], caller)
    if not args["exchangeName"].strip():
        raise ChaincodeError("UNKNOWN_EXCHANGE", "exchangeName must be non-empty")
    commodity = view.get("commodity", args["commodityId"])
    if commodity is None:
        raise ChaincodeError("UNKNOWN_COMMODITY", f"no commodity {args['commodityId']!r}")
    env = view.get("environment", args["auctionId"])
    if env is None:
        raise ChaincodeError("UNKNOWN_ENVIRONMENT", f"no auction {args['auctionId']!r}")
    if commodity["owner"] != args["sellerId"]:
        raise ChaincodeError("NOT_OWNER", f"{args['sellerId']} does not own the commodity")
    if args["sellerId"] not in env["activeSellers"]:
        raise ChaincodeError("NOT_ACTIVE_SELLER", f"{args['sellerId']} not an active seller")
    if not env["open"]:
        raise ChaincodeError("ENV_CLOSED", "auction environment is closed")
    if commodity["activeListingId"] is not None:
        raise ChaincodeError("ALREADY_LISTED", "commodity is tied to an open listing")
    if args["reservePrice"] < 0:
        raise ChaincodeError("NEGATIVE_RESERVE", "reservePrice must be >= 0")
    listing_id = f"l-{tx_id[:20]}"
    writes.put("listing", listing_id, {
        "listingId": listing_id,
        "exchangeName": args["exchangeName"],
        "commodityId": args["commodityId"],
        "sellerId": args["sellerId"],
        "reservePrice": args["reservePrice"],
        "offerIds": [],
        "maxBid": None,
        "state": FOR_SALE,
        "doneBuyer": None,
        "auctionId": args["auctionId"],
        "transferred": False,
    })
    commodity["activeListingId"] = listing_id
    writes.put("commodity", args["commodityId"], commodity)
    env["listingIds"].append(listing_id)
    writes.put("environment", args["auctionId"], env)
    return {"listingId": listing_id}


def _make_bid(caller, args, view, writes, tx_id):
    _require_caller(args["potentialBuyer"], caller)
    listing = view.get("listing", args["listingId"])
    if listing is None:
        raise ChaincodeError("UNKNOWN_LISTING", f"no listing {args['listingId']!r}")
    if listing["state"] != FOR_SALE:
        raise ChaincodeError("LISTING_NOT_OPEN", f"listing is {listing['state']}")
    _identity(view, args["potentialBuyer"], error_code="UNKNOWN_BUYER")
    env = view.get("environment", listing["auctionId"])
    if args["potentialBuyer"] not in env["activeBuyers"]:
        raise ChaincodeError("NOT_ACTIVE_BUYER", f"{args['potentialBuyer']} not an active buyer")
    if args["potentialBuyer"] == listing["sellerId"]:
        raise ChaincodeError("SELF_BID", "seller may not bid on their own listing")
    bid_price = args["bidPrice"]
    max_bid = listing["maxBid"]
    if max_bid is None:
        if bid_price < 1:
            raise ChaincodeError("BID_TOO_LOW", "first bid must be at least 1")
    elif bid_price <= max_bid["bidPrice"]:
        raise ChaincodeError(
            "BID_TOO_LOW", f"bid {bid_price} not above current max {max_bid['bidPrice']}"
        )
    offer_id = f"o-{tx_id[:20]}"
    offer = {
        "offerId": offer_id,
        "listingId": args["listingId"],
        "member": args["potentialBuyer"],
        "bidPrice": bid_price,
        "seq": len(listing["offerIds"]) + 1,
    }
    listing["offerIds"].append(offer_id)
    listing["maxBid"] = {"offerId": offer_id, "bidPrice": bid_price}
    writes.put("offer", offer_id, offer)
    writes.put("listing", args["listingId"], listing)
    return {"offerId": offer_id, "maxBid": listing["maxBid"]}


def _close_bidding(caller, args, view, writes, tx_id):
    _require_caller(args["caller"], caller)
    listing = view.get("listing", args["listingId"])
    if listing is None:
        raise ChaincodeError("UNKNOWN_LISTING", f"no listing {args['listingId']!r}")
    env = view.get("environment", listing["auctionId"])
    if env is None or caller != env["activeAuctioneer"]:
        raise ChaincodeError("NOT_AUCTIONEER", f"{caller} is not the auctioneer")
    if listing["state"] != FOR_SALE:
        raise ChaincodeError("ALREADY_CLOSED", f"listing is {listing['state']}")
    max_bid = listing["maxBid"]
    if max_bid is not None and max_bid["bidPrice"] >= listing["reservePrice"]:
        offer = view.get("offer", max_bid["offerId"])
        listing["state"] = SOLD
        listing["doneBuyer"] = offer["member"]
    else:
        listing["state"] = RESERVE_NOT_MET
        commodity = view.get("commodity", listing["commodityId"])
        commodity["activeListingId"] = None
        writes.put("commodity", listing["commodityId"], commodity)
    writes.put("listing", args["listingId"], listing)
    return {"state": listing["state"], "doneBuyer": listing["doneBuyer"]}


def _transfer_assets(caller, args, view, writes, tx_id):
    listing = view.get("listing", args["listingId"])
    if listing is None:
        raise ChaincodeError("UNKNOWN_LISTING", f"no listing {args['listingId']!r}")
    _identity(view, args["proposedNewOwner"])
    if (
        listing["state"] == SOLD
        and args["proposedNewOwner"] == listing["doneBuyer"]
        and not listing["transferred"]
    ):
        commodity, version = view.get_with_version("commodity", listing["commodityId"])
        commodity["owner"] = args["proposedNewOwner"]
        commodity["ownershipHistory"].append({
            "owner": args["proposedNewOwner"],
            "acquiredAtVersion": version_record(version),
            "viaListingId": args["listingId"],
        })
        commodity["activeListingId"] = None
        listing["transferred"] = True
        writes.put("commodity", listing["commodityId"], commodity)
        writes.put("listing", args["listingId"], listing)
        return {"outcome": TRANSFERRED, "newOwner": args["proposedNewOwner"]}
    return {"outcome": NO_CHANGE, "newOwner": None}


def _add_renovation(caller, args, view, writes, tx_id):
    _require_caller(args["caller"], caller)
    commodity, version = view.get_with_version("commodity", args["commodityId"])
    if commodity is None:
        raise ChaincodeError("UNKNOWN_COMMODITY", f"no commodity {args['commodityId']!r}")
    if not commodity["trackRenovations"]:
        raise ChaincodeError("RENOVATIONS_DISABLED", "commodity does not track renovations")
    if commodity["owner"] != caller:
        raise ChaincodeError("NOT_OWNER", f"{caller} does not own the commodity")
    if commodity["activeListingId"] is not None:
        listing = view.get("listing", commodity["activeListingId"])
        if listing is not None and listing["state"] == FOR_SALE:
            raise ChaincodeError(
                "LISTED_COMMODITY_FROZEN", "commodity is under an open listing"
            )
    try:
        parsed = date.fromisoformat(args["date"])
    except ValueError:
        parsed = None
    if parsed is None or len(args["date"]) != 10:
        raise ChaincodeError("BAD_DATE", f"{args['date']!r} is not an ISO calendar date")
    if args["cost"] < 0:
        raise ChaincodeError("NEGATIVE_COST", "cost must be >= 0")
    renovation_id = f"r-{tx_id[:20]}"
    writes.put("renovation", renovation_id, {
        "renovationId": renovation_id,
        "commodityId": args["commodityId"],
        "date": args["date"],
        "cost": args["cost"],
        "renovatingOwner": caller,
        "description": args["description"],
        "commodityVersion": version_record(version),
    })
    commodity["renovationIds"].append(renovation_id)
    writes.put("commodity", args["commodityId"], commodity)
    return {"renovationId": renovation_id}


def _get_provenance(caller, args, view, writes, tx_id):
    commodity = view.get("commodity", args["commodityId"])
    if commodity is None:
        raise ChaincodeError("UNKNOWN_COMMODITY", f"no commodity {args['commodityId']!r}")
    renovations = [
        view.get("renovation", rid) for rid in commodity["renovationIds"]
    ]
    return {
        "commodityId": args["commodityId"],
        "owner": commodity["owner"],
        "ownershipHistory": commodity["ownershipHistory"],
        "renovations": renovations,
        "timeline": provenance_timeline(commodity, renovations),
    }


def provenance_timeline(commodity: dict, renovations: list) -> list:
    """Ownership changes and renovations merged in commit order.

    Both entry kinds carry the commodity version their transaction read;
    since every such transaction also writes the commodity, those versions
    are distinct and totally order the events.
    """
    events = []
    for entry in commodity["ownershipHistory"]:
        events.append((_version_sort_key(entry["acquiredAtVersion"]), 0, {
            "kind": "OWNERSHIP",
            "owner": entry["owner"],
            "viaListingId": entry["viaListingId"],
            "version": entry["acquiredAtVersion"],
        }))
    for ren in renovations:
        events.append((_version_sort_key(ren["commodityVersion"]), 1, {
            "kind": "RENOVATION",
            "renovationId": ren["renovationId"],
            "date": ren["date"],
            "cost": ren["cost"],
            "renovatingOwner": ren["renovatingOwner"],
            "version": ren["commodityVersion"],
        }))
    events.sort(key=lambda e: (e[0], e[1]))
    return [e[2] for e in events]


def _version_sort_key(rec):
    return (-1, -1) if rec is None else (rec[0], rec[1])


def _close_environment(caller, args, view, writes, tx_id):
    _require_caller(args["caller"], caller)
    env = view.get("environment", args["auctionId"])
    if env is None:
        raise ChaincodeError("UNKNOWN_ENVIRONMENT", f"no auction {args['auctionId']!r}")
    if caller != env["activeAuctioneer"]:
        raise ChaincodeError("NOT_AUCTIONEER", f"{caller} is not the auctioneer")
    if not env["open"]:
        raise ChaincodeError("ENV_CLOSED", "environment already closed")
    for listing_id in env["listingIds"]:
        listing = view.get("listing", listing_id)
        if listing is not None and listing["state"] == FOR_SALE:
            raise ChaincodeError(
                "OPEN_LISTINGS_REMAIN", f"listing {listing_id} is still FOR_SALE"
            )
    env["open"] = False
    writes.put("environment", args["auctionId"], env)
    return {"auctionId": args["auctionId"], "open": False}


def _register_identity(caller, args, view, writes, tx_id):
    _require_caller(args["identityId"], caller)
    if not args["displayName"].strip():
        raise ChaincodeError("EMPTY_NAME", "displayName must be non-empty")
    if args["role"] not in ("MEMBER", "AUCTIONEER"):
        raise ChaincodeError("BAD_ARGS", f"unknown role {args['role']!r}")
    existing = view.get("identity", args["identityId"])
    if existing is not None:
        raise ChaincodeError("IDENTITY_EXISTS", f"{args['identityId']} already registered")
    writes.put("identity", args["identityId"], {
        "identityId": args["identityId"],
        "displayName": args["displayName"],
        "role": args["role"],
        "registeredAtSeq": args["registeredAtSeq"],
    })
    return {"identityId": args["identityId"]}


_DISPATCH = {
    OP_INITIATE_AUCTION: _initiate_auction_environment,
    OP_CREATE_COMMODITY: _create_commodity,
    OP_CREATE_LISTING: _create_commodity_listing,
    OP_MAKE_BID: _make_bid,
    OP_CLOSE_BIDDING: _close_bidding,
    OP_TRANSFER_ASSETS: _transfer_assets,
    OP_ADD_RENOVATION: _add_renovation,
    OP_GET_PROVENANCE: _get_provenance,
    OP_CLOSE_ENVIRONMENT: _close_environment,
    OP_REGISTER_IDENTITY: _register_identity,
}

OPERATIONS = frozenset(_DISPATCH)
