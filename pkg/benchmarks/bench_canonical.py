"""Benchmark: compiled canonical-serializer kernel vs pure-Python fallback.

Serialization runs on every signature, endorsement comparison and hash in
the pipeline, so this is the hot kernel. Run:

    python3 benchmarks/bench_canonical.py [--seconds 1.0]
"""

import argparse
import time

from blocklot import _canonical_py

try:
    from blocklot import _canonical_cy
except ImportError:
    _canonical_cy = None


def envelope_record(i: int) -> dict:
    """Shaped like a committed bid envelope, the dominant payload."""
    tx = f"{i:064x}"
    return {
        "txId": tx,
        "creator": "id-00004",
        "operation": "make_bid",
        "args": {"listingId": f"l-{tx[:20]}", "potentialBuyer": "id-00004",
                 "bidPrice": 10_000 + i},
        "nonce": i,
        "readSet": [
            {"key": f"listing/l-{tx[:20]}", "version": [i, 0]},
            {"key": "identity/id-00004", "version": [1, 3]},
            {"key": f"environment/a-{tx[:20]}", "version": [2, 0]},
        ],
        "writeSet": [
            {"key": f"listing/l-{tx[:20]}", "value": {
                "listingId": f"l-{tx[:20]}", "exchangeName": "fineart",
                "commodityId": f"c-{tx[:20]}", "sellerId": "id-00002",
                "reservePrice": 25_000, "offerIds": [f"o-{tx[:20]}"],
                "maxBid": {"offerId": f"o-{tx[:20]}", "bidPrice": 10_000 + i},
                "state": "FOR_SALE", "doneBuyer": None,
                "auctionId": f"a-{tx[:20]}", "transferred": False}},
            {"key": f"offer/o-{tx[:20]}", "value": {
                "offerId": f"o-{tx[:20]}", "listingId": f"l-{tx[:20]}",
                "member": "id-00004", "bidPrice": 10_000 + i, "seq": i % 40}},
        ],
        "endorsements": [{"signer": f"id-0000{j}", "mac": "ab" * 32}
                         for j in (1, 2, 3)],
        "clientSignature": {"signer": "id-00004", "mac": "cd" * 32},
    }


WORKLOADS = {
    "bid envelope": [envelope_record(i) for i in range(64)],
    "block line (8 envelopes)": [
        {"number": 12, "prevHash": "ef" * 32, "dataHash": "01" * 32,
         "envelopes": [envelope_record(i + j) for j in range(8)],
         "validityFlags": ["VALID"] * 8}
        for i in range(8)
    ],
    "small record": [{"key": f"k{i}", "version": [i, 0]} for i in range(64)],
}


def rate(dumps, payloads, seconds: float) -> float:
    # warm up, then count full passes until the budget elapses
    for value in payloads:
        dumps(value)
    done = 0
    start = time.perf_counter()
    while time.perf_counter() - start < seconds:
        for value in payloads:
            dumps(value)
        done += len(payloads)
    return done / (time.perf_counter() - start)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seconds", type=float, default=1.0,
                        help="measurement budget per (workload, kernel)")
    args = parser.parse_args()

    if _canonical_cy is None:
        print("compiled kernel not built; only the pure-Python path is available")

    print(f"{'workload':<28} {'pure py/s':>12} {'cython/s':>12} {'speedup':>8}")
    for name, payloads in WORKLOADS.items():
        pure = rate(_canonical_py.dumps_canonical, payloads, args.seconds)
        if _canonical_cy is not None:
            fast = rate(_canonical_cy.dumps_canonical, payloads, args.seconds)
            print(f"{name:<28} {pure:>12,.0f} {fast:>12,.0f} {fast / pure:>7.2f}x")
        else:
            print(f"{name:<28} {pure:>12,.0f} {'-':>12} {'-':>8}")

    sample = WORKLOADS["bid envelope"][0]
    if _canonical_cy is not None:
        assert (_canonical_cy.dumps_canonical(sample)
                == _canonical_py.dumps_canonical(sample))
        print("outputs byte-identical: ok")


if __name__ == "__main__":
    main()
