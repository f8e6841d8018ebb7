"""HTTP surface: mutating endpoints, queries, and the live event stream.

Built directly on the stdlib threaded HTTP server. Mutations need the
demo signature headers (X-Identity, X-Signature over the exact body
bytes); queries are public. The event stream emits one event per line,
prefixed by its eventSeq, until the client disconnects.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .canonical import canonical_serialize
from .errors import MembershipError, PipelineError
from .membership import Role, Signature
from .service import Platform

_MUTATION_ROUTES = {
    # (verb pattern) -> (operation, path namespace for the 404 check)
    ("auctions",): ("initiate_auction_environment", None, None),
    ("commodities",): ("create_commodity", None, "caller"),
    ("listings",): ("create_commodity_listing", None, "sellerId"),
    ("listings", "*", "bids"): ("make_bid", "listing", "potentialBuyer"),
    ("listings", "*", "close"): ("close_bidding", "listing", "caller"),
    ("listings", "*", "transfer"): ("transfer_assets", "listing", None),
    ("commodities", "*", "renovations"): ("add_renovation", "commodity", "caller"),
    ("auctions", "*", "close"): ("close_environment", "environment", "caller"),
}

_PATH_ARG_NAMES = {"listing": "listingId", "commodity": "commodityId",
                   "environment": "auctionId"}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "blocklot"

    @property
    def platform(self) -> Platform:
        return self.server.platform

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    # -- plumbing -----------------------------------------------------------

    def _send(self, status: int, record, headers=None):
        body = canonical_serialize(record) + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers",
                         "Content-Type, X-Identity, X-Signature")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")

    def _error(self, status: int, code: str, message: str = ""):
        self._send(status, {"error": code, "message": message})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _segments(self):
        parsed = urlparse(self.path)
        return [s for s in parsed.path.split("/") if s], parse_qs(parsed.query)

    # -- verbs ---------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        segments, query = self._segments()
        try:
            self._route_get(segments, query)
        except BrokenPipeError:
            pass
        except Exception as exc:  # surface unexpected faults as 500s, not hangs
            try:
                self._error(500, "INTERNAL", str(exc))
            except Exception:
                pass

    def do_POST(self):
        segments, _ = self._segments()
        body = self._read_body()
        try:
            self._route_post(segments, body)
        except BrokenPipeError:
            pass
        except Exception as exc:
            try:
                self._error(500, "INTERNAL", str(exc))
            except Exception:
                pass

    # -- GET routes -------------------------------------------------------------

    def _route_get(self, segments, query):
        platform = self.platform
        if not segments:
            if self.server.ui_dir:
                self.send_response(307)
                self.send_header("Location", "/ui/")
                self.send_header("Content-Length", "0")
                self.end_headers()
                return
            self._send(200, {"service": "blocklot", "endpoints": "/listings"})
            return
        if segments[0] == "ui" and self.server.ui_dir:
            self._serve_static(segments[1:])
            return
        if segments == ["listings"]:
            self._send(200, {"listings": platform.listings()})
            return
        if segments == ["auctions"]:
            self._send(200, {"auctions": platform.auctions()})
            return
        if segments == ["identities"]:
            self._send(200, {"identities": platform.identities()})
            return
        if segments == ["chain", "verify"]:
            self._send(200, platform.verify().record())
            return
        if segments == ["events"]:
            since = 0
            if "since" in query:
                try:
                    since = int(query["since"][0])
                except ValueError:
                    self._error(422, "BAD_QUERY", "since must be an integer")
                    return
            self._stream_events(max(since, 0))
            return
        if len(segments) == 2 and segments[0] == "listings":
            self._send_record(platform.get_record("listing", segments[1]))
            return
        if len(segments) == 2 and segments[0] == "commodities":
            self._send_record(platform.get_record("commodity", segments[1]))
            return
        if (len(segments) == 3 and segments[0] == "commodities"
                and segments[2] == "provenance"):
            if platform.get_record("commodity", segments[1]) is None:
                self._error(404, "NOT_FOUND", f"no commodity {segments[1]}")
                return
            self._send(200, platform.provenance(segments[1]))
            return
        if len(segments) == 2 and segments[0] == "blocks":
            try:
                number = int(segments[1])
            except ValueError:
                self._error(404, "NOT_FOUND", "block numbers are integers")
                return
            self._send_record(platform.block_record(number))
            return
        if len(segments) == 2 and segments[0] == "transactions":
            self._send_record(platform.transaction(segments[1]))
            return
        self._error(404, "NOT_FOUND", self.path)

    def _send_record(self, record):
        if record is None:
            self._error(404, "NOT_FOUND", self.path)
        else:
            self._send(200, record)

    def _serve_static(self, segments):
        root = Path(self.server.ui_dir).resolve()
        rel = "/".join(segments) or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            self._error(404, "NOT_FOUND", self.path)
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._error(404, "NOT_FOUND", self.path)
            return
        body = target.read_bytes()
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _stream_events(self, since: int):
        self.send_response(200)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self._cors()
        self.end_headers()
        self.close_connection = True
        platform = self.platform
        while not platform.closed:
            events = platform.wait_events(since, timeout=0.5)
            if not events:
                continue
            try:
                for event in events:
                    line = (str(event["eventSeq"]).encode("ascii") + b" "
                            + canonical_serialize(event) + b"\n")
                    self.wfile.write(line)
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return
            since = events[-1]["eventSeq"]

    # -- POST routes ----------------------------------------------------------------

    def _route_post(self, segments, body):
        if segments == ["identities"]:
            self._register(body)
            return
        route = self._match_mutation(segments)
        if route is None:
            self._error(404, "NOT_FOUND", self.path)
            return
        operation, namespace, actor_field = route
        identity = self._authenticate(body)
        if identity is None:
            return
        args = self._parse_body(body)
        if args is None:
            return
        if namespace:
            entity_id = segments[1]
            if self.platform.get_record(namespace, entity_id) is None:
                self._error(404, "NOT_FOUND", f"no {namespace} {entity_id}")
                return
            args[_PATH_ARG_NAMES[namespace]] = entity_id
        if actor_field:
            args.setdefault(actor_field, identity)
        self._submit(identity, operation, args)

    @staticmethod
    def _match_mutation(segments):
        for pattern, route in _MUTATION_ROUTES.items():
            if len(pattern) != len(segments):
                continue
            if all(p == "*" or p == s for p, s in zip(pattern, segments)):
                return route
        return None

    def _register(self, body):
        args = self._parse_body(body)
        if args is None:
            return
        role = args.get("role")
        if role not in ("MEMBER", "AUCTIONEER"):
            self._error(422, "BAD_BODY", "role must be MEMBER or AUCTIONEER")
            return
        if not isinstance(args.get("displayName"), str):
            self._error(422, "BAD_BODY", "displayName must be a string")
            return
        try:
            issued = self.platform.register_identity(args["displayName"], Role(role))
        except MembershipError as exc:
            self._error(409, exc.code, exc.message)
            return
        self._send(202, issued)

    def _parse_body(self, body):
        try:
            parsed = json.loads(body.decode("utf-8")) if body else {}
        except (ValueError, UnicodeDecodeError):
            self._error(422, "BAD_BODY", "request body must be JSON")
            return None
        if not isinstance(parsed, dict):
            self._error(422, "BAD_BODY", "request body must be a JSON object")
            return None
        return parsed

    def _authenticate(self, body):
        identity = self.headers.get("X-Identity")
        mac = self.headers.get("X-Signature")
        if not identity or not mac:
            self._error(401, "UNAUTHENTICATED", "X-Identity and X-Signature required")
            return None
        if not self.platform.registry.verify(identity, body, Signature(identity, mac)):
            self._error(401, "BAD_SIGNATURE", "signature does not verify for identity")
            return None
        return identity

    def _submit(self, identity, operation, args):
        try:
            tx_id, result = self.platform.submit_operation(identity, operation, args)
        except PipelineError as exc:
            code = getattr(exc, "chaincode_code", exc.code)
            status = 422 if code == "BAD_ARGS" else 409
            self._error(status, code, exc.message)
            return
        self._send(202, {"txId": tx_id, "result": result})


class ApiServer:
    """Threaded HTTP server bound to a Platform."""

    def __init__(self, platform: Platform, host: str = "127.0.0.1", port: int = 0,
                 ui_dir=None):
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.platform = platform
        self.httpd.ui_dir = str(ui_dir) if ui_dir else None
        self.httpd.daemon_threads = True
        self.host, self.port = self.httpd.server_address[:2]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start_background(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self):
        self.httpd.serve_forever()

    def shutdown(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=2)
