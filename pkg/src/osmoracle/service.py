"""The oracle adapter: request parsing, dispatch, gas estimation and HTTP.

Request documents are flat JSON objects whose fields mirror the contract-side
request builder, e.g.::

    {"function": "nodesInArea", "key": "amenity", "value": "cafe",
     "area": "Boston", "limit": 5}

The external-adapter envelope ``{"id": ..., "data": {...}}`` is accepted too.
Integer fields take JSON integers or decimal strings; coordinates are always
pre-scaled integers (degrees * 10**8).

Successful responses are ``{"payload_hex", "estimated_gas"[, "match_count"]}``
and failures ``{"error": {"code", "message"}}``. Response bodies are a pure
function of the request bytes and the store.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from collections.abc import Callable
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from . import abi
from .abi import AbiPayload, Layout
from .errors import BadRequest, InvalidLimit, OracleError, UnknownFunction
from .geocoder import Geocoder
from .model import INT64_MAX, INT64_MIN, UINT64_MAX, BoundingBox, ObjectType
from .query import QueryEngine, TagFilter, check_limit
from .spatial import SpatialIndex

log = logging.getLogger(__name__)

_STR, _INT, _ID, _STRS = "text", "int64", "id", "text[]"

_FILTER = {"key": _STR, "value": _STR}
_BOX = {"south": _INT, "west": _INT, "north": _INT, "east": _INT}

FUNCTIONS: dict[str, dict[str, str]] = {
    "nodesInArea": {**_FILTER, "area": _STR, "limit": _INT},
    "waysInArea": {**_FILTER, "area": _STR, "limit": _INT},
    "nodeCountInArea": {**_FILTER, "area": _STR},
    "wayCountInArea": {**_FILTER, "area": _STR},
    "nodesInBB": {**_FILTER, **_BOX, "limit": _INT},
    "waysInBB": {**_FILTER, **_BOX, "limit": _INT},
    "nodeCountInBB": {**_FILTER, **_BOX},
    "wayCountInBB": {**_FILTER, **_BOX},
    "nodeTagQuery": {"ID": _ID, "tags": _STRS},
    "wayTagQuery": {"ID": _ID, "tags": _STRS},
    "wayGeometry": {"ID": _ID},
    "wayCount": {"ID": _ID},
    "geocode": {"address": _STR},
    "reverseGeocode": {"lat": _INT, "lon": _INT},
}

LAYOUTS: dict[str, Layout] = {
    **{f: Layout.INT64_ARRAY for f in ("nodesInArea", "waysInArea", "nodesInBB", "waysInBB")},
    **{
        f: Layout.INT64_SCALAR
        for f in ("nodeCountInArea", "wayCountInArea", "nodeCountInBB", "wayCountInBB", "wayCount")
    },
    "nodeTagQuery": Layout.STRING_ARRAY,
    "wayTagQuery": Layout.STRING_ARRAY,
    "wayGeometry": Layout.COORD_PAIR_LIST,
    "geocode": Layout.GEOCODE_TUPLE,
    "reverseGeocode": Layout.REVERSE_TUPLE,
}

_INT_TEXT = re.compile(r"[+-]?\d+")


@dataclass(frozen=True)
class OracleRequest:
    function: str
    params: dict[str, Any]


@dataclass(frozen=True)
class OracleResponse:
    payload: AbiPayload
    estimated_calldata_gas: int
    match_count: int | None = None

    def to_json(self) -> dict[str, Any]:
        body: dict[str, Any] = {"payload_hex": self.payload.hex(), "estimated_gas": self.estimated_calldata_gas}
        if self.match_count is not None:
            body["match_count"] = self.match_count
        return body


@dataclass(frozen=True)
class GasParams:
    cost_per_zero_byte: int = 4
    cost_per_nonzero_byte: int = 16

    def __post_init__(self) -> None:
        if self.cost_per_zero_byte <= 0 or self.cost_per_nonzero_byte <= 0:
            raise ValueError("gas costs must be positive")


def estimate_gas(payload: AbiPayload | bytes, g: GasParams = GasParams()) -> int:
    """Calldata cost of delivering ``payload``."""
    data = payload.data if isinstance(payload, AbiPayload) else payload
    zeros = data.count(0)
    return zeros * g.cost_per_zero_byte + (len(data) - zeros) * g.cost_per_nonzero_byte


# -- parsing --


def _coerce(field: str, kind: str, value: Any) -> Any:
    if kind == _STR:
        if not isinstance(value, str):
            raise BadRequest(field, "expected a string")
        return value
    if kind == _STRS:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise BadRequest(field, "expected an array of strings")
        if not value:
            raise BadRequest(field, "must not be empty")
        return list(value)
    if isinstance(value, bool):
        raise BadRequest(field, "expected an integer")
    if isinstance(value, str) and _INT_TEXT.fullmatch(value.strip()):
        value = int(value)
    if not isinstance(value, int):
        raise BadRequest(field, "expected an integer")
    lo, hi = (1, UINT64_MAX) if kind == _ID else (INT64_MIN, INT64_MAX)
    if not lo <= value <= hi:
        raise BadRequest(field, f"out of range [{lo}, {hi}]")
    return value


def parse_request(document: bytes | str) -> OracleRequest:
    try:
        doc = json.loads(document)
    except (ValueError, UnicodeDecodeError) as exc:
        raise BadRequest("document", f"not valid UTF-8 JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise BadRequest("document", "expected a JSON object")
    if isinstance(doc.get("data"), dict) and set(doc) <= {"id", "data"}:
        doc = doc["data"]
    if "function" not in doc:
        raise BadRequest("function", "missing")
    function = doc["function"]
    if not isinstance(function, str) or function not in FUNCTIONS:
        raise UnknownFunction(f"unknown function {function!r}")
    fields = FUNCTIONS[function]
    for name in doc:
        if name != "function" and name not in fields:
            raise BadRequest(name, "unexpected field")
    params = {}
    for name, kind in fields.items():
        if name not in doc:
            raise BadRequest(name, "missing")
        params[name] = _coerce(name, kind, doc[name])
    if "key" in params and not params["key"]:
        raise BadRequest("key", "must not be empty")
    return OracleRequest(function, params)


# -- dispatch --


class OracleService:
    """Answers parsed requests against one immutable index."""

    def __init__(
        self,
        index: SpatialIndex,
        gas: GasParams = GasParams(),
        max_results: int | None = None,
        brute_force: bool = False,
    ) -> None:
        self.index = index
        self.engine = QueryEngine(index, brute_force=brute_force)
        self.geocoder = Geocoder(index)
        self.gas = gas
        self.max_results = max_results

    def _limit(self, limit: int) -> int:
        check_limit(limit)
        if self.max_results is not None and limit > self.max_results:
            raise InvalidLimit(f"limit {limit} exceeds the server cap of {self.max_results}")
        return limit

    def dispatch(self, req: OracleRequest) -> OracleResponse:
        fn, p = req.function, req.params
        payload, count = self._run(fn, p)
        return OracleResponse(payload, estimate_gas(payload, self.gas), count)

    def _run(self, fn: str, p: dict[str, Any]) -> tuple[AbiPayload, int | None]:
        e = self.engine
        kind = ObjectType.WAY if fn.startswith("way") else ObjectType.NODE
        if fn in ("nodesInArea", "waysInArea", "nodesInBB", "waysInBB"):
            limit = self._limit(p["limit"])
            ids = self._matches(fn, kind, p)
            return abi.encode_id_array(ids[:limit]), len(ids)
        if fn in ("nodeCountInArea", "wayCountInArea", "nodeCountInBB", "wayCountInBB"):
            n = len(self._matches(fn, kind, p))
            return abi.encode_int64(n), n
        if fn in ("nodeTagQuery", "wayTagQuery"):
            return abi.encode_string_array(e.object_tag_query(kind, p["ID"], p["tags"])), None
        if fn == "wayGeometry":
            return abi.encode_coord_pairs(e.way_geometry(p["ID"])), None
        if fn == "wayCount":
            return abi.encode_int64(e.way_node_count(p["ID"])), None
        if fn == "geocode":
            return abi.encode_geocode(self.geocoder.geocode(p["address"])), None
        if fn == "reverseGeocode":
            return abi.encode_reverse(self.geocoder.reverse_geocode(p["lat"], p["lon"])), None
        raise UnknownFunction(f"unknown function {fn!r}")

    def _matches(self, fn: str, kind: ObjectType, p: dict[str, Any]) -> list[int]:
        f = TagFilter(p["key"], p["value"])
        if "area" in p:
            return self.engine.area_matches(kind, f, p["area"])
        return self.engine.bbox_matches(kind, f, BoundingBox(p["south"], p["west"], p["north"], p["east"]))

    def handle(self, document: bytes) -> tuple[int, bytes]:
        """Full request cycle: bytes in, HTTP status and JSON body out."""
        try:
            body = self.dispatch(parse_request(document)).to_json()
            status = HTTPStatus.OK
        except OracleError as exc:
            status = ERROR_STATUS.get(exc.code, HTTPStatus.BAD_REQUEST)
            body = error_body(exc)
        return int(status), encode_json(body)


ERROR_STATUS = {
    "BadRequest": HTTPStatus.BAD_REQUEST,
    "UnknownFunction": HTTPStatus.BAD_REQUEST,
    "InvalidLimit": HTTPStatus.BAD_REQUEST,
    "InvalidBoundingBox": HTTPStatus.BAD_REQUEST,
    "InvalidCoordinate": HTTPStatus.BAD_REQUEST,
    "AreaNotFound": HTTPStatus.NOT_FOUND,
    "ObjectNotFound": HTTPStatus.NOT_FOUND,
    "NoMatch": HTTPStatus.NOT_FOUND,
    "NoObjects": HTTPStatus.NOT_FOUND,
    "AmbiguousArea": HTTPStatus.CONFLICT,
    "IdOverflow": HTTPStatus.UNPROCESSABLE_ENTITY,
}


def error_body(exc: OracleError) -> dict[str, Any]:
    return {"error": {"code": exc.code, "message": str(exc)}}


def encode_json(body: dict[str, Any]) -> bytes:
    return json.dumps(body, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


# -- HTTP --


class OracleHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int]) -> None:
        super().__init__(address, _Handler)
        self.service: OracleService | None = None
        self.load_error: BaseException | None = None


class _Handler(BaseHTTPRequestHandler):
    server: OracleHTTPServer
    protocol_version = "HTTP/1.1"
    # headers and body go out as separate writes; without this, keep-alive
    # clients stall on delayed ACKs
    disable_nagle_algorithm = True

    def log_message(self, format: str, *args: Any) -> None:
        log.debug("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path != "/health":
            self._send(404, encode_json({"error": {"code": "NotFound", "message": self.path}}))
            return
        service = self.server.service
        if service is None:
            self._send(503, encode_json({"status": "loading"}))
            return
        store = service.index.store
        self._send(200, encode_json({"status": "ready", "nodes": len(store.nodes), "ways": len(store.ways)}))

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        document = self.rfile.read(length)
        if self.path != "/query":
            self._send(404, encode_json({"error": {"code": "NotFound", "message": self.path}}))
            return
        service = self.server.service
        if service is None:
            self._send(503, encode_json({"error": {"code": "NotReady", "message": "store is loading"}}))
            return
        self._send(*service.handle(document))


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    return host or "127.0.0.1", int(port)


def start_server(
    bind: str,
    loader: Callable[[], OracleService],
) -> tuple[OracleHTTPServer, threading.Thread]:
    """Bind immediately and load the store in the background.

    ``/health`` answers 503 until ``loader`` returns. If loading fails the
    server shuts down and ``server.load_error`` holds the exception.
    """
    server = OracleHTTPServer(parse_bind(bind))

    def load() -> None:
        try:
            server.service = loader()
            log.info("store loaded, serving on %s:%d", *server.server_address[:2])
        except BaseException as exc:  # reported by the caller after shutdown
            server.load_error = exc
            log.error("store failed to load: %s", exc)
            server.shutdown()

    thread = threading.Thread(target=load, name="store-loader", daemon=True)
    thread.start()
    return server, thread


def config_from_env(env: dict[str, str] | None = None) -> dict[str, Any]:
    """Service settings from ``OSMORACLE_*`` environment variables."""
    env = dict(os.environ if env is None else env)
    out: dict[str, Any] = {}
    if "OSMORACLE_BIND" in env:
        out["bind"] = env["OSMORACLE_BIND"]
    if "OSMORACLE_STORE" in env:
        out["store"] = env["OSMORACLE_STORE"]
    if "OSMORACLE_GAS_ZERO_BYTE" in env:
        out["gas_zero"] = int(env["OSMORACLE_GAS_ZERO_BYTE"])
    if "OSMORACLE_GAS_NONZERO_BYTE" in env:
        out["gas_nonzero"] = int(env["OSMORACLE_GAS_NONZERO_BYTE"])
    if "OSMORACLE_MAX_RESULTS" in env:
        out["max_results"] = int(env["OSMORACLE_MAX_RESULTS"])
    return out
