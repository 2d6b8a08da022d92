"""Command line tool.

    osmoracle ingest <xml|fixture> <out-store> [--format binary|text]
    osmoracle query <store> <request.json>
    osmoracle estimate <store> <request.json>
    osmoracle serve <store> [--bind HOST:PORT]

Exit status is 0 on success, 1 on a domain or I/O error (the error code is
printed to stderr) and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence

from . import abi
from .abi import Layout
from .errors import OracleError
from .ingest import load_store, save_store
from .model import unscale_to_decimal
from .service import (
    GasParams,
    OracleRequest,
    OracleService,
    config_from_env,
    estimate_gas,
    parse_request,
    start_server,
)
from .spatial import build_index

SEARCH_TO_COUNT = {
    "nodesInArea": "nodeCountInArea",
    "waysInArea": "wayCountInArea",
    "nodesInBB": "nodeCountInBB",
    "waysInBB": "wayCountInBB",
}
COUNT_TO_SEARCH = {v: k for k, v in SEARCH_TO_COUNT.items()}


def open_service(
    path: str,
    gas: GasParams = GasParams(),
    max_results: int | None = None,
    brute_force: bool = False,
) -> OracleService:
    return OracleService(build_index(load_store(path)), gas, max_results, brute_force)


def describe_payload(payload: abi.AbiPayload) -> str:
    """Human-readable rendering; coordinates are shown in decimal degrees."""
    value = abi.decode(payload)
    layout = payload.layout
    if layout is Layout.INT64_SCALAR:
        return str(value)
    if layout is Layout.INT64_ARRAY:
        return "[" + ", ".join(map(str, value)) + "]"
    if layout is Layout.STRING_ARRAY:
        return json.dumps(value, ensure_ascii=False)
    if layout is Layout.COORD_PAIR_LIST:
        return "[" + ", ".join(f"({unscale_to_decimal(c.lat)}, {unscale_to_decimal(c.lon)})" for c in value) + "]"
    if layout is Layout.GEOCODE_TUPLE:
        return (
            f"{value.type_flag.label} {value.id} at "
            f"{unscale_to_decimal(value.coord.lat)}, {unscale_to_decimal(value.coord.lon)}"
        )
    return f"{value.type_flag.label} {value.id}: {value.description}"


def _read_request(path: str) -> OracleRequest:
    with open(path, "rb") as fh:
        return parse_request(fh.read())


def cmd_ingest(args: argparse.Namespace) -> int:
    store = load_store(args.input)
    save_store(store, args.output, args.format)
    print(f"nodes: {len(store.nodes)}")
    print(f"ways: {len(store.ways)}")
    print(f"areas: {len(store.areas)}")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    service = open_service(args.store, _gas(args))
    req = _read_request(args.request)
    resp = service.dispatch(req)
    print(f"function: {req.function}")
    print(f"payload: {resp.payload.hex()}")
    print(f"decoded: {describe_payload(resp.payload)}")
    if resp.match_count is not None:
        print(f"match_count: {resp.match_count}")
    print(f"estimated_gas: {resp.estimated_calldata_gas}")
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    service = open_service(args.store, _gas(args))
    req = _read_request(args.request)
    fn = req.function
    if fn not in SEARCH_TO_COUNT and fn not in COUNT_TO_SEARCH:
        resp = service.dispatch(req)
        print(f"function: {fn}")
        print(f"estimated_gas: {resp.estimated_calldata_gas}")
        return 0

    search_fn = COUNT_TO_SEARCH.get(fn, fn)
    base = {k: v for k, v in req.params.items() if k != "limit"}
    counted = service.dispatch(OracleRequest(SEARCH_TO_COUNT[search_fn], base))
    count = counted.match_count or 0
    print(f"function: {search_fn}")
    print(f"count: {count}")
    print(f"count_gas: {counted.estimated_calldata_gas}")
    if count == 0:
        full_gas = estimate_gas(abi.encode_id_array([]), service.gas)
    else:
        full_gas = service.dispatch(OracleRequest(search_fn, {**base, "limit": count})).estimated_calldata_gas
    print(f"full_result_gas: {full_gas}")
    limit = 1
    while count > 0:
        gas = service.dispatch(OracleRequest(search_fn, {**base, "limit": limit})).estimated_calldata_gas
        print(f"limit {limit}: {gas}")
        if limit >= count:
            break
        limit *= 2
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    if not os.access(args.store, os.R_OK):
        raise OSError(f"store {args.store!r} is not readable")
    gas, max_results = _gas(args), args.max_results
    server, _ = start_server(args.bind, lambda: open_service(args.store, gas, max_results, args.brute_force))
    host, port = server.server_address[:2]
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    if server.load_error is not None:
        err = server.load_error
        code = err.code if isinstance(err, OracleError) else type(err).__name__
        print(f"error: {code}: {err}", file=sys.stderr)
        return 1
    return 0


def _gas(args: argparse.Namespace) -> GasParams:
    return GasParams(args.gas_zero, args.gas_nonzero)


def build_parser(env: dict[str, str] | None = None) -> argparse.ArgumentParser:
    cfg = config_from_env(env)
    parser = argparse.ArgumentParser(prog="osmoracle", description="OpenStreetMap oracle tooling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def gas_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--gas-zero", type=int, default=cfg.get("gas_zero", 4), help="gas per zero byte")
        p.add_argument("--gas-nonzero", type=int, default=cfg.get("gas_nonzero", 16), help="gas per nonzero byte")

    p = sub.add_parser("ingest", help="parse and validate an extract, write a store snapshot")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="run one request document against a store")
    p.add_argument("store")
    p.add_argument("request")
    gas_options(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("estimate", help="simulate gas for a request, count first")
    p.add_argument("store")
    p.add_argument("request")
    gas_options(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("serve", help="serve POST /query and GET /health")
    p.add_argument("store", nargs="?" if "store" in cfg else None, default=cfg.get("store"))
    p.add_argument("--bind", default=cfg.get("bind", "127.0.0.1:8080"))
    p.add_argument("--max-results", type=int, default=cfg.get("max_results"), help="reject search limits above this")
    p.add_argument("--brute-force", action="store_true", help="answer searches by linear scan (benchmarking)")
    gas_options(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
