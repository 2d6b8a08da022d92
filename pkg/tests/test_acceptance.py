"""End-to-end exit criteria, each at its stated scale and tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import http.client
import json
import os
import random
import subprocess
import sys
import threading
import time

import pytest

from osmoracle import abi
from osmoracle.abi import AbiPayload, Layout
from osmoracle.geocoder import FULL_ADDRESS_KEYS, GeocodeResult, ReverseGeocodeResult
from osmoracle.ingest import load_fixture
from osmoracle.model import INT64_MAX, INT64_MIN, ObjectType, ScaledCoord, scale_decimal_degrees, unscale_to_decimal
from osmoracle.service import LAYOUTS, OracleRequest, OracleService, parse_request, start_server
from osmoracle.spatial import build_index

from conftest import FIXTURES, SAMPLES, fixture_path
from oracles import TAG_KEYS, TAG_VALUES, area_node_set, in_bbox, nodes_inside, random_bbox, random_store, scan_search, synthetic_extract
from test_abi import encode_from_inputs, load_golden

acceptance = pytest.mark.acceptance
NODE, WAY = ObjectType.NODE, ObjectType.WAY
UPPER_MANHATTAN = {"south": 4077190000, "west": -7397460000, "north": 4079750000, "east": -7394690000}


def decoded(resp):
    return abi.decode(resp.payload)


@acceptance(1, "worked examples reproduce on the fixtures (< 1 s)")
def test_worked_examples():
    start = time.perf_counter()
    giza = OracleService(build_index(load_fixture(fixture_path("giza_mini"))))
    assert decoded(giza.dispatch(OracleRequest("wayCount", {"ID": 4420397}))) == 10
    assert len(decoded(giza.dispatch(OracleRequest("wayGeometry", {"ID": 4420397})))) == 10

    paris = OracleService(build_index(load_fixture(fixture_path("paris_mini"))))
    rows = {
        "addr:city": "Paris", "addr:housenumber": "5", "addr:postcode": "75007",
        "addr:street": "Avenue Anatole France", "architect": "Stephen Sauvestre",
        "building": "attraction", "building:colour": "#706550", "building:material": "iron",
        "building:shape": "pyramidal", "fee": "10-25€", "height": "324",
    }
    got = decoded(paris.dispatch(OracleRequest("wayTagQuery", {"ID": 5013364, "tags": list(rows)})))
    assert dict(zip(rows, got)) == rows

    for text, scaled in (("40.7719", 4077190000), ("-73.9746", -7397460000), ("40.7975", 4079750000), ("-73.9469", -7394690000)):
        assert scale_decimal_degrees(text) == scaled
        assert unscale_to_decimal(scaled) == text
    req = parse_request(json.dumps({"function": "nodeCountInBB", "key": "public_transport", "value": "station", **UPPER_MANHATTAN}))
    assert {k: req.params[k] for k in UPPER_MANHATTAN} == UPPER_MANHATTAN
    assert time.perf_counter() - start < 1.0


def _check_store_against_scan(rng: random.Random, s) -> int:
    """Runs every search and count function; returns the number of checks."""
    svc = OracleService(build_index(s))
    filters = [(k, v) for k in TAG_KEYS for v in TAG_VALUES]
    regions = []
    for area in s.areas:
        inside = area_node_set(s, svc.index.resolve_named_area(area.name).ring)
        regions.append(({"area": area.name}, inside, "InArea"))
    for _ in range(3):
        bb = random_bbox(rng, s)
        inside = nodes_inside(s, lambda c: in_bbox(c, bb))
        regions.append(({"south": bb.south, "west": bb.west, "north": bb.north, "east": bb.east}, inside, "InBB"))
    checks = 0
    for region, inside, suffix in regions:
        for key, value in rng.sample(filters, 4):
            for kind, prefix in ((NODE, "node"), (WAY, "way")):
                expected = scan_search(s, kind, key, value, inside)
                base = {"key": key, "value": value, **region}
                count = svc.dispatch(OracleRequest(f"{prefix}CountIn{suffix[2:]}", base))
                search = svc.dispatch(OracleRequest(f"{prefix}sIn{suffix[2:]}", {**base, "limit": len(expected) + 1}))
                assert decoded(count) == len(expected)
                assert decoded(search) == expected
                checks += 2
    return checks


@acceptance(2, "searches and counts equal a linear scan on 50 random stores (< 60 s)")
def test_brute_force_equivalence():
    rng = random.Random(2024)
    start = time.perf_counter()
    checks = 0
    for i in range(50):
        if i < 5:
            n_nodes, n_ways = 10_000, 1_000
        else:
            n_nodes = int(10 ** rng.uniform(1, 4))
            n_ways = rng.randint(0, min(1_000, n_nodes))
        checks += _check_store_against_scan(rng, random_store(rng, n_nodes, n_ways))
    elapsed = time.perf_counter() - start
    assert checks > 1000
    assert elapsed < 60, f"took {elapsed:.1f} s"


@acceptance(3, "limit and prefix laws hold on 1000 random triples")
def test_limit_laws():
    rng = random.Random(3)
    s = random_store(rng, 5_000, 800)
    svc = OracleService(build_index(s))
    areas = [a.name for a in s.areas]
    violations = 0
    for _ in range(1000):
        kind = rng.choice(["node", "way"])
        base = {"key": rng.choice(TAG_KEYS), "value": rng.choice(TAG_VALUES)}
        if rng.random() < 0.5:
            base["area"], suffix = rng.choice(areas), "Area"
        else:
            bb = random_bbox(rng, s)
            base.update(south=bb.south, west=bb.west, north=bb.north, east=bb.east)
            suffix = "BB"
        limit = rng.choice([1, 2, 3, 5, 8, 13, rng.randint(1, 2000)])
        count = decoded(svc.dispatch(OracleRequest(f"{kind}CountIn{suffix}", base)))
        small = decoded(svc.dispatch(OracleRequest(f"{kind}sIn{suffix}", {**base, "limit": limit})))
        full = decoded(svc.dispatch(OracleRequest(f"{kind}sIn{suffix}", {**base, "limit": max(count, 1)})))
        if len(small) != min(limit, count) or full[: len(small)] != small or len(full) != count:
            violations += 1
    assert violations == 0


def _fuzz_value(rng: random.Random, layout: Layout):
    def i64():
        return rng.choice([rng.randint(INT64_MIN, INT64_MAX), rng.randint(-(10**11), 10**11), rng.randint(-300, 300)])

    def text():
        alphabet = "abcXYZ019 ,.:/#-éßø€漢字🙂\u0000"
        return "".join(rng.choice(alphabet) for _ in range(rng.choice([0, 1, 31, 32, 33, rng.randint(0, 90)])))

    if layout is Layout.INT64_SCALAR:
        return [i64()]
    if layout is Layout.INT64_ARRAY:
        return [[i64() for _ in range(rng.randint(0, 20))]]
    if layout is Layout.STRING_ARRAY:
        return [[text() for _ in range(rng.randint(0, 8))]]
    if layout is Layout.COORD_PAIR_LIST:
        return [[[i64(), i64()] for _ in range(rng.randint(0, 12))]]
    if layout is Layout.GEOCODE_TUPLE:
        return [rng.randint(0, 1), rng.randint(1, INT64_MAX), i64(), i64()]
    desc = text() or "x"
    return [rng.randint(0, 1), rng.randint(1, INT64_MAX), desc]


def _expected_decoded(layout: Layout, args):
    if layout is Layout.INT64_SCALAR:
        return args[0]
    if layout is Layout.COORD_PAIR_LIST:
        return [ScaledCoord(*c) for c in args[0]]
    if layout is Layout.GEOCODE_TUPLE:
        return GeocodeResult(ObjectType(args[0]), args[1], ScaledCoord(args[2], args[3]))
    if layout is Layout.REVERSE_TUPLE:
        return ReverseGeocodeResult(ObjectType(args[0]), args[1], args[2])
    return args[0]


@acceptance(4, "ABI output matches 100+ golden vectors per layout and round-trips 10^4 fuzzed values per layout")
def test_abi_bit_exactness():
    rng = random.Random(4)
    for layout in Layout:
        vectors = load_golden(layout)
        assert len(vectors) >= 100
        for args, hexed in vectors:
            assert encode_from_inputs(layout, args).hex() == hexed
        for _ in range(10_000):
            args = _fuzz_value(rng, layout)
            payload = encode_from_inputs(layout, args)
            assert len(payload.data) % 32 == 0
            assert abi.decode(AbiPayload(payload.data, layout)) == _expected_decoded(layout, args)


@acceptance(5, "geocode and reverse geocode agree on the London fixture")
def test_geocoding_consistency():
    svc = OracleService(build_index(load_fixture(fixture_path("london_mini"))))
    fwd = decoded(svc.dispatch(OracleRequest("geocode", {"address": "221B Baker St, London NW1 6XE, UK"})))
    rev = decoded(svc.dispatch(OracleRequest("reverseGeocode", {"lat": 5152338790, "lon": -15823670})))
    assert (fwd.type_flag, fwd.id) == (rev.type_flag, rev.id) == (NODE, 3000001)

    store = svc.index.store
    addressed = [
        (kind, obj)
        for kind, objects in ((NODE, store.nodes), (WAY, store.ways))
        for obj in objects.values()
        if all(obj.tags.get(k) for k in FULL_ADDRESS_KEYS)
    ]
    assert len(addressed) >= 4
    for kind, obj in addressed:
        address = ", ".join(obj.tags[k] for k in FULL_ADDRESS_KEYS)
        g = decoded(svc.dispatch(OracleRequest("geocode", {"address": address})))
        r = decoded(svc.dispatch(OracleRequest("reverseGeocode", {"lat": g.coord.lat, "lon": g.coord.lon})))
        assert (g.type_flag, g.id) == (r.type_flag, r.id) == (kind, obj.id)


@acceptance(6, "gas grows strictly over limits 1, 2, 4, 8 and the count costs less than limit 8")
def test_gas_workflow():
    svc = OracleService(build_index(load_fixture(fixture_path("boston_mini"))))
    base = {"key": "amenity", "value": "cafe", "area": "Boston"}
    count = svc.dispatch(OracleRequest("nodeCountInArea", base))
    assert decoded(count) >= 8
    gas = [svc.dispatch(OracleRequest("nodesInArea", {**base, "limit": n})).estimated_calldata_gas for n in (1, 2, 4, 8)]
    assert all(a < b for a, b in zip(gas, gas[1:])), gas
    assert count.estimated_calldata_gas < gas[-1]


def _combined_store(tmp_path):
    text = "\n".join(p.read_text(encoding="utf-8") for p in sorted(FIXTURES.glob("*.txt")))
    path = tmp_path / "combined.txt"
    path.write_text(text, encoding="utf-8")
    return path


def _sample_requests(rng: random.Random) -> list[bytes]:
    docs = [p.read_bytes() for p in sorted((SAMPLES / "requests").glob("*.json"))]
    extra = [
        {"function": "waysInArea", "key": "amenity", "value": "cafe", "area": "boston", "limit": 2},
        {"function": "wayCountInBB", "key": "public_transport", "value": "station", **UPPER_MANHATTAN},
        {"function": "waysInBB", "key": "public_transport", "value": "station", **UPPER_MANHATTAN, "limit": 9},
        {"function": "geocode", "address": "Madame Tussauds, Marylebone Road"},
        {"function": "reverseGeocode", "lat": 4885800000, "lon": 229400000},
        {"function": "wayGeometry", "ID": 4420400},
        {"function": "nodeTagQuery", "ID": 3000001, "tags": ["name", "tourism", "wheelchair"]},
        {"function": "wayCount", "ID": 5013364},
        {"function": "nodesInBB", "key": "amenity", "value": "cafe", "south": 4200000000, "west": -7200000000, "north": 4300000000, "east": -7000000000, "limit": 20},
        {"function": "nodeCountInArea", "key": "amenity", "value": "Cafe", "area": "Boston"},
        {"function": "geocode", "address": "zzz qqq"},
        {"function": "nodesInArea", "key": "amenity", "value": "cafe", "area": "Atlantis", "limit": 3},
    ]
    docs += [json.dumps(d).encode() for d in extra]
    return rng.sample(docs, 20)


def _post(host, port, body: bytes):
    conn = http.client.HTTPConnection(host, port, timeout=30)
    try:
        conn.request("POST", "/query", body=body, headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        return resp.status, resp.read()
    finally:
        conn.close()


@acceptance(7, "service responses are byte-identical across 100 POSTs and match the CLI")
def test_service_determinism(tmp_path):
    store_path = _combined_store(tmp_path)
    server, loader = start_server("127.0.0.1:0", lambda: OracleService(build_index(load_fixture(store_path))))
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        loader.join(30)
        assert server.service is not None
        host, port = server.server_address[:2]

        body = json.dumps({"function": "nodesInArea", "key": "amenity", "value": "cafe", "area": "Boston", "limit": 8}).encode()
        replies = [_post(host, port, body) for _ in range(100)]
        assert replies[0][0] == 200
        assert len(set(replies)) == 1

        env = {**os.environ, "PYTHONIOENCODING": "utf-8"}
        compared = 0
        for i, doc in enumerate(_sample_requests(random.Random(7))):
            status, served = _post(host, port, doc)
            req_path = tmp_path / f"req{i}.json"
            req_path.write_bytes(doc)
            proc = subprocess.run(
                [sys.executable, "-m", "osmoracle", "query", str(store_path), str(req_path)],
                capture_output=True, text=True, env=env, timeout=60,
            )
            if status == 200:
                assert proc.returncode == 0, proc.stderr
                cli_hex = next(line.split(": ", 1)[1] for line in proc.stdout.splitlines() if line.startswith("payload: "))
                assert cli_hex == json.loads(served)["payload_hex"]
            else:
                code = json.loads(served)["error"]["code"]
                assert proc.returncode == 1 and proc.stderr.startswith(f"error: {code}:")
            compared += 1
        assert compared == 20
    finally:
        server.shutdown()
        server.server_close()


def _serve(service):
    server, loader = start_server("127.0.0.1:0", lambda: service)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    loader.join(10)
    return server


def _timed_posts(server, bodies):
    """POST each body over one keep-alive connection; returns (bodies, seconds)."""
    host, port = server.server_address[:2]
    conn = http.client.HTTPConnection(host, port, timeout=60)
    headers = {"Content-Type": "application/json"}
    try:
        conn.request("POST", "/query", body=bodies[0], headers=headers)  # warm up
        conn.getresponse().read()
        replies, times = [], []
        for body in bodies:
            t = time.perf_counter()
            conn.request("POST", "/query", body=body, headers=headers)
            resp = conn.getresponse()
            data = resp.read()
            times.append(time.perf_counter() - t)
            assert resp.status == 200, data
            replies.append(data)
        return replies, times
    finally:
        conn.close()


@acceptance(8, "bbox queries on a 10^5-node store finish in < 50 ms each, > 10x faster than brute force")
def test_latency():
    rng = random.Random(8)
    s = synthetic_extract(rng, 100_000, 10_000)
    assert len(s.nodes) == 100_000
    index = build_index(s)
    lat0, lon0, span = 40 * 10**8, -74 * 10**8, 2 * 10**8
    bodies = []
    for _ in range(100):
        h, w = rng.randint(span // 200, span // 20), rng.randint(span // 200, span // 20)
        south, west = lat0 + rng.randint(0, span - h), lon0 + rng.randint(0, span - w)
        fn = rng.choice(["nodesInBB", "waysInBB", "nodeCountInBB", "wayCountInBB"])
        doc = {"function": fn, "key": rng.choice(TAG_KEYS), "value": rng.choice(TAG_VALUES),
               "south": south, "west": west, "north": south + h, "east": west + w}
        if fn.endswith("sInBB"):
            doc["limit"] = 100
        bodies.append(json.dumps(doc).encode())

    results = {}
    for name, service in (("indexed", OracleService(index)), ("brute", OracleService(index, brute_force=True))):
        server = _serve(service)
        try:
            results[name] = _timed_posts(server, bodies)
        finally:
            server.shutdown()
            server.server_close()
    (indexed_replies, indexed_times), (brute_replies, brute_times) = results["indexed"], results["brute"]
    assert indexed_replies == brute_replies
    worst = max(indexed_times)
    ratio = sum(brute_times) / sum(indexed_times)
    print(f"worst {worst * 1000:.1f} ms, mean {sum(indexed_times) * 10:.2f} ms, brute/indexed {ratio:.1f}x")
    assert worst < 0.050, f"slowest query took {worst * 1000:.1f} ms"
    assert ratio > 10, f"index only {ratio:.1f}x faster than a scan"
