"""Regenerate the ABI golden vectors under tests/golden/.

Uses eth-abi as an independent reference encoder; it is not a runtime
dependency. Each layout gets two line-aligned files: ``<layout>.inputs.jsonl``
(one JSON input per line) and ``<layout>.hex`` (one 0x payload per line).

    pip install eth-abi
    python scripts/generate_golden.py
"""

import json
import random
from pathlib import Path

from eth_abi import encode

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden"
PER_LAYOUT = 128
INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1
LAT, LON = 90 * 10**8, 180 * 10**8

ALPHABET = "abcXYZ019 ,.-:#/€éßø漢字🙂 "


def rand_int64(rng):
    return rng.choice(
        [
            rng.randint(INT64_MIN, INT64_MAX),
            rng.randint(-1000, 1000),
            rng.choice([0, 1, -1, INT64_MIN, INT64_MAX, 255, 256, -256]),
            rng.randint(-LON, LON),
        ]
    )


def rand_text(rng, allow_empty=True):
    n = rng.choice([0, 1, 5, 31, 32, 33, 64, 70]) if allow_empty else rng.choice([1, 5, 31, 32, 33, 64, 70])
    return "".join(rng.choice(ALPHABET) for _ in range(n))


def rand_coord(rng):
    return [rng.randint(-LAT, LAT), rng.randint(-LON, LON)]


def cases(rng):
    layouts = {
        "Int64Scalar": ([0], [10], [-15823670], [INT64_MIN], [INT64_MAX]),
        "Int64Array": ([[]], [[1]], [[INT64_MIN, INT64_MAX]]),
        "StringArray": ([[""]], [["Paris", "324"]], [[]]),
        "CoordPairList": ([[]], [[[4077190000, -7397460000]]]),
        "GeocodeTuple": ([0, 1, 0, 0], [0, 3000001, 5152338790, -15823670]),
        "ReverseTuple": ([0, 1, "X"],),
    }
    gens = {
        "Int64Scalar": lambda: [rand_int64(rng)],
        "Int64Array": lambda: [[rand_int64(rng) for _ in range(rng.randint(0, 12))]],
        "StringArray": lambda: [[rand_text(rng) for _ in range(rng.randint(0, 6))]],
        "CoordPairList": lambda: [[rand_coord(rng) for _ in range(rng.randint(0, 12))]],
        "GeocodeTuple": lambda: [rng.randint(0, 1), rng.randint(1, INT64_MAX), *rand_coord(rng)],
        "ReverseTuple": lambda: [rng.randint(0, 1), rng.randint(1, INT64_MAX), rand_text(rng, allow_empty=False)],
    }
    for layout, fixed in layouts.items():
        inputs = list(fixed)
        while len(inputs) < PER_LAYOUT:
            inputs.append(gens[layout]())
        yield layout, inputs


def reference(layout, value):
    if layout == "Int64Scalar":
        return encode(["int64"], value)
    if layout == "Int64Array":
        return encode(["int64[]"], value)
    if layout == "StringArray":
        return encode(["string[]"], value)
    if layout == "CoordPairList":
        return encode(["(int64,int64)[]"], [[tuple(p) for p in value[0]]])
    if layout == "GeocodeTuple":
        return encode(["int64", "int64", "int64", "int64"], value)
    if layout == "ReverseTuple":
        return encode(["int64", "int64", "string"], value)
    raise ValueError(layout)


def main():
    rng = random.Random(20240611)
    OUT.mkdir(parents=True, exist_ok=True)
    for layout, inputs in cases(rng):
        with open(OUT / f"{layout}.inputs.jsonl", "w", encoding="utf-8") as fi, open(OUT / f"{layout}.hex", "w") as fh:
            for value in inputs:
                fi.write(json.dumps(value, ensure_ascii=False) + "\n")
                fh.write("0x" + reference(layout, value).hex() + "\n")
        print(f"{layout}: {len(inputs)} vectors")


if __name__ == "__main__":
    main()
