"""The checked-in golden lines pin the wire contract: decoding and
re-encoding them must reproduce the file bytes, and every line must satisfy
the published schema."""
import json
import os

import jsonschema

from celia.stream import decode_frame, encode_frame

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "frames.jsonl")
SCHEMA = os.path.join(os.path.dirname(__file__), "..", "docs", "frame.schema.json")


def golden_lines():
    with open(GOLDEN, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def test_golden_lines_reencode_byte_exact():
    for line in golden_lines():
        assert encode_frame(decode_frame(line)) == line


def test_golden_lines_strictly_increasing():
    ids = [decode_frame(line).frame for line in golden_lines()]
    assert ids == sorted(set(ids))


def test_golden_lines_satisfy_schema():
    with open(SCHEMA, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    validator = jsonschema.Draft7Validator(schema)
    for line in golden_lines():
        validator.validate(json.loads(line))


def test_encoder_output_satisfies_schema(rng):
    from conftest import random_frame

    with open(SCHEMA, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    validator = jsonschema.Draft7Validator(schema)
    for k in range(100):
        validator.validate(json.loads(encode_frame(random_frame(rng, k))))
