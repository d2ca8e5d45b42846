#!/usr/bin/env python3
# Copyright 2026 The ckplug Authors
# SPDX-License-Identifier: Apache-2.0
"""Converts ConFiQA-style counterfactual QA files into ckplug JSONL datasets.

Input is a JSON array or JSONL file of objects. Source field names default to
question, cf_context, orig_answer, cf_answer, orig_alias and cf_alias and can
be remapped with --field target=source, for example --field query=prompt.
"""

import argparse
import json
import sys
from pathlib import Path

DEFAULT_FIELDS = {
    "query": "question",
    "context": "cf_context",
    "parametric_answer": "orig_answer",
    "contextual_answer": "cf_answer",
    "parametric_aliases": "orig_alias",
    "contextual_aliases": "cf_alias",
    "support_context": "orig_context",
    "id": "id",
}
REQUIRED = ("query", "context", "parametric_answer", "contextual_answer")


def read_rows(path):
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def as_list(value):
    if value is None:
        return []
    if isinstance(value, str):
        return [value] if value.strip() else []
    return [str(v) for v in value if str(v).strip()]


def convert(row, index, fields, prefix):
    missing = [k for k in REQUIRED if not str(row.get(fields[k], "")).strip()]
    if missing:
        raise ValueError(f"row {index}: missing {', '.join(fields[k] for k in missing)}")
    rid = row.get(fields["id"])
    record = {"id": str(rid) if rid is not None else f"{prefix}-{index:05d}"}
    for key in REQUIRED:
        record[key] = str(row[fields[key]]).strip()
    for key in ("parametric_aliases", "contextual_aliases"):
        aliases = as_list(row.get(fields[key]))
        if aliases:
            record[key] = aliases
    support = row.get(fields["support_context"])
    if isinstance(support, str) and support.strip():
        record["support_context"] = support.strip()
    return record


def parse_fields(pairs):
    fields = dict(DEFAULT_FIELDS)
    for pair in pairs:
        target, sep, source = pair.partition("=")
        if not sep or target not in fields or not source:
            raise SystemExit(f"bad --field {pair!r}; targets: {', '.join(fields)}")
        fields[target] = source
    return fields


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("input", type=Path)
    ap.add_argument("output", type=Path)
    ap.add_argument("--field", action="append", default=[], metavar="TARGET=SOURCE")
    ap.add_argument("--id-prefix", default=None, help="prefix for generated ids (default: input stem)")
    ap.add_argument("--limit", type=int, default=None)
    ap.add_argument("--skip-invalid", action="store_true", help="drop bad rows instead of failing")
    args = ap.parse_args()

    fields = parse_fields(args.field)
    prefix = args.id_prefix or args.input.stem
    rows = read_rows(args.input)
    if args.limit is not None:
        rows = rows[: args.limit]
    out, skipped, seen = [], 0, set()
    for i, row in enumerate(rows):
        try:
            record = convert(row, i, fields, prefix)
        except ValueError as e:
            if not args.skip_invalid:
                raise SystemExit(str(e))
            skipped += 1
            continue
        if record["id"] in seen:
            raise SystemExit(f"row {i}: duplicate id {record['id']!r}")
        seen.add(record["id"])
        out.append(record)

    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in out), encoding="utf-8")
    print(f"wrote {len(out)} records to {args.output} ({skipped} skipped)", file=sys.stderr)


if __name__ == "__main__":
    main()
