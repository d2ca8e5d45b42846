#!/usr/bin/env python3
# Copyright 2026 The ckplug Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the shipped toy model specs and the matching dataset.

Outputs (relative to --data, default ./data):
  toy/facts.json        capitals model; reacts to support and conflict contexts
  datasets/facts.jsonl  one record per capital, counterfactual + support context
  toy/pieces.json       small model with multi-piece answer tokens

The output is a pure function of this file: random noise comes from a
fixed-seed generator keyed by row name.
"""

import argparse
import json
import random
from pathlib import Path

EOS = "<eos>"

# country, parametric answer, counterfactual answer
FACTS = [
    ("France", "Paris", "Rome"),
    ("Germany", "Berlin", "Madrid"),
    ("Italy", "Rome", "Vienna"),
    ("Spain", "Madrid", "Lisbon"),
    ("Japan", "Tokyo", "Seoul"),
    ("Canada", "Ottawa", "Toronto"),
    ("Australia", "Canberra", "Sydney"),
    ("India", "New Delhi", "New York"),
    ("Brazil", "Brasilia", "Rio de Janeiro"),
    ("Argentina", "Buenos Aires", "Santiago"),
    ("Egypt", "Cairo", "Nairobi"),
    ("Kenya", "Nairobi", "Cairo"),
    ("Russia", "Moscow", "Warsaw"),
    ("Poland", "Warsaw", "Prague"),
    ("Norway", "Oslo", "Stockholm"),
    ("Sweden", "Stockholm", "Helsinki"),
    ("Finland", "Helsinki", "Oslo"),
    ("Portugal", "Lisbon", "Porto"),
    ("Greece", "Athens", "Sparta"),
    ("Turkey", "Ankara", "Istanbul"),
    ("China", "Beijing", "Shanghai"),
    ("Peru", "Lima", "Quito"),
    ("New Zealand", "Wellington", "Auckland"),
    ("South Korea", "Seoul", "Busan"),
    ("Mexico", "Mexico City", "Guadalajara"),
]

# Logit levels.
PARAM_PRIOR = 6.0      # query-only stream on its own answer
PARAM_CONTINUE = 7.0   # query-only stream continuing its answer
CF_PRIOR = 0.5         # query-only stream on the counterfactual token
CONFLICT_CF = 3.0      # context stream on the counterfactual token
CONFLICT_PARAM = 2.3   # context stream on the parametric token
CONTEXT_CONTINUE = 7.0
SUPPORT = 9.0
FALLBACK_EOS = 4.0
NOISE = 0.6
DEFAULT = -1.0


def query_text(country):
    return f"What is the capital of {country}?"


def conflict_context(country, cf):
    return f"The capital of {country} is {cf}"


def support_context(country, answer):
    return f"The capital of {country} is {answer}"


class Builder:
    def __init__(self, model_name, fixed_tokens):
        self.model_name = model_name
        self.vocab = [EOS]
        self.index = {EOS: 0}
        self.noisy = []
        self.transitions = {}
        for tok in fixed_tokens:
            self.token(tok)

    def token(self, tok):
        if tok not in self.index:
            self.index[tok] = len(self.vocab)
            self.vocab.append(tok)
        return tok

    def words(self, text):
        return [self.token(w) for w in text.split()]

    def row(self, name, peaks):
        rng = random.Random(f"{self.model_name}/{name}")
        values = {tok: round(rng.uniform(0.0, NOISE), 4) for tok in self.noisy}
        values.update(peaks)
        return {"default": DEFAULT, "set": values}

    def add(self, pattern, name, peaks):
        key = tuple(pattern)
        if key in self.transitions:
            if self.transitions[key]["name"] != name:
                raise SystemExit(f"conflicting rows for pattern {pattern}")
            return
        self.transitions[key] = {"name": name, "row": self.row(name, peaks)}

    def spec(self, fallback_peaks, unk=None):
        doc = {
            "version": 1,
            "model_name": self.model_name,
            "vocabulary": self.vocab,
            "eos": EOS,
            "max_context_tokens": 512,
            "fallback": self.row("fallback", fallback_peaks),
            "transitions": [{"pattern": list(k), "logits": v["row"]} for k, v in self.transitions.items()],
        }
        if unk is not None:
            doc["unk"] = unk
        return doc


def common_prefix(a, b):
    n = 0
    while n < len(a) and n < len(b) and a[n] == b[n]:
        n += 1
    return n


def scripted_answer(b, prefix, name, answer, level, eos_level, start=1):
    """Rows that continue `answer` after `prefix` + answer[:j] for j >= start."""
    for j in range(max(start, 1), len(answer) + 1):
        nxt = answer[j] if j < len(answer) else EOS
        b.add(prefix + answer[:j], f"{name}/{j}", {nxt: eos_level if nxt == EOS else level})


def build_facts():
    b = Builder("toy-capitals", ["Background:", "Q:", "A:"])
    records = []
    for country, para, cf in FACTS:
        b.words(query_text(country))
        b.words(conflict_context(country, cf))
        b.words(support_context(country, para))
        b.noisy.extend(t for t in para.split() + cf.split() if t not in b.noisy)

    for country, para, cf in FACTS:
        rid = country.lower().replace(" ", "-")
        q = ["Q:"] + query_text(country).split() + ["A:"]
        p = para.split()
        c = cf.split()
        shared = common_prefix(p, c)

        # Query-only stream: knows its own answer, continues the counterfactual weakly.
        for j in range(shared + 1):
            peaks = {p[j]: PARAM_PRIOR if j == 0 else PARAM_CONTINUE}
            if j == shared and j < len(c):
                peaks[c[j]] = CF_PRIOR
            b.add(q + p[:j], f"{rid}/q/{j}", peaks)
        scripted_answer(b, q, f"{rid}/q/p", p, PARAM_CONTINUE, PARAM_CONTINUE, shared + 1)

        # Conflict context: counterfactual edges out the parametric token where they diverge.
        rc = [c[-1]] + q
        for j in range(shared + 1):
            if j < shared:
                peaks = {p[j]: CONTEXT_CONTINUE}
            else:
                peaks = {c[j]: CONFLICT_CF, p[j]: CONFLICT_PARAM}
            b.add(rc + p[:j], f"{rid}/rc/{j}", peaks)
        scripted_answer(b, rc, f"{rid}/rc/c", c, CONTEXT_CONTINUE, CONTEXT_CONTINUE, shared + 1)
        scripted_answer(b, rc, f"{rid}/rc/p", p, CONTEXT_CONTINUE, CONTEXT_CONTINUE, shared + 1)

        # Support context: restates the parametric answer and sharpens it.
        rs = [p[-1]] + q
        b.add(rs, f"{rid}/rs/0", {p[0]: SUPPORT})
        scripted_answer(b, rs, f"{rid}/rs/p", p, SUPPORT, SUPPORT)

        records.append({
            "id": rid,
            "query": query_text(country),
            "context": conflict_context(country, cf),
            "parametric_answer": para,
            "contextual_answer": cf,
            "support_context": support_context(country, para),
        })
    return b.spec({EOS: FALLBACK_EOS}), records


def build_pieces():
    b = Builder("toy-pieces", ["Background:", "Q:", "A:"])
    query = "In which country is London located?"
    context = "London is a city in France"
    b.words(query)
    b.words(context)
    for t in ["Eng", "##land", "Fran", "##ce"]:
        b.token(t)
    b.noisy = ["Eng", "Fran", "London", "city"]
    q = ["Q:"] + query.split() + ["A:"]
    rc = ["France"] + q
    b.add(q, "q/0", {"Eng": PARAM_PRIOR, "Fran": CF_PRIOR})
    b.add(q + ["Eng"], "q/1", {"##land": PARAM_CONTINUE})
    b.add(q + ["Eng", "##land"], "q/2", {EOS: PARAM_CONTINUE})
    b.add(q + ["Fran"], "q/c1", {"##ce": 3.0, EOS: 2.0})
    b.add(rc, "rc/0", {"Fran": CONFLICT_CF, "Eng": CONFLICT_PARAM})
    b.add(rc + ["Fran"], "rc/c1", {"##ce": CONTEXT_CONTINUE})
    b.add(rc + ["Fran", "##ce"], "rc/c2", {EOS: CONTEXT_CONTINUE})
    b.add(rc + ["Eng"], "rc/p1", {"##land": CONTEXT_CONTINUE})
    b.add(rc + ["Eng", "##land"], "rc/p2", {EOS: CONTEXT_CONTINUE})
    record = {
        "id": "london",
        "query": query,
        "context": context,
        "parametric_answer": "England",
        "contextual_answer": "France",
    }
    return b.spec({EOS: FALLBACK_EOS}), [record]


def write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args()

    facts, records = build_facts()
    write_json(args.data / "toy" / "facts.json", facts)
    write_jsonl(args.data / "datasets" / "facts.jsonl", records)
    pieces, piece_records = build_pieces()
    write_json(args.data / "toy" / "pieces.json", pieces)
    write_jsonl(args.data / "datasets" / "pieces.jsonl", piece_records)
    print(f"facts: {len(facts['vocabulary'])} tokens, {len(facts['transitions'])} rows, {len(records)} records")
    print(f"pieces: {len(pieces['vocabulary'])} tokens, {len(pieces['transitions'])} rows")


if __name__ == "__main__":
    main()
