#!/usr/bin/env python3
"""Regenerate the bundled test fixtures (reviews, mock rules, references)."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "cli", "tests", "fixtures")

P1 = "trayco-ice-42"
P2 = "stride-runner-7"
CAT1 = "Kitchen & Dining"
CAT2 = "Shoes"

REVIEWS = [
    # product, review_id, text
    (P1, "p1r01", "The cubes pop out with no effort, but the lids do not stay closed when stacked."),
    (P1, "p1r02", "Cubes pop out with no effort. Sadly the cubes come out quite small."),
    (P1, "p1r03", "Cubes pop out with no effort and the lids make the trays easy to stack."),
    (P1, "p1r04", "The cubes pop out with no effort, though the lids do not stay closed."),
    (P1, "p1r05", "The lids do not stay closed and one tray cracked on first use."),
    (P1, "p1r06", "The cubes come out quite small, but a full tray fills a whole glass."),
    (P1, "p1r07", "Cubes come out quite small. At least the lids make the trays easy to stack."),
    (P1, "p1r08", "One tray cracked on first use. The lid keeps ice from spilling in the freezer."),
    (P1, "p1r09", "The silicone base feels sturdy after months of daily use."),
    (P1, "p1r10", "Ice freezes faster than expected in these trays."),
    (P2, "p2r01", "The shoes run quite wide which suits my feet, and the cushioning feels plush on long runs."),
    (P2, "p2r02", "The shoes run quite wide and slip around. The sole grips wet pavement well though."),
    (P2, "p2r03", "The shoes run quite wide, roomy and great. The heel wore down within a month."),
    (P2, "p2r04", "The shoes run quite wide and my feet swim in them. The cushioning feels plush on long runs."),
    (P2, "p2r05", "The cushioning feels plush on long runs, best part of these."),
    (P2, "p2r06", "The sole grips wet pavement well and the laces stay tied all day."),
    (P2, "p2r07", "The heel wore down within a month, but the arch support holds up on trails."),
    (P2, "p2r08", "The toe box feels roomy and comfortable, and the breathable mesh keeps feet cool."),
    (P2, "p2r09", "The toe box feels roomy and comfortable."),
    (P2, "p2r10", "The reflective strips help at night."),
]

INDUCED = {
    CAT1: ["capacity", "lid fit", "cube release", "durability"],
    CAT2: ["fit", "comfort", "durability", "sole"],
}


def arg(aspect, sentiment, evidence):
    return {"aspect": aspect, "sentiment": sentiment, "evidence": evidence}


RESPONSES = {
    "p1r01": [
        arg("cube release", "positive", "cubes pop out with no effort"),
        arg("lid fit", "negative", "the lids do not stay closed"),
    ],
    "p1r02": [
        arg("cube release", "positive", "cubes pop out with no effort"),
        arg("size", "negative", "the cubes come out quite small"),
    ],
    "p1r03": [
        arg("cube release", "positive", "cubes pop out with no effort"),
        arg("stacking", "positive", "lids make the trays easy to stack"),
    ],
    "p1r04": [
        arg("cube release", "positive", "the cubes pop out with no effort"),
        arg("lid", "negative", "lids do not stay closed"),
    ],
    "p1r05": [
        arg("lid fit", "negative", "the lids do not stay closed"),
        arg("durability", "negative", "one tray cracked on first use"),
    ],
    "p1r06": [
        arg("size", "negative", "the cubes come out quite small"),
        arg("capacity", "positive", "fills a whole glass from one tray"),
    ],
    "p1r07": [
        arg("size", "negative", "cubes come out quite small"),
        arg("stacking", "positive", "lids make the trays easy to stack"),
    ],
    "p1r08": [
        arg("durability", "negative", "one tray cracked on first use"),
        arg("lid fit", "positive", "keeps ice from spilling in the freezer"),
    ],
    "p1r09": [arg("durability", "positive", "the silicone base feels sturdy")],
    "p1r10": [arg("freezing speed", "positive", "ice freezes faster than expected")],
    "p2r01": [
        arg("fit", "positive", "the shoes run quite wide"),
        arg("comfort", "positive", "the cushioning feels plush on long runs"),
    ],
    "p2r02": [
        arg("fit", "negative", "the shoes run quite wide"),
        arg("sole", "positive", "the sole grips wet pavement well"),
    ],
    "p2r03": [
        arg("fit", "positive", "the shoes run quite wide"),
        arg("durability", "negative", "the heel wore down within a month"),
    ],
    "p2r04": [
        arg("fit", "negative", "the shoes run quite wide"),
        arg("comfort", "positive", "the cushioning feels plush on long runs"),
    ],
    "p2r05": [arg("comfort", "positive", "the cushioning feels plush on long runs")],
    "p2r06": [
        arg("sole", "positive", "the sole grips wet pavement well"),
        arg("laces", "positive", "laces stay tied all day"),
    ],
    "p2r07": [
        arg("durability", "negative", "the heel wore down within a month"),
        arg("arch support", "positive", "arch support holds up on trails"),
    ],
    "p2r08": [
        arg("comfort", "positive", "the toe box feels roomy and comfortable"),
        arg("breathability", "positive", "breathable mesh keeps feet cool"),
    ],
    "p2r09": [arg("comfort", "positive", "the toe box feels roomy and comfortable")],
    "p2r10": [arg("visibility", "positive", "reflective strips help at night")],
}

REFERENCES = {
    P1: "Easy to pop the cubes out. Lids do not stay closed and the cubes are small. "
    "One tray cracked early. They stack well in the freezer.",
    P2: "Wide fit that splits opinions. Plush cushioning and a grippy sole. "
    "The heel wears down quickly but the toe box is roomy.",
}


def write_jsonl(name, records):
    path = os.path.join(OUT, name)
    with open(path, "w") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    print(f"wrote {path} ({len(records)} records)")


def rules(fail_parse=()):
    out = []
    for category, aspects in INDUCED.items():
        out.append({"match": f"induce:{category}", "response": json.dumps(aspects)})
    for _, review_id, _ in REVIEWS:
        if review_id in fail_parse:
            response = "this response is not json at all"
        else:
            response = json.dumps(RESPONSES[review_id])
        out.append({"match": review_id, "response": response})
    return out


def main():
    os.makedirs(OUT, exist_ok=True)
    write_jsonl(
        "reviews.jsonl",
        [
            {"review_id": rid, "product_id": pid, "text": text, "category": CAT1 if pid == P1 else CAT2}
            for pid, rid, text in REVIEWS
        ],
    )
    write_jsonl("mock_rules.jsonl", rules())
    # 3 of 20 reviews fail (15% overall, 30% of product 1): over the 0.10 abort threshold.
    write_jsonl("mock_rules_fail15.jsonl", rules(fail_parse=("p1r02", "p1r05", "p1r07")))
    # 1 of 20 fails (5% overall, 10% of product 1): at most the threshold, run completes.
    write_jsonl("mock_rules_fail05.jsonl", rules(fail_parse=("p1r05",)))
    write_jsonl(
        "references.jsonl",
        [{"product_id": pid, "text": text} for pid, text in sorted(REFERENCES.items())],
    )


if __name__ == "__main__":
    main()
