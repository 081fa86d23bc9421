#!/usr/bin/env python3
"""Regenerates the sample taxonomy files under data/.

The 1000-category sample is three nested levels of ten groups; every
level-3 node holds exactly one leaf so each category owns its own
deepest branch.
"""
import json
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def categories_1000():
    groups = []
    index = 0
    for g in range(10):
        subs = []
        for s in range(10):
            cats = []
            for c in range(10):
                cats.append({
                    "name": f"c{c}",
                    "children": [{"name": f"class_{index:03d}", "class_index": index}],
                })
                index += 1
            subs.append({"name": f"s{s}", "children": cats})
        groups.append({"name": f"g{g}", "children": subs})
    return {"max_levels": 4, "root": {"name": "root", "children": groups}}


def main():
    out = DATA / "taxonomy_1000.json"
    out.write_text(json.dumps(categories_1000(), separators=(",", ":")) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
