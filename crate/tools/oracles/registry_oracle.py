"""Per venue and disk: distinct normalized element count and total mentions
in the golden drafts. Independent of the Rust normalizer: NFKC, lowercase,
runs of alphanumerics joined by single spaces.

    python3 tools/oracles/registry_oracle.py
"""

import json
import re
import unicodedata
from collections import defaultdict
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2] / "fixtures"


def normalize(s):
    s = unicodedata.normalize("NFKC", s).lower()
    return " ".join(re.findall(r"[^\W_]+", s))


def main():
    papers = [json.loads(l) for l in (ROOT / "mini_corpus.jsonl").read_text().splitlines() if l.strip()]
    venue_of = {p["id"]: f'{p["venue"]} {p["year"]}' for p in papers}
    drafts = [json.loads(l) for l in (ROOT / "golden" / "drafts.jsonl").read_text().splitlines() if l.strip()]
    keys = defaultdict(lambda: defaultdict(set))
    mentions = defaultdict(lambda: defaultdict(int))
    for d in drafts:
        venue = venue_of[d["paper_id"]]
        for disk in "ABC":
            for e in d[disk]:
                k = normalize(e)
                if k:
                    keys[venue][disk].add(k)
                    mentions[venue][disk] += 1
    out = {
        v: {disk: {"distinct_normalized": len(keys[v][disk]), "mentions": mentions[v][disk]} for disk in "ABC"}
        for v in sorted(keys)
    }
    (ROOT / "oracles" / "registry_counts.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
