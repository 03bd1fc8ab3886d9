"""Regenerates fixtures/coverage_similarity.json: an original title of 31
distinct tokens and a five-candidate reconstruction answer whose candidates
share s of those tokens and add 69 tokens of their own, so each candidate's
Jaccard similarity to the original is exactly s / 100.

    python3 tools/oracles/coverage_fixture.py > fixtures/coverage_similarity.json
"""
import json
import sys

SHARED = [10, 29, 31, 5, 0]
original = " ".join(f"w{i}" for i in range(1, 32))
lines = []
for n, s in enumerate(SHARED, start=1):
    words = [f"w{i}" for i in range(1, s + 1)] + [f"x{n}y{j}" for j in range(1, 70)]
    lines.append(f"{n}. [{' '.join(words)}]")
response = "Here are five titles:\n" + "\n".join(lines) + "\n"
json.dump({"original": original, "response": response,
           "similarities": [s / 100 for s in SHARED], "best": max(SHARED) / 100}, sys.stdout, indent=1)
print()
