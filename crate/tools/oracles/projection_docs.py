"""Regenerates fixtures/projection_docs.jsonl: 200 short idea texts from two
venues with partly overlapping vocabularies.

    python3 tools/oracles/projection_docs.py > fixtures/projection_docs.jsonl
"""
import json
import random

SHARED = ["efficient", "robust", "scalable", "interpretable", "adaptive", "large language models", "benchmark"]
NLP = ["machine translation", "question answering", "summarization", "dialogue", "argument mining",
       "retrieval augmented generation", "instruction tuning", "low resource languages", "hallucination"]
ML = ["diffusion models", "graph neural networks", "reinforcement learning", "optimization", "representation learning",
      "contrastive learning", "generalization", "sparse attention", "state space models"]

rng = random.Random(7)
for venue, pool in (("ACL 2024", NLP), ("ICLR 2024", ML)):
    for i in range(100):
        words = [rng.choice(SHARED), rng.choice(pool), rng.choice(pool + SHARED)]
        print(json.dumps({"idea_ref": f"{venue.split()[0].lower()}-{i:03d}", "venue": venue, "text": ", ".join(words)}))
