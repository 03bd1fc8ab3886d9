"""Regenerates fixtures/oracles/metrics_oracle.json.

Values come from NLTK's sentence_bleu (method1 smoothing, epsilon 0.1,
uniform weights over orders 1..min(4, len(candidate))) and a direct
set-based Jaccard. Titles are plain ASCII so lower-casing and splitting on
non-alphanumerics is the whole tokenizer.

    python3 tools/oracles/metrics_oracle.py > fixtures/oracles/metrics_oracle.json
"""
import json
import random
import re

from nltk.translate.bleu_score import SmoothingFunction, sentence_bleu

VOCAB = """adaptive retrieval augmented generation for multilingual question answering
efficient mixture of experts scaling laws in low resource machine translation
contrastive decoding reduces hallucination in large language models
mamba state space models for long context reasoning
diffusion models as zero shot image editors with text guidance
calibrating confidence of instruction tuned models under distribution shift
graph neural networks meet theory of mind benchmarks
sparse attention is all you need for efficient transformers
debate improves factuality of reasoning chains
hindsight relabeling for reinforcement learning from human feedback
variational inference in disentangled latent spaces
less is more data pruning for pretraining corpora""".split()


def tokens(s):
    return re.findall(r"[0-9a-z]+", s.lower())


def bleu(cand, ref):
    n = min(4, len(cand))
    weights = tuple([1.0 / n] * n)
    return sentence_bleu([ref], cand, weights=weights,
                         smoothing_function=SmoothingFunction(epsilon=0.1).method1)


def jaccard(a, b):
    sa, sb = set(a), set(b)
    return len(sa & sb) / len(sa | sb)


def title(rng, base=None):
    if base is None or rng.random() < 0.3:
        return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 12)))
    words = base.split()
    out = []
    for w in words:
        r = rng.random()
        if r < 0.15:
            continue
        out.append(rng.choice(VOCAB) if r < 0.4 else w)
    if rng.random() < 0.5:
        out += [rng.choice(VOCAB) for _ in range(rng.randint(1, 4))]
    return " ".join(out) or rng.choice(VOCAB)


def capitalize(s, rng):
    words = [w.capitalize() if rng.random() < 0.5 else w for w in s.split()]
    return " ".join(words).replace(" for ", ": for ", 1)


def main():
    rng = random.Random(20241)
    pairs = []
    for _ in range(50):
        ref = title(rng)
        cand = title(rng, ref)
        cand, ref = capitalize(cand, rng), capitalize(ref, rng)
        pairs.append({"candidate": cand, "reference": ref,
                      "bleu": bleu(tokens(cand), tokens(ref))})

    ideas5 = [title(rng) for _ in range(5)]
    refs5 = [title(rng, ideas5[i % 5]) for i in range(5)]
    rel = sum(bleu(tokens(i), tokens(r)) for i in ideas5 for r in refs5) / 25

    ideas3 = [title(rng) for _ in range(3)]
    refs10 = [title(rng, ideas3[i % 3]) for i in range(10)]
    best = sorted((max(jaccard(tokens(i), tokens(r)) for i in ideas3) for r in refs10), reverse=True)
    sim = sum(best[:3]) / 3
    mean = sorted((sum(jaccard(tokens(i), tokens(r)) for i in ideas3) / 3 for r in refs10), reverse=True)
    sim_mean = sum(mean[:3]) / 3

    all_tokens = [t for s in ideas3 for t in tokens(s)]
    json.dump({
        "bleu_pairs": pairs,
        "relevance": {"ideas": ideas5, "references": refs5, "value": rel},
        "similarity": {"ideas": ideas3, "references": refs10, "max": sim, "mean": sim_mean,
                        "distinct1": len(set(all_tokens)) / len(all_tokens)},
    }, __import__("sys").stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
