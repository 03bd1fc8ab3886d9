"""Regenerates fixtures/oracles/tfidf_oracle.json with scikit-learn's
TfidfVectorizer (raw counts, smooth idf, l2 rows).

    python3 tools/oracles/tfidf_oracle.py > fixtures/oracles/tfidf_oracle.json
"""
import json
import sys

from sklearn.feature_extraction.text import TfidfVectorizer

DOCS = [
    "Mamba for question answering",
    "diffusion for question answering",
    "Mamba, Mamba and more Mamba",
    "efficient retrieval-augmented generation for low-resource QA",
]

vec = TfidfVectorizer(lowercase=True, token_pattern=r"(?u)[0-9a-z]+", smooth_idf=True, norm="l2", sublinear_tf=False)
m = vec.fit_transform(DOCS).toarray()
vocab = vec.get_feature_names_out().tolist()
json.dump({"documents": DOCS, "vocabulary": vocab, "idf": vec.idf_.tolist(), "weights": m.tolist()}, sys.stdout, indent=1)
print()
