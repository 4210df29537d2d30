"""Shared fixtures: a tiny keyword corpus written through the file
interfaces, plus a miniature local checkpoint."""

import json

import numpy as np
import pytest

from icd_embed.checkpoints import create_tiny_checkpoint

N_LABELS = 6
N_DOCS = 150


def build_corpus_files(root, n_docs=N_DOCS, n_labels=N_LABELS, seed=0):
    """Signature-token corpus: label i owns tokens kw{i}a / kw{i}b."""
    rng = np.random.default_rng(seed)
    codes = [f"C{i}" for i in range(n_labels)]
    fillers = [f"w{j}" for j in range(20)]
    records = []
    for d in range(n_docs):
        label = int(rng.integers(n_labels))
        tokens = [f"kw{label}a", f"kw{label}b"]
        tokens += [fillers[j] for j in rng.integers(0, len(fillers), size=4)]
        rng.shuffle(tokens)
        records.append({"id": f"d{d:04d}", "text": " ".join(tokens),
                        "codes": [codes[label]]})
    with open(root / "dataset.jsonl", "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    with open(root / "vocabulary.csv", "w", encoding="utf-8") as f:
        f.write("code,description\n")
        f.writelines(f"{c},signature {c}\n" for c in codes)
    n_train = int(0.7 * n_docs)
    n_val = int(0.15 * n_docs)
    with open(root / "split.csv", "w", encoding="utf-8") as f:
        f.write("id,partition\n")
        for d, record in enumerate(records):
            part = ("train" if d < n_train
                    else "validation" if d < n_train + n_val else "test")
            f.write(f"{record['id']},{part}\n")
    tokens = sorted({t for r in records for t in r["text"].split()})
    return records, codes, tokens


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    records, codes, tokens = build_corpus_files(root)
    return {"root": root, "records": records, "codes": codes, "tokens": tokens}


@pytest.fixture(scope="session")
def checkpoint(corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "tiny"
    return create_tiny_checkpoint(path, corpus["tokens"], hidden_size=32,
                                  num_layers=2, num_heads=2, seed=1)
