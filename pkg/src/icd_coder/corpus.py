"""Dataset model: label vocabulary, documents, JSONL/CSV I/O, label-frequency
profiling and the synthetic corpus generator used for desk-scale verification.

Datasets and vocabularies are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

BUNDLED_VOCABULARY_FILE = "icd_mental_health_codes.csv"


class DataError(ValueError):
    """Malformed input data (bad JSONL line, duplicate id, unknown code...)."""


def _normalize_code(code: str) -> str:
    return code.strip().upper()


class LabelVocabulary:
    """Ordered label set: one (code, description) entry per position.

    Codes are unique after whitespace/case normalization; positions are dense
    0..N-1 in file order so column indices stay stable across runs. Entries
    without a description are allowed but collected in
    ``missing_descriptions``.
    """

    def __init__(self, entries: list[tuple[str, str]]):
        self.entries: tuple[tuple[str, str], ...] = tuple(
            (code.strip(), desc.strip()) for code, desc in entries
        )
        self.index: dict[str, int] = {}
        for pos, (code, _) in enumerate(self.entries):
            key = _normalize_code(code)
            if key in self.index:
                raise DataError(f"duplicate code {code}")
            self.index[key] = pos
        self.missing_descriptions: tuple[str, ...] = tuple(
            code for code, desc in self.entries if not desc
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, code: str) -> bool:
        return _normalize_code(code) in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self.entries == other.entries

    @property
    def codes(self) -> list[str]:
        return [code for code, _ in self.entries]

    def position(self, code: str) -> int:
        key = _normalize_code(code)
        if key not in self.index:
            raise KeyError(code)
        return self.index[key]

    def description(self, code: str) -> str:
        return self.entries[self.position(code)][1]

    def has_descriptions(self) -> bool:
        return any(desc for _, desc in self.entries)


def load_label_vocabulary(path: str | Path, dedupe_first: bool = False) -> LabelVocabulary:
    """Read a ``code,description`` CSV (RFC-4180, UTF-8).

    Duplicate codes are an error naming the offending code; with
    ``dedupe_first`` the first occurrence wins and later rows are dropped.
    """
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["code", "description"]:
            raise DataError(f"{path}: expected header 'code,description'")
        for row in reader:
            if not row or not row[0].strip():
                continue
            code = row[0].strip()
            desc = row[1].strip() if len(row) > 1 else ""
            key = _normalize_code(code)
            if key in seen:
                if dedupe_first:
                    continue
                raise DataError(f"duplicate code {code}")
            seen.add(key)
            entries.append((code, desc))
    return LabelVocabulary(entries)


def bundled_vocabulary_path() -> Path:
    """Path of the mental-health diagnostic code list shipped with the package."""
    return Path(str(resources.files("icd_coder").joinpath("data", BUNDLED_VOCABULARY_FILE)))


def load_bundled_vocabulary(dedupe_first: bool = True) -> LabelVocabulary:
    """The shipped 85-row diagnostic code list (one code appears twice, so the
    deduped vocabulary has 84 unique codes)."""
    return load_label_vocabulary(bundled_vocabulary_path(), dedupe_first=dedupe_first)


@dataclass(frozen=True)
class Document:
    """One free-text description plus its gold codes (possibly none)."""

    id: str
    text: str
    codes: frozenset[str]


class LabeledDataset:
    """An ordered document collection bound to a label vocabulary."""

    def __init__(self, documents: list[Document], vocabulary: LabelVocabulary):
        for doc in documents:
            for code in doc.codes:
                if code not in vocabulary:
                    raise DataError(f"document {doc.id}: unknown code {code}")
        ids = [d.id for d in documents]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate document id(s): {', '.join(dupes[:5])}")
        self.documents: tuple[Document, ...] = tuple(documents)
        self.vocabulary = vocabulary

    def __len__(self) -> int:
        return len(self.documents)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabeledDataset)
            and self.documents == other.documents
            and self.vocabulary == other.vocabulary
        )

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    def label_matrix(self) -> np.ndarray:
        """Binary indicator matrix, shape (documents, vocabulary)."""
        y = np.zeros((len(self.documents), len(self.vocabulary)), dtype=np.int8)
        for i, doc in enumerate(self.documents):
            for code in doc.codes:
                y[i, self.vocabulary.position(code)] = 1
        return y

    def labeled_indices(self) -> np.ndarray:
        """Row indices of documents carrying at least one code."""
        return np.array([i for i, d in enumerate(self.documents) if d.codes], dtype=np.int64)

    def labeled_subset(self) -> "LabeledDataset":
        return LabeledDataset([d for d in self.documents if d.codes], self.vocabulary)

    def degenerate_labels(self) -> list[str]:
        """Codes with zero positive documents (reported, never silently dropped)."""
        counts = self.label_matrix().sum(axis=0)
        return [self.vocabulary.codes[j] for j in np.flatnonzero(counts == 0)]

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset([self.documents[i] for i in indices], self.vocabulary)


UNKNOWN_CODE_POLICIES = ("reject", "drop", "fail")


def load_dataset(
    path: str | Path,
    vocabulary: LabelVocabulary,
    unknown_codes: str = "fail",
) -> tuple[LabeledDataset, list[tuple[int, str]]]:
    """Parse a JSONL dataset: one ``{"id","text","codes"}`` object per line.

    Returns the dataset plus a rejection report of ``(line_number, code)``
    pairs for codes absent from the vocabulary. ``unknown_codes`` selects what
    else happens to them: ``reject`` drops the whole record, ``drop`` keeps
    the record without the offending code, ``fail`` raises.
    """
    if unknown_codes not in UNKNOWN_CODE_POLICIES:
        raise ValueError(f"unknown_codes must be one of {UNKNOWN_CODE_POLICIES}")
    documents: list[Document] = []
    rejections: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: malformed JSON ({exc.msg})") from exc
            try:
                doc_id = str(record["id"])
                text = str(record["text"])
                codes = [str(c) for c in record["codes"]]
            except (KeyError, TypeError) as exc:
                raise DataError(f"{path}:{line_no}: record missing id/text/codes") from exc
            if doc_id in seen_ids:
                raise DataError(f"{path}:{line_no}: duplicate id {doc_id}")
            seen_ids.add(doc_id)
            unknown = [c for c in codes if c not in vocabulary]
            for code in unknown:
                rejections.append((line_no, code))
            if unknown:
                if unknown_codes == "fail":
                    raise DataError(f"{path}:{line_no}: unknown code {unknown[0]}")
                if unknown_codes == "reject":
                    continue
                codes = [c for c in codes if c in vocabulary]
            documents.append(Document(id=doc_id, text=text, codes=frozenset(codes)))
    return LabeledDataset(documents, vocabulary), rejections


def save_dataset(path: str | Path, dataset: LabeledDataset) -> None:
    """Write JSONL (UTF-8, LF). Codes are emitted in vocabulary order so a
    load -> save -> load round trip is byte-stable."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc in dataset.documents:
            codes = sorted(doc.codes, key=dataset.vocabulary.position)
            f.write(json.dumps({"id": doc.id, "text": doc.text, "codes": codes},
                               ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class FrequencyProfile:
    """Per-label positive counts plus the descending-sorted coverage curve."""

    codes: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def sorted_order(self) -> np.ndarray:
        """Label indices by descending count, ties by code for stability."""
        return np.array(
            sorted(range(len(self.codes)), key=lambda j: (-int(self.counts[j]), self.codes[j])),
            dtype=np.int64,
        )

    def coverage_curve(self) -> np.ndarray:
        """Cumulative positive-assignment fraction after the k most frequent
        labels; non-decreasing, ends at 1.0 (all zeros for an unlabeled corpus)."""
        order = self.sorted_order()
        total = self.total
        if total == 0:
            return np.zeros(len(self.codes))
        return np.cumsum(self.counts[order]) / total

    def smallest_k_covering(self, fraction: float) -> int:
        """Smallest number of top labels whose positives reach ``fraction``."""
        curve = self.coverage_curve()
        hits = np.flatnonzero(curve >= fraction)
        return int(hits[0]) + 1 if hits.size else len(self.codes)

    def to_csv(self, path: str | Path) -> None:
        order = self.sorted_order()
        curve = self.coverage_curve()
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["code", "count", "cumulative_fraction"])
            for rank, j in enumerate(order):
                w.writerow([self.codes[j], int(self.counts[j]), repr(float(curve[rank]))])


def frequency_profile(dataset: LabeledDataset) -> FrequencyProfile:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    counts = dataset.label_matrix().sum(axis=0).astype(np.int64)
    return FrequencyProfile(codes=tuple(dataset.vocabulary.codes), counts=counts)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic long-tail corpus generator.

    Label marginals follow a Zipf law over label ranks (rank 1 = first
    vocabulary position = most frequent). Every document's text contains the
    signature tokens of each of its labels (each independently corrupted to a
    label-specific paraphrase variant with probability ``paraphrase_noise``)
    plus filler tokens. ``multi_label_rate`` is the per-step probability of
    drawing one more label (geometric, capped at 4 labels per document).
    """

    n_documents: int
    n_labels: int
    zipf_exponent: float = 1.1
    keywords_per_label: int = 3
    paraphrase_noise: float = 0.0
    multi_label_rate: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        if self.n_documents < 1:
            raise ValueError("n_documents must be >= 1")
        if self.n_labels < 1:
            raise ValueError("n_labels must be >= 1")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be > 0")
        if self.keywords_per_label < 1:
            raise ValueError("keywords_per_label must be >= 1")
        if not 0.0 <= self.paraphrase_noise <= 1.0:
            raise ValueError("paraphrase_noise must be in [0, 1]")
        if not 0.0 <= self.multi_label_rate <= 1.0:
            raise ValueError("multi_label_rate must be in [0, 1]")


N_FILLER_TOKENS = 200
N_PARAPHRASE_VARIANTS = 2
MAX_LABELS_PER_DOC = 4


def synthetic_signature_tokens(label: int, keywords_per_label: int) -> list[str]:
    return [f"sym{label:03d}x{k}" for k in range(keywords_per_label)]


def _paraphrase_variant(token: str, variant: int) -> str:
    return f"{token}v{variant}"


def generate_synthetic_corpus(spec: SyntheticSpec) -> tuple[LabeledDataset, np.ndarray]:
    """Deterministic synthetic corpus plus its oracle embedding.

    The oracle embedding is a dense float32 matrix (documents x labels) that
    encodes each document's noiseless label signature (multi-hot), i.e. the
    representation an ideal noise-free encoder would produce.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, n_labels = spec.n_documents, spec.n_labels

    ranks = np.arange(1, n_labels + 1, dtype=np.float64)
    zipf = ranks ** (-spec.zipf_exponent)
    zipf /= zipf.sum()

    label_sets: list[set[int]] = []
    for _ in range(n):
        labels = {int(rng.choice(n_labels, p=zipf))}
        while len(labels) < MAX_LABELS_PER_DOC and rng.random() < spec.multi_label_rate:
            labels.add(int(rng.choice(n_labels, p=zipf)))
        label_sets.append(labels)

    # Guarantee every label at least one positive when the corpus is big
    # enough; remaining zero-count labels are reportable via the dataset.
    counts = np.zeros(n_labels, dtype=np.int64)
    for labels in label_sets:
        for l in labels:
            counts[l] += 1
    if n >= n_labels:
        for l in np.flatnonzero(counts == 0):
            label_sets[int(l) % n].add(int(l))

    filler_weights = 1.0 / (np.arange(N_FILLER_TOKENS) + 10.0)
    filler_weights /= filler_weights.sum()

    vocabulary = LabelVocabulary(
        [
            (f"C{l:03d}", " ".join(synthetic_signature_tokens(l, spec.keywords_per_label)))
            for l in range(n_labels)
        ]
    )

    documents: list[Document] = []
    for i, labels in enumerate(label_sets):
        tokens: list[str] = []
        for l in sorted(labels):
            for tok in synthetic_signature_tokens(l, spec.keywords_per_label):
                if spec.paraphrase_noise > 0 and rng.random() < spec.paraphrase_noise:
                    tok = _paraphrase_variant(tok, int(rng.integers(N_PARAPHRASE_VARIANTS)))
                tokens.append(tok)
        n_filler = int(rng.poisson(6)) + 2
        tokens.extend(
            f"w{j:03d}" for j in rng.choice(N_FILLER_TOKENS, size=n_filler, p=filler_weights)
        )
        rng.shuffle(tokens)
        documents.append(
            Document(
                id=f"syn{i:06d}",
                text=" ".join(tokens),
                codes=frozenset(f"C{l:03d}" for l in labels),
            )
        )

    dataset = LabeledDataset(documents, vocabulary)
    oracle = dataset.label_matrix().astype(np.float32)
    return dataset, oracle
