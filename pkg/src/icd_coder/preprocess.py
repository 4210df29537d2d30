"""Text enrichment and normalization applied before any vectorization.

The pipeline runs in a fixed order: diagnostic-code expansion, lowercasing,
accent stripping, non-informative-character removal, whitespace collapse,
trim. The full pipeline is idempotent: applying it twice equals applying it
once.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .corpus import Document, LabeledDataset, LabelVocabulary

# Everything that is not a word character, whitespace or a dot gets dropped.
# Dots survive only *inside* alphanumeric tokens (F32.9, 3.5); stray dots are
# removed by the dot cleanup below.
DEFAULT_DROP_CHARS = r"[^\w\s.]"

# Standalone letter+digits token with an optional .digits suffix, not embedded
# in a larger word or dotted compound (a trailing sentence dot is fine).
# Matched case-insensitively; greedy, so F32.9 wins over F32 when both
# interpretations are possible.
CODE_TOKEN = re.compile(r"(?<![\w.])[A-Za-z]\d+(?:\.\d+)?(?!\w)(?!\.\w)")

_STRAY_DOT = re.compile(r"(?<![0-9A-Za-z])\.|\.(?![0-9A-Za-z])")
_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class PreprocessConfig:
    expand_codes: bool = True
    lowercase: bool = True
    strip_accents: bool = True
    collapse_whitespace: bool = True
    drop_chars: str = DEFAULT_DROP_CHARS

    def to_dict(self) -> dict:
        return {
            "expand_codes": self.expand_codes,
            "lowercase": self.lowercase,
            "strip_accents": self.strip_accents,
            "collapse_whitespace": self.collapse_whitespace,
            "drop_chars": self.drop_chars,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def strip_accents(text: str) -> str:
    """NFKD decomposition followed by combining-mark removal."""
    return "".join(
        ch for ch in unicodedata.normalize("NFKD", text) if not unicodedata.combining(ch)
    )


def _fold(text: str) -> str:
    """Canonical comparison form: lowercase, unaccented, alphanumeric tokens."""
    text = strip_accents(text).lower()
    text = re.sub(DEFAULT_DROP_CHARS, " ", text)
    text = _STRAY_DOT.sub(" ", text)
    return _WHITESPACE.sub(" ", text).strip()


def expand_icd_abbreviations(text: str, vocabulary: LabelVocabulary) -> str:
    """Append the vocabulary description after every standalone code token.

    The original code literal is kept so frequency models can still key on it.
    Tokens shaped like codes but absent from the vocabulary are untouched, as
    are codes whose entry has no description. A code already followed by its
    description (in any case/accent form) is not expanded again, which keeps
    the operation idempotent.
    """
    out: list[str] = []
    cursor = 0
    for m in CODE_TOKEN.finditer(text):
        code = m.group(0)
        if code not in vocabulary:
            continue
        desc = vocabulary.description(code)
        if not desc:
            continue
        folded_desc = _fold(desc)
        tail = text[m.end():]
        if _fold(tail[: len(desc) + 16]).startswith(folded_desc):
            continue
        out.append(text[cursor:m.end()])
        out.append(" " + desc)
        cursor = m.end()
    out.append(text[cursor:])
    return "".join(out)


def normalize_text(
    text: str,
    config: PreprocessConfig,
    vocabulary: LabelVocabulary | None = None,
) -> str:
    """Apply the configured steps in fixed order. Expansion runs first so code
    patterns match case-insensitively against the canonical vocabulary."""
    if config.expand_codes:
        if vocabulary is None:
            raise ValueError("expand_codes requires a vocabulary")
        text = expand_icd_abbreviations(text, vocabulary)
    if config.lowercase:
        text = text.lower()
    if config.strip_accents:
        text = strip_accents(text)
    if config.drop_chars:
        text = re.sub(config.drop_chars, " ", text)
        text = _STRAY_DOT.sub(" ", text)
    if config.collapse_whitespace:
        text = _WHITESPACE.sub(" ", text)
    return text.strip()


def preprocess_corpus(
    dataset: LabeledDataset,
    config: PreprocessConfig,
) -> tuple[LabeledDataset, list[tuple[str, str]]]:
    """Normalize every document's text; ids, codes and order are unchanged.

    Returns the new dataset plus a report of documents whose text became
    empty, as ``(id, reason)`` rows.
    """
    vocabulary = dataset.vocabulary
    documents: list[Document] = []
    report: list[tuple[str, str]] = []
    for doc in dataset.documents:
        text = normalize_text(doc.text, config, vocabulary)
        if not text and doc.text:
            report.append((doc.id, "empty_after_normalization"))
        documents.append(Document(id=doc.id, text=text, codes=doc.codes))
    return LabeledDataset(documents, vocabulary), report


def write_empty_text_report(path: str | Path, report: list[tuple[str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "reason"])
        w.writerows(report)


def tokenize(text: str) -> list[str]:
    """Whitespace tokenizer; intra-token dots are preserved (F32.9 stays one
    token). Meant to run on normalized text."""
    return text.split()
