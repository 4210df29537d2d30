"""Text enrichment and normalization on Spanish-style clinical snippets.

Diagnostic-code tokens found in the bundled vocabulary are expanded with
their standardized descriptions (keeping the original literal), then the
text is lowercased, de-accented, stripped of non-informative characters and
whitespace-collapsed. The full pipeline is idempotent.
"""

from icd_coder.corpus import load_bundled_vocabulary
from icd_coder.preprocess import PreprocessConfig, expand_icd_abbreviations, normalize_text

vocabulary = load_bundled_vocabulary()
print(f"bundled vocabulary: {len(vocabulary)} codes "
      f"({len(vocabulary.missing_descriptions)} without description)")
print()

samples = [
    "Paciente con dx F41.1, evolución crónica.",
    "  Ansiedad   GRAVE!!  seguimiento en CSM ",
    "F32.9 y F43.2; descartar F60.3.",
    "tept en estudio",
]

config = PreprocessConfig()  # expansion + lowercase + accents + cleanup
for text in samples:
    expanded = expand_icd_abbreviations(text, vocabulary)
    normalized = normalize_text(text, config, vocabulary)
    print(f"raw:        {text!r}")
    print(f"expanded:   {expanded!r}")
    print(f"normalized: {normalized!r}")
    again = normalize_text(normalized, config, vocabulary)
    assert again == normalized, "pipeline must be idempotent"
    print()

print("idempotence verified on every sample")
