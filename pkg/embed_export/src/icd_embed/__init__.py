"""Transformer bridge for the clinical coding pipeline: exports frozen
final-hidden-state embeddings in EMB1 format and trains the
linear-probe-then-fine-tune classification tier, emitting score matrices and
prediction CSVs the main pipeline evaluates."""

__version__ = "0.1.0"
