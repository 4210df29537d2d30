"""Toolkit for mapping free-text clinical diagnostic descriptions to
multi-label ICD code sets: preprocessing, text representations, multi-label
classifiers, stratified evaluation and TPE hyperparameter search."""

__version__ = "0.1.0"
