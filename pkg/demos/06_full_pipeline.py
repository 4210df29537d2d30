"""The whole pipeline behind one config: corpus files in, run report out.

Equivalent to `icd-coder train --config ...`; everything a run produces
(split, frequency profile, per-class CSVs, model artifact, summary JSON)
lands in the output directory.
"""

import csv
import json
import tempfile
from pathlib import Path

from icd_coder.corpus import SyntheticSpec, generate_synthetic_corpus, save_dataset
from icd_coder.pipeline import PipelineConfig, run_pipeline
from icd_coder.vectorize import write_emb1, write_ids

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    dataset, oracle = generate_synthetic_corpus(
        SyntheticSpec(n_documents=1200, n_labels=20, zipf_exponent=1.1,
                      paraphrase_noise=0.2, seed=9))
    save_dataset(root / "dataset.jsonl", dataset)
    with open(root / "vocabulary.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["code", "description"])
        writer.writerows(dataset.vocabulary.entries)
    write_emb1(root / "oracle.emb1", oracle)
    write_ids(root / "oracle.ids", dataset.ids)

    config = PipelineConfig.from_dict({
        "dataset": str(root / "dataset.jsonl"),
        "vocabulary": str(root / "vocabulary.csv"),
        "preprocess": {"expand_codes": False},
        "split": {"ratios": [0.7, 0.15, 0.15]},
        "representation": {"name": "tfidf", "params": {"max_features": 1500}},
        "classifier": {"name": "mlp",
                       "params": {"hidden_layers": [128], "learning_rate": 0.005,
                                  "batch_size": 64, "epochs": 30}},
        "threshold": 0.5,
        "seed": 9,
        "out_dir": str(root / "run"),
    })
    report = run_pipeline(config)

    print("stage timings:", {k: f"{v:.2f}s" for k, v in report.timings.items()})
    print()
    print("validation:", json.dumps(report.validation.summary(), indent=2))
    print("test:      ", json.dumps(report.test.summary(), indent=2))
    print()
    print("artifacts written:")
    for name, path in sorted(report.paths.items()):
        print(f"  {name:>20}: {Path(path).name}")
