"""Embedding export: shapes, pooling, determinism, truncation accounting."""

import json

import numpy as np
import pytest
import torch

from icd_embed.emb1 import read_emb1, read_ids, write_emb1
from icd_embed.export import ExportJob, export_embeddings, pool_hidden_states


def make_job(corpus, checkpoint, tmp_path, **overrides):
    kwargs = dict(model=str(checkpoint), dataset=str(corpus["root"] / "dataset.jsonl"),
                  matrix_out=str(tmp_path / "m.emb1"), ids_out=str(tmp_path / "m.ids"),
                  pooling="mean", max_seq_len=32, batch_size=16, seed=0)
    kwargs.update(overrides)
    return ExportJob(**kwargs)


class TestExport:
    def test_header_matches_corpus_and_hidden_size(self, corpus, checkpoint, tmp_path):
        report = export_embeddings(make_job(corpus, checkpoint, tmp_path))
        assert report.n_documents == len(corpus["records"])
        assert report.dim == 32
        matrix = read_emb1(tmp_path / "m.emb1")
        assert matrix.shape == (len(corpus["records"]), 32)
        assert np.isfinite(matrix).all()

    def test_ids_in_dataset_order(self, corpus, checkpoint, tmp_path):
        export_embeddings(make_job(corpus, checkpoint, tmp_path))
        ids = read_ids(tmp_path / "m.ids")
        assert ids == [r["id"] for r in corpus["records"]]

    def test_same_job_twice_identical_files(self, corpus, checkpoint, tmp_path):
        export_embeddings(make_job(corpus, checkpoint, tmp_path))
        first = (tmp_path / "m.emb1").read_bytes()
        export_embeddings(make_job(corpus, checkpoint, tmp_path))
        assert (tmp_path / "m.emb1").read_bytes() == first

    def test_sidecar_records_pooling(self, corpus, checkpoint, tmp_path):
        export_embeddings(make_job(corpus, checkpoint, tmp_path, pooling="first-token"))
        meta = json.loads((tmp_path / "m.emb1.meta.json").read_text())
        assert meta["pooling"] == "first-token"
        assert meta["rows"] == len(corpus["records"])

    def test_truncation_counted(self, corpus, checkpoint, tmp_path):
        report = export_embeddings(make_job(corpus, checkpoint, tmp_path,
                                            max_seq_len=4))
        assert report.truncated == len(corpus["records"])

    def test_bad_pooling_rejected(self, corpus, checkpoint, tmp_path):
        with pytest.raises(ValueError, match="pooling"):
            make_job(corpus, checkpoint, tmp_path, pooling="max").validate()


class TestPooling:
    def test_mean_ignores_padding(self):
        hidden = torch.tensor([[[1.0, 2.0], [3.0, 4.0], [100.0, 100.0]]])
        mask = torch.tensor([[1, 1, 0]])
        pooled = pool_hidden_states(hidden, mask, "mean")
        assert torch.allclose(pooled, torch.tensor([[2.0, 3.0]]))

    def test_first_token(self):
        hidden = torch.tensor([[[1.0, 2.0], [3.0, 4.0]]])
        mask = torch.tensor([[1, 1]])
        pooled = pool_hidden_states(hidden, mask, "first-token")
        assert torch.allclose(pooled, torch.tensor([[1.0, 2.0]]))


class TestEmb1:
    def test_round_trip_bit_identical(self, tmp_path):
        matrix = np.random.default_rng(0).standard_normal((7, 5)).astype(np.float32)
        write_emb1(tmp_path / "x.emb1", matrix)
        assert np.array_equal(read_emb1(tmp_path / "x.emb1"), matrix)

    def test_layout(self, tmp_path):
        write_emb1(tmp_path / "x.emb1", np.zeros((2, 3), dtype=np.float32))
        raw = (tmp_path / "x.emb1").read_bytes()
        assert raw[:4] == b"EMB1"
        assert int.from_bytes(raw[4:8], "little") == 2
        assert int.from_bytes(raw[8:12], "little") == 3
