import json

import numpy as np
import pytest

from conftest import write_corpus_csv
from embedexport.cli import run
from embedexport.exporter import (
    ExportJob,
    ModelUnavailable,
    OutputCollision,
    export_embeddings,
)

# The ranking pipeline is the consumer of the file this exporter writes;
# its loader and matrix assembly are used here only to verify that contract.
from petrank.chronology import chronologize_corpus
from petrank.corpus import filter_accepted, load_corpus
from petrank.features import assemble, load_embeddings
from petrank.textstats import text_statistics


def job_for(corpus, checkpoint, out, **kwargs):
    return ExportJob(
        corpus_path=str(corpus),
        model_id=str(checkpoint),
        output_path=str(out),
        **kwargs,
    )


class TestExportRoundTrip:
    def test_ten_petitions_load_cleanly(self, ten_petition_corpus, bert_checkpoint, tmp_path):
        out = tmp_path / "embeddings.jsonl"
        summary = export_embeddings(job_for(ten_petition_corpus, bert_checkpoint, out))
        assert summary["count"] == 10
        table = load_embeddings(out)  # any format violation raises here
        assert table.dim == 32
        assert len(table.vectors) == 10

    def test_header_dim_equals_checkpoint_hidden_size(
        self, ten_petition_corpus, bert_checkpoint, tmp_path
    ):
        from transformers import AutoConfig

        out = tmp_path / "embeddings.jsonl"
        export_embeddings(job_for(ten_petition_corpus, bert_checkpoint, out))
        header = json.loads(out.read_text("utf-8").splitlines()[0])
        assert header["dim"] == AutoConfig.from_pretrained(bert_checkpoint).hidden_size
        assert header["format_version"] == 1
        assert header["count"] == 10

    def test_assembled_matrix_width_is_numeric_plus_dim(
        self, ten_petition_corpus, bert_checkpoint, tmp_path
    ):
        out = tmp_path / "embeddings.jsonl"
        export_embeddings(job_for(ten_petition_corpus, bert_checkpoint, out))
        table = load_embeddings(out)
        corpus = filter_accepted(load_corpus(ten_petition_corpus, "csv"))
        chronology, exclusions = chronologize_corpus(corpus)
        assert not exclusions
        stats = {rec.name: text_statistics(rec.text) for rec in corpus}
        matrix = assemble(chronology, stats, embeddings=table)
        assert matrix.values.shape == (10, 4 + table.dim)

    def test_duplicate_texts_share_one_vector(self, bert_checkpoint, tmp_path):
        corpus = tmp_path / "corpus.csv"
        text = "The petition was filed on 1 March 2008 and admitted for hearing."
        write_corpus_csv(
            corpus,
            [
                (text, 1, "train", "2008_1.txt"),
                ("A different petition text entirely.", 0, "test", "2008_2.txt"),
                (text, 1, "dev", "2008_3.txt"),
            ],
        )
        out = tmp_path / "embeddings.jsonl"
        export_embeddings(job_for(corpus, bert_checkpoint, out))
        table = load_embeddings(out)
        np.testing.assert_array_equal(
            table.vectors["2008_1.txt"], table.vectors["2008_3.txt"]
        )
        assert not np.array_equal(table.vectors["2008_1.txt"], table.vectors["2008_2.txt"])

    def test_empty_corpus_writes_count_zero_header(self, bert_checkpoint, tmp_path):
        corpus = tmp_path / "corpus.csv"
        write_corpus_csv(corpus, [])
        out = tmp_path / "embeddings.jsonl"
        summary = export_embeddings(job_for(corpus, bert_checkpoint, out))
        assert summary["count"] == 0
        header = json.loads(out.read_text("utf-8").splitlines()[0])
        assert header["count"] == 0 and header["dim"] == 32

    def test_reruns_are_deterministic(self, ten_petition_corpus, bert_checkpoint, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export_embeddings(job_for(ten_petition_corpus, bert_checkpoint, a))
        export_embeddings(job_for(ten_petition_corpus, bert_checkpoint, b))
        assert a.read_bytes() == b.read_bytes()


class TestTruncation:
    def test_texts_equal_in_first_tokens_share_vectors(self, bert_checkpoint, tmp_path):
        base = "petition filed on 1 march 2008 and admitted for hearing before the court "
        long_a = base * 40  # far beyond 128 tokens
        long_b = base * 40 + "entirely different tail that truncation removes"
        corpus = tmp_path / "corpus.csv"
        write_corpus_csv(
            corpus,
            [(long_a, 1, "train", "2008_1.txt"), (long_b, 1, "train", "2008_2.txt")],
        )
        out = tmp_path / "embeddings.jsonl"
        export_embeddings(job_for(corpus, bert_checkpoint, out, max_tokens=128))
        table = load_embeddings(out)
        np.testing.assert_array_equal(
            table.vectors["2008_1.txt"], table.vectors["2008_2.txt"]
        )

    def test_batch_size_does_not_change_vectors(
        self, ten_petition_corpus, bert_checkpoint, tmp_path
    ):
        outs = []
        for batch_size in (1, 4):
            out = tmp_path / f"{batch_size}.jsonl"
            export_embeddings(
                job_for(ten_petition_corpus, bert_checkpoint, out, batch_size=batch_size)
            )
            outs.append(load_embeddings(out))
        for name in outs[0].vectors:
            np.testing.assert_allclose(
                outs[0].vectors[name], outs[1].vectors[name], atol=1e-5
            )


class TestEncoderDecoderPath:
    def test_encoder_states_pooled(self, ten_petition_corpus, t5_checkpoint, tmp_path):
        out = tmp_path / "embeddings.jsonl"
        summary = export_embeddings(job_for(ten_petition_corpus, t5_checkpoint, out))
        assert summary["dim"] == 24
        table = load_embeddings(out)
        assert table.dim == 24 and len(table.vectors) == 10


class TestErrors:
    def test_model_unavailable(self, ten_petition_corpus, tmp_path):
        job = job_for(ten_petition_corpus, tmp_path / "no-such-checkpoint", tmp_path / "o.jsonl")
        with pytest.raises(ModelUnavailable):
            export_embeddings(job)

    def test_output_collision_on_duplicate_names(self, bert_checkpoint, tmp_path):
        corpus = tmp_path / "corpus.csv"
        write_corpus_csv(
            corpus,
            [("text one", 1, "train", "2008_1.txt"), ("text two", 1, "train", "2008_1.txt")],
        )
        with pytest.raises(OutputCollision):
            export_embeddings(job_for(corpus, bert_checkpoint, tmp_path / "o.jsonl"))

    def test_no_partial_file_on_failure(self, bert_checkpoint, tmp_path):
        corpus = tmp_path / "corpus.csv"
        write_corpus_csv(
            corpus,
            [("text one", 1, "train", "2008_1.txt"), ("text two", 1, "train", "2008_1.txt")],
        )
        out = tmp_path / "o.jsonl"
        with pytest.raises(OutputCollision):
            export_embeddings(job_for(corpus, bert_checkpoint, out))
        assert not out.exists()

    def test_job_validation(self, ten_petition_corpus, bert_checkpoint, tmp_path):
        with pytest.raises(ValueError):
            job_for(ten_petition_corpus, bert_checkpoint, tmp_path / "o", max_tokens=0)
        with pytest.raises(ValueError):
            job_for(ten_petition_corpus, bert_checkpoint, tmp_path / "o", batch_size=0)


class TestCli:
    def test_cli_round_trip(self, ten_petition_corpus, bert_checkpoint, tmp_path, capsys):
        out = tmp_path / "vectors.jsonl"
        rc = run(
            [
                "--corpus",
                str(ten_petition_corpus),
                "--model",
                str(bert_checkpoint),
                "--out",
                str(out),
                "--batch-size",
                "4",
            ]
        )
        assert rc == 0
        assert "wrote 10 vectors (dim 32" in capsys.readouterr().out
        assert load_embeddings(out).dim == 32

    def test_cli_reports_errors(self, ten_petition_corpus, tmp_path, capsys):
        rc = run(
            [
                "--corpus",
                str(ten_petition_corpus),
                "--model",
                str(tmp_path / "missing"),
                "--out",
                str(tmp_path / "o.jsonl"),
            ]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err
