"""Batch embedding extraction with mean pooling over final hidden states.

Protocol: raw petition text goes to the model's own tokenizer as-is (no
lowercasing or stopword removal), truncated at max_tokens (default 128);
the final hidden states are mean-pooled over the attention mask; nothing
is fine-tuned, inference mode only. Encoder-decoder checkpoints contribute
their encoder's final hidden states through the same pooling.

Output is the line-oriented embedding file: a JSON header
{"format_version": 1, "model_id": ..., "dim": ..., "count": ...} followed
by one {"name", "vector"} object per record, floats serialized with
round-trip (repr) precision. The file is written atomically via a temp
file in the same directory.

Each distinct text is embedded once and the vector shared across the names
that carry it, which both saves compute and makes "same text, same vector"
hold by construction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .corpusio import CorpusRow, read_corpus


class ExportError(Exception):
    pass


class ModelUnavailable(ExportError):
    def __init__(self, model_id: str, reason: str):
        self.model_id = model_id
        super().__init__(f"cannot load checkpoint {model_id!r}: {reason}")


class TokenizerFailure(ExportError):
    def __init__(self, name: str, reason: str):
        self.name = name
        super().__init__(f"tokenization failed for record {name!r}: {reason}")


class OutputCollision(ExportError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate record name {name!r} would collide in the output map")


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    model_id: str
    output_path: str
    corpus_format: str = "csv"
    max_tokens: int = 128
    batch_size: int = 8
    device: str = "cpu"
    pooling: str = "mean"  # fixed; field exists so the manifest is explicit

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.pooling != "mean":
            raise ValueError("only mean pooling is supported")


def _load_checkpoint(model_id: str, device: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:  # transformers raises a zoo of types here
        raise ModelUnavailable(model_id, str(exc)) from None
    model.to(torch.device(device))
    model.eval()
    encoder = model.get_encoder() if model.config.is_encoder_decoder else model
    hidden_size = int(model.config.hidden_size)
    return tokenizer, encoder, hidden_size


def _pool_batch(encoder, tokenizer, texts: list[str], max_tokens: int, device: str):
    import torch

    encoded = tokenizer(
        texts,
        padding=True,
        truncation=True,
        max_length=max_tokens,
        return_tensors="pt",
    ).to(torch.device(device))
    with torch.no_grad():
        hidden = encoder(**encoded).last_hidden_state
    mask = encoded["attention_mask"].unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return (summed / counts).cpu().numpy()


def compute_embeddings(job: ExportJob, rows: list[CorpusRow]):
    """(name -> vector map in corpus order, hidden size)."""
    tokenizer, encoder, hidden_size = _load_checkpoint(job.model_id, job.device)

    names_seen: set[str] = set()
    for row in rows:
        if row.name in names_seen:
            raise OutputCollision(row.name)
        names_seen.add(row.name)

    unique_texts: list[str] = []
    text_index: dict[str, int] = {}
    for row in rows:
        if row.text not in text_index:
            text_index[row.text] = len(unique_texts)
            unique_texts.append(row.text)

    pooled = []
    for start in range(0, len(unique_texts), job.batch_size):
        batch = unique_texts[start : start + job.batch_size]
        try:
            pooled.append(_pool_batch(encoder, tokenizer, batch, job.max_tokens, job.device))
        except ExportError:
            raise
        except Exception as exc:
            offender = next(r.name for r in rows if r.text in batch)
            raise TokenizerFailure(offender, str(exc)) from None
    vectors = {row.name: pooled_block(pooled, text_index[row.text], job.batch_size) for row in rows}
    return vectors, hidden_size


def pooled_block(pooled_batches, index: int, batch_size: int):
    return pooled_batches[index // batch_size][index % batch_size]


def write_embedding_file(path, model_id: str, dim: int, vectors: dict) -> None:
    """Emit the embedding file format atomically (temp file + rename)."""
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "format_version": 1,
            "model_id": model_id,
            "dim": dim,
            "count": len(vectors),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for name, vec in vectors.items():
            body = '{"name": ' + json.dumps(name) + ', "vector": ['
            body += ", ".join(repr(float(x)) for x in vec)
            fh.write(body + "]}\n")
    os.replace(tmp_path, path)


def export_embeddings(job: ExportJob) -> dict:
    """Run the whole job; returns a small summary for logging."""
    rows = read_corpus(job.corpus_path, job.corpus_format)
    vectors, hidden_size = compute_embeddings(job, rows)
    write_embedding_file(job.output_path, job.model_id, hidden_size, vectors)
    return {
        "count": len(vectors),
        "dim": hidden_size,
        "model_id": job.model_id,
        "output": str(job.output_path),
    }
