import csv

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast, ByT5Tokenizer, T5Config, T5Model
from transformers.utils import logging as hf_logging

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "petition", "was", "filed", "on", "and", "admitted", "for",
    "hearing", "scheduled", "before", "court", "leave", "granted", "appeal",
    "march", "april", "january", "2008", "2009", "1", "2", "11", "12",
    "##s", "##ed", "##ing", "a", "b", "c", "of", "no", ".", ",",
]


@pytest.fixture(scope="session")
def bert_checkpoint(tmp_path_factory):
    """Tiny randomly initialized BERT saved as a real on-disk checkpoint."""
    root = tmp_path_factory.mktemp("ckpt")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(_VOCAB) + "\n", "utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(_VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=48,
        max_position_embeddings=160,
    )
    model = BertModel(config)
    path = root / "tiny-bert"
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def t5_checkpoint(tmp_path_factory):
    """Tiny encoder-decoder checkpoint with a byte-level tokenizer."""
    root = tmp_path_factory.mktemp("ckpt_t5")
    torch.manual_seed(99)
    config = T5Config(vocab_size=384, d_model=24, d_kv=8, d_ff=37, num_layers=2, num_heads=3)
    model = T5Model(config)
    path = root / "tiny-t5"
    model.save_pretrained(path)
    ByT5Tokenizer().save_pretrained(path)
    return path


def write_corpus_csv(path, rows):
    """rows: iterable of (text, label, split, name)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label", "split", "name"])
        writer.writerows(rows)


@pytest.fixture
def ten_petition_corpus(tmp_path):
    """Ten dated petition texts in the shared corpus schema."""
    texts = [
        (
            f"Civil Appeal No. {i} of 2008. The petition was filed on {i} March 2008 "
            f"and admitted. A hearing was scheduled on {i + 10} March 2008 before the court."
        )
        for i in range(1, 11)
    ]
    rows = [(text, 1, "train", f"2008_{i}.txt") for i, text in enumerate(texts, start=1)]
    path = tmp_path / "corpus.csv"
    write_corpus_csv(path, rows)
    return path
