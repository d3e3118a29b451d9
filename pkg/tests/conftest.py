import numpy as np
import pytest

from petrank.corpus import Corpus, PetitionRecord, Provenance


def record(name="2008_1.txt", text="Leave granted.", label=1, split="train"):
    return PetitionRecord(text=text, label=label, split=split, name=name)


def corpus_of(records):
    return Corpus(records=tuple(records), provenance=Provenance(source="<memory>", format="csv"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
