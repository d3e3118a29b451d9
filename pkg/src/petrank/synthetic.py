"""Seeded generator for desk-scale petition corpora.

Texts are templated legal prose with the acceptance and proceeding dates
embedded next to anchor keywords, so the chronology extractor can recover
them; gap lengths follow a right-skewed integer distribution on [1, 400].
Useful for demos, fixtures, and the acceptance suite; no real court data.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, PetitionRecord, Provenance

_MONTH_NAMES = [
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
]

_PARTIES = [
    "the State of Maharashtra", "the Union of India", "the Municipal Corporation",
    "the Regional Transport Authority", "the Electricity Board", "the Revenue Department",
    "the University Grants Commission", "the Port Trust", "the Forest Department",
    "the Housing Board",
]

_SUBJECTS = [
    "recovery of possession of the suit premises",
    "quashing of the assessment order",
    "regularisation of service and consequential benefits",
    "compensation for the acquired land",
    "restoration of the electricity connection",
    "grant of mining lease renewal",
    "release of the seized consignment",
    "payment of retiral dues with interest",
    "cancellation of the allotment letter",
    "refund of the security deposit",
]

_FILLER = [
    "Learned counsel for the appellant has taken us through the record at some length.",
    "The respondent entered appearance and contested the claim on every ground available.",
    "It is contended that the impugned order suffers from manifest error apparent on the face of the record.",
    "Reliance is placed upon the earlier pronouncements of this Court on the point.",
    "The factual matrix of the case lies within a narrow compass.",
    "We have considered the rival submissions advanced at the bar with care.",
    "The question that arises for determination is essentially one of law.",
    "No useful purpose would be served by remitting the matter once again.",
    "The tribunal below recorded concurrent findings of fact against the appellant.",
    "An affidavit of compliance has been placed on the record by the respondent authority.",
    "Interim protection granted earlier shall continue until further orders.",
    "Costs shall abide the final result of the proceedings.",
]


def _format_date(d, fmt: int) -> str:
    if fmt == 0:
        return f"{d.day} {_MONTH_NAMES[d.month - 1]} {d.year}"
    if fmt == 1:
        return f"{_MONTH_NAMES[d.month - 1]} {d.day}, {d.year}"
    if fmt == 2:
        return f"{d.day}/{d.month}/{d.year}"
    if fmt == 3:
        return f"{d.day}-{d.month}-{d.year}"
    return d.isoformat()


def make_synthetic_corpus(
    n: int,
    seed: int = 0,
    accepted_fraction: float = 0.64,
    undated_fraction: float = 0.0,
    split_weights: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> Corpus:
    """Generate n petition records; identical arguments reproduce the corpus
    exactly."""
    import datetime

    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        year = int(rng.integers(2001, 2019))
        acceptance = datetime.date(year, int(rng.integers(1, 13)), int(rng.integers(1, 29)))
        gap = 1 + min(399, int(rng.exponential(55.0)))
        proceeding = acceptance + datetime.timedelta(days=gap)
        label = 1 if rng.random() < accepted_fraction else 0
        split = ["train", "test", "dev"][int(rng.choice(3, p=list(split_weights)))]
        fmt = int(rng.integers(0, 5))
        undated = rng.random() < undated_fraction

        party = _PARTIES[int(rng.integers(0, len(_PARTIES)))]
        subject = _SUBJECTS[int(rng.integers(0, len(_SUBJECTS)))]
        fillers = list(rng.choice(_FILLER, size=int(rng.integers(2, 8)), replace=True))

        parts = [
            f"Civil Appeal No. {i + 1} of {year}.",
            f"The appellant seeks {subject} against {party}.",
            fillers[0],
            f"The petition was filed on {_format_date(acceptance, fmt)} and admitted for consideration.",
        ]
        parts.extend(fillers[1:4])
        if not undated:
            parts.append(
                f"The matter is scheduled for hearing on {_format_date(proceeding, fmt)} before the appropriate bench."
            )
        parts.extend(fillers[4:])
        parts.append("Ordered accordingly.")
        records.append(
            PetitionRecord(
                text=" ".join(parts),
                label=label,
                split=split,
                name=f"{year}_{i + 1}.txt",
            )
        )
    return Corpus(
        records=tuple(records),
        provenance=Provenance(source=f"synthetic(n={n}, seed={seed})", format="synthetic"),
    )
