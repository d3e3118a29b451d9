"""Assemble the learner-facing feature matrix and own its file formats.

The assembled matrix concatenates a numeric block with an optional
embedding block, one row per petition, rows ordered lexicographically by
name so identical inputs always produce identical matrices. The default
numeric block is, in order: gap_days, rank_score_log, word_count,
sentence_count. When the regression target is the log score, the
rank_score_log column is dropped rather than shipping a literal copy of
the target among the features; with the inverse-square target it stays.

Note that gap_days remaining a feature while the target is a deterministic
transform of gap_days is target leakage by construction. It is kept because
the pipeline being reproduced is defined that way (its near-perfect
numeric-only results follow from it); report emitters print an explicit
notice, and exclude_gap_features=True assembles an honest block of
word_count, sentence_count, avg_word_length instead.

Embedding file format (bit-exact contract, UTF-8):

    line 1:            {"format_version": 1, "model_id": "<str>", "dim": D, "count": N}
    lines 2 .. N+1:    {"name": "<str>", "vector": [f1, ..., fD]}

Floats are serialized in decimal with round-trip precision (Python repr).

The binary matrix format used for pipeline hand-off is a single JSON header
line (schema, names, shapes) followed by the row-major float64
little-endian values block and then the float64 target block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .chronology import ChronologyFacts
from .errors import PetrankError
from .textstats import TextStats

TARGET_COLUMNS = {
    "inverse_square": "rank_score_inverse_square",
    "log": "rank_score_log",
}


class FeatureError(PetrankError):
    pass


class NameMismatch(FeatureError):
    def __init__(self, missing: list[str], message: str):
        self.missing = missing
        super().__init__(f"{message}: {missing[:10]}{'...' if len(missing) > 10 else ''}")


class DimZero(FeatureError):
    pass


class HeaderMismatch(FeatureError):
    pass


class DimensionMismatch(FeatureError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonFiniteValue(FeatureError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateName(FeatureError):
    def __init__(self, line: int, name: str):
        self.line = line
        super().__init__(f"line {line}: duplicate embedding name {name!r}")


class SchemaMismatch(FeatureError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    numeric_names: tuple[str, ...]
    target_name: str
    embedding_model_id: str | None = None
    embedding_dim: int = 0

    def __post_init__(self):
        if len(set(self.numeric_names)) != len(self.numeric_names):
            raise ValueError("numeric feature names must be unique")
        if (self.embedding_dim == 0) != (self.embedding_model_id is None):
            raise ValueError("embedding_dim must be 0 exactly when no model id is set")
        if self.target_name in self.numeric_names:
            raise ValueError("the target may not appear among the feature columns")

    @property
    def width(self) -> int:
        return len(self.numeric_names) + self.embedding_dim

    def column_names(self) -> list[str]:
        return list(self.numeric_names) + [f"emb_{i}" for i in range(self.embedding_dim)]

    def to_dict(self) -> dict:
        return {
            "numeric_names": list(self.numeric_names),
            "target_name": self.target_name,
            "embedding_model_id": self.embedding_model_id,
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            numeric_names=tuple(d["numeric_names"]),
            target_name=d["target_name"],
            embedding_model_id=d["embedding_model_id"],
            embedding_dim=int(d["embedding_dim"]),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    schema: FeatureSchema
    names: tuple[str, ...]
    values: np.ndarray  # (n, p + d) float64
    target: np.ndarray  # (n,) float64

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))
        n = len(self.names)
        if self.values.shape != (n, self.schema.width):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{n} rows x width {self.schema.width}"
            )
        if self.target.shape != (n,):
            raise ValueError("target length does not match row count")
        if n and not (np.isfinite(self.values).all() and np.isfinite(self.target).all()):
            raise ValueError("feature matrix entries must be finite")
        self.values.setflags(write=False)
        self.target.setflags(write=False)

    def __len__(self) -> int:
        return len(self.names)

    def take(self, indices) -> "FeatureMatrix":
        """Row subset carrying names along, preserving the join invariant."""
        idx = np.asarray(indices, dtype=int)
        return FeatureMatrix(
            schema=self.schema,
            names=tuple(self.names[i] for i in idx),
            values=self.values[idx].copy(),
            target=self.target[idx].copy(),
        )


@dataclass(frozen=True)
class EmbeddingTable:
    model_id: str
    dim: int
    vectors: dict[str, np.ndarray]


def assemble(
    chronology: dict[str, ChronologyFacts],
    stats: dict[str, TextStats],
    target: str = "inverse_square",
    embeddings: EmbeddingTable | None = None,
    exclude_gap_features: bool = False,
    include_avg_word_length: bool = False,
) -> FeatureMatrix:
    """Join chronology facts, text statistics and optional embeddings.

    chronology and stats must cover the same names; when embeddings are
    given, every name needs a vector. Rows come out in lexicographic name
    order.
    """
    if target not in TARGET_COLUMNS:
        raise ValueError(f"unknown target {target!r}; expected one of {sorted(TARGET_COLUMNS)}")
    missing_stats = sorted(set(chronology) - set(stats))
    missing_chrono = sorted(set(stats) - set(chronology))
    if missing_stats or missing_chrono:
        raise NameMismatch(
            missing_stats or missing_chrono,
            "chronology and stats must cover the same names; unmatched",
        )
    if embeddings is not None:
        if embeddings.dim == 0:
            raise DimZero("embedding table present but dim is 0")
        missing = sorted(set(chronology) - set(embeddings.vectors))
        if missing:
            raise NameMismatch(missing, "names without an embedding vector")

    target_name = TARGET_COLUMNS[target]
    if exclude_gap_features:
        numeric_names = ("word_count", "sentence_count", "avg_word_length")
    elif target == "log":
        numeric_names = ("gap_days", "word_count", "sentence_count")
    else:
        numeric_names = ("gap_days", "rank_score_log", "word_count", "sentence_count")
    if include_avg_word_length and "avg_word_length" not in numeric_names:
        numeric_names = numeric_names + ("avg_word_length",)

    names = tuple(sorted(chronology))
    rows, targets = [], []
    for name in names:
        facts, st = chronology[name], stats[name]
        pool = {
            "gap_days": float(facts.gap_days),
            "rank_score_log": facts.rank_score_log,
            "word_count": float(st.word_count),
            "sentence_count": float(st.sentence_count),
            "avg_word_length": st.avg_word_length,
        }
        row = [pool[col] for col in numeric_names]
        if embeddings is not None:
            row.extend(np.asarray(embeddings.vectors[name], dtype=np.float64))
        rows.append(row)
        targets.append(
            facts.rank_score_inverse_square if target == "inverse_square" else facts.rank_score_log
        )

    schema = FeatureSchema(
        numeric_names=numeric_names,
        target_name=target_name,
        embedding_model_id=embeddings.model_id if embeddings is not None else None,
        embedding_dim=embeddings.dim if embeddings is not None else 0,
    )
    n = len(names)
    values = (
        np.array(rows, dtype=np.float64)
        if n
        else np.empty((0, schema.width), dtype=np.float64)
    )
    return FeatureMatrix(
        schema=schema,
        names=names,
        values=values,
        target=np.array(targets, dtype=np.float64),
    )


def load_embeddings(path) -> EmbeddingTable:
    """Parse the embedding file format; every declared property is checked."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise HeaderMismatch("empty embedding file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise HeaderMismatch(f"unparseable header: {exc}") from None
    for key in ("format_version", "model_id", "dim", "count"):
        if key not in header:
            raise HeaderMismatch(f"header missing key {key!r}")
    if header["format_version"] != 1:
        raise HeaderMismatch(f"unsupported format_version {header['format_version']!r}")
    dim, count = int(header["dim"]), int(header["count"])
    if dim < 1:
        raise HeaderMismatch("dim must be a positive integer")
    body = [ln for ln in lines[1:] if ln]
    if len(body) != count:
        raise HeaderMismatch(f"header declares {count} vectors but file has {len(body)}")
    vectors: dict[str, np.ndarray] = {}
    for i, line in enumerate(body, start=2):
        row = json.loads(line)
        name, vec = row["name"], row["vector"]
        if name in vectors:
            raise DuplicateName(i, name)
        if len(vec) != dim:
            raise DimensionMismatch(i, f"vector length {len(vec)} != dim {dim}")
        arr = np.asarray(vec, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteValue(i, f"vector for {name!r} has a non-finite entry")
        vectors[name] = arr
    return EmbeddingTable(model_id=str(header["model_id"]), dim=dim, vectors=vectors)


def write_embeddings(table: EmbeddingTable, path) -> None:
    """Emit the embedding file format with round-trip float precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "format_version": 1,
            "model_id": table.model_id,
            "dim": table.dim,
            "count": len(table.vectors),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for name, vec in table.vectors.items():
            body = '{"name": ' + json.dumps(name) + ', "vector": ['
            body += ", ".join(repr(float(x)) for x in vec)
            fh.write(body + "]}\n")


@dataclass(frozen=True)
class StandardizationTable:
    schema: FeatureSchema
    means: np.ndarray
    scales: np.ndarray

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "means": [float(x) for x in self.means],
            "scales": [float(x) for x in self.scales],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationTable":
        return cls(
            schema=FeatureSchema.from_dict(d["schema"]),
            means=np.asarray(d["means"], dtype=np.float64),
            scales=np.asarray(d["scales"], dtype=np.float64),
        )


def standardize_fit(matrix: FeatureMatrix) -> StandardizationTable:
    """Per-column mean and population standard deviation on training rows.

    Constant columns get scale 1 so they pass through unchanged.
    """
    means = matrix.values.mean(axis=0) if len(matrix) else np.zeros(matrix.schema.width)
    stds = matrix.values.std(axis=0) if len(matrix) else np.ones(matrix.schema.width)
    scales = np.where(stds == 0.0, 1.0, stds)
    return StandardizationTable(schema=matrix.schema, means=means, scales=scales)


def standardize_apply(matrix: FeatureMatrix, table: StandardizationTable) -> FeatureMatrix:
    if table.schema != matrix.schema:
        raise SchemaMismatch("standardization table was fitted on a different schema")
    return replace(
        matrix, values=(matrix.values - table.means) / table.scales, target=matrix.target.copy()
    )


def write_feature_csv(matrix: FeatureMatrix, path) -> None:
    """Inspection CSV: schema header row, one row per petition, exact floats."""
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", *matrix.schema.column_names(), matrix.schema.target_name])
        for i, name in enumerate(matrix.names):
            writer.writerow(
                [name, *(repr(float(v)) for v in matrix.values[i])]
                + [repr(float(matrix.target[i]))]
            )


_MATRIX_MAGIC = "petrank-feature-matrix"


def save_feature_matrix(matrix: FeatureMatrix, path) -> None:
    header = {
        "format": _MATRIX_MAGIC,
        "version": 1,
        "schema": matrix.schema.to_dict(),
        "names": list(matrix.names),
        "n": len(matrix),
        "width": matrix.schema.width,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(matrix.target, dtype="<f8").tobytes())


def load_feature_matrix(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != _MATRIX_MAGIC or header.get("version") != 1:
            raise FeatureError(f"not a feature matrix file: {path}")
        n, width = int(header["n"]), int(header["width"])
        values = np.frombuffer(fh.read(8 * n * width), dtype="<f8").reshape(n, width)
        target = np.frombuffer(fh.read(8 * n), dtype="<f8")
    return FeatureMatrix(
        schema=FeatureSchema.from_dict(header["schema"]),
        names=tuple(header["names"]),
        values=values.copy(),
        target=target.copy(),
    )
