"""Command line pipeline: ingest -> chronology -> features -> train ->
evaluate / cv / rank, plus the leakage audit and a synthetic-corpus helper.

Every command reads one JSON config (flags override file values), writes
its artifacts under --out-dir with fixed filenames, and records a manifest
entry (config hash, seeds, versions) so a rerun with the same config is
byte-identical. Exit codes: 0 success, 2 config error, 3 data error,
4 upstream artifact missing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, chronology, corpus as corpus_mod, evaluation, features, figures, models
from .errors import ConfigError, PetrankError, UpstreamMissing
from .leakage import cross_split_audit
from .synthetic import make_synthetic_corpus
from .textstats import text_statistics

ARTIFACTS = {
    "manifest": "manifest.json",
    "validation": "validation.json",
    "chronology": "chronology.csv",
    "exclusions": "exclusions.csv",
    "features_bin": "features.bin",
    "features_csv": "features.csv",
    "model": "model.json",
    "eval_json": "eval.json",
    "eval_md": "eval.md",
    "eval_fig": "eval_scatter.png",
    "cv": "cv.json",
    "cv_fig": "cv_folds.png",
    "ranking": "ranking.csv",
    "ranking_fig": "ranking_scores.png",
    "leakage": "leakage.json",
}

_DEFAULTS = {
    "corpus": {"path": None, "format": "csv"},
    "out_dir": None,
    "anchors": {
        "acceptance_keywords": list(chronology.DEFAULT_ACCEPTANCE_KEYWORDS),
        "proceeding_keywords": list(chronology.DEFAULT_PROCEEDING_KEYWORDS),
        "window_chars": 120,
    },
    "target": "inverse_square",
    "features": {
        "exclude_gap_features": False,
        "include_avg_word_length": False,
        "embeddings_path": None,
    },
    "model": {"kind": "forest", "params": {}},
    "split": {"dev_in_train": False},
    "eval": {
        "rel_tol": 0.10,
        "kfold_k": 5,
        "mccv_iterations": 10,
        "mccv_test_fraction": 0.2,
        "bootstrap_resamples": 1000,
        "bootstrap_level": 0.95,
        "cv_seed": 0,
        "bootstrap_seed": 0,
    },
    "leakage": {"threshold": 0.80},
}

_MODEL_PARAM_KEYS = {
    "tree": ("max_depth", "min_samples_split", "min_samples_leaf", "feature_subsample", "seed"),
    "forest": ("n_trees", "bootstrap", "seed", "max_depth", "min_samples_split",
               "min_samples_leaf", "feature_subsample"),
    "gbt": ("n_rounds", "learning_rate", "max_depth", "l2_leaf_reg", "seed"),
    "ols": (),
    "elastic_net": ("alpha", "lam", "tol", "max_iter"),
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _canonical_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class PipelineConfig:
    """Resolved configuration: file values merged over defaults, then flags."""

    def __init__(self, resolved: dict):
        self.raw = resolved
        self._validate()

    @classmethod
    def load(cls, config_path: str | None, overrides: dict) -> "PipelineConfig":
        resolved = dict(_DEFAULTS)
        if config_path is not None:
            path = Path(config_path)
            if not path.is_file():
                raise ConfigError("config", f"no such file: {path}")
            try:
                file_values = json.loads(path.read_text("utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON: {exc}") from None
            if not isinstance(file_values, dict):
                raise ConfigError("config", "top level must be a JSON object")
            resolved = _merge(resolved, file_values)
        resolved = _merge(resolved, overrides)
        return cls(resolved)

    def _require(self, field: str, value, kind) -> None:
        if value is None:
            raise ConfigError(field, "is required")
        if not isinstance(value, kind):
            raise ConfigError(field, f"expected {kind}, got {type(value).__name__}")

    def _validate(self) -> None:
        c = self.raw
        self._require("corpus.path", c["corpus"]["path"], str)
        if not Path(c["corpus"]["path"]).is_file():
            raise ConfigError("corpus.path", f"no such file: {c['corpus']['path']}")
        if c["corpus"]["format"] not in ("csv", "jsonl"):
            raise ConfigError("corpus.format", "must be csv or jsonl")
        self._require("out_dir", c["out_dir"], str)
        if c["target"] not in features.TARGET_COLUMNS:
            raise ConfigError("target", "must be inverse_square or log")
        if c["model"]["kind"] not in models.MODEL_KINDS:
            raise ConfigError("model.kind", f"must be one of {models.MODEL_KINDS}")
        unknown = set(c["model"]["params"]) - set(_MODEL_PARAM_KEYS[c["model"]["kind"]])
        if unknown:
            raise ConfigError("model.params", f"unknown keys for {c['model']['kind']}: {sorted(unknown)}")
        ev = c["eval"]
        for key in ("cv_seed", "bootstrap_seed"):
            if not isinstance(ev[key], int) or ev[key] < 0:
                raise ConfigError(f"eval.{key}", "must be a nonnegative integer")
        if not 0 < ev["rel_tol"]:
            raise ConfigError("eval.rel_tol", "must be > 0")
        if c["features"]["embeddings_path"] is not None and not Path(
            c["features"]["embeddings_path"]
        ).is_file():
            raise ConfigError("features.embeddings_path", "no such file")
        try:
            self.anchor_config()
            self.model_params()
        except (ValueError, TypeError) as exc:
            raise ConfigError("model.params/anchors", str(exc)) from None

    # typed views -----------------------------------------------------------

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["out_dir"])

    def anchor_config(self) -> chronology.AnchorConfig:
        a = self.raw["anchors"]
        return chronology.AnchorConfig(
            acceptance_keywords=tuple(a["acceptance_keywords"]),
            proceeding_keywords=tuple(a["proceeding_keywords"]),
            window_chars=int(a["window_chars"]),
        )

    def model_params(self):
        kind = self.raw["model"]["kind"]
        params = dict(self.raw["model"]["params"])
        if kind == "tree":
            return models.TreeParams(**params)
        if kind == "forest":
            tree_keys = ("max_depth", "min_samples_split", "min_samples_leaf", "feature_subsample")
            tree_kwargs = {k: params.pop(k) for k in tree_keys if k in params}
            return models.ForestParams(tree=models.TreeParams(**tree_kwargs), **params)
        if kind == "gbt":
            return models.GbtParams(**params)
        if kind == "elastic_net":
            return models.ElasticNetParams(**params)
        return None

    def seeds(self) -> dict:
        params = self.model_params()
        return {
            "model": getattr(params, "seed", None),
            "cv": self.raw["eval"]["cv_seed"],
            "bootstrap": self.raw["eval"]["bootstrap_seed"],
        }

    def config_hash(self) -> str:
        return hashlib.sha256(_canonical_dump(self.raw).encode()).hexdigest()


# ---------------------------------------------------------------------------
# manifest


def _write_manifest(cfg: PipelineConfig, command: str, outputs: list[str], extra: dict | None = None):
    path = cfg.out_dir / ARTIFACTS["manifest"]
    manifest = {"commands": {}}
    if path.is_file():
        manifest = json.loads(path.read_text("utf-8"))
    manifest["config"] = cfg.raw
    manifest["config_hash"] = cfg.config_hash()
    manifest["seeds"] = cfg.seeds()
    manifest["versions"] = {
        "petrank": __version__,
        "numpy": np.__version__,
        "python": ".".join(map(str, sys.version_info[:3])),
    }
    entry = {"outputs": sorted(outputs)}
    if extra:
        entry.update(extra)
    manifest.setdefault("commands", {})[command] = entry
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", "utf-8")


def _need(cfg: PipelineConfig, artifact: str, producer: str) -> Path:
    path = cfg.out_dir / ARTIFACTS[artifact]
    if not path.is_file():
        raise UpstreamMissing(producer)
    return path


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _load_corpus(cfg: PipelineConfig) -> corpus_mod.Corpus:
    return corpus_mod.load_corpus(cfg.raw["corpus"]["path"], cfg.raw["corpus"]["format"])


def _split_names(cfg: PipelineConfig, corp) -> tuple[set[str], set[str]]:
    """(training names, evaluation names) per the dev_in_train policy."""
    train = {r.name for r in corpus_mod.split_view(corp, "train")}
    if cfg.raw["split"]["dev_in_train"]:
        train |= {r.name for r in corpus_mod.split_view(corp, "dev")}
    test = {r.name for r in corpus_mod.split_view(corp, "test")}
    return train, test


def _leakage_notice(cfg: PipelineConfig) -> str | None:
    if cfg.raw["features"]["exclude_gap_features"]:
        return None
    return (
        "gap_days is a feature while the target is a deterministic transform of "
        "gap_days; near-perfect fits are expected by construction. "
        "Use exclude_gap_features for an honest-ranking run."
    )


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: PipelineConfig) -> None:
    corp = _load_corpus(cfg)
    report = corpus_mod.validate(corp)
    out = cfg.out_dir / ARTIFACTS["validation"]
    out.write_text(report.to_json(), "utf-8")
    _write_manifest(cfg, "ingest", [out.name])
    print(
        f"ingested {report.total} records "
        f"(accepted={report.accepted}, rejected={report.rejected}, "
        f"violations={len(report.violations)}) -> {out}"
    )


def cmd_chronology(cfg: PipelineConfig) -> None:
    corp = corpus_mod.filter_accepted(_load_corpus(cfg))
    table, exclusions = chronology.chronologize_corpus(corp, cfg.anchor_config())
    chron_path = cfg.out_dir / ARTIFACTS["chronology"]
    chronology.write_chronology_csv(table, chron_path)
    excl_path = cfg.out_dir / ARTIFACTS["exclusions"]
    with open(excl_path, "w", newline="", encoding="utf-8") as fh:
        import csv

        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "reason"])
        writer.writerows(exclusions)
    _write_manifest(
        cfg, "chronology", [chron_path.name, excl_path.name],
        {"extracted": len(table), "excluded": len(exclusions)},
    )
    print(f"chronology extracted for {len(table)} petitions, {len(exclusions)} excluded")


def cmd_features(cfg: PipelineConfig) -> None:
    chron_path = _need(cfg, "chronology", "chronology")
    table = chronology.read_chronology_csv(chron_path)
    corp = corpus_mod.filter_accepted(_load_corpus(cfg))
    stats = {r.name: text_statistics(r.text) for r in corp if r.name in table}
    emb = None
    if cfg.raw["features"]["embeddings_path"]:
        emb = features.load_embeddings(cfg.raw["features"]["embeddings_path"])
    matrix = features.assemble(
        table,
        stats,
        target=cfg.raw["target"],
        embeddings=emb,
        exclude_gap_features=cfg.raw["features"]["exclude_gap_features"],
        include_avg_word_length=cfg.raw["features"]["include_avg_word_length"],
    )
    bin_path = cfg.out_dir / ARTIFACTS["features_bin"]
    csv_path = cfg.out_dir / ARTIFACTS["features_csv"]
    features.save_feature_matrix(matrix, bin_path)
    features.write_feature_csv(matrix, csv_path)
    _write_manifest(
        cfg, "features", [bin_path.name, csv_path.name],
        {"n": len(matrix), "width": matrix.schema.width, "schema": matrix.schema.to_dict()},
    )
    print(f"assembled {len(matrix)}x{matrix.schema.width} matrix -> {bin_path}")


def cmd_train(cfg: PipelineConfig) -> None:
    matrix = features.load_feature_matrix(_need(cfg, "features_bin", "features"))
    corp = _load_corpus(cfg)
    train_names, _ = _split_names(cfg, corp)
    idx = [i for i, name in enumerate(matrix.names) if name in train_names]
    if not idx:
        raise models.EmptyMatrix("no training rows after the split filter")
    train = matrix.take(idx)
    model = models.fit_model(cfg.raw["model"]["kind"], cfg.model_params(), train)
    model_path = cfg.out_dir / ARTIFACTS["model"]
    models.save_model(model, model_path)
    _write_manifest(
        cfg, "train", [model_path.name],
        {"n_train": len(train), "fingerprint": model.fingerprint},
    )
    print(f"trained {model.kind} on {len(train)} rows -> {model_path}")


def cmd_evaluate(cfg: PipelineConfig) -> None:
    model = models.load_model(_need(cfg, "model", "train"))
    matrix = features.load_feature_matrix(_need(cfg, "features_bin", "features"))
    corp = _load_corpus(cfg)
    train_names, eval_names = _split_names(cfg, corp)
    idx = [i for i, name in enumerate(matrix.names) if name in eval_names]
    if not idx:
        raise evaluation.EmptyInput("no evaluation rows: test split is empty after joins")
    held_out = matrix.take(idx)
    predictions = models.predict(model, held_out)
    ev = cfg.raw["eval"]
    metrics = evaluation.regression_metrics(held_out.target, predictions, ev["rel_tol"])
    intervals = tuple(
        evaluation.bootstrap_ci(
            metric,
            held_out.target,
            predictions,
            resamples=ev["bootstrap_resamples"],
            level=ev["bootstrap_level"],
            seed=ev["bootstrap_seed"],
            rel_tol=ev["rel_tol"],
        )
        for metric in evaluation.METRIC_NAMES
    )
    label = "numeric only"
    if matrix.schema.embedding_model_id:
        label = f"{matrix.schema.embedding_model_id} + numeric"
    report = evaluation.EvalReport(
        learner_kind=model.kind,
        target_name=matrix.schema.target_name,
        feature_label=label,
        n_train=sum(1 for name in matrix.names if name in train_names),
        n_eval=len(held_out),
        rel_tol=ev["rel_tol"],
        metrics=metrics,
        intervals=intervals,
        leakage_notice=_leakage_notice(cfg),
    )
    json_path = cfg.out_dir / ARTIFACTS["eval_json"]
    md_path = cfg.out_dir / ARTIFACTS["eval_md"]
    fig_path = cfg.out_dir / ARTIFACTS["eval_fig"]
    json_path.write_text(report.to_json(), "utf-8")
    md_path.write_text(report.to_markdown(), "utf-8")
    figures.save_pred_scatter(held_out.target, predictions, fig_path)
    _write_manifest(cfg, "evaluate", [json_path.name, md_path.name, fig_path.name])
    print(
        f"evaluated on {len(held_out)} held-out rows: "
        f"r2={metrics.r2:.4f} rho={metrics.spearman_rho:.4f} -> {json_path}"
    )


def cmd_cv(cfg: PipelineConfig) -> None:
    matrix = features.load_feature_matrix(_need(cfg, "features_bin", "features"))
    corp = _load_corpus(cfg)
    train_names, _ = _split_names(cfg, corp)
    idx = [i for i, name in enumerate(matrix.names) if name in train_names]
    if not idx:
        raise evaluation.TooFewRows("no rows available for cross-validation")
    train = matrix.take(idx)
    ev = cfg.raw["eval"]
    kind, params = cfg.raw["model"]["kind"], cfg.model_params()
    kfold_report = evaluation.kfold_cv(
        kind, params, train, k=ev["kfold_k"], rel_tol=ev["rel_tol"], seed=ev["cv_seed"]
    )
    mccv_report = evaluation.mccv(
        kind,
        params,
        train,
        iterations=ev["mccv_iterations"],
        test_fraction=ev["mccv_test_fraction"],
        rel_tol=ev["rel_tol"],
        seed=ev["cv_seed"],
    )
    payload = {
        "kfold": json.loads(kfold_report.to_json()),
        "mccv": json.loads(mccv_report.to_json()),
    }
    cv_path = cfg.out_dir / ARTIFACTS["cv"]
    cv_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", "utf-8")
    fig_path = cfg.out_dir / ARTIFACTS["cv_fig"]
    figures.save_cv_bars([kfold_report, mccv_report], fig_path)
    _write_manifest(cfg, "cv", [cv_path.name, fig_path.name])
    print(
        f"kfold mean r2={kfold_report.mean['r2']:.4f}, "
        f"mccv mean r2={mccv_report.mean['r2']:.4f} -> {cv_path}"
    )


def cmd_rank(cfg: PipelineConfig) -> None:
    model = models.load_model(_need(cfg, "model", "train"))
    matrix = features.load_feature_matrix(_need(cfg, "features_bin", "features"))
    scores = models.predict(model, matrix)
    order = sorted(range(len(matrix)), key=lambda i: (-scores[i], matrix.names[i]))
    rank_path = cfg.out_dir / ARTIFACTS["ranking"]
    with open(rank_path, "w", newline="", encoding="utf-8") as fh:
        import csv

        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "name", "predicted_score"])
        for position, i in enumerate(order, start=1):
            writer.writerow([position, matrix.names[i], repr(float(scores[i]))])
    fig_path = cfg.out_dir / ARTIFACTS["ranking_fig"]
    figures.save_rank_curve([float(scores[i]) for i in order], fig_path)
    _write_manifest(cfg, "rank", [rank_path.name, fig_path.name], {"n": len(matrix)})
    print(f"ranked {len(matrix)} petitions -> {rank_path}")


def cmd_leakage(cfg: PipelineConfig) -> None:
    corp = _load_corpus(cfg)
    train = corpus_mod.split_view(corp, "train")
    test = corpus_mod.split_view(corp, "test")
    report = cross_split_audit(train, test, threshold=cfg.raw["leakage"]["threshold"])
    out = cfg.out_dir / ARTIFACTS["leakage"]
    out.write_text(report.to_json(), "utf-8")
    _write_manifest(cfg, "leakage", [out.name])
    print(report.verdict())


def cmd_synth(args) -> None:
    corp = make_synthetic_corpus(
        n=args.n,
        seed=args.seed,
        undated_fraction=args.undated_fraction,
        split_weights=tuple(args.split_weights),
    )
    corpus_mod.write_corpus_csv(corp, args.out)
    print(f"wrote {len(corp)} synthetic petitions -> {args.out}")


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline config JSON file")
    parser.add_argument("--corpus", help="corpus file (overrides config)")
    parser.add_argument("--corpus-format", choices=("csv", "jsonl"))
    parser.add_argument("--out-dir", help="artifact directory (overrides config)")
    parser.add_argument("--target", choices=tuple(features.TARGET_COLUMNS))
    parser.add_argument("--model-kind", choices=models.MODEL_KINDS)
    parser.add_argument("--seed", type=int, help="model seed override")
    parser.add_argument("--exclude-gap-features", action="store_true", default=None)
    parser.add_argument("--include-avg-word-length", action="store_true", default=None)
    parser.add_argument("--embeddings", help="embedding file to fuse")
    parser.add_argument("--dev-in-train", action="store_true", default=None)
    parser.add_argument("--rel-tol", type=float)
    parser.add_argument("--kfold-k", type=int)
    parser.add_argument("--mccv-iterations", type=int)
    parser.add_argument("--bootstrap-resamples", type=int)
    parser.add_argument("--leakage-threshold", type=float)


def _overrides_from(args) -> dict:
    out: dict = {}

    def put(path: tuple[str, ...], value):
        if value is None:
            return
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    put(("corpus", "path"), args.corpus)
    put(("corpus", "format"), args.corpus_format)
    put(("out_dir",), args.out_dir)
    put(("target",), args.target)
    put(("model", "kind"), args.model_kind)
    put(("model", "params", "seed"), args.seed)
    put(("features", "exclude_gap_features"), args.exclude_gap_features)
    put(("features", "include_avg_word_length"), args.include_avg_word_length)
    put(("features", "embeddings_path"), args.embeddings)
    put(("split", "dev_in_train"), args.dev_in_train)
    put(("eval", "rel_tol"), args.rel_tol)
    put(("eval", "kfold_k"), args.kfold_k)
    put(("eval", "mccv_iterations"), args.mccv_iterations)
    put(("eval", "bootstrap_resamples"), args.bootstrap_resamples)
    put(("leakage", "threshold"), args.leakage_threshold)
    return out


_COMMANDS = {
    "ingest": cmd_ingest,
    "chronology": cmd_chronology,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "rank": cmd_rank,
    "leakage": cmd_leakage,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="petrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p)
    synth = sub.add_parser("synth", help="generate a synthetic petition corpus")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--n", type=int, default=50)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--undated-fraction", type=float, default=0.0)
    synth.add_argument(
        "--split-weights",
        type=float,
        nargs=3,
        default=(0.70, 0.15, 0.15),
        metavar=("TRAIN", "TEST", "DEV"),
        help="probabilities for the train/test/dev split tags",
    )
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        cfg = PipelineConfig.load(args.config, _overrides_from(args))
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UpstreamMissing as exc:
        print(f"upstream missing: {exc}", file=sys.stderr)
        return 4
    except PetrankError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())
