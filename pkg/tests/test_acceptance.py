"""Acceptance gates for the pipeline, one test per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion; any assertion failure marks that criterion red.
"""

import json
import math
import time

import numpy as np
import pytest

from petrank.chronology import rank_scores
from petrank.cli import ARTIFACTS, run
from petrank.evaluation import kfold_cv, mccv, regression_metrics, spearman
from petrank.features import FeatureMatrix, FeatureSchema, standardize_apply, standardize_fit
from petrank.leakage import cross_split_audit
from petrank.models import (
    ElasticNetParams,
    ForestParams,
    TreeParams,
    brute_force_root_split,
    fit_elastic_net,
    fit_forest,
    fit_ols,
    fit_tree,
    predict,
)

from test_evaluation import closed_form_rho
from test_leakage import corpus_from_texts, dense_cosine_oracle


def report(line):
    print(f"\nACCEPTANCE PASS: {line}")


def matrix(values, target):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return FeatureMatrix(
        schema=FeatureSchema(
            numeric_names=tuple(f"f{i}" for i in range(values.shape[1])), target_name="t"
        ),
        names=tuple(f"2001_{i + 1}.txt" for i in range(values.shape[0])),
        values=values,
        target=np.asarray(target, dtype=float),
    )


def test_numeric_dominance_on_synthetic_corpus(tmp_path):
    """Held-out R^2 >= 0.98 and rho >= 0.99 with the default forest on 1,000
    templated petitions, end to end through the CLI, within 60 seconds."""
    started = time.monotonic()
    corpus_path = tmp_path / "synthetic_1000.csv"
    assert run(["synth", "--out", str(corpus_path), "--n", "1000", "--seed", "13"]) == 0
    out_dir = tmp_path / "out"
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "corpus": {"path": str(corpus_path), "format": "csv"},
                "out_dir": str(out_dir),
                "model": {"kind": "forest", "params": {}},
            }
        ),
        "utf-8",
    )
    for command in ("ingest", "chronology", "features", "train", "evaluate", "rank"):
        assert run([command, "--config", str(cfg_path)]) == 0, command
    elapsed = time.monotonic() - started
    payload = json.loads((out_dir / ARTIFACTS["eval_json"]).read_text("utf-8"))
    r2 = payload["metrics"]["r2"]
    rho = payload["metrics"]["spearman_rho"]
    assert r2 >= 0.98, f"held-out r2 {r2}"
    assert rho >= 0.99, f"held-out spearman {rho}"
    assert elapsed <= 60.0, f"pipeline took {elapsed:.1f}s"
    report(
        f"numeric-dominance reproduction: r2={r2:.4f} >= 0.98, rho={rho:.4f} >= 0.99, "
        f"runtime {elapsed:.1f}s <= 60s"
    )


def test_tree_root_split_matches_brute_force_oracle():
    """200 random instances (n <= 30, p <= 3): exact (feature, threshold)
    agreement with exhaustive search, within 5 seconds."""
    rng = np.random.default_rng(424242)
    started = time.monotonic()
    checked = 0
    for _ in range(200):
        n = int(rng.integers(2, 31))
        p = int(rng.integers(1, 4))
        m = matrix(rng.normal(size=(n, p)), rng.normal(size=n))
        oracle = brute_force_root_split(m.values, m.target)
        root = fit_tree(m, TreeParams(max_depth=1)).payload["nodes"][0]
        if oracle is None:
            assert "value" in root
        else:
            assert root["feature"] == oracle[1] and root["threshold"] == oracle[2]
            checked += 1
    elapsed = time.monotonic() - started
    assert elapsed <= 5.0, f"oracle sweep took {elapsed:.1f}s"
    assert checked >= 150
    report(
        f"tree-split oracle: 200/200 root splits equal exhaustive search "
        f"({checked} nontrivial), {elapsed:.2f}s <= 5s"
    )


def test_forest_of_one_equals_tree():
    """Exact prediction equality on 100 random fixtures."""
    rng = np.random.default_rng(7)
    for trial in range(100):
        n = int(rng.integers(2, 40))
        p = int(rng.integers(1, 4))
        train = matrix(rng.normal(size=(n, p)), rng.normal(size=n))
        probe = matrix(rng.normal(size=(15, p)), np.zeros(15))
        params = TreeParams(max_depth=int(rng.integers(1, 6)))
        forest = fit_forest(train, ForestParams(n_trees=1, tree=params, bootstrap=False, seed=trial))
        tree = fit_tree(train, params)
        np.testing.assert_array_equal(predict(forest, probe), predict(tree, probe))
    report("forest-of-one equivalence: exact prediction equality on 100 fixtures")


def test_elastic_net_degeneracies():
    """lam=0 matches OLS within 1e-6 on 50 well-conditioned fixtures; the
    all-L1 large-penalty limit zeroes every coefficient."""
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(30, 80))
        p = int(rng.integers(1, 5))
        X = rng.normal(size=(n, p))
        beta = rng.normal(size=p)
        y = X @ beta + rng.normal(scale=0.05, size=n)
        m = standardize_apply(matrix(X, y), standardize_fit(matrix(X, y)))
        enet = fit_elastic_net(m, ElasticNetParams(alpha=0.5, lam=0.0, tol=1e-12, max_iter=20000))
        ols = fit_ols(m)
        np.testing.assert_allclose(enet.payload["coef"], ols.payload["coef"], atol=1e-6)

    X = rng.normal(size=(40, 5))
    y = rng.normal(size=40)
    m = standardize_apply(matrix(X, y), standardize_fit(matrix(X, y)))
    saturated = fit_elastic_net(m, ElasticNetParams(alpha=1.0, lam=1e8))
    assert saturated.payload["coef"] == [0.0] * 5
    assert saturated.payload["intercept"] == pytest.approx(float(y.mean()))
    report("elastic-net degeneracy: lam=0 == OLS (50 fixtures, 1e-6); alpha=1 saturation zeroes all")


def test_rank_correlation_identities():
    """Closed form vs rank-Pearson within 1e-12 on 1,000 tie-free vectors,
    plus the monotone, reversed, and four-point reference cases."""
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = int(rng.integers(3, 50))
        y = rng.normal(size=n)
        y_hat = rng.normal(size=n)
        assert abs(spearman(y, y_hat) - closed_form_rho(y, y_hat)) <= 1e-12
    assert spearman([1, 2, 3], [5, 9, 11]) == pytest.approx(1.0, abs=1e-12)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    report("metric identities: closed form == rank-Pearson on 1000 tie-free vectors (1e-12)")


def test_rank_score_reference_values():
    """gap in {0,1,9,10} maps to the stated log and inverse-square scores."""
    expected = {
        0: (0.0, 1.0),
        1: (math.log(2), 1.0),
        9: (math.log(10), 1 / 81),
        10: (math.log(11), 1 / 100),
    }
    for gap, (log_expected, inv_expected) in expected.items():
        log_score, inv_score = rank_scores(gap)
        assert abs(log_score - log_expected) <= 1e-12
        assert abs(inv_score - inv_expected) <= 1e-12
    report("gap-to-score evaluation: log and inverse-square values exact at {0,1,9,10} (1e-12)")


def test_leakage_audit_oracle(rng):
    """Sparse cosine equals the dense brute force within 1e-9 on 20-document
    corpora; copy and disjoint fixtures hit 1.0 / 0.0; verdict lines exact."""
    words = list("abcdefghijklmn")
    train_texts = [" ".join(rng.choice(words, size=25)) for _ in range(12)]
    test_texts = [" ".join(rng.choice(words, size=25)) for _ in range(8)]
    oracle = dense_cosine_oracle(train_texts, test_texts)
    audit = cross_split_audit(
        corpus_from_texts(train_texts, split="train"),
        corpus_from_texts(test_texts, split="test", start=100),
        threshold=1.0,
    )
    assert audit.max_similarity == pytest.approx(float(oracle.max()), abs=1e-9)

    copied = "leave granted heard learned counsel on the civil appeal today"
    fail_report = cross_split_audit(
        corpus_from_texts([copied, "unrelated interim directions issued"]),
        corpus_from_texts([copied], split="test", start=50),
    )
    assert fail_report.max_similarity == pytest.approx(1.0, abs=1e-9)
    assert fail_report.verdict() == "FAIL (1 offenders)"

    clean_report = cross_split_audit(
        corpus_from_texts(["a b c d"]),
        corpus_from_texts(["w x y z"], split="test", start=60),
    )
    assert clean_report.max_similarity == 0.0
    assert clean_report.verdict() == "PASS (max=0.0000 < 0.80)"
    report("leakage oracle: sparse == dense (1e-9); copy=1.0, disjoint=0.0, verdicts bit-exact")


def test_cv_bookkeeping(rng):
    """K-fold folds partition the rows exactly; MCCV k=1 equals one manual
    holdout; identical seeds yield byte-identical reports."""
    values = rng.normal(size=(24, 2))
    target = values @ np.array([1.0, -0.5]) + 0.2
    m = matrix(values, target)

    kf = kfold_cv("ols", None, m, k=5, seed=17)
    held = [n for names in kf.fold_names for n in names]
    sizes = [len(names) for names in kf.fold_names]
    assert sorted(held) == sorted(m.names) and len(set(held)) == len(held)
    assert max(sizes) - min(sizes) <= 1

    mc = mccv("ols", None, m, iterations=1, test_fraction=0.25, seed=23)
    perm = np.random.default_rng(23).permutation(24)
    test_idx, train_idx = perm[:6], perm[6:]
    manual_model = fit_ols(m.take(train_idx))
    held_out = m.take(test_idx)
    manual = regression_metrics(held_out.target, predict(manual_model, held_out), 0.10)
    assert mc.fold_metrics[0].mse == pytest.approx(manual.mse, abs=1e-15)
    assert mc.fold_metrics[0].spearman_rho == pytest.approx(manual.spearman_rho, abs=1e-15)
    assert list(mc.fold_names[0]) == [m.names[i] for i in test_idx]

    again = mccv("ols", None, m, iterations=1, test_fraction=0.25, seed=23)
    assert mc.to_json().encode() == again.to_json().encode()
    kf_again = kfold_cv("ols", None, m, k=5, seed=17)
    assert kf.to_json().encode() == kf_again.to_json().encode()
    report("cv bookkeeping: exact k-fold partition; mccv k=1 == holdout; seed-stable bytes")


def test_full_pipeline_determinism(tmp_path):
    """Two runs with one config produce byte-identical manifests, rankings,
    and reports."""
    corpus_path = tmp_path / "corpus.csv"
    assert run(["synth", "--out", str(corpus_path), "--n", "80", "--seed", "21"]) == 0
    out_dir = tmp_path / "out"
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "corpus": {"path": str(corpus_path), "format": "csv"},
                "out_dir": str(out_dir),
                "model": {"kind": "forest", "params": {"seed": 9, "n_trees": 20}},
                "eval": {"bootstrap_resamples": 150, "kfold_k": 4, "mccv_iterations": 4},
            }
        ),
        "utf-8",
    )
    commands = ("ingest", "chronology", "features", "train", "evaluate", "cv", "rank", "leakage")

    def snapshot():
        return {
            name: (out_dir / name).read_bytes()
            for name in ARTIFACTS.values()
            if not name.endswith(".png")
        }

    for command in commands:
        assert run([command, "--config", str(cfg_path)]) == 0, command
    first = snapshot()
    for command in commands:
        assert run([command, "--config", str(cfg_path)]) == 0, command
    second = snapshot()
    differing = [name for name in first if first[name] != second[name]]
    assert not differing, f"artifacts differ across reruns: {differing}"
    report(f"determinism: {len(first)} artifacts byte-identical across two full runs")
