"""Metrics and validation protocols for the ranking regression task.

Spearman correlation is computed as the Pearson correlation of fractional
ranks (ties get the average of the positions they occupy). On tie-free data
this equals the closed form 1 - 6*sum(d_i^2)/(n(n^2-1)); the rank-Pearson
generalization is normative here because gap-day collisions make ties
certain in real corpora.

Tolerance accuracy counts a prediction correct when its absolute error is
at most rel_tol times the true value's magnitude (default 10%); a zero true
value only counts as hit by a prediction within 1e-12 of zero.

Cross-validation refits every fit-time statistic (standardization included)
inside each training split; nothing leaks from held-out rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import PetrankError
from .features import FeatureMatrix
from . import models

METRIC_NAMES = ("mse", "mae", "r2", "explained_variance", "spearman_rho", "tolerance_accuracy")


class EvalError(PetrankError):
    pass


class LengthMismatch(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class DegenerateVariance(EvalError):
    pass


class ConstantInput(EvalError):
    pass


class TooFewRows(EvalError):
    pass


class BadFraction(EvalError):
    pass


@dataclass(frozen=True)
class RegressionMetrics:
    # None only ever appears in per-fold CV rows where a metric is genuinely
    # undefined (single-row fold, constant vector); regression_metrics itself
    # raises instead.
    mse: float
    mae: float
    r2: float | None
    explained_variance: float | None
    spearman_rho: float | None
    tolerance_accuracy: float

    def as_dict(self) -> dict[str, float | None]:
        return asdict(self)


def _check_pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise LengthMismatch(f"shapes {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise EmptyInput("cannot score empty vectors")
    if not (np.isfinite(y).all() and np.isfinite(y_hat).all()):
        raise EvalError("inputs must be finite")
    return y, y_hat


def fractional_ranks(v: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    v = np.asarray(v, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(y, y_hat) -> float:
    """Tie-aware Spearman rank correlation (Pearson over fractional ranks)."""
    y, y_hat = _check_pair(y, y_hat)
    if y.size < 2:
        raise ConstantInput("need at least two observations for a rank correlation")
    ry, rh = fractional_ranks(y), fractional_ranks(y_hat)
    sy, sh = ry.std(), rh.std()
    if sy == 0.0 or sh == 0.0:
        raise ConstantInput("rank correlation undefined for a constant vector")
    return float(((ry - ry.mean()) * (rh - rh.mean())).mean() / (sy * sh))


def tolerance_accuracy(y, y_hat, rel_tol: float) -> float:
    """Percentage of predictions within rel_tol relative error of the truth."""
    y, y_hat = _check_pair(y, y_hat)
    if rel_tol <= 0:
        raise ValueError("rel_tol must be > 0")
    err = np.abs(y - y_hat)
    hit = np.where(y == 0.0, np.abs(y_hat) <= 1e-12, err <= rel_tol * np.abs(y))
    return float(hit.mean() * 100.0)


def regression_metrics(y, y_hat, rel_tol: float = 0.10) -> RegressionMetrics:
    y, y_hat = _check_pair(y, y_hat)
    residual = y - y_hat
    mse = float((residual**2).mean())
    mae = float(np.abs(residual).mean())
    ss_res = float((residual**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        if ss_res == 0.0:
            r2 = 0.0
            explained = 0.0
        else:
            raise DegenerateVariance("target is constant but predictions miss it")
    else:
        r2 = 1.0 - ss_res / ss_tot
        explained = 1.0 - float(residual.var()) / float(y.var())
    return RegressionMetrics(
        mse=mse,
        mae=mae,
        r2=r2,
        explained_variance=explained,
        spearman_rho=spearman(y, y_hat),
        tolerance_accuracy=tolerance_accuracy(y, y_hat, rel_tol),
    )


def _lenient_metrics(y, y_hat, rel_tol: float) -> RegressionMetrics:
    """Per-fold variant: undefined entries become None instead of raising.

    Leave-one-out folds have a single row, so rank correlation and variance
    ratios do not exist there; the aggregates skip the None entries.
    """
    y, y_hat = _check_pair(y, y_hat)
    residual = y - y_hat
    ss_res = float((residual**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = explained = 0.0 if ss_res == 0.0 else None
    else:
        r2 = 1.0 - ss_res / ss_tot
        explained = 1.0 - float(residual.var()) / float(y.var())
    try:
        rho = spearman(y, y_hat)
    except ConstantInput:
        rho = None
    return RegressionMetrics(
        mse=float((residual**2).mean()),
        mae=float(np.abs(residual).mean()),
        r2=r2,
        explained_variance=explained,
        spearman_rho=rho,
        tolerance_accuracy=tolerance_accuracy(y, y_hat, rel_tol),
    )


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class CVReport:
    protocol: str  # kfold | mccv
    iterations: int
    fold_metrics: tuple[RegressionMetrics, ...]
    mean: dict[str, float]
    std: dict[str, float]
    seed: int
    rel_tol: float
    learner_kind: str
    fold_names: tuple[tuple[str, ...], ...]  # held-out names per fold

    def to_json(self) -> str:
        payload = {
            "protocol": self.protocol,
            "iterations": self.iterations,
            "fold_metrics": [m.as_dict() for m in self.fold_metrics],
            "mean": self.mean,
            "std": self.std,
            "seed": self.seed,
            "rel_tol": self.rel_tol,
            "learner_kind": self.learner_kind,
            "fold_names": [list(names) for names in self.fold_names],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _aggregate(protocol, fold_metrics, fold_names, seed, rel_tol, kind, iterations) -> CVReport:
    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    for name in METRIC_NAMES:
        defined = [getattr(m, name) for m in fold_metrics if getattr(m, name) is not None]
        mean[name] = float(np.mean(defined)) if defined else None
        std[name] = float(np.std(defined)) if defined else None
    return CVReport(
        protocol=protocol,
        iterations=iterations,
        fold_metrics=tuple(fold_metrics),
        mean=mean,
        std=std,
        seed=seed,
        rel_tol=rel_tol,
        learner_kind=kind,
        fold_names=tuple(tuple(n) for n in fold_names),
    )


def _eval_split(kind, params, matrix, train_idx, test_idx, rel_tol) -> RegressionMetrics:
    train, test = matrix.take(train_idx), matrix.take(test_idx)
    model = models.fit_model(kind, params, train)
    return _lenient_metrics(test.target, models.predict(model, test), rel_tol)


def kfold_cv(
    kind: str,
    params,
    matrix: FeatureMatrix,
    k: int,
    rel_tol: float = 0.10,
    seed: int = 0,
) -> CVReport:
    """Shuffle once by seed, hold each of k near-equal folds out once."""
    n = len(matrix)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot form {k} folds")
    shuffled = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(shuffled, k)
    fold_metrics, fold_names = [], []
    for i in range(k):
        test_idx = folds[i]
        train_idx = np.concatenate([folds[j] for j in range(k) if j != i])
        fold_metrics.append(_eval_split(kind, params, matrix, train_idx, test_idx, rel_tol))
        fold_names.append([matrix.names[j] for j in test_idx])
    return _aggregate("kfold", fold_metrics, fold_names, seed, rel_tol, kind, k)


def mccv(
    kind: str,
    params,
    matrix: FeatureMatrix,
    iterations: int,
    test_fraction: float,
    rel_tol: float = 0.10,
    seed: int = 0,
) -> CVReport:
    """Monte Carlo CV: repeated seeded random holdout splits, averaged."""
    n = len(matrix)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not 0.0 < test_fraction < 1.0:
        raise BadFraction(f"test_fraction {test_fraction} not in (0, 1)")
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    if n < 2:
        raise TooFewRows("need at least 2 rows for a holdout split")
    rng = np.random.default_rng(seed)
    fold_metrics, fold_names = [], []
    for _ in range(iterations):
        perm = rng.permutation(n)
        test_idx, train_idx = perm[:n_test], perm[n_test:]
        fold_metrics.append(_eval_split(kind, params, matrix, train_idx, test_idx, rel_tol))
        fold_names.append([matrix.names[j] for j in test_idx])
    return _aggregate("mccv", fold_metrics, fold_names, seed, rel_tol, kind, iterations)


# ---------------------------------------------------------------------------
# bootstrap


@dataclass(frozen=True)
class BootstrapInterval:
    metric: str
    point: float
    lo: float
    hi: float
    resamples: int
    level: float
    seed: int
    redraws: int

    def as_dict(self) -> dict:
        return asdict(self)


def _single_metric(name: str, y, y_hat, rel_tol: float) -> float:
    if name not in METRIC_NAMES:
        raise ValueError(f"unknown metric {name!r}")
    if name == "spearman_rho":
        return spearman(y, y_hat)
    if name == "tolerance_accuracy":
        return tolerance_accuracy(y, y_hat, rel_tol)
    return getattr(regression_metrics(y, y_hat, rel_tol), name)


def bootstrap_ci(
    metric: str,
    y,
    y_hat,
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    rel_tol: float = 0.10,
) -> BootstrapInterval:
    """Percentile interval over paired resamples of (y_i, yhat_i).

    Resamples on which the metric is undefined (constant ranks, degenerate
    variance) are redrawn; the number of redraws is reported. A pathological
    input that cannot produce valid resamples aborts after 10x the budget.
    """
    y, y_hat = _check_pair(y, y_hat)
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    point = _single_metric(metric, y, y_hat, rel_tol)
    rng = np.random.default_rng(seed)
    values = np.empty(resamples)
    redraws = 0
    filled = 0
    attempts_left = resamples * 10
    n = y.size
    while filled < resamples:
        if attempts_left == 0:
            raise EvalError(f"bootstrap for {metric!r} kept hitting undefined resamples")
        attempts_left -= 1
        idx = rng.integers(0, n, size=n)
        try:
            values[filled] = _single_metric(metric, y[idx], y_hat[idx], rel_tol)
        except (ConstantInput, DegenerateVariance):
            redraws += 1
            continue
        filled += 1
    tail = (1.0 - level) / 2.0 * 100.0
    lo, hi = np.percentile(values, [tail, 100.0 - tail])
    return BootstrapInterval(
        metric=metric,
        point=float(point),
        lo=float(lo),
        hi=float(hi),
        resamples=resamples,
        level=level,
        seed=seed,
        redraws=redraws,
    )


# ---------------------------------------------------------------------------
# report container


@dataclass(frozen=True)
class EvalReport:
    learner_kind: str
    target_name: str
    feature_label: str
    n_train: int
    n_eval: int
    rel_tol: float
    metrics: RegressionMetrics
    intervals: tuple[BootstrapInterval, ...] = ()
    leakage_notice: str | None = None

    def to_json(self) -> str:
        payload = {
            "learner_kind": self.learner_kind,
            "target_name": self.target_name,
            "feature_label": self.feature_label,
            "n_train": self.n_train,
            "n_eval": self.n_eval,
            "rel_tol": self.rel_tol,
            "metrics": self.metrics.as_dict(),
            "intervals": [iv.as_dict() for iv in self.intervals],
            "leakage_notice": self.leakage_notice,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_markdown(self) -> str:
        """One-row table in the MSE / MAE / R2 / rho / Expl. Var. / Tol-10% layout."""
        m = self.metrics
        tol_cell = f"{m.tolerance_accuracy:.2f}"
        for iv in self.intervals:
            if iv.metric == "tolerance_accuracy":
                tol_cell = f"{iv.point:.2f} ± {(iv.hi - iv.lo) / 2.0:.2f}"
        tol_pct = f"Tol-{self.rel_tol * 100:g}% Acc."
        lines = [
            f"| Features | MSE | MAE | R² | ρ | Expl. Var. | {tol_pct} |",
            "| --- | --- | --- | --- | --- | --- | --- |",
            (
                f"| {self.feature_label} | {m.mse:.8f} | {m.mae:.8f} | {m.r2:.3f} "
                f"| {m.spearman_rho:.3f} | {m.explained_variance:.3f} | {tol_cell} |"
            ),
        ]
        lines.append("")
        lines.append(
            f"Learner: {self.learner_kind}; target: {self.target_name}; "
            f"n_train={self.n_train}, n_eval={self.n_eval}."
        )
        if self.intervals:
            lines.append(
                f"Intervals: percentile bootstrap, {self.intervals[0].resamples} resamples, "
                f"level {self.intervals[0].level:g}."
            )
        if self.leakage_notice:
            lines.append("")
            lines.append(f"**Note:** {self.leakage_notice}")
        return "\n".join(lines) + "\n"
