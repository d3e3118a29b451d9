"""From-scratch regression learners over FeatureMatrix inputs.

All learners share the same exact greedy tree machinery: at each node the
split search scans every candidate (feature, threshold) pair, where
thresholds are the midpoints between consecutive distinct sorted feature
values, and picks the pair with the largest reduction in the sum of squared
deviations. Ties break toward the lowest feature index, then the lowest
threshold. No histogram binning: at desk scale exact search is affordable
and directly checkable against a brute-force oracle.

Determinism contract: all randomness comes from numpy's default_rng
(PCG64). A forest derives the RNG for tree t as default_rng(seed + t); each
tree first draws its bootstrap sample (when enabled), then draws per-node
feature subsets in depth-first, left-before-right order. Refitting with the
same seed reproduces the model bit for bit.

Gradient boosting uses the squared-error objective with an L2 penalty on
leaf weights: each round fits a depth-limited tree to the current
residuals whose leaf value is sum(residuals) / (count + l2_leaf_reg), then
adds it with the learning rate as step size. The elastic net minimizes

    (1/2N) * sum (y - Xb - b0)^2 + alpha*lam*|b|_1 + ((1-alpha)/2)*lam*|b|_2^2

by cyclic coordinate descent with soft-thresholding, intercept unpenalized.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import PetrankError
from .features import (
    FeatureMatrix,
    FeatureSchema,
    StandardizationTable,
    standardize_apply,
    standardize_fit,
)

MODEL_KINDS = ("tree", "forest", "gbt", "ols", "elastic_net")
_FILE_VERSION = 1


class ModelError(PetrankError):
    pass


class EmptyMatrix(ModelError):
    pass


class SchemaMismatch(ModelError):
    pass


class VersionMismatch(ModelError):
    pass


class CorruptFile(ModelError):
    pass


class NotStandardizedWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# parameter sets


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None  # None = unbounded
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_subsample: str = "all"  # all | third | sqrt
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.feature_subsample not in ("all", "third", "sqrt"):
            raise ValueError("feature_subsample must be all, third or sqrt")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class ForestParams:
    # Per-node subsampling ("third"/"sqrt") is available but defaults to all
    # features: with only four numeric columns, excluding both gap-derived
    # features at a node lets pure text-noise splits fragment the tree, which
    # measurably destabilizes held-out rank order.
    n_trees: int = 100
    tree: TreeParams = field(default_factory=TreeParams)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class GbtParams:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    l2_leaf_reg: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.l2_leaf_reg < 0:
            raise ValueError("l2_leaf_reg must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class ElasticNetParams:
    alpha: float = 0.5
    lam: float = 1.0
    tol: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


_PARAM_TYPES = {
    "tree": TreeParams,
    "forest": ForestParams,
    "gbt": GbtParams,
    "ols": type(None),
    "elastic_net": ElasticNetParams,
}


# ---------------------------------------------------------------------------
# tree machinery

# Node encoding inside the flat node list:
#   internal: {"feature": int, "threshold": float, "left": int, "right": int}
#   leaf:     {"value": float, "count": int}


# Mathematically tied candidate splits can differ in their computed
# reductions by a few ulps (summation order depends on the sort), so "tie"
# is defined as agreement within this relative fraction of the parent SSE.
# Both the production search and the brute-force oracle snap ties this way,
# then break them toward the lowest feature index and lowest threshold.
_TIE_EPS = 1e-12


def _best_split(X, idx, y, feature_indices, min_leaf):
    """Exact greedy search over the given features for the rows in idx.

    Returns (reduction, feature, threshold) or None when no legal split
    exists. Features are scanned in ascending index order and positions in
    ascending threshold order, so the first of any snapped tie wins.
    """
    n = y.shape[0]
    total, total2 = y.sum(), (y * y).sum()
    parent_sse = total2 - total * total / n
    eps = _TIE_EPS * abs(parent_sse)
    best = None
    for f in feature_indices:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys = y[order]
        cy = np.cumsum(ys)
        cy2 = np.cumsum(ys * ys)
        counts = np.arange(1, n)
        valid = xs_sorted[1:] > xs_sorted[:-1]
        if min_leaf > 1:
            valid &= (counts >= min_leaf) & ((n - counts) >= min_leaf)
        if not valid.any():
            continue
        sse_left = cy2[:-1] - (cy[:-1] ** 2) / counts
        sse_right = (total2 - cy2[:-1]) - ((total - cy[:-1]) ** 2) / (n - counts)
        reduction = np.where(valid, parent_sse - sse_left - sse_right, -np.inf)
        r_max = reduction.max()
        if r_max == -np.inf:
            continue
        i = int(np.argmax(reduction >= r_max - eps))  # first position within the tie band
        threshold = (xs_sorted[i] + xs_sorted[i + 1]) / 2.0
        if best is None or reduction[i] > best[0] + eps:
            best = (float(reduction[i]), int(f), float(threshold))
    return best


def _grow_tree(X, y, params: TreeParams, rng, l2_leaf_reg: float = 0.0) -> list[dict]:
    n_features = X.shape[1]
    if params.feature_subsample == "third":
        k = max(1, math.ceil(n_features / 3))
    elif params.feature_subsample == "sqrt":
        k = max(1, math.ceil(math.sqrt(n_features)))
    else:
        k = n_features
    nodes: list[dict] = []

    def leaf(y_sub) -> int:
        value = float(y_sub.sum() / (y_sub.shape[0] + l2_leaf_reg))
        nodes.append({"value": value, "count": int(y_sub.shape[0])})
        return len(nodes) - 1

    def grow(idx, depth) -> int:
        y_sub = y[idx]
        n = idx.shape[0]
        if (
            n < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or np.all(y_sub == y_sub[0])
        ):
            return leaf(y_sub)
        if k < n_features:
            feats = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            feats = np.arange(n_features)
        best = _best_split(X, idx, y_sub, feats, params.min_samples_leaf)
        if best is None:
            return leaf(y_sub)
        _, f, thr = best
        node_index = len(nodes)
        nodes.append({"feature": f, "threshold": thr, "left": -1, "right": -1})
        mask = X[idx, f] <= thr
        nodes[node_index]["left"] = grow(idx[mask], depth + 1)
        nodes[node_index]["right"] = grow(idx[~mask], depth + 1)
        return node_index

    grow(np.arange(X.shape[0]), 0)
    return nodes


def _tree_predict(nodes: list[dict], X) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)
    for r in range(X.shape[0]):
        i = 0
        node = nodes[0]
        while "feature" in node:
            i = node["left"] if X[r, node["feature"]] <= node["threshold"] else node["right"]
            node = nodes[i]
        out[r] = node["value"]
    return out


def brute_force_root_split(X, y, min_leaf: int = 1):
    """Independent exhaustive search over every (feature, midpoint) pair.

    Slow reference used by tests to check the production split search; it
    applies the same snapped-tie policy (lowest feature, lowest threshold).
    """
    n, p = X.shape
    best = None
    parent = float(np.sum((y - y.mean()) ** 2))
    eps = _TIE_EPS * abs(parent)
    for f in range(p):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2.0
            mask = X[:, f] <= thr
            nl, nr = int(mask.sum()), int((~mask).sum())
            if nl < min_leaf or nr < min_leaf:
                continue
            sse = float(np.sum((y[mask] - y[mask].mean()) ** 2)) + float(
                np.sum((y[~mask] - y[~mask].mean()) ** 2)
            )
            reduction = parent - sse
            if best is None or reduction > best[0] + eps:
                best = (reduction, f, float(thr))
    return best


# ---------------------------------------------------------------------------
# trained model container


@dataclass
class TrainedModel:
    kind: str
    params: object
    schema: FeatureSchema
    payload: dict
    fingerprint: dict
    standardization: StandardizationTable | None = None

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        return predict(self, matrix)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fingerprint(kind, params, schema, payload, n, seed) -> dict:
    config = _canonical({"kind": kind, "params": _params_dict(params), "schema": schema.to_dict()})
    return {
        "n": int(n),
        "seed": seed,
        "config_hash": hashlib.sha256(config.encode()).hexdigest(),
        "payload_hash": hashlib.sha256(_canonical(payload).encode()).hexdigest(),
    }


def _params_dict(params) -> dict | None:
    return None if params is None else asdict(params)


def _require_rows(matrix: FeatureMatrix):
    if len(matrix) == 0:
        raise EmptyMatrix("cannot fit on an empty feature matrix")


# ---------------------------------------------------------------------------
# fit functions


def fit_tree(matrix: FeatureMatrix, params: TreeParams | None = None) -> TrainedModel:
    params = params or TreeParams()
    _require_rows(matrix)
    rng = np.random.default_rng(params.seed)
    nodes = _grow_tree(matrix.values, matrix.target, params, rng)
    payload = {"nodes": nodes}
    return TrainedModel(
        kind="tree",
        params=params,
        schema=matrix.schema,
        payload=payload,
        fingerprint=_fingerprint("tree", params, matrix.schema, payload, len(matrix), params.seed),
    )


def fit_forest(matrix: FeatureMatrix, params: ForestParams | None = None) -> TrainedModel:
    params = params or ForestParams()
    _require_rows(matrix)
    n = len(matrix)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng(params.seed + t)
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
            X, y = matrix.values[idx], matrix.target[idx]
        else:
            X, y = matrix.values, matrix.target
        trees.append(_grow_tree(X, y, params.tree, rng))
    payload = {"trees": trees}
    return TrainedModel(
        kind="forest",
        params=params,
        schema=matrix.schema,
        payload=payload,
        fingerprint=_fingerprint(
            "forest", params, matrix.schema, payload, len(matrix), params.seed
        ),
    )


def fit_gbt(matrix: FeatureMatrix, params: GbtParams | None = None) -> TrainedModel:
    params = params or GbtParams()
    _require_rows(matrix)
    base = float(matrix.target.mean())
    tree_params = TreeParams(max_depth=params.max_depth, feature_subsample="all")
    rng = np.random.default_rng(params.seed)
    current = np.full(len(matrix), base)
    trees = []
    for _ in range(params.n_rounds):
        residuals = matrix.target - current
        nodes = _grow_tree(matrix.values, residuals, tree_params, rng, params.l2_leaf_reg)
        trees.append(nodes)
        current = current + params.learning_rate * _tree_predict(nodes, matrix.values)
    payload = {"base": base, "learning_rate": params.learning_rate, "trees": trees}
    return TrainedModel(
        kind="gbt",
        params=params,
        schema=matrix.schema,
        payload=payload,
        fingerprint=_fingerprint("gbt", params, matrix.schema, payload, len(matrix), params.seed),
    )


def fit_ols(matrix: FeatureMatrix) -> TrainedModel:
    """Least squares via centered normal equations with a 1e-10 ridge jitter
    on the diagonal, which keeps rank-deficient designs finite."""
    _require_rows(matrix)
    X, y = matrix.values, matrix.target
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    gram = Xc.T @ Xc + 1e-10 * np.eye(X.shape[1])
    coef = np.linalg.solve(gram, Xc.T @ yc)
    intercept = float(y_mean - x_mean @ coef)
    payload = {"coef": [float(c) for c in coef], "intercept": intercept}
    return TrainedModel(
        kind="ols",
        params=None,
        schema=matrix.schema,
        payload=payload,
        fingerprint=_fingerprint("ols", None, matrix.schema, payload, len(matrix), None),
    )


def _soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def fit_elastic_net(matrix: FeatureMatrix, params: ElasticNetParams | None = None) -> TrainedModel:
    """Cyclic coordinate descent; expects standardized features.

    Emits NotStandardizedWarning when any column mean exceeds 1e-6 instead
    of silently producing a badly scaled fit.
    """
    params = params or ElasticNetParams()
    _require_rows(matrix)
    X, y = matrix.values, matrix.target
    n, p = X.shape
    if p and float(np.abs(X.mean(axis=0)).max()) > 1e-6:
        warnings.warn(
            "features do not look standardized (column mean > 1e-6)",
            NotStandardizedWarning,
            stacklevel=2,
        )
    col_sq = (X * X).sum(axis=0) / n
    l1 = params.alpha * params.lam
    l2 = (1.0 - params.alpha) * params.lam
    beta = np.zeros(p)
    intercept = float(y.mean())
    residual = y - intercept - X @ beta
    converged = False
    n_iter = 0
    for n_iter in range(1, params.max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            old = beta[j]
            rho = float(X[:, j] @ residual) / n + col_sq[j] * old
            denom = col_sq[j] + l2
            new = _soft_threshold(rho, l1) / denom if denom > 0 else 0.0
            if new != old:
                residual += X[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        # unpenalized intercept: exact update each sweep
        shift = float(residual.mean())
        if shift != 0.0:
            intercept += shift
            residual -= shift
        if max_delta < params.tol:
            converged = True
            break
    payload = {
        "coef": [float(b) for b in beta],
        "intercept": intercept,
        "converged": converged,
        "n_iter": n_iter,
    }
    return TrainedModel(
        kind="elastic_net",
        params=params,
        schema=matrix.schema,
        payload=payload,
        fingerprint=_fingerprint(
            "elastic_net", params, matrix.schema, payload, len(matrix), None
        ),
    )


def fit_model(kind: str, params, matrix: FeatureMatrix) -> TrainedModel:
    """Pipeline-level dispatch over the five learner kinds.

    elastic_net gets its standardization fitted here (on the training rows
    only) and carried inside the returned model, so prediction on raw
    matrices stays self-contained.
    """
    if kind == "tree":
        return fit_tree(matrix, params)
    if kind == "forest":
        return fit_forest(matrix, params)
    if kind == "gbt":
        return fit_gbt(matrix, params)
    if kind == "ols":
        return fit_ols(matrix)
    if kind == "elastic_net":
        table = standardize_fit(matrix)
        model = fit_elastic_net(standardize_apply(matrix, table), params)
        model.standardization = table
        return model
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# prediction


def predict(model: TrainedModel, matrix: FeatureMatrix) -> np.ndarray:
    if matrix.schema != model.schema:
        raise SchemaMismatch("matrix schema differs from the schema the model was trained on")
    if model.standardization is not None:
        matrix = standardize_apply(matrix, model.standardization)
    X = matrix.values
    if model.kind == "tree":
        return _tree_predict(model.payload["nodes"], X)
    if model.kind == "forest":
        trees = model.payload["trees"]
        acc = np.zeros(X.shape[0])
        for nodes in trees:
            acc += _tree_predict(nodes, X)
        return acc / len(trees)
    if model.kind == "gbt":
        out = np.full(X.shape[0], model.payload["base"])
        for nodes in model.payload["trees"]:
            out += model.payload["learning_rate"] * _tree_predict(nodes, X)
        return out
    if model.kind in ("ols", "elastic_net"):
        coef = np.asarray(model.payload["coef"], dtype=np.float64)
        return X @ coef + model.payload["intercept"]
    raise ValueError(f"unknown model kind {model.kind!r}")


# ---------------------------------------------------------------------------
# serialization


def save_model(model: TrainedModel, path) -> None:
    envelope = {
        "version": _FILE_VERSION,
        "kind": model.kind,
        "params": _params_dict(model.params),
        "schema": model.schema.to_dict(),
        "payload": model.payload,
        "fingerprint": model.fingerprint,
        "standardization": (
            None if model.standardization is None else model.standardization.to_dict()
        ),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(envelope, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            envelope = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"cannot parse model file {path}: {exc}") from None
    if not isinstance(envelope, dict) or "version" not in envelope:
        raise CorruptFile(f"model file {path} lacks a version header")
    if envelope["version"] != _FILE_VERSION:
        raise VersionMismatch(
            f"model file version {envelope['version']!r}, this build reads {_FILE_VERSION}"
        )
    try:
        kind = envelope["kind"]
        params_type = _PARAM_TYPES[kind]
        raw_params = envelope["params"]
        if kind == "ols":
            params = None
        elif kind == "forest":
            tree = TreeParams(**raw_params.pop("tree"))
            params = ForestParams(tree=tree, **raw_params)
        else:
            params = params_type(**raw_params)
        model = TrainedModel(
            kind=kind,
            params=params,
            schema=FeatureSchema.from_dict(envelope["schema"]),
            payload=envelope["payload"],
            fingerprint=envelope["fingerprint"],
        )
        if envelope.get("standardization") is not None:
            model.standardization = StandardizationTable.from_dict(envelope["standardization"])
        return model
    except (KeyError, TypeError) as exc:
        raise CorruptFile(f"model file {path} is missing fields: {exc}") from None
