"""Evaluation protocols: link prediction, node-classification probe,
subcompositional robustness, interiority statistics and balance probes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .compgeo import helmert_basis, ilr, softmax, subcompose
from .errors import BadKeepSize, DegenerateSplit, NoLabels, NoPositives, OneClassOnly
from .graphio import LabelTable, LinkSplit
from .model import EPS, ModelState, embed_all, pair_log_odds

METRICS = frozenset(
    {
        "auc_roc",
        "auc_pr",
        "micro_f1",
        "macro_f1",
        "entropy_mean",
        "max_comp_mean",
        "near_corner_frac",
        "eff_roles_mean",
        "probe_acc_1d",
        "anova_f",
        "mutual_info",
        "l1",
        "cosine",
        "js",
    }
)

F_CAP = 1e12
DEFAULT_L2_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass
class EvalReport:
    task: str
    metrics: dict = field(default_factory=dict)
    per_seed: list = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in [self.metrics, *self.per_seed]:
            unknown = set(row) - METRICS
            if unknown:
                raise ValueError(f"unknown metric names {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metrics": _plain(self.metrics),
            "per_seed": _plain(self.per_seed),
            "config_echo": _plain(self.config_echo),
            "details": _plain(self.details),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _plain(obj):
    """Convert numpy scalars and arrays into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def mean_metrics(rows: list[dict]) -> dict:
    keys = sorted(set().union(*rows)) if rows else []
    return {k: float(np.mean([r[k] for r in rows if k in r])) for k in keys}


# -- ranking metrics ---------------------------------------------------------


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for tied scores."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUC-ROC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Step-wise area under the precision-recall curve (average precision).

    Thresholds run over distinct scores in descending order; tied scores
    enter together.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(float)
    n_pos = labels.sum()
    if n_pos == 0:
        raise NoPositives("AUC-PR needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[last]
    precision = tp / (last + 1)
    recall_gain = np.diff(np.r_[0.0, tp]) / n_pos
    return float(np.sum(precision * recall_gain))


def link_predict_eval(state: ModelState, split: LinkSplit) -> EvalReport:
    """Score held-out pairs by their log-odds."""
    pairs, y = split.eval_pairs()
    scores = pair_log_odds(state, pairs)
    return EvalReport(
        "linkpred",
        {"auc_roc": auc_roc(scores, y), "auc_pr": auc_pr(scores, y)},
        config_echo={"n_test_pos": len(split.test_pos), "n_test_neg": len(split.test_neg)},
    )


# -- multinomial logistic probe ------------------------------------------------


@dataclass(frozen=True)
class ProbeSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    ratios: tuple = (0.6, 0.2, 0.2)
    stratified: bool = True
    seed: int = 0


def probe_split(labels: LabelTable, seed: int = 0, ratios=(0.6, 0.2, 0.2)) -> ProbeSplit:
    """Stratified train/val/test split of the labelled nodes."""
    if len(labels) == 0:
        raise NoLabels("no labelled nodes")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for c in range(labels.num_classes):
        members = labels.nodes[labels.labels == c]
        members = members[rng.permutation(len(members))]
        n = len(members)
        n_train = max(1, int(round(ratios[0] * n)))
        n_val = int(round(ratios[1] * n))
        n_val = min(n_val, n - n_train)
        parts[0].append(members[:n_train])
        parts[1].append(members[n_train : n_train + n_val])
        parts[2].append(members[n_train + n_val :])
    train, val, test = (np.sort(np.concatenate(p)).astype(np.int64) for p in parts)
    return ProbeSplit(train, val, test, tuple(ratios), True, seed)


def f1_scores(y_true, y_pred, num_classes: int) -> tuple[float, float]:
    """Micro- and macro-averaged F1 for single-label multiclass predictions."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    micro = float(np.mean(y_true == y_pred)) if len(y_true) else 0.0
    per_class = []
    for c in range(num_classes):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        if tp + fp + fn == 0:
            continue
        per_class.append(2.0 * tp / (2.0 * tp + fp + fn))
    macro = float(np.mean(per_class)) if per_class else 0.0
    return micro, macro


class SoftmaxRegression:
    """Multinomial logistic regression fitted by full-batch gradient descent.

    The objective is the mean cross-entropy plus ``l2 / (2 n)`` times the
    squared weight norm (intercepts unpenalised), i.e. ``C = 1 / l2`` in
    the usual summed-loss convention. The step size is halved whenever a
    step would increase the objective.
    """

    def __init__(self, l2: float = 1.0, iterations: int = 2000, lr: float = 0.1):
        self.l2 = l2
        self.iterations = iterations
        self.lr = lr

    def _loss_grad(self, W, b, X, Y):
        n = X.shape[0]
        P = softmax(X @ W + b)
        loss = -np.mean(np.log(np.sum(P * Y, axis=1) + 1e-300)) + 0.5 * self.l2 / n * np.sum(W * W)
        G = (P - Y) / n
        return loss, X.T @ G + self.l2 / n * W, G.sum(axis=0)

    def fit(self, X, y, num_classes: int) -> "SoftmaxRegression":
        X = np.asarray(X, dtype=float)
        Y = np.eye(num_classes)[np.asarray(y)]
        W = np.zeros((X.shape[1], num_classes))
        b = np.zeros(num_classes)
        lr = self.lr
        loss, gW, gb = self._loss_grad(W, b, X, Y)
        for _ in range(self.iterations):
            W_new, b_new = W - lr * gW, b - lr * gb
            new_loss, gW_new, gb_new = self._loss_grad(W_new, b_new, X, Y)
            if new_loss > loss:
                lr *= 0.5
                continue
            W, b, loss, gW, gb = W_new, b_new, new_loss, gW_new, gb_new
        self.coef_, self.intercept_, self.loss_ = W, b, loss
        return self

    def predict(self, X) -> np.ndarray:
        return np.argmax(np.asarray(X, dtype=float) @ self.coef_ + self.intercept_, axis=1)


def multinomial_probe(
    features,
    labels: LabelTable,
    split: ProbeSplit,
    l2_grid=DEFAULT_L2_GRID,
    iterations: int = 2000,
    lr: float = 0.1,
) -> EvalReport:
    """Fit a softmax classifier on frozen features; pick L2 by validation micro-F1.

    Features are standardised with training-set statistics.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    lab = np.full(features.shape[0], -1, dtype=np.int64)
    lab[labels.nodes] = labels.labels
    C = labels.num_classes
    if len(np.unique(lab[split.train])) < 2:
        raise DegenerateSplit("training split must contain at least 2 classes")
    mu = features[split.train].mean(axis=0)
    sd = features[split.train].std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (features - mu) / sd
    best = None
    val_idx = split.val if len(split.val) else split.train
    for l2 in l2_grid:
        clf = SoftmaxRegression(l2, iterations, lr).fit(Z[split.train], lab[split.train], C)
        val_micro, _ = f1_scores(lab[val_idx], clf.predict(Z[val_idx]), C)
        if best is None or val_micro > best[0]:
            best = (val_micro, l2, clf)
    _, l2, clf = best
    micro, macro = f1_scores(lab[split.test], clf.predict(Z[split.test]), C)
    return EvalReport(
        "nodeclass",
        {"micro_f1": micro, "macro_f1": macro},
        config_echo={"l2_grid": list(l2_grid), "iterations": iterations, "lr": lr},
        details={"chosen_l2": l2, "val_micro_f1": best[0], "n_train": len(split.train),
                 "n_val": len(split.val), "n_test": len(split.test)},
    )


# -- subcompositional robustness ---------------------------------------------


def _smoothed_dist(Y, pairs):
    d = Y[pairs[:, 0]] - Y[pairs[:, 1]]
    return np.sqrt(np.sum(d * d, axis=1) + EPS * EPS)


def subcomp_eval(
    state: ModelState,
    split: LinkSplit,
    keep_sizes,
    masks_per_size: int = 50,
    calibrate: bool = False,
    seed: int = 0,
) -> EvalReport:
    """Link prediction after restricting every node to a random subset of components.

    For each mask the compositions are subcomposed and re-embedded with a
    Helmert basis on the kept components. Scores are
    ``-alpha * dist + gamma_i + gamma_j``, where ``alpha`` is 1 or, with
    ``calibrate``, the ratio of median full-model to median restricted
    distances over the evaluation pairs.
    """
    K = state.K
    keep_sizes = [int(k) for k in keep_sizes]
    for k in keep_sizes:
        if not 2 <= k <= K:
            raise BadKeepSize(f"keep size {k} outside [2, {K}]")
    pairs, y = split.eval_pairs()
    X = embed_all(state)
    full_dist = _smoothed_dist(X, pairs)
    bias = state.biases[pairs[:, 0]] + state.biases[pairs[:, 1]]
    full_scores = bias - full_dist
    full = {"auc_roc": auc_roc(full_scores, y), "auc_pr": auc_pr(full_scores, y)}
    Z = state.compositions()
    per_mask = []
    curve = {}
    for k in keep_sizes:
        basis = helmert_basis(k)
        rows = []
        for m in range(masks_per_size):
            rng = np.random.default_rng([seed, k, m])
            S = np.sort(rng.choice(K, size=k, replace=False))
            Yk = ilr(subcompose(Z, S), basis)
            dist = _smoothed_dist(Yk, pairs)
            alpha = 1.0
            if calibrate:
                med = np.median(dist)
                alpha = float(np.median(full_dist) / med) if med > 0 else 1.0
            scores = bias - alpha * dist
            row = {"auc_roc": auc_roc(scores, y), "auc_pr": auc_pr(scores, y)}
            rows.append(row)
            per_mask.append(row)
        mean = mean_metrics(rows)
        curve[str(k)] = {
            "auc_roc_mean": mean["auc_roc"],
            "auc_pr_mean": mean["auc_pr"],
            "auc_roc_std": float(np.std([r["auc_roc"] for r in rows])),
            "retention_auc_roc": mean["auc_roc"] / full["auc_roc"],
            "retention_auc_pr": mean["auc_pr"] / full["auc_pr"],
            "per_mask_auc_roc": [r["auc_roc"] for r in rows],
        }
    return EvalReport(
        "subcomp",
        full,
        per_mask,
        config_echo={"keep_sizes": keep_sizes, "masks_per_size": masks_per_size,
                     "calibrate": calibrate, "seed": seed, "K": K},
        details={"curve": curve},
    )


# -- interiority ---------------------------------------------------------------


def composition_stats(Z, threshold: float = 0.9) -> dict:
    """Entropy, max component, near-corner share and effective roles of compositions."""
    Z = np.asarray(Z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -np.sum(np.where(Z > 0, Z * np.log(Z), 0.0), axis=1)
    mx = Z.max(axis=1)
    return {
        "entropy_mean": float(H.mean()),
        "max_comp_mean": float(mx.mean()),
        "near_corner_frac": float(np.mean(mx > threshold)),
        "eff_roles_mean": float(np.exp(H).mean()),
    }


def interiority_stats(state: ModelState, threshold: float = 0.9) -> EvalReport:
    return EvalReport(
        "interiority",
        composition_stats(state.compositions(), threshold),
        config_echo={"threshold": threshold, "K": state.K},
    )


# -- balance probes ----------------------------------------------------------------


def anova_f(x, groups) -> float:
    """One-way ANOVA F statistic; 0 without between-group spread, capped when exact."""
    x = np.asarray(x, dtype=float)
    groups = np.asarray(groups)
    classes = np.unique(groups)
    k, n = len(classes), len(x)
    if k < 2 or n <= k:
        return 0.0
    grand = x.mean()
    ss_between = sum(np.sum(groups == c) * (x[groups == c].mean() - grand) ** 2 for c in classes)
    ss_within = sum(np.sum((x[groups == c] - x[groups == c].mean()) ** 2) for c in classes)
    scale = max(1.0, float(np.sum((x - grand) ** 2)))
    if ss_between <= 1e-24 * scale:
        return 0.0
    if ss_within <= 1e-24 * scale:
        return F_CAP
    return float(min(F_CAP, (ss_between / (k - 1)) / (ss_within / (n - k))))


def quantile_bins(x, bins: int = 16) -> np.ndarray:
    """Equal-frequency bin index of each value; tied values share a bin."""
    x = np.asarray(x, dtype=float)
    edges = np.unique(np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1]))
    return np.searchsorted(edges, x, side="right")


def mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) between two discrete label arrays."""
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(max(0.0, np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz]))))


def balance_probe(
    state: ModelState,
    labels: LabelTable,
    bins: int = 16,
    basis=None,
    seed: int = 0,
    coords: np.ndarray | None = None,
) -> EvalReport:
    """Find the ILR coordinate most associated with the labels and score it.

    ``basis`` overrides the model's basis (e.g. a varimax rotation of it).
    Reports the ANOVA F of the selected coordinate, the test accuracy of a
    multiclass logistic probe on that coordinate alone, and the plug-in
    mutual information between its equal-frequency bins and the labels.
    """
    if len(labels) == 0:
        raise NoLabels("balance probe needs labelled nodes")
    if coords is None:
        V = state.basis().columns if basis is None else getattr(basis, "columns", basis)
        coords = state.logits @ V
    x = coords[labels.nodes]
    y = labels.labels
    F = np.array([anova_f(x[:, b], y) for b in range(x.shape[1])])
    best = int(np.argmax(F))
    split = probe_split(labels, seed)
    probe = multinomial_probe(coords[:, [best]], labels, split)
    mi = mutual_information(quantile_bins(x[:, best], bins), y)
    return EvalReport(
        "probe",
        {"probe_acc_1d": probe.metrics["micro_f1"], "anova_f": float(F[best]), "mutual_info": mi},
        config_echo={"bins": bins, "seed": seed},
        details={"coordinate": best, "anova_f_all": F.tolist()},
    )


# -- dyadic pair features ----------------------------------------------------

DYADIC_OPERATORS = ("average", "hadamard", "weighted_l1", "weighted_l2")


def dyadic_features(X, pairs, operator: str = "hadamard") -> np.ndarray:
    """Pair features from node embeddings for external edge classifiers."""
    X = np.asarray(X, dtype=float)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a, b = X[pairs[:, 0]], X[pairs[:, 1]]
    if operator == "average":
        return 0.5 * (a + b)
    if operator == "hadamard":
        return a * b
    if operator == "weighted_l1":
        return np.abs(a - b)
    if operator == "weighted_l2":
        return (a - b) ** 2
    raise ValueError(f"unknown operator {operator!r}; choose from {DYADIC_OPERATORS}")
