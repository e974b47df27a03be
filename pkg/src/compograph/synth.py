"""Synthetic mixed-membership graphs and membership-recovery scoring."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import expit

from .compgeo import closure, helmert_basis, ilr
from .errors import CompographError, DimMismatch, TargetUnreachable
from .evalsuite import EvalReport, composition_stats
from .graphio import Graph
from .train import TrainConfig, fit

CONTINUOUS = "continuous"
NEAR_DISCRETE = "discrete"
BILINEAR = "bilinear"
ILR_DISTANCE = "ilr"

CONCENTRATION = {CONTINUOUS: 5.0, NEAR_DISCRETE: 0.1}
P_IN = 0.9
MAX_BISECTION = 200
DEGREE_RTOL = 0.01


@dataclass(frozen=True)
class SynthConfig:
    N: int = 800
    K_true: int = 8
    regime: str = CONTINUOUS
    generator: str = ILR_DISTANCE
    target_mean_degree: float = 20.0
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if not self.N > self.K_true >= 2:
            raise CompographError(f"need N > K_true >= 2, got N={self.N}, K_true={self.K_true}")
        if not 0 < self.target_mean_degree < self.N - 1:
            raise CompographError("target_mean_degree must lie in (0, N-1)")
        if self.regime not in CONCENTRATION:
            raise CompographError(f"regime must be one of {tuple(CONCENTRATION)}")
        if self.generator not in (BILINEAR, ILR_DISTANCE):
            raise CompographError(f"generator must be '{BILINEAR}' or '{ILR_DISTANCE}'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RecoveryScore:
    l1: float
    cosine: float
    js: float
    permutation: tuple

    def as_metrics(self) -> dict:
        return {"l1": self.l1, "cosine": self.cosine, "js": self.js}


def sample_memberships(config: SynthConfig) -> np.ndarray:
    """Symmetric Dirichlet memberships, one row per node."""
    config.validate()
    rng = np.random.default_rng([config.seed, 0])
    g = rng.gamma(CONCENTRATION[config.regime], size=(config.N, config.K_true))
    # keep every entry strictly positive so log-ratios stay finite
    g = np.maximum(g, np.finfo(float).tiny)
    return closure(g)


def _bisect(mean_degree, lo: float, hi: float, target: float) -> float:
    """Root of an increasing ``mean_degree`` on ``[lo, hi]`` to 1% relative accuracy."""
    f_lo, f_hi = mean_degree(lo), mean_degree(hi)
    for x, f in ((lo, f_lo), (hi, f_hi)):
        if abs(f - target) <= DEGREE_RTOL * target:
            return x
    if not f_lo <= target <= f_hi:
        raise TargetUnreachable(
            f"mean degree {target} outside reachable range [{f_lo:.4g}, {f_hi:.4g}]"
        )
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        f = mean_degree(mid)
        if abs(f - target) <= DEGREE_RTOL * target:
            return mid
        if f < target:
            lo = mid
        else:
            hi = mid
    raise TargetUnreachable(f"bisection did not reach mean degree {target} in {MAX_BISECTION} steps")


def _upper(M: np.ndarray) -> np.ndarray:
    return M[np.triu_indices(M.shape[0], k=1)]


def edge_probabilities(memberships, config: SynthConfig) -> tuple[np.ndarray, float]:
    """Upper-triangle edge probabilities and the calibrated generator constant.

    The constant is ``p_out`` for the bilinear generator and ``alpha`` for
    the ILR-distance generator. When the target density lies below what
    ``p_out = 0`` gives, the bilinear block matrix is scaled down as a whole
    (so the within-block probability drops below ``P_IN``).
    """
    Z = np.asarray(memberships, dtype=float)
    N = Z.shape[0]
    target = config.target_mean_degree

    def degree(p):
        return 2.0 * p.sum() / N

    if config.generator == BILINEAR:
        overlap = _upper(Z @ Z.T)

        def probs(p_out):
            return p_out + (P_IN - p_out) * overlap

        if degree(probs(0.0)) > target * (1.0 + DEGREE_RTOL):
            # even p_out = 0 is too dense: shrink the whole block matrix instead
            scale = _bisect(lambda s: degree(s * probs(0.0)), 0.0, 1.0, target)
            return scale * probs(0.0), 0.0
        p_out = _bisect(lambda q: degree(probs(q)), 0.0, P_IN, target)
        return probs(p_out), p_out

    X = ilr(Z, helmert_basis(Z.shape[1]))
    sq = np.sum(X * X, axis=1)
    dist = _upper(np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)))
    lo, hi = -1.0, 1.0
    while degree(expit(lo - dist)) > target and lo > -1e6:
        lo *= 2.0
    while degree(expit(hi - dist)) < target and hi < 1e6:
        hi *= 2.0
    alpha = _bisect(lambda a: degree(expit(a - dist)), lo, hi, target)
    return expit(alpha - dist), alpha


def generate_graph(memberships, config: SynthConfig) -> Graph:
    """Independent Bernoulli edges for every pair ``i < j``."""
    config.validate()
    Z = np.asarray(memberships, dtype=float)
    if Z.shape != (config.N, config.K_true):
        raise DimMismatch(f"memberships must have shape ({config.N}, {config.K_true})")
    p, _ = edge_probabilities(Z, config)
    rng = np.random.default_rng([config.seed, 1])
    hit = rng.random(p.shape) < p
    iu, ju = np.triu_indices(config.N, k=1)
    return Graph(config.N, np.column_stack([iu[hit], ju[hit]]))


def _entropy_terms(P, M):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(P > 0, P * np.log(P / M), 0.0).sum(axis=1)


def score_recovery(learned, truth) -> RecoveryScore:
    """Align learned components to the truth, then compare row by row.

    Components are matched by the assignment minimising the mean absolute
    difference between columns. ``permutation[k]`` is the learned column
    matched to true component ``k``.
    """
    L = np.asarray(learned, dtype=float)
    T = np.asarray(truth, dtype=float)
    if L.shape != T.shape or L.ndim != 2:
        raise DimMismatch(f"learned {L.shape} and truth {T.shape} must have equal (N, K)")
    cost = np.abs(L[:, :, None] - T[:, None, :]).mean(axis=0)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(T.shape[1], dtype=np.int64)
    perm[cols] = rows
    A = L[:, perm]
    l1 = np.abs(A - T).sum(axis=1)
    cos = np.sum(A * T, axis=1) / (np.linalg.norm(A, axis=1) * np.linalg.norm(T, axis=1))
    M = 0.5 * (A + T)
    js = 0.5 * (_entropy_terms(A, M) + _entropy_terms(T, M))
    return RecoveryScore(
        float(l1.mean()),
        float(cos.mean()),
        float(np.clip(js, 0.0, np.log(2.0)).mean()),
        tuple(int(k) for k in perm),
    )


def run_recovery_experiment(config: SynthConfig, train_config: TrainConfig) -> EvalReport:
    """Generate a graph, fit with ``K = K_true`` and score membership recovery."""
    truth = sample_memberships(config)
    graph = generate_graph(truth, config)
    tc = replace(train_config, K=config.K_true)
    state = fit(graph, tc)
    learned = state.compositions()
    score = score_recovery(learned, truth)
    metrics = score.as_metrics()
    metrics.update(composition_stats(learned))
    return EvalReport(
        "synth",
        metrics,
        config_echo={"synth": config.to_dict(), "train": tc.to_dict()},
        details={
            "permutation": list(score.permutation),
            "truth_interiority": composition_stats(truth),
            "num_edges": graph.num_edges,
            "mean_degree": 2.0 * graph.num_edges / graph.num_nodes,
        },
    )


def write_memberships_csv(path, memberships) -> None:
    Z = np.asarray(memberships, dtype=float)
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"z{k}" for k in range(Z.shape[1])])
        for i, row in enumerate(Z):
            w.writerow([i] + [repr(float(v)) for v in row])
