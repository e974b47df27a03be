r"""Latent-distance edge model on ILR coordinates.

Each node carries logits ``z~_i`` (its composition is ``softmax(z~_i)``)
and a bias ``gamma_i``. Because ``V.T @ 1 = 0``, the ILR coordinates of
``softmax(z~_i)`` are exactly ``V.T @ z~_i``, so the softmax never has to
be formed. The log-odds of an edge are

    eta_ij = -sqrt(|x_i - x_j|^2 + eps^2) + gamma_i + gamma_j

and the model is fitted by minimising the Bernoulli negative
log-likelihood, with the non-edge part estimated from a uniform sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .compgeo import IlrBasis, centered_qr, helmert_basis, learned_basis_from_params, softmax
from .errors import DimMismatch, NumericFailure, SelfPair
from .graphio import Graph

FIXED_HELMERT = "helmert"
LEARNED_QR = "learned"
BASIS_MODES = (FIXED_HELMERT, LEARNED_QR)

EPS = 1e-12
CHECKPOINT_VERSION = 1


@dataclass
class ModelState:
    logits: np.ndarray
    biases: np.ndarray
    basis_mode: str = FIXED_HELMERT
    basis_params: np.ndarray | None = None
    seed: int = 0
    iterations: int = 0

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.basis_mode not in BASIS_MODES:
            raise ValueError(f"basis_mode must be one of {BASIS_MODES}")
        N, K = self.logits.shape
        if self.biases.shape != (N,):
            raise DimMismatch(f"biases must have shape ({N},)")
        if self.basis_mode == LEARNED_QR:
            if self.basis_params is None:
                raise ValueError("learned basis mode needs basis_params")
            self.basis_params = np.asarray(self.basis_params, dtype=float)
            if self.basis_params.shape != (K, K - 1):
                raise DimMismatch(f"basis_params must have shape ({K}, {K - 1})")
        elif self.basis_params is not None:
            raise ValueError("basis_params given for a fixed Helmert basis")

    @property
    def N(self) -> int:
        return self.logits.shape[0]

    @property
    def K(self) -> int:
        return self.logits.shape[1]

    def basis(self) -> IlrBasis:
        if self.basis_mode == LEARNED_QR:
            return learned_basis_from_params(self.basis_params)
        return helmert_basis(self.K)

    def compositions(self) -> np.ndarray:
        return softmax(self.logits)

    def copy(self) -> "ModelState":
        return ModelState(
            self.logits.copy(),
            self.biases.copy(),
            self.basis_mode,
            None if self.basis_params is None else self.basis_params.copy(),
            self.seed,
            self.iterations,
        )

    def params(self) -> dict:
        p = {"logits": self.logits, "biases": self.biases}
        if self.basis_params is not None:
            p["basis_params"] = self.basis_params
        return p

    def check_finite(self) -> None:
        for name, arr in self.params().items():
            if not np.all(np.isfinite(arr)):
                raise NumericFailure(f"non-finite values in {name}")


def init_state(N: int, K: int, basis_mode: str = FIXED_HELMERT, seed: int = 0) -> ModelState:
    """Small random logits, zero biases, standard normal basis parameters."""
    rng = np.random.default_rng(seed)
    logits = 0.1 * rng.standard_normal((N, K))
    W = rng.standard_normal((K, K - 1)) if basis_mode == LEARNED_QR else None
    return ModelState(logits, np.zeros(N), basis_mode, W, seed=seed)


def embed_all(state: ModelState) -> np.ndarray:
    """ILR coordinates of every node, ``logits @ V``."""
    return state.logits @ state.basis().columns


def log_odds(state: ModelState, i: int, j: int) -> float:
    if i == j:
        raise SelfPair(f"log-odds undefined for self-pair ({i}, {i})")
    X = embed_all(state)
    d = X[i] - X[j]
    return float(state.biases[i] + state.biases[j] - np.sqrt(d @ d + EPS * EPS))


def pair_log_odds(state: ModelState, pairs, X: np.ndarray | None = None) -> np.ndarray:
    """Log-odds for an ``(P, 2)`` array of node pairs."""
    if X is None:
        X = embed_all(state)
    return kernels.pair_log_odds(X, state.biases, pairs, EPS)


def _softplus(x):
    return np.logaddexp(0.0, x)


def nll_exact(state: ModelState, graph: Graph) -> float:
    """Negative log-likelihood summed over all unordered pairs (O(N^2))."""
    X = embed_all(state)
    iu, ju = np.triu_indices(state.N, k=1)
    d = X[iu] - X[ju]
    eta = state.biases[iu] + state.biases[ju] - np.sqrt(np.sum(d * d, axis=1) + EPS * EPS)
    y = graph.adjacency()[iu, ju]
    return float(-np.sum(y * eta - _softplus(eta)))


@dataclass
class PairBatch:
    """Observed edges plus a weighted uniform sample of non-edges."""

    pos_pairs: np.ndarray
    neg_pairs: np.ndarray
    neg_weight: float = 1.0


class NegativeSampler:
    """Draws uniform non-edges (with replacement) by rejection."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.N = graph.num_nodes
        self._indptr, self._indices = kernels.csr_neighbours(self.N, graph.edges)
        self.num_non_edges = graph.num_non_edges

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        out = []
        have = 0
        accept = self.num_non_edges / max(1, self.N * (self.N - 1) // 2)
        while have < count:
            m = int((count - have) / max(1e-3, accept) * 1.1) + 8
            cand = rng.integers(0, self.N, size=(m, 2))
            lo = np.minimum(cand[:, 0], cand[:, 1])
            hi = np.maximum(cand[:, 0], cand[:, 1])
            keep = kernels.non_edge_mask(self._indptr, self._indices, lo, hi)
            cand = np.column_stack([lo[keep], hi[keep]])[: count - have]
            out.append(cand)
            have += len(cand)
        return np.vstack(out)

    def batch(self, count: int, rng: np.random.Generator) -> PairBatch:
        if self.num_non_edges == 0 or count == 0:
            return PairBatch(self.graph.edges, np.empty((0, 2), np.int64), 1.0)
        neg = self.sample(count, rng)
        return PairBatch(self.graph.edges, neg, self.num_non_edges / count)


def all_pairs_batch(graph: Graph) -> PairBatch:
    """Batch whose negatives are every non-edge, each with weight one."""
    iu, ju = np.triu_indices(graph.num_nodes, k=1)
    y = graph.adjacency()[iu, ju]
    neg = np.column_stack([iu, ju])[y == 0]
    return PairBatch(graph.edges, neg, 1.0)


def nll_sampled(state: ModelState, batch: PairBatch) -> float:
    """Unbiased estimate of :func:`nll_exact` from one pair batch."""
    X = embed_all(state)
    loss, _, _ = kernels.pair_objective(
        X, state.biases, batch.pos_pairs, batch.neg_pairs, batch.neg_weight, EPS
    )
    return loss


@dataclass
class Gradient:
    logits: np.ndarray
    biases: np.ndarray
    basis_params: np.ndarray | None = None
    loss: float = field(default=float("nan"))

    def as_dict(self) -> dict:
        g = {"logits": self.logits, "biases": self.biases}
        if self.basis_params is not None:
            g["basis_params"] = self.basis_params
        return g


def qr_backward(Q: np.ndarray, R: np.ndarray, dQ: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``A`` of a loss depending on ``Q`` in ``A = Q R`` (thin, m >= n).

    Uses ``dA = (dQ + Q copyltu(M)) R^{-T}`` with ``M = -dQ^T Q``, where
    ``copyltu`` mirrors the lower triangle onto the upper one.
    """
    M = -dQ.T @ Q
    sym = np.tril(M) + np.tril(M, -1).T
    rhs = dQ + Q @ sym
    # solve X R^T = rhs  <=>  R X^T = rhs^T
    return solve_triangular(R, rhs.T, lower=False).T


def grad(state: ModelState, batch: PairBatch) -> Gradient:
    """Analytic gradient of :func:`nll_sampled`."""
    if state.basis_mode == LEARNED_QR:
        Q, R = centered_qr(state.basis_params)
        V = Q
    else:
        V = helmert_basis(state.K).columns
    X = state.logits @ V
    loss, dX, dgamma = kernels.pair_objective(
        X, state.biases, batch.pos_pairs, batch.neg_pairs, batch.neg_weight, EPS
    )
    dlogits = dX @ V.T
    dW = None
    if state.basis_mode == LEARNED_QR:
        dV = state.logits.T @ dX
        dWc = qr_backward(Q, R, dV)
        dW = dWc - dWc.mean(axis=0, keepdims=True)
    return Gradient(dlogits, dgamma, dW, loss)


# -- checkpoints -------------------------------------------------------------


def state_to_dict(state: ModelState) -> dict:
    doc = {
        "version": CHECKPOINT_VERSION,
        "N": state.N,
        "K": state.K,
        "basis_mode": state.basis_mode,
        "logits": state.logits.ravel().tolist(),
        "biases": state.biases.tolist(),
        "seed": int(state.seed),
        "iterations": int(state.iterations),
    }
    if state.basis_params is not None:
        doc["basis_params"] = state.basis_params.ravel().tolist()
    return doc


def state_from_dict(doc: dict) -> ModelState:
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    N, K = int(doc["N"]), int(doc["K"])
    W = doc.get("basis_params")
    return ModelState(
        np.asarray(doc["logits"], dtype=float).reshape(N, K),
        np.asarray(doc["biases"], dtype=float),
        doc["basis_mode"],
        None if W is None else np.asarray(W, dtype=float).reshape(K, K - 1),
        seed=int(doc["seed"]),
        iterations=int(doc["iterations"]),
    )


def save_checkpoint(state: ModelState, path) -> None:
    # json writes floats with repr(), the shortest round-tripping decimal
    Path(path).write_text(json.dumps(state_to_dict(state)) + "\n", encoding="utf-8")


def load_checkpoint(path) -> ModelState:
    return state_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
