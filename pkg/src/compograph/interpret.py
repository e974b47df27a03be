"""Interpretability exports: balance loadings, PCA views and trade-off paths."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compgeo import IlrBasis, ilr, tradeoff_trajectory, varimax_rotate
from .errors import DegenerateDataWarning, DimMismatch, UnknownNode
from .graphio import LabelTable
from .model import ModelState, embed_all


@dataclass(frozen=True)
class BalanceLoadings:
    """Loadings ``columns[:, b]`` of every balance ``b`` on the K components."""

    basis_kind: str
    columns: np.ndarray

    @property
    def basis(self) -> IlrBasis:
        return IlrBasis(self.columns, self.basis_kind)


def export_loadings(state: ModelState, rotate_varimax: bool = False) -> BalanceLoadings:
    basis = state.basis()
    if rotate_varimax:
        basis = varimax_rotate(basis)
    return BalanceLoadings(basis.kind, basis.columns.copy())


def jacobi_eigh(A, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors
    as columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimMismatch("jacobi_eigh needs a square matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # A <- J^T A J for the rotation in the (p, q) plane
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class Pca2d:
    mean: np.ndarray
    components: np.ndarray  # (d, 2)
    explained: tuple

    def transform(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.mean) @ self.components


def fit_pca_2d(points) -> Pca2d:
    """Top two principal axes of ``points``, each signed so its largest loading is positive.

    If the covariance has rank below two, the missing axes are zeroed and a
    :class:`DegenerateDataWarning` is issued.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] < 3 or P.shape[1] < 2:
        raise DimMismatch(f"PCA needs at least 3 points in >= 2 dimensions, got {P.shape}")
    mean = P.mean(axis=0)
    C = (P - mean).T @ (P - mean) / (P.shape[0] - 1)
    w, V = jacobi_eigh(C)
    w = np.maximum(w, 0.0)
    total = w.sum()
    comps = V[:, :2].copy()
    for k in range(2):
        col = comps[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            comps[:, k] = -col
    rank = int(np.sum(w > 1e-12 * max(total, np.finfo(float).tiny))) if total > 0 else 0
    if rank < 2:
        warnings.warn(f"covariance has rank {rank} < 2; padding PCA with zeros", DegenerateDataWarning, stacklevel=2)
        comps[:, rank:] = 0.0
    explained = tuple(float(w[k] / total) if total > 0 else 0.0 for k in range(2))
    return Pca2d(mean, comps, explained)


def pca_2d(points) -> tuple[np.ndarray, tuple]:
    """Project onto the top two principal axes; returns ``(N x 2, explained fractions)``."""
    pca = fit_pca_2d(points)
    return pca.transform(points), pca.explained


@dataclass(frozen=True)
class TrajectoryPath:
    node: int
    pair: tuple
    s: np.ndarray
    compositions: np.ndarray
    ilr_coords: np.ndarray
    pca_coords: np.ndarray


def export_trajectory(state: ModelState, node: int, a: int, b: int, s_grid) -> TrajectoryPath:
    """Trade ``a`` against ``b`` at one node and map the path into ILR and PCA space."""
    if not 0 <= node < state.N:
        raise UnknownNode(f"node {node} out of range [0, {state.N})")
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    basis = state.basis()
    z = state.compositions()[node]
    path = tradeoff_trajectory(z, a, b, s)
    X = embed_all(state)
    coords = ilr(path, basis)
    # the s = 0 row is the node itself, free of log/exp rounding
    path[s == 0] = z
    coords[s == 0] = X[node]
    pca = fit_pca_2d(X)
    return TrajectoryPath(node, (a, b), s, path, coords, pca.transform(coords))


# -- CSV writers ---------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def write_loadings_csv(path, loadings: BalanceLoadings) -> None:
    V = loadings.columns
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["component"] + [f"balance{b}" for b in range(V.shape[1])])
        for k, row in enumerate(V):
            w.writerow([k] + [_fmt(v) for v in row])


def write_trajectory_csv(path, traj: TrajectoryPath) -> None:
    K = traj.compositions.shape[1]
    D = traj.ilr_coords.shape[1]
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s"] + [f"z{k}" for k in range(K)] + [f"ilr{d}" for d in range(D)] + ["pc1", "pc2"])
        for t in range(len(traj.s)):
            w.writerow(
                [_fmt(traj.s[t])]
                + [_fmt(v) for v in traj.compositions[t]]
                + [_fmt(v) for v in traj.ilr_coords[t]]
                + [_fmt(v) for v in traj.pca_coords[t]]
            )


def write_embedding_csv(path, X, node_names=()) -> None:
    X = np.asarray(X, dtype=float)
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{d}" for d in range(X.shape[1])])
        for i, row in enumerate(X):
            w.writerow([node_names[i] if node_names else i] + [_fmt(v) for v in row])


def write_coordinate_table_csv(path, coords, labels: LabelTable, node_names=()) -> None:
    """``(node, label, coordinate values...)`` rows for every labelled node."""
    coords = np.asarray(coords, dtype=float)
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "label"] + [f"balance{b}" for b in range(coords.shape[1])])
        for i, c in zip(labels.nodes.tolist(), labels.labels.tolist()):
            name = node_names[i] if node_names else i
            label = labels.class_names[c] if labels.class_names else c
            w.writerow([name, label] + [_fmt(v) for v in coords[i]])
