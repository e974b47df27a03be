r"""Aitchison geometry on the open simplex.

Compositions are plain ``ndarray`` objects: a single composition is a
1-D array of ``K`` positive proportions, a batch is an ``(n, K)`` array
with one composition per row. Every function below broadcasts over the
leading axis.

An ILR basis is a ``K x (K-1)`` matrix ``V`` with orthonormal columns
orthogonal to the all-ones vector. The ILR coordinates of ``z`` are
``V.T @ log(z)``; Euclidean distance between ILR coordinates is the
Aitchison distance, whatever valid basis is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadIndices,
    BadSubset,
    DimMismatch,
    KTooSmall,
    NonPositiveEntry,
    RankDeficient,
    TooShort,
)

HELMERT = "helmert"
LEARNED = "learned"
VARIMAX = "varimax"

BASIS_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass(frozen=True)
class IlrBasis:
    """Orthonormal basis of the contrast space.

    Attributes
    ----------
    columns : ndarray of shape (K, K-1)
        Basis vectors; ``columns[:, b]`` holds the loadings of balance ``b``.
    kind : str
        One of ``"helmert"``, ``"learned"``, ``"varimax"``.
    """

    columns: np.ndarray
    kind: str = HELMERT

    @property
    def K(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def check(self, tol: float = BASIS_TOL) -> None:
        """Raise ``ValueError`` if the invariants do not hold."""
        V = self.columns
        if V.ndim != 2 or V.shape[1] != V.shape[0] - 1:
            raise ValueError(f"basis must be K x (K-1), got {V.shape}")
        ortho = np.linalg.norm(V.T @ V - np.eye(V.shape[1]))
        contrast = np.max(np.abs(V.sum(axis=0)))
        if ortho >= tol or contrast >= tol:
            raise ValueError(
                f"invalid ILR basis: |V'V - I|_F={ortho:.3g}, |V'1|_inf={contrast:.3g}"
            )


@dataclass(frozen=True)
class SubcompProjection:
    """Linear map taking full ILR differences to subcomposition ILR differences."""

    keep_set: tuple
    matrix: np.ndarray


def closure(raw) -> np.ndarray:
    """Rescale positive vectors so that each row sums to one.

    Parameters
    ----------
    raw : array_like of shape (K,) or (n, K)
        Strictly positive entries.

    Returns
    -------
    ndarray
        Same shape as ``raw``, rows summing to one.

    Raises
    ------
    TooShort
        If there are fewer than two components.
    NonPositiveEntry
        If any entry is zero, negative or NaN.
    """
    mat = np.asarray(raw, dtype=float)
    if mat.ndim == 0 or mat.shape[-1] < 2:
        raise TooShort("a composition needs at least 2 components")
    if not np.all(mat > 0):
        raise NonPositiveEntry("compositions must lie in the open simplex")
    return mat / mat.sum(axis=-1, keepdims=True)


def helmert_basis(K: int) -> IlrBasis:
    """Normalised Helmert contrasts.

    Column ``b`` (0-based) contrasts the first ``b + 1`` components
    against component ``b + 1``.
    """
    if K < 2:
        raise KTooSmall(f"K must be >= 2, got {K}")
    V = np.zeros((K, K - 1))
    for b in range(1, K):
        V[:b, b - 1] = 1.0
        V[b, b - 1] = -float(b)
        V[:, b - 1] /= np.sqrt(b * (b + 1.0))
    return IlrBasis(V, HELMERT)


def learned_basis_from_params(W) -> IlrBasis:
    """Map an unconstrained ``K x (K-1)`` matrix to a valid ILR basis.

    The columns of ``W`` are centred, then orthonormalised with a QR
    factorisation whose ``R`` has a positive diagonal.
    """
    Q, _ = centered_qr(W)
    return IlrBasis(Q, LEARNED)


def centered_qr(W) -> tuple[np.ndarray, np.ndarray]:
    """Centre the columns of ``W`` and return the sign-fixed thin QR factors."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] < 2 or W.shape[1] != W.shape[0] - 1:
        raise DimMismatch(f"W must have shape K x (K-1), got {W.shape}")
    Wc = W - W.mean(axis=0, keepdims=True)
    Q, R = np.linalg.qr(Wc)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    if np.min(np.abs(np.diag(R))) < RANK_TOL:
        raise RankDeficient("centred parameter matrix has rank < K-1")
    return Q, R


def _columns(basis) -> np.ndarray:
    return basis.columns if isinstance(basis, IlrBasis) else np.asarray(basis, dtype=float)


def ilr(z, basis: IlrBasis) -> np.ndarray:
    """ILR coordinates ``V.T @ log(z)`` (row-wise for batches)."""
    V = _columns(basis)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != V.shape[0]:
        raise DimMismatch(f"composition has {z.shape[-1]} parts, basis expects {V.shape[0]}")
    if not np.all(z > 0):
        raise NonPositiveEntry("compositions must lie in the open simplex")
    return np.log(z) @ V


def ilr_inverse(x, basis: IlrBasis) -> np.ndarray:
    """Inverse ILR: ``closure(exp(V @ x))``."""
    V = _columns(basis)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != V.shape[1]:
        raise DimMismatch(f"point has {x.shape[-1]} coordinates, basis expects {V.shape[1]}")
    logits = x @ V.T
    # shifting by the row max is exact under closure and avoids overflow
    logits = logits - logits.max(axis=-1, keepdims=True)
    # flooring keeps far-out points in the open simplex despite underflow
    return closure(np.maximum(np.exp(logits), np.finfo(float).tiny))


def aitchison_distance(a, b, basis: IlrBasis) -> np.ndarray | float:
    """Euclidean distance between ILR coordinates of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimMismatch("compositions have different numbers of parts")
    d = np.linalg.norm(ilr(a, basis) - ilr(b, basis), axis=-1)
    return float(d) if d.ndim == 0 else d


def _check_subset(S, K: int) -> tuple:
    S = tuple(int(s) for s in S)
    if len(S) < 2:
        raise BadSubset("a subcomposition needs at least 2 components")
    if len(set(S)) != len(S) or min(S) < 0 or max(S) >= K:
        raise BadSubset(f"indices must be distinct and in [0, {K}): {S}")
    return S


def subcompose(z, S: Sequence[int]) -> np.ndarray:
    """Select the components in ``S`` (in that order) and re-close."""
    z = np.asarray(z, dtype=float)
    S = _check_subset(S, z.shape[-1])
    return closure(z[..., list(S)])


def subcomp_projection(basis: IlrBasis, S: Sequence[int], sub_basis: IlrBasis) -> SubcompProjection:
    """Projection ``V_S.T R_S V`` relating full and subcomposition ILR differences."""
    V = _columns(basis)
    S = _check_subset(S, V.shape[0])
    V_S = _columns(sub_basis)
    if V_S.shape[0] != len(S):
        raise DimMismatch(f"sub basis has {V_S.shape[0]} parts, subset has {len(S)}")
    return SubcompProjection(S, V_S.T @ V[list(S), :])


def varimax_criterion(L: np.ndarray) -> float:
    """Raw varimax objective: sum over columns of the variance of squared loadings."""
    L2 = L * L
    return float(np.sum(np.mean(L2 * L2, axis=0) - np.mean(L2, axis=0) ** 2))


def varimax_rotate(basis: IlrBasis, tol: float = 1e-8, max_sweeps: int = 1000) -> IlrBasis:
    """Varimax rotation of the balance loadings by pairwise planar rotations.

    Loadings are Kaiser-normalised (rows scaled to unit length) while the
    rotation angles are computed; the returned basis is ``V @ R`` for an
    orthogonal ``R`` and therefore still a valid ILR basis.
    """
    V = _columns(basis)
    K, m = V.shape
    if m < 2:
        return IlrBasis(V.copy(), VARIMAX)
    h = np.linalg.norm(V, axis=1)
    h = np.where(h > 0, h, 1.0)
    A = V / h[:, None]
    R = np.eye(m)
    B = A.copy()
    crit = varimax_criterion(B)
    for _ in range(max_sweeps):
        for i in range(m - 1):
            for j in range(i + 1, m):
                x, y = B[:, i], B[:, j]
                u = x * x - y * y
                v = 2.0 * x * y
                num = 2.0 * (K * np.dot(u, v) - u.sum() * v.sum())
                den = K * (np.dot(u, u) - np.dot(v, v)) - (u.sum() ** 2 - v.sum() ** 2)
                theta = 0.25 * np.arctan2(num, den)
                if theta == 0.0:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                rot = np.array([[c, -s], [s, c]])
                B[:, [i, j]] = B[:, [i, j]] @ rot
                R[:, [i, j]] = R[:, [i, j]] @ rot
        new = varimax_criterion(B)
        done = new - crit < tol
        crit = new
        if done:
            break
    return IlrBasis(V @ R, VARIMAX)


def tradeoff_trajectory(z, a: int, b: int, s_values) -> np.ndarray:
    """Paired log-ratio intervention raising component ``a`` against ``b``.

    Returns an ``(len(s_values), K)`` array; row ``t`` is the closure of
    ``z`` with ``z[a]`` scaled by ``exp(s_t)`` and ``z[b]`` by ``exp(-s_t)``.
    Rows with ``s == 0`` are returned as ``z`` itself.
    """
    z = closure(z)
    K = z.shape[-1]
    if z.ndim != 1:
        raise DimMismatch("trajectory expects a single composition")
    if a == b or not (0 <= a < K and 0 <= b < K):
        raise BadIndices(f"need distinct component indices in [0, {K}), got a={a}, b={b}")
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    logs = np.tile(np.log(z), (s.size, 1))
    logs[:, a] += s
    logs[:, b] -= s
    logs -= logs.max(axis=1, keepdims=True)
    path = closure(np.exp(logs))
    path[s == 0] = z
    return path


def softmax(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
