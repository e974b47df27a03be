"""Backend selection for the pair kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``COMPOGRAPH_PURE_PYTHON=1`` forces the fallback.
Results of the two backends agree to rounding, not bit for bit, so
determinism guarantees hold per backend.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("COMPOGRAPH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _prep(X, gamma, pairs):
    X = np.ascontiguousarray(X, dtype=np.float64)
    gamma = np.ascontiguousarray(gamma, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    ii = np.ascontiguousarray(pairs[:, 0])
    jj = np.ascontiguousarray(pairs[:, 1])
    return X, gamma, ii, jj


def pair_log_odds(X, gamma, pairs, eps, backend=None):
    X, gamma, ii, jj = _prep(X, gamma, pairs)
    return get_backend(backend).pair_log_odds(X, gamma, ii, jj, float(eps))


def pair_objective(X, gamma, pos_pairs, neg_pairs, neg_weight, eps, backend=None):
    """Loss and gradients w.r.t. ``X`` and ``gamma`` for one pair batch."""
    pairs = np.vstack(
        [np.asarray(pos_pairs, np.int64).reshape(-1, 2), np.asarray(neg_pairs, np.int64).reshape(-1, 2)]
    )
    X, gamma, ii, jj = _prep(X, gamma, pairs)
    dX = np.zeros_like(X)
    dgamma = np.zeros_like(gamma)
    n_pos = len(np.asarray(pos_pairs).reshape(-1, 2))
    loss = get_backend(backend).pair_objective(
        X, gamma, ii, jj, n_pos, float(neg_weight), float(eps), dX, dgamma
    )
    return float(loss), dX, dgamma


def csr_neighbours(num_nodes, edges):
    """Symmetric CSR adjacency with sorted neighbour lists."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.lexsort((dst, src))
    indices = np.ascontiguousarray(dst[order])
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
    return indptr, indices


def non_edge_mask(indptr, indices, ci, cj, backend=None):
    ci = np.ascontiguousarray(ci, dtype=np.int64)
    cj = np.ascontiguousarray(cj, dtype=np.int64)
    return get_backend(backend).non_edge_mask(indptr, indices, ci, cj).view(bool)
