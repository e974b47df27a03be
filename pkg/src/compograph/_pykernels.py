"""Pure numpy versions of the pair kernels in ``_ckernels.pyx``."""

import numpy as np
from scipy.special import expit


def pair_log_odds(X, gamma, ii, jj, eps):
    diff = X[ii] - X[jj]
    dist = np.sqrt(np.einsum("pd,pd->p", diff, diff) + eps * eps)
    return gamma[ii] + gamma[jj] - dist


def pair_objective(X, gamma, ii, jj, n_pos, neg_weight, eps, dX, dgamma):
    N = X.shape[0]
    diff = X[ii] - X[jj]
    dist = np.sqrt(np.einsum("pd,pd->p", diff, diff) + eps * eps)
    eta = gamma[ii] + gamma[jj] - dist
    pos, neg = eta[:n_pos], eta[n_pos:]
    loss = np.sum(np.logaddexp(0.0, -pos)) + neg_weight * np.sum(np.logaddexp(0.0, neg))
    c = np.concatenate([expit(pos) - 1.0, neg_weight * expit(neg)])
    dgamma += np.bincount(ii, weights=c, minlength=N) + np.bincount(jj, weights=c, minlength=N)
    g = (-c / dist)[:, None] * diff
    for d in range(X.shape[1]):
        dX[:, d] += np.bincount(ii, weights=g[:, d], minlength=N)
        dX[:, d] -= np.bincount(jj, weights=g[:, d], minlength=N)
    return float(loss)


def non_edge_mask(indptr, indices, ci, cj):
    N = len(indptr) - 1
    rows = np.repeat(np.arange(N, dtype=np.int64), np.diff(indptr))
    keys = rows * N + indices  # sorted: CSR rows in order, neighbours sorted
    q = ci * N + cj
    pos = np.searchsorted(keys, q)
    pos[pos == len(keys)] = 0
    hit = keys[pos] == q if len(keys) else np.zeros(len(q), bool)
    return (~hit & (ci != cj)).astype(np.uint8)
