# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair kernels for the latent-distance objective.

Signatures mirror :mod:`compograph._pykernels`; both are selected through
:mod:`compograph.kernels`.
"""

import numpy as np

from libc.math cimport exp, fabs, fmax, log1p, sqrt


def pair_log_odds(const double[:, ::1] X, const double[::1] gamma,
                  const long long[::1] ii, const long long[::1] jj, double eps):
    cdef Py_ssize_t P = ii.shape[0], D = X.shape[1], p, d, i, j
    cdef double s, t
    out = np.empty(P, dtype=np.float64)
    cdef double[::1] eta = out
    with nogil:
        for p in range(P):
            i = ii[p]
            j = jj[p]
            s = eps * eps
            for d in range(D):
                t = X[i, d] - X[j, d]
                s += t * t
            eta[p] = gamma[i] + gamma[j] - sqrt(s)
    return out


def pair_objective(const double[:, ::1] X, const double[::1] gamma,
                   const long long[::1] ii, const long long[::1] jj,
                   Py_ssize_t n_pos, double neg_weight, double eps,
                   double[:, ::1] dX, double[::1] dgamma):
    """Sampled negative log-likelihood; accumulates its gradient into dX, dgamma.

    The first ``n_pos`` pairs are edges, the rest weighted non-edge samples.
    """
    cdef Py_ssize_t P = ii.shape[0], D = X.shape[1], p, d, i, j
    cdef double s, t, dist, eta, e, sp, sig, c, g, pos_loss = 0.0, neg_loss = 0.0
    with nogil:
        for p in range(P):
            i = ii[p]
            j = jj[p]
            s = eps * eps
            for d in range(D):
                t = X[i, d] - X[j, d]
                s += t * t
            dist = sqrt(s)
            eta = gamma[i] + gamma[j] - dist
            # softplus(eta) and sigmoid(eta) from a single exp(-|eta|)
            e = exp(-fabs(eta))
            sp = fmax(eta, 0.0) + log1p(e)
            sig = (1.0 if eta >= 0 else e) / (1.0 + e)
            if p < n_pos:
                pos_loss += sp - eta
                c = sig - 1.0
            else:
                neg_loss += sp
                c = neg_weight * sig
            dgamma[i] += c
            dgamma[j] += c
            g = -c / dist
            for d in range(D):
                t = g * (X[i, d] - X[j, d])
                dX[i, d] += t
                dX[j, d] -= t
    return pos_loss + neg_weight * neg_loss


def non_edge_mask(const long long[::1] indptr, const long long[::1] indices,
                  const long long[::1] ci, const long long[::1] cj):
    """1 where ``(ci[p], cj[p])`` is a non-edge; neighbour lists must be sorted."""
    cdef Py_ssize_t P = ci.shape[0], p
    cdef long long i, j, base, n, half
    out = np.ones(P, dtype=np.uint8)
    cdef unsigned char[::1] mask = out
    with nogil:
        for p in range(P):
            i = ci[p]
            j = cj[p]
            base = indptr[i]
            n = indptr[i + 1] - base
            # branchless lower search: base ends on the last entry <= j
            while n > 1:
                half = n >> 1
                base = base + half if indices[base + half] <= j else base
                n -= half
            if i == j or (n == 1 and indices[base] == j):
                mask[p] = 0
    return out
