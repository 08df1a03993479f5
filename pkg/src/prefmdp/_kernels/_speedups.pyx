# cython: language_level=3
"""Compiled sparse backup kernels.

Mirrors the numpy reference implementations in ``_numpy.py`` exactly,
including summation order and first-max tie-breaking, so both backends
produce bit-identical results.  See ``_numpy.py`` for the layout.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


def vi_sweep(f64[::1] values, f64[::1] out,
             i64[::1] act_ptr, i64[::1] upd,
             i64[::1] sa_tptr, i64[::1] t_cols, f64[::1] t_probs):
    """One Jacobi Bellman-max sweep; returns the sup-norm change."""
    cdef Py_ssize_t k, s, a, t, a0, a1, t0, t1
    cdef Py_ssize_t n_upd = upd.shape[0]
    cdef double best, q, d
    cdef double delta = 0.0
    with nogil:
        for k in range(n_upd):
            s = upd[k]
            a0 = act_ptr[s]
            a1 = act_ptr[s + 1]
            best = -1e308
            for a in range(a0, a1):
                t0 = sa_tptr[a]
                t1 = sa_tptr[a + 1]
                q = 0.0
                for t in range(t0, t1):
                    q = q + t_probs[t] * values[t_cols[t]]
                if q > best:
                    best = q
            d = best - values[s]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            out[s] = best
    return delta


def greedy_sa(f64[::1] values,
              i64[::1] act_ptr, i64[::1] upd,
              i64[::1] sa_tptr, i64[::1] t_cols, f64[::1] t_probs):
    """First-maximizing state-action row per update state (lowest index wins)."""
    cdef Py_ssize_t k, s, a, t, a0, a1, t0, t1
    cdef Py_ssize_t n_upd = upd.shape[0]
    cdef double best, q
    cdef Py_ssize_t best_a
    choice_arr = np.empty(n_upd, dtype=np.int64)
    cdef i64[::1] choice = choice_arr
    with nogil:
        for k in range(n_upd):
            s = upd[k]
            a0 = act_ptr[s]
            a1 = act_ptr[s + 1]
            best = -1e308
            best_a = a0
            for a in range(a0, a1):
                t0 = sa_tptr[a]
                t1 = sa_tptr[a + 1]
                q = 0.0
                for t in range(t0, t1):
                    q = q + t_probs[t] * values[t_cols[t]]
                if q > best:
                    best = q
                    best_a = a
            choice[k] = best_a
    return choice_arr


def policy_sweep(f64[::1] values, f64[::1] out,
                 i64[::1] act_ptr, i64[::1] upd, f64[::1] sa_weights,
                 i64[::1] sa_tptr, i64[::1] t_cols, f64[::1] t_probs):
    """One Jacobi sweep of policy-weighted backups; returns sup-norm change."""
    cdef Py_ssize_t k, s, a, t, a0, a1, t0, t1
    cdef Py_ssize_t n_upd = upd.shape[0]
    cdef double q, v, d
    cdef double delta = 0.0
    with nogil:
        for k in range(n_upd):
            s = upd[k]
            a0 = act_ptr[s]
            a1 = act_ptr[s + 1]
            v = 0.0
            for a in range(a0, a1):
                t0 = sa_tptr[a]
                t1 = sa_tptr[a + 1]
                q = 0.0
                for t in range(t0, t1):
                    q = q + t_probs[t] * values[t_cols[t]]
                v = v + sa_weights[a] * q
            d = v - values[s]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            out[s] = v
    return delta
