"""Reference numpy implementations of the sparse backup kernels.

All kernels operate on a flat CSR-like layout of a sparse MDP:

- ``act_ptr`` (n_states + 1): state s owns state-action rows
  ``act_ptr[s]:act_ptr[s+1]``.  Terminal states own no rows.
- ``sa_tptr`` (n_sa + 1): state-action row a owns transition entries
  ``sa_tptr[a]:sa_tptr[a+1]`` of ``t_cols`` / ``t_probs``.  Every row has
  at least one entry.
- ``upd``: ascending array of exactly the states that own rows.  Because
  terminal states own none, the rows between ``act_ptr[upd[k]]`` and
  ``act_ptr[upd[k+1]]`` all belong to ``upd[k]``, which is what makes
  the reduceat segmentation below correct.

The compiled backend mirrors these functions operation for operation.
Results can differ in the last ulps because numpy's segment reductions
may sum pairwise inside long segments; each backend on its own is fully
deterministic, and ties in ``greedy_sa`` break identically (first max).
"""

from __future__ import annotations

import numpy as np


def sa_values(values, sa_tptr, t_cols, t_probs):
    """Expected next value of every state-action row."""
    n_sa = len(sa_tptr) - 1
    if n_sa == 0:
        return np.zeros(0)
    contrib = t_probs * values[t_cols]
    return np.add.reduceat(contrib, sa_tptr[:-1])


def vi_sweep(values, out, act_ptr, upd, sa_tptr, t_cols, t_probs):
    """One Jacobi Bellman-max sweep.

    Reads ``values``, writes each update state's best action value into
    ``out`` and returns the sup-norm change over the update states.
    Entries of ``out`` outside ``upd`` are left untouched.
    """
    if len(upd) == 0:
        return 0.0
    qa = sa_values(values, sa_tptr, t_cols, t_probs)
    best = np.maximum.reduceat(qa, act_ptr[upd])
    delta = float(np.abs(best - values[upd]).max())
    out[upd] = best
    return delta


def greedy_sa(values, act_ptr, upd, sa_tptr, t_cols, t_probs):
    """First-maximizing state-action row for each update state.

    Ties are broken toward the lowest row index, which corresponds to the
    lowest action index in the canonical per-state action order.
    """
    n_upd = len(upd)
    if n_upd == 0:
        return np.zeros(0, dtype=np.int64)
    qa = sa_values(values, sa_tptr, t_cols, t_probs)
    n_sa = len(qa)
    starts = act_ptr[upd]
    bounds = np.append(starts, n_sa)
    best = np.maximum.reduceat(qa, starts)
    seg_best = np.repeat(best, np.diff(bounds))
    row_idx = np.arange(n_sa, dtype=np.int64)
    cand = np.where(qa >= seg_best, row_idx, n_sa)
    return np.minimum.reduceat(cand, starts)


def policy_sweep(values, out, act_ptr, upd, sa_weights, sa_tptr, t_cols, t_probs):
    """One Jacobi sweep of policy-weighted backups.

    ``sa_weights`` holds the policy probability of each state-action row
    (rows of one state summing to 1).  Same output contract as
    ``vi_sweep``.
    """
    if len(upd) == 0:
        return 0.0
    qa = sa_values(values, sa_tptr, t_cols, t_probs)
    mixed = np.add.reduceat(sa_weights * qa, act_ptr[upd])
    delta = float(np.abs(mixed - values[upd]).max())
    out[upd] = mixed
    return delta
