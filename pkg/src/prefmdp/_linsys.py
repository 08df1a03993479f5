"""Shared sparse indexing and absorbing-chain linear solvers.

Both the base MDP and the product MDP compile into the same flat
CSR-like layout (see ``_kernels._numpy`` for the array contract), and
both evaluate policies by solving ``(I - Q) X = B`` where Q is the
induced chain restricted to non-absorbing states.  Systems below
``DIRECT_SOLVE_LIMIT`` states go through a sparse LU factorization with
iterative refinement; larger ones fall back to damped Jacobi sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

DIRECT_SOLVE_LIMIT = 50_000
DIRECT_RESIDUAL = 1e-12
SWEEP_RESIDUAL = 1e-10
MAX_SWEEPS = 1_000_000


class SolverError(RuntimeError):
    """Raised when a linear solve cannot reach the target residual."""


@dataclass(frozen=True)
class SparseMdp:
    """Flat array view of a sparse MDP.

    ``act_ptr[s]:act_ptr[s+1]`` are state s's state-action rows;
    ``sa_tptr[r]:sa_tptr[r+1]`` are row r's transition entries.
    ``has_actions`` lists, ascending, exactly the states owning rows.
    """

    n_states: int
    act_ptr: np.ndarray
    sa_state: np.ndarray
    sa_action: np.ndarray
    sa_tptr: np.ndarray
    t_cols: np.ndarray
    t_probs: np.ndarray
    has_actions: np.ndarray

    @property
    def n_sa(self) -> int:
        return len(self.sa_state)

    @property
    def n_transitions(self) -> int:
        return len(self.t_cols)

    def actions_of(self, state: int) -> range:
        return range(self.act_ptr[state], self.act_ptr[state + 1])


def build_sparse(
    n_states: int,
    rows: Sequence[tuple[int, int, Sequence[tuple[int, float]]]],
) -> SparseMdp:
    """Assemble the flat layout from (state, action, [(col, prob), ...]) rows.

    Rows must be grouped by state in ascending state order, actions in
    canonical per-state order.
    """
    act_ptr = np.zeros(n_states + 1, dtype=np.int64)
    sa_state = np.empty(len(rows), dtype=np.int64)
    sa_action = np.empty(len(rows), dtype=np.int64)
    sa_tptr = np.zeros(len(rows) + 1, dtype=np.int64)
    cols: list[int] = []
    probs: list[float] = []
    prev_state = -1
    for r, (s, a, entries) in enumerate(rows):
        if s < prev_state:
            raise ValueError("rows must be grouped by ascending state")
        prev_state = s
        sa_state[r] = s
        sa_action[r] = a
        act_ptr[s + 1] += 1
        sa_tptr[r + 1] = sa_tptr[r] + len(entries)
        for c, p in entries:
            cols.append(c)
            probs.append(p)
    act_ptr = np.cumsum(act_ptr, dtype=np.int64)
    has_actions = np.flatnonzero(np.diff(act_ptr) > 0).astype(np.int64)
    return SparseMdp(
        n_states=n_states,
        act_ptr=act_ptr,
        sa_state=sa_state,
        sa_action=sa_action,
        sa_tptr=sa_tptr,
        t_cols=np.asarray(cols, dtype=np.int64),
        t_probs=np.asarray(probs, dtype=np.float64),
        has_actions=has_actions,
    )


def policy_row_weights(
    sparse: SparseMdp,
    action_index: Mapping[Hashable, int],
    state_of: Sequence[Hashable],
    choice: Mapping[Hashable, Mapping[Hashable, float]],
    eps: float = 1e-9,
) -> np.ndarray:
    """Per state-action row policy weight, renormalized exactly to 1.

    ``state_of`` maps internal indices back to external state names and
    ``choice`` maps external names to action distributions.  Raises
    ``ValueError`` naming the state for missing states, unsupported
    actions, negative weights or mass away from 1.
    """
    weights = np.zeros(sparse.n_sa, dtype=np.float64)
    for s in sparse.has_actions:
        name = state_of[s]
        if name not in choice:
            raise ValueError(f"policy does not cover state {name!r}")
        dist = choice[name]
        offered = {
            int(sparse.sa_action[r]): r for r in sparse.actions_of(s)
        }
        mass = 0.0
        for a, w in dist.items():
            ai = action_index.get(a)
            if ai is None or ai not in offered:
                raise ValueError(f"policy uses action {a!r} unavailable at {name!r}")
            if w < -eps:
                raise ValueError(f"negative policy weight at {name!r}")
            weights[offered[ai]] = max(float(w), 0.0)
            mass += max(float(w), 0.0)
        if abs(mass - 1.0) > eps:
            raise ValueError(f"policy weights at {name!r} sum to {mass!r}, not 1")
        for r in offered.values():
            weights[r] /= mass
    return weights


def chain_matrix(sparse: SparseMdp, row_weights: np.ndarray) -> sp.csr_matrix:
    """Induced chain transition matrix (rows of action-less states empty)."""
    per_row = np.diff(sparse.sa_tptr)
    rows = np.repeat(sparse.sa_state, per_row)
    data = sparse.t_probs * np.repeat(row_weights, per_row)
    mat = sp.coo_matrix(
        (data, (rows, sparse.t_cols)),
        shape=(sparse.n_states, sparse.n_states),
    ).tocsr()
    mat.eliminate_zeros()
    return mat


def reachable_mask(chain: sp.csr_matrix, start: int) -> np.ndarray:
    """States reachable from ``start`` along positive-probability edges."""
    from scipy.sparse.csgraph import breadth_first_order

    order = breadth_first_order(
        chain, start, directed=True, return_predecessors=False
    )
    mask = np.zeros(chain.shape[0], dtype=bool)
    mask[order] = True
    return mask


def trapped_states(
    sparse: SparseMdp,
    absorbing: np.ndarray,
    row_mask: np.ndarray | None = None,
) -> np.ndarray:
    """States from which termination can be avoided forever.

    Greatest fixpoint of: keep a state while some (unmasked) action's
    whole support stays in the kept set.  ``absorbing`` marks states
    that can never be kept; ``row_mask`` restricts to a policy's
    supported state-action rows.
    """
    n = sparse.n_states
    kept = ~np.asarray(absorbing, dtype=bool)
    kept &= np.diff(sparse.act_ptr) > 0
    if sparse.n_sa == 0:
        return np.zeros(n, dtype=bool)
    while True:
        ok_t = kept[sparse.t_cols].astype(np.int8)
        sa_ok = np.minimum.reduceat(ok_t, sparse.sa_tptr[:-1]).astype(bool)
        if row_mask is not None:
            sa_ok &= row_mask
        state_any = np.zeros(n, dtype=bool)
        state_any[sparse.has_actions] = np.maximum.reduceat(
            sa_ok.astype(np.int8), sparse.act_ptr[sparse.has_actions]
        ).astype(bool)
        new_kept = kept & state_any
        if np.array_equal(new_kept, kept):
            return kept
        kept = new_kept


def solve_absorbing(
    q_matrix: sp.spmatrix,
    rhs: np.ndarray,
    method: str = "auto",
    omega: float = 1.0,
) -> np.ndarray:
    """Solve (I - Q) X = B for an absorbing chain's interior block.

    ``method`` is "auto" (direct below DIRECT_SOLVE_LIMIT states, sweeps
    above), "direct" or "sweep".  Direct solves run iterative refinement
    until the residual drops below ``DIRECT_RESIDUAL``; sweeps iterate
    damped Jacobi updates (full steps by default; the iteration matrix
    of a proper policy is substochastic, so plain sweeps converge) to
    ``SWEEP_RESIDUAL``.
    """
    m = q_matrix.shape[0]
    rhs = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    if m == 0:
        out = np.zeros_like(rhs)
        return out[:, 0] if squeeze else out
    if method == "auto":
        method = "direct" if m < DIRECT_SOLVE_LIMIT else "sweep"
    if method == "direct":
        system = (sp.identity(m, format="csc") - q_matrix.tocsc()).tocsc()
        lu = splu(system)
        sol = lu.solve(rhs)
        for _ in range(5):
            residual = rhs - system @ sol
            worst = float(np.abs(residual).max()) if residual.size else 0.0
            if worst <= DIRECT_RESIDUAL:
                break
            sol = sol + lu.solve(residual)
        else:
            raise SolverError(
                f"direct solve stalled at residual {worst:g} "
                f"(target {DIRECT_RESIDUAL:g})"
            )
        return sol[:, 0] if squeeze else sol
    if method != "sweep":
        raise ValueError(f"unknown solve method {method!r}")
    q_csr = q_matrix.tocsr()
    sol = np.zeros_like(rhs)
    for _ in range(MAX_SWEEPS):
        residual = rhs + q_csr @ sol - sol
        worst = float(np.abs(residual).max()) if residual.size else 0.0
        if worst <= SWEEP_RESIDUAL:
            return sol[:, 0] if squeeze else sol
        sol = sol + omega * residual
    raise SolverError(
        f"sweep solve did not reach residual {SWEEP_RESIDUAL:g} "
        f"within {MAX_SWEEPS} iterations"
    )
