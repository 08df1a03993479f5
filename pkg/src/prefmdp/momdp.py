"""Multi-objective reachability over the product and scalarized solving.

Each preference class W_i yields the objective "reach Z_i", where Z_i
unions the classes weakly preferred to i.  A policy's value vector
collects those reachability probabilities from the initial state; its
outcome distribution collects the absorption probabilities into the
individual classes.  The two are tied by the identity value = R ·
outcomes, with R the class reachability matrix, which every solution
carries as a consistency gap.

Scalarized solves run value iteration on w-weighted seeds, recover the
greedy policy deterministically (ties break to the lowest action index)
and re-evaluate it exactly, so reported vectors come from the linear
solver rather than the VI fixed point.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels, _linsys
from ._linsys import SolverError
from .mdp import ImproperPolicyError, MemorylessPolicy
from .order import Dominance
from .product import ProductMdp, class_upper_closures

__all__ = [
    "Momdp",
    "MomdpError",
    "MomdpSolution",
    "SolverError",
    "WeightVector",
    "evaluate_policy",
    "pareto_dominates",
    "pareto_front",
    "sample_weights",
    "solve_scalarized",
]

DEFAULT_EPS = 1e-9
VI_TOL = 1e-10
VI_MAX_ITERS = 1_000_000


class MomdpError(ValueError):
    """Raised for invalid weights, dimensions or dominated front members."""


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights summing to one, one per objective."""

    components: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) == 0:
            raise MomdpError("empty weight vector")
        if any(w < 0 for w in self.components):
            raise MomdpError(f"negative weight in {self.components}")
        total = sum(self.components)
        if abs(total - 1.0) > DEFAULT_EPS:
            raise MomdpError(f"weights sum to {total!r}, not 1")

    @classmethod
    def of(cls, values: Iterable[float]) -> "WeightVector":
        return cls(tuple(float(v) for v in values))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.components, dtype=np.float64)

    @property
    def strictly_positive(self) -> bool:
        return all(w > 0 for w in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)


@dataclass(eq=False)
class MomdpSolution:
    """One evaluated policy: value vector, outcome distribution, provenance.

    ``identity_gap`` is the sup-norm gap of value = R · outcome_probs;
    ``merged_weights`` records weights whose solves produced the same
    value vector when a Pareto front was deduplicated.
    """

    policy: MemorylessPolicy
    value: np.ndarray
    outcome_probs: np.ndarray
    identity_gap: float
    weight: WeightVector | None = None
    merged_weights: tuple[WeightVector, ...] = ()
    iterations: int | None = None


class Momdp:
    """The product MDP viewed through its reachability objectives."""

    def __init__(self, product: ProductMdp):
        self.product = product
        self.closure = class_upper_closures(product)
        self.objectives: tuple[frozenset[int], ...] = self.closure.states
        # reach_matrix[i, j] = 1 iff class j is weakly preferred to class i
        self.reach_matrix = product.class_reach.astype(np.float64)
        n = product.n_states
        big_n = product.n_classes
        self.terminal_states = np.flatnonzero(product.terminal_class >= 0)
        # seed_matrix[x, i] = 1 iff x is terminal and belongs to Z_i
        self.seed_matrix = np.zeros((n, big_n))
        for x in self.terminal_states:
            self.seed_matrix[x] = self.reach_matrix[:, product.terminal_class[x]]
        # onehot_matrix[x, i] = 1 iff x is terminal in class i exactly
        self.onehot_matrix = np.zeros((n, big_n))
        for x in self.terminal_states:
            self.onehot_matrix[x, product.terminal_class[x]] = 1.0

    @property
    def n_objectives(self) -> int:
        return self.product.n_classes

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.product.class_names

    def check_weight(self, weight: WeightVector | Iterable[float]) -> WeightVector:
        w = weight if isinstance(weight, WeightVector) else WeightVector.of(weight)
        if len(w) != self.n_objectives:
            raise MomdpError(
                f"weight vector has {len(w)} components, "
                f"expected {self.n_objectives}"
            )
        return w


def evaluate_policy(
    momdp: Momdp, policy: MemorylessPolicy, method: str = "auto"
) -> MomdpSolution:
    """Exact value vector and outcome distribution of a proper policy.

    Terminal states seed each objective i with 1 iff they lie in Z_i;
    interior values solve the policy's linear recurrence.  Outcome
    probabilities solve the same system against per-class one-hot seeds,
    so the value = R · outcomes identity is a genuine cross-check of two
    solves, not a restatement.
    """
    p = momdp.product
    sp = p.sparse
    big_n = momdp.n_objectives
    terminal_mask = p.terminal_class >= 0
    if terminal_mask[p.initial]:
        value = momdp.seed_matrix[p.initial].copy()
        outcome = momdp.onehot_matrix[p.initial].copy()
        gap = float(np.abs(value - momdp.reach_matrix @ outcome).max())
        return MomdpSolution(
            policy=policy, value=value, outcome_probs=outcome, identity_gap=gap
        )
    row_weights = p.policy_row_weights(policy)
    chain = _linsys.chain_matrix(sp, row_weights)
    reach = _linsys.reachable_mask(chain, p.initial)
    trapped = _linsys.trapped_states(sp, terminal_mask, row_mask=row_weights > 0)
    trapped &= reach
    if trapped.any():
        component = [p.states[i] for i in np.flatnonzero(trapped)]
        raise ImproperPolicyError(
            f"policy can avoid termination forever inside {component!r}"
        )
    interior = np.flatnonzero(reach & ~terminal_mask).astype(np.int64)
    pos0 = int(np.searchsorted(interior, p.initial))
    terminal_idx = np.flatnonzero(terminal_mask & reach).astype(np.int64)
    into_terminal = chain[interior][:, terminal_idx]
    seeds = np.hstack(
        [momdp.seed_matrix[terminal_idx], momdp.onehot_matrix[terminal_idx]]
    )
    rhs = into_terminal @ seeds
    q_block = chain[interior][:, interior]
    sol = _linsys.solve_absorbing(q_block, rhs, method=method)
    value = sol[pos0, :big_n].copy()
    outcome = sol[pos0, big_n:].copy()
    gap = float(np.abs(value - momdp.reach_matrix @ outcome).max())
    return MomdpSolution(
        policy=policy, value=value, outcome_probs=outcome, identity_gap=gap
    )


def solve_scalarized(
    momdp: Momdp,
    weight: WeightVector | Iterable[float],
    tol: float = VI_TOL,
    max_iters: int = VI_MAX_ITERS,
) -> MomdpSolution:
    """Best policy for one weight vector by scalarized value iteration.

    Terminal states are seeded with the w-weighted sum of the objectives
    containing them; iterates grow monotonically from zero elsewhere.
    The greedy policy at convergence is evaluated exactly and returned
    with the weight and the iteration count attached.
    """
    w = momdp.check_weight(weight)
    if not w.strictly_positive:
        warnings.warn(
            "weight vector has zero components; scalarization then "
            "guarantees only weak Pareto optimality",
            UserWarning,
            stacklevel=2,
        )
    p = momdp.product
    sp = p.sparse
    values = momdp.seed_matrix @ w.array  # zero on non-terminal states
    buffer = values.copy()
    upd = sp.has_actions
    iterations = 0
    delta = 0.0
    for iterations in range(1, max_iters + 1):
        delta = _kernels.vi_sweep(
            values, buffer, sp.act_ptr, upd, sp.sa_tptr, sp.t_cols, sp.t_probs
        )
        values, buffer = buffer, values
        if delta < tol:
            break
    else:
        raise SolverError(
            f"value iteration did not converge within {max_iters} sweeps "
            f"(last sup-norm change {delta:g}); the model admits improper "
            "policies"
        )
    rows = _kernels.greedy_sa(
        values, sp.act_ptr, upd, sp.sa_tptr, sp.t_cols, sp.t_probs
    )
    choice = {
        p.states[int(s)]: p.action_names[int(sp.sa_action[int(r)])]
        for s, r in zip(upd, rows)
    }
    solution = evaluate_policy(momdp, MemorylessPolicy.deterministic(choice))
    solution.weight = w
    solution.iterations = iterations
    return solution


def pareto_dominates(
    v1: np.ndarray | Sequence[float],
    v2: np.ndarray | Sequence[float],
    eps: float = DEFAULT_EPS,
) -> Dominance:
    """Componentwise dominance verdict between two value vectors."""
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.shape != b.shape:
        raise MomdpError(f"dimension mismatch: {a.shape} vs {b.shape}")
    ge = bool(np.all(a >= b - eps))
    le = bool(np.all(b >= a - eps))
    gt = bool(np.any(a > b + eps))
    lt = bool(np.any(b > a + eps))
    if ge and gt and not lt:
        return Dominance.DOMINATES
    if le and lt and not gt:
        return Dominance.DOMINATED
    return Dominance.INCOMPARABLE_OR_EQUAL


def sample_weights(
    n: int,
    n_objectives: int,
    seed: int | np.random.Generator | None = None,
    scheme: str = "dirichlet",
) -> list[WeightVector]:
    """Deterministic-under-seed weight vectors on the simplex.

    "dirichlet" draws uniformly from the simplex (flat Dirichlet), which
    is strictly positive almost surely; "uniform" returns the constant
    center 1/N (degenerate but handy as a reference point).
    """
    if n < 1:
        raise MomdpError("need at least one weight vector")
    if scheme == "uniform":
        return [WeightVector.of([1.0 / n_objectives] * n_objectives)] * n
    if scheme != "dirichlet":
        raise MomdpError(f"unknown weight scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet(np.ones(n_objectives), size=n)
    draws /= draws.sum(axis=1, keepdims=True)
    return [WeightVector.of(row) for row in draws]


def pareto_front(
    momdp: Momdp,
    weights: Sequence[WeightVector | Iterable[float]],
    tol: float = VI_TOL,
    max_iters: int = VI_MAX_ITERS,
    eps: float = DEFAULT_EPS,
    workers: int | None = None,
) -> list[MomdpSolution]:
    """One solution per weight, deduplicated, checked mutually nondominated.

    Solves are independent and can run on threads (the compiled kernels
    release the GIL in their hot loops); results keep the weight order.
    Solutions whose value vectors agree within ``eps`` merge, retaining
    every contributing weight.  A dominated pair in the final set raises
    an error naming it, since it signals dominated output.
    """
    ws = [momdp.check_weight(w) for w in weights]
    if workers and workers > 1 and len(ws) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solutions = list(
                pool.map(lambda w: solve_scalarized(momdp, w, tol, max_iters), ws)
            )
    else:
        solutions = [solve_scalarized(momdp, w, tol, max_iters) for w in ws]
    front: list[MomdpSolution] = []
    for sol in solutions:
        for kept in front:
            if float(np.abs(sol.value - kept.value).max()) <= eps:
                kept.merged_weights = kept.merged_weights + (sol.weight,)
                break
        else:
            front.append(sol)
    for i, a in enumerate(front):
        for b in front[i + 1:]:
            verdict = pareto_dominates(a.value, b.value, eps=eps)
            if verdict is not Dominance.INCOMPARABLE_OR_EQUAL:
                raise MomdpError(
                    "scalarized front contains a dominated pair: "
                    f"{a.value.tolist()} vs {b.value.tolist()} "
                    f"(weights {a.weight.components} vs {b.weight.components})"
                )
    return front
