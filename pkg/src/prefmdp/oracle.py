"""Exhaustive policy enumeration for small product models.

Ground truth for everything the scalarized solver claims: enumerate all
deterministic memoryless policies of a product, keep the proper ones,
evaluate each exactly, and compare the Pareto view on value vectors with
the weak-stochastic view on outcome distributions.  Refuses instances
beyond hard caps rather than silently grinding, since the policy count
is exponential in the number of free states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import MemorylessPolicy, Tlmdp
from .momdp import Momdp, pareto_dominates
from .order import Dominance, PartialOrder, dominates_weak_stochastic
from .pdfa import Pdfa
from .product import build_product

__all__ = [
    "CapError",
    "OracleError",
    "PolicyEnumeration",
    "Theorem1Report",
    "check_theorem1",
    "enumerate_solutions",
    "random_instance",
]

MAX_FREE_STATES = 12
MAX_ACTIONS_PER_STATE = 3
_CHUNK = 1024


class OracleError(RuntimeError):
    """Raised when exhaustive enumeration cannot produce an answer."""


class CapError(OracleError):
    """Instance exceeds the enumeration caps; carries the offending counts."""

    def __init__(self, n_free: int, worst_actions: int,
                 max_states: int, max_actions: int):
        self.n_free = n_free
        self.worst_actions = worst_actions
        self.max_states = max_states
        self.max_actions = max_actions
        parts = []
        if n_free > max_states:
            parts.append(f"{n_free} free states exceed the cap of {max_states}")
        if worst_actions > max_actions:
            parts.append(
                f"a state offers {worst_actions} actions, more than the "
                f"cap of {max_actions}"
            )
        super().__init__(
            "refusing exhaustive enumeration: " + "; ".join(parts)
        )


@dataclass(eq=False)
class PolicyEnumeration:
    """Every proper deterministic policy of one product, evaluated exactly.

    Policies are stored as action-index assignments over ``free_states``
    (the non-terminal product states in index order); ``policy(i)``
    materializes one as a policy object.  ``nondominated`` indexes the
    Pareto-maximal value vectors among the proper policies.
    """

    momdp: Momdp
    free_states: tuple[int, ...]
    actions_per_state: tuple[tuple, ...]
    assignments: np.ndarray
    values: np.ndarray
    outcome_probs: np.ndarray
    total_policies: int
    nondominated: tuple[int, ...]
    identity_gap: float

    @property
    def proper_count(self) -> int:
        return len(self.assignments)

    def policy(self, i: int) -> MemorylessPolicy:
        p = self.momdp.product
        choice = {
            p.states[x]: self.actions_per_state[k][self.assignments[i, k]]
            for k, x in enumerate(self.free_states)
        }
        return MemorylessPolicy.deterministic(choice)


def _nondominated_indices(values: np.ndarray, eps: float) -> tuple[int, ...]:
    n = len(values)
    dominated = np.zeros(n, dtype=bool)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        a = values[lo:hi, None, :]
        b = values[None, :, :]
        ge = np.all(a >= b - eps, axis=2)
        gt = np.any(a > b + eps, axis=2)
        dominated |= np.any(ge & gt, axis=0)
    return tuple(int(i) for i in np.flatnonzero(~dominated))


def enumerate_solutions(
    momdp: Momdp,
    max_states: int = MAX_FREE_STATES,
    max_actions: int = MAX_ACTIONS_PER_STATE,
    eps: float = 1e-9,
) -> PolicyEnumeration:
    """Evaluate every proper deterministic memoryless policy.

    Properness is decided per policy by a bitmask fixpoint (states that
    can still reach a terminal state); policies trapping any state
    reachable from the start are dropped.  The survivors' absorption
    systems are solved in batches, with unreachable trapped states
    zeroed out so one factorization shape serves the whole batch.
    """
    p = momdp.product
    sp = p.sparse
    big_n = momdp.n_objectives
    free = [x for x in range(p.n_states) if p.terminal_class[x] < 0]
    n = len(free)
    counts = [len(p.state_actions(x)) for x in free]
    worst = max(counts, default=0)
    if n > max_states or worst > max_actions:
        raise CapError(n, worst, max_states, max_actions)
    free_pos = {x: k for k, x in enumerate(free)}
    terminal_mask = p.terminal_class >= 0

    if terminal_mask[p.initial]:
        raise OracleError("the start state is already terminal")

    # per free state and action: interior row, objective seeds, and a
    # successor bitmask (bit n set when any terminal state is hit)
    q_rows = np.zeros((n, worst, n))
    seed_rows = np.zeros((n, worst, 2 * big_n))
    succ_bits = np.zeros((n, worst), dtype=np.int64)
    for k, x in enumerate(free):
        for j, r in enumerate(sp.actions_of(x)):
            lo, hi = sp.sa_tptr[r], sp.sa_tptr[r + 1]
            for t in range(lo, hi):
                col = int(sp.t_cols[t])
                prob = float(sp.t_probs[t])
                if terminal_mask[col]:
                    seed_rows[k, j, :big_n] += prob * momdp.seed_matrix[col]
                    seed_rows[k, j, big_n:] += prob * momdp.onehot_matrix[col]
                    succ_bits[k, j] |= 1 << n
                else:
                    q_rows[k, j, free_pos[col]] += prob
                    succ_bits[k, j] |= 1 << free_pos[col]

    shape = tuple(counts)
    total = int(np.prod(shape)) if shape else 1
    combos = np.stack(
        np.unravel_index(np.arange(total), shape), axis=1
    ).astype(np.int64)
    arange_n = np.arange(n)
    sel_bits = succ_bits[arange_n[None, :], combos]

    # fixpoint: which states can reach a terminal under each policy
    escape = np.full(total, 1 << n, dtype=np.int64)
    for _ in range(n + 1):
        before = escape
        for k in range(n):
            hits = (sel_bits[:, k] & escape) != 0
            escape = escape | (hits.astype(np.int64) << k)
        if np.array_equal(escape, before):
            break

    # forward closure from the start under each policy
    start_bit = free_pos[p.initial]
    reach = np.full(total, 1 << start_bit, dtype=np.int64)
    for _ in range(n):
        before = reach
        for k in range(n):
            mask = (reach >> k) & 1
            reach = reach | (sel_bits[:, k] * mask)
        if np.array_equal(reach, before):
            break

    live = (1 << n) - 1
    proper = (reach & live & ~escape) == 0
    keep = np.flatnonzero(proper)
    if keep.size == 0:
        raise OracleError("no deterministic memoryless policy is proper")

    values = np.zeros((keep.size, big_n))
    outcomes = np.zeros((keep.size, big_n))
    eye = np.eye(n)
    trapped_all = ~((escape[keep, None] >> arange_n[None, :]) & 1).astype(bool)
    for lo in range(0, keep.size, _CHUNK):
        hi = min(lo + _CHUNK, keep.size)
        rows = combos[keep[lo:hi]]
        q = q_rows[arange_n[None, :], rows]
        rhs = seed_rows[arange_n[None, :], rows]
        bad = trapped_all[lo:hi]
        q[bad] = 0.0
        rhs[bad] = 0.0
        sol = np.linalg.solve(eye[None, :, :] - q, rhs)
        values[lo:hi] = sol[:, start_bit, :big_n]
        outcomes[lo:hi] = sol[:, start_bit, big_n:]

    gap = float(np.abs(values - outcomes @ momdp.reach_matrix.T).max())
    return PolicyEnumeration(
        momdp=momdp,
        free_states=tuple(free),
        actions_per_state=tuple(p.state_actions(x) for x in free),
        assignments=combos[keep],
        values=values,
        outcome_probs=outcomes,
        total_policies=total,
        nondominated=_nondominated_indices(values, eps),
        identity_gap=gap,
    )


@dataclass(frozen=True)
class Theorem1Report:
    """Agreement between the two dominance views on one enumeration.

    The value view compares R-weighted vectors componentwise; the
    distribution view compares outcome distributions by weak-stochastic
    dominance under the class preference order.  They are provably two
    descriptions of the same relation, so any mismatch means a bug.
    """

    n_policies: int
    n_proper: int
    n_unique: int
    routes_coincide: bool
    forward_holds: bool
    converse_holds: bool
    mismatches: tuple[tuple[int, int], ...]
    eps: float

    @property
    def ok(self) -> bool:
        return self.routes_coincide and self.forward_holds and self.converse_holds

    def summary(self) -> str:
        state = "agree" if self.ok else "DISAGREE"
        return (
            f"{self.n_proper}/{self.n_policies} policies proper, "
            f"{self.n_unique} distinct value vectors; dominance views {state}"
        )


def check_theorem1(
    momdp: Momdp,
    enumeration: PolicyEnumeration | None = None,
    eps: float = 1e-9,
) -> Theorem1Report:
    """Cross-validate Pareto dominance against weak-stochastic dominance.

    Checks, over the distinct achievable value vectors: per-pair verdict
    equality of the two views, that every Pareto-maximal vector is
    weak-stochastic nondominated, and the converse.
    """
    if enumeration is None:
        enumeration = enumerate_solutions(momdp)
    stacked = np.hstack([enumeration.values, enumeration.outcome_probs])
    uniq = np.unique(np.round(stacked, 12), axis=0)
    k = momdp.n_objectives
    values, dists = uniq[:, :k], uniq[:, k:]
    reach = momdp.reach_matrix
    order = PartialOrder(
        range(k),
        weak=[
            (j, i)
            for i in range(k)
            for j in range(k)
            if reach[i, j]
        ],
    )
    m = len(values)
    as_dist = [
        {c: float(dists[i][c]) for c in range(k)} for i in range(m)
    ]
    pareto = np.empty((m, m), dtype=object)
    stochastic = np.empty((m, m), dtype=object)
    mismatches = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            pareto[i, j] = pareto_dominates(values[i], values[j], eps=eps)
            stochastic[i, j] = dominates_weak_stochastic(
                as_dist[i], as_dist[j], order, eps=eps
            )
            if pareto[i, j] is not stochastic[i, j]:
                mismatches.append((i, j))
    pareto_nd = {
        i for i in range(m)
        if not any(
            pareto[j, i] is Dominance.DOMINATES for j in range(m) if j != i
        )
    }
    ws_nd = {
        i for i in range(m)
        if not any(
            stochastic[j, i] is Dominance.DOMINATES for j in range(m) if j != i
        )
    }
    return Theorem1Report(
        n_policies=enumeration.total_policies,
        n_proper=enumeration.proper_count,
        n_unique=m,
        routes_coincide=not mismatches,
        forward_holds=pareto_nd <= ws_nd,
        converse_holds=ws_nd <= pareto_nd,
        mismatches=tuple(mismatches),
        eps=eps,
    )


def _random_model(rng: np.random.Generator) -> Tlmdp:
    """Small model where choosing the first action everywhere is proper."""
    n_live = int(rng.integers(2, 5))
    states = tuple(f"s{i}" for i in range(n_live)) + ("done",)
    actions = ("a", "b")[: int(rng.integers(1, 3))]
    transitions: dict = {}
    for i in range(n_live):
        rows = {}
        for a in actions:
            targets = list(
                rng.choice(n_live + 1, size=int(rng.integers(1, 3)), replace=False)
            )
            if a == "a":
                # guaranteed progress toward the sink on the first action
                targets[0] = i + 1
            probs = rng.dirichlet(np.ones(len(targets)))
            row: dict = {}
            for t, pr in zip(targets, probs):
                row[states[int(t)]] = row.get(states[int(t)], 0.0) + float(pr)
            rows[a] = row
        transitions[states[i]] = rows
    labels = {
        s: {pp for pp in ("x", "y") if rng.random() < 0.4}
        for s in states[:-1]
    }
    return Tlmdp(
        states=states,
        actions=actions,
        transitions=transitions,
        labels=labels,
        initial=states[0],
        sink="done",
    )


def _random_automaton(rng: np.random.Generator, max_classes: int = 3) -> Pdfa:
    n_states = int(rng.integers(2, 5))
    n_classes = int(rng.integers(2, min(max_classes, n_states) + 1))
    states = tuple(f"q{i}" for i in range(n_states))
    symbols = [
        frozenset(), frozenset({"x"}), frozenset({"y"}), frozenset({"x", "y"})
    ]
    delta = {
        (q, sym): states[int(rng.integers(n_states))]
        for q in states
        for sym in symbols
    }
    assignment = [i % n_classes for i in range(n_states)]
    rng.shuffle(assignment)
    partition = [set() for _ in range(n_classes)]
    for q, c in zip(states, assignment):
        partition[c].add(q)
    edges = [
        (j, i)
        for i in range(n_classes)
        for j in range(i + 1, n_classes)
        if rng.random() < 0.4
    ]
    return Pdfa(
        states=states,
        propositions=("x", "y"),
        delta=delta,
        initial=states[0],
        partition=partition,
        edges=edges,
    )


def random_instance(
    seed: int,
    max_states: int = MAX_FREE_STATES,
    max_actions: int = MAX_ACTIONS_PER_STATE,
    max_classes: int = 3,
) -> Momdp:
    """Seeded random product instance within the enumeration caps.

    Always admits at least one proper policy (the first action makes
    guaranteed progress in the underlying model) while other actions
    are free to form traps, so the properness filter gets exercised.
    ``max_classes`` bounds how many preference classes the automaton
    may use.
    """
    rng = np.random.default_rng(seed)
    while True:
        m = _random_model(rng)
        a = _random_automaton(rng, max_classes)
        p = build_product(m, a)
        free = [x for x in range(p.n_states) if p.terminal_class[x] < 0]
        if p.terminal_class[p.initial] >= 0:
            continue
        if len(free) > max_states:
            continue
        if max(len(p.state_actions(x)) for x in free) > max_actions:
            continue
        return Momdp(p)
