"""Product of a terminating labeled MDP with a preference DFA.

Product states pair an MDP state with an automaton state; moving to s'
advances the automaton by the label of s'.  The sink carries the empty
word, which the automaton never consumes, so the automaton component
freezes when the MDP terminates; the frozen states, grouped by the
automaton's preference classes, are the terminal classes W_1..W_N.  Only
states reachable from the initial pair are materialized, with
deterministic breadth-first numbering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np

from . import _linsys
from ._linsys import SparseMdp
from .mdp import MemorylessPolicy, Path, Tlmdp
from .pdfa import Pdfa

__all__ = [
    "ClassUpperClosure",
    "ProductError",
    "ProductMdp",
    "build_product",
    "class_upper_closures",
]


class ProductError(ValueError):
    """Raised when the inputs cannot be combined into a product."""


@dataclass(frozen=True)
class ClassUpperClosure:
    """Reachability objectives derived from the terminal classes.

    ``upper_classes[i]`` collects the class indices weakly preferred to
    class i (including i); ``states[i]`` is their union as product state
    indices, i.e. the i-th reachability objective.
    """

    upper_classes: tuple[frozenset[int], ...]
    states: tuple[frozenset[int], ...]


class ProductMdp:
    """Array-backed product automaton-MDP.

    Built by :func:`build_product`; treated as immutable.  States are
    (mdp state, automaton state) pairs indexed in discovery order, the
    initial pair first.
    """

    def __init__(
        self,
        states: tuple[tuple[Hashable, Hashable], ...],
        action_names: tuple[Hashable, ...],
        sparse: SparseMdp,
        terminal_class: np.ndarray,
        class_names: tuple[str, ...],
        class_reach: np.ndarray,
        edges: frozenset[tuple[int, int]],
        mdp: Tlmdp | None = None,
        pdfa: Pdfa | None = None,
    ):
        self.states = states
        self.action_names = action_names
        self.sparse = sparse
        self.terminal_class = terminal_class
        self.class_names = class_names
        self.class_reach = class_reach
        self.edges = edges
        self.mdp = mdp
        self.pdfa = pdfa
        self.initial = 0
        self._state_index = {x: i for i, x in enumerate(states)}
        self._action_index = {a: i for i, a in enumerate(action_names)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return self.sparse.n_transitions

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def state_index(self, state: tuple[Hashable, Hashable]) -> int:
        try:
            return self._state_index[state]
        except KeyError:
            raise ProductError(f"unknown product state {state!r}") from None

    def is_terminal(self, index: int) -> bool:
        return self.terminal_class[index] >= 0

    def class_states(self, class_index: int) -> frozenset[int]:
        """Terminal class W_i as a set of product state indices."""
        if not 0 <= class_index < self.n_classes:
            raise ProductError(f"unknown class index {class_index!r}")
        return frozenset(np.flatnonzero(self.terminal_class == class_index).tolist())

    def state_actions(self, index: int) -> tuple[Hashable, ...]:
        """Action names available at a product state, canonical order."""
        rows = self.sparse.actions_of(index)
        return tuple(self.action_names[self.sparse.sa_action[r]] for r in rows)

    def transitions_from(self, index: int) -> dict[Hashable, dict[int, float]]:
        """Per-action successor distributions of one state (for inspection)."""
        out: dict[Hashable, dict[int, float]] = {}
        sp = self.sparse
        for r in sp.actions_of(index):
            dist = {}
            for t in range(sp.sa_tptr[r], sp.sa_tptr[r + 1]):
                dist[int(sp.t_cols[t])] = float(sp.t_probs[t])
            out[self.action_names[sp.sa_action[r]]] = dist
        return out

    def policy_row_weights(self, policy: MemorylessPolicy, eps: float = 1e-9):
        """Policy weight per state-action row; validates the support."""
        try:
            return _linsys.policy_row_weights(
                self.sparse, self._action_index, self.states, policy.choice, eps
            )
        except ValueError as exc:
            raise ProductError(str(exc)) from None

    def rollout(
        self,
        policy: MemorylessPolicy,
        rng: int | np.random.Generator | None = None,
        max_steps: int = 10_000,
    ) -> Path:
        """Sample a product path; labels are those of the MDP component."""
        self.policy_row_weights(policy)
        gen = np.random.default_rng(rng)
        sp = self.sparse
        x = self.initial
        states = [self.states[x]]
        actions: list[Hashable] = []
        for _ in range(max_steps):
            if self.is_terminal(x):
                break
            dist = policy.action_distribution(self.states[x])
            names = list(dist)
            weights = np.array([dist[a] for a in names], dtype=float)
            weights /= weights.sum()
            a = names[int(gen.choice(len(names), p=weights))]
            row = sp.act_ptr[x] + self.state_actions(x).index(a)
            lo, hi = sp.sa_tptr[row], sp.sa_tptr[row + 1]
            probs = sp.t_probs[lo:hi] / sp.t_probs[lo:hi].sum()
            x = int(sp.t_cols[lo + gen.choice(hi - lo, p=probs)])
            actions.append(a)
            states.append(self.states[x])
        labels = []
        for s, _ in states:
            labels.append(self.mdp.labels[s] if self.mdp is not None else None)
        return Path(
            states=tuple(states),
            actions=tuple(actions),
            terminated=self.is_terminal(self.state_index(states[-1])),
            labels=tuple(labels),
        )


def build_product(m: Tlmdp, a: Pdfa) -> ProductMdp:
    """Forward-reachable product of a terminating MDP and a preference DFA.

    The initial product state pairs the MDP start with the automaton
    state reached by reading the start label.  Raises a domain error
    naming any state label that is not an automaton symbol.
    """
    basis = set(a.propositions)

    def read(q: Hashable, s: Hashable) -> Hashable:
        lab = m.labels[s]
        if lab is None:  # sink: the empty word freezes the automaton
            return q
        extra = lab - basis
        if extra:
            raise ProductError(
                f"label {sorted(lab)} of state {s!r} is not an automaton symbol "
                f"(unknown propositions {sorted(extra)})"
            )
        return a.step(q, lab)

    x0 = (m.initial, read(a.initial, m.initial))
    index: dict[tuple[Hashable, Hashable], int] = {x0: 0}
    order: list[tuple[Hashable, Hashable]] = [x0]
    rows: list[tuple[int, int, list[tuple[int, float]]]] = []
    action_index = {act: i for i, act in enumerate(m.actions)}

    head = 0
    while head < len(order):
        s, q = order[head]
        xi = head
        head += 1
        if s == m.sink:
            continue
        for act in m.state_actions(s):
            dist = m.transitions[s][act]
            entries: list[tuple[int, float]] = []
            for succ in sorted(dist, key=m.state_index):
                target = (succ, read(q, succ))
                ti = index.get(target)
                if ti is None:
                    ti = len(order)
                    index[target] = ti
                    order.append(target)
                entries.append((ti, dist[succ]))
            rows.append((xi, action_index[act], entries))

    sparse = _linsys.build_sparse(len(order), rows)
    terminal_class = np.full(len(order), -1, dtype=np.int64)
    for x, (s, q) in enumerate(order):
        if s == m.sink:
            terminal_class[x] = a.class_of(q)
    return ProductMdp(
        states=tuple(order),
        action_names=m.actions,
        sparse=sparse,
        terminal_class=terminal_class,
        class_names=a.class_names,
        class_reach=a.class_reach.reach.copy(),
        edges=a.edges,
        mdp=m,
        pdfa=a,
    )


def class_upper_closures(p: ProductMdp) -> ClassUpperClosure:
    """Objective state sets: Z_i unions the classes weakly preferred to i."""
    upper = []
    states = []
    for i in range(p.n_classes):
        ups = frozenset(int(j) for j in np.flatnonzero(p.class_reach[i]))
        upper.append(ups)
        members: set[int] = set()
        for j in ups:
            members |= p.class_states(j)
        states.append(frozenset(members))
    return ClassUpperClosure(upper_classes=tuple(upper), states=tuple(states))
