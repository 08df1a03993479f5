"""Preference DFAs: automata over label symbols with a preference graph.

A preference DFA reads finite words whose symbols are sets of atomic
propositions.  Its states are partitioned into classes, and directed
edges between classes are improving flips: an edge (F_i, F_j) means F_j
is more preferred than F_i.  Reachability along improving flips
(reflexive and transitive) is the weak preference between classes, and
two words compare exactly by the classes their runs land in.

The automaton never consumes the empty word: the product construction
simply stops advancing it when the MDP terminates.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from itertools import chain, combinations
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .order import PartialOrder, transitive_closure

__all__ = [
    "ClassReachability",
    "Pdfa",
    "PdfaError",
    "PreferenceCycleWarning",
    "Symbol",
    "WordComparison",
    "symbol",
]

Symbol = frozenset


class PdfaError(ValueError):
    """Raised for ill-formed automata, unknown states or bad symbols."""


class PreferenceCycleWarning(UserWarning):
    """Distinct classes reachable from each other: they become indifferent."""


class WordComparison(enum.Enum):
    INDIFFERENT = "indifferent"
    W1_PREFERRED = "w1_preferred"
    W2_PREFERRED = "w2_preferred"
    INCOMPARABLE = "incomparable"


def symbol(props: Iterable[str]) -> Symbol:
    """Canonical symbol over a set of proposition names."""
    return frozenset(props)


def _full_alphabet(propositions: Sequence[str]) -> tuple[Symbol, ...]:
    """All subsets of the propositions, smallest first, names sorted."""
    props = sorted(propositions)
    subsets = chain.from_iterable(
        combinations(props, k) for k in range(len(props) + 1)
    )
    return tuple(frozenset(s) for s in subsets)


@dataclass(frozen=True)
class ClassReachability:
    """Reflexive-transitive reachability between preference classes.

    ``reach[i, j]`` is true when class j can be reached from class i by
    following improving flips, i.e. j is weakly preferred to i.
    """

    reach: np.ndarray

    def __call__(self, i: int, j: int) -> bool:
        return bool(self.reach[i, j])


class Pdfa:
    """Deterministic finite automaton with a preference graph over classes.

    Parameters
    ----------
    states:
        State identifiers, canonical order.
    propositions:
        Atomic propositions; the alphabet is every subset of them.
    delta:
        Mapping ``(state, symbol)`` -> state where symbol is any
        iterable of propositions.  Must be total over states x alphabet;
        missing entries fall back to ``default_state`` when one is
        given, otherwise the automaton is rejected.
    initial:
        Start state.
    partition:
        Disjoint nonempty state groups covering all states; order
        defines the class indices.
    edges:
        Improving flips as pairs of class indices or class names:
        ``(i, j)`` means class j improves on class i.
    class_names:
        Optional human-readable class names, default "F1", "F2", ...
    """

    def __init__(
        self,
        states: Iterable[Hashable],
        propositions: Iterable[str],
        delta: Mapping[tuple[Hashable, Iterable[str]], Hashable],
        initial: Hashable,
        partition: Sequence[Iterable[Hashable]],
        edges: Iterable[tuple[int | str, int | str]],
        class_names: Sequence[str] | None = None,
        default_state: Hashable | None = None,
    ):
        self.states: tuple[Hashable, ...] = tuple(states)
        if len(set(self.states)) != len(self.states):
            raise PdfaError("duplicate states")
        state_set = set(self.states)
        self.propositions: tuple[str, ...] = tuple(sorted(set(propositions)))
        self.alphabet: tuple[Symbol, ...] = _full_alphabet(self.propositions)
        if initial not in state_set:
            raise PdfaError(f"initial state {initial!r} is not a state")
        self.initial = initial

        if default_state is not None and default_state not in state_set:
            raise PdfaError(f"default state {default_state!r} is not a state")
        table: dict[tuple[Hashable, Symbol], Hashable] = {}
        for (q, sym), q_next in delta.items():
            sym = frozenset(sym)
            if q not in state_set:
                raise PdfaError(f"transition from unknown state {q!r}")
            if q_next not in state_set:
                raise PdfaError(f"transition to unknown state {q_next!r}")
            extra = sym - set(self.propositions)
            if extra:
                raise PdfaError(
                    f"symbol {sorted(sym)} uses unknown propositions {sorted(extra)}"
                )
            if (q, sym) in table:
                raise PdfaError(f"duplicate transition for ({q!r}, {sorted(sym)})")
            table[(q, sym)] = q_next
        missing = [
            (q, sym)
            for q in self.states
            for sym in self.alphabet
            if (q, sym) not in table
        ]
        if missing:
            if default_state is None:
                q, sym = missing[0]
                raise PdfaError(
                    f"transition table is partial: {len(missing)} entries missing, "
                    f"first ({q!r}, {sorted(sym)}); provide a default state to "
                    "complete it"
                )
            for key in missing:
                table[key] = default_state
        self.delta: dict[tuple[Hashable, Symbol], Hashable] = table

        blocks = [frozenset(block) for block in partition]
        if any(not block for block in blocks):
            raise PdfaError("empty partition block")
        union: set = set()
        for block in blocks:
            bad = block - state_set
            if bad:
                raise PdfaError(f"partition block uses unknown states {sorted(map(repr, bad))}")
            if block & union:
                raise PdfaError("partition blocks overlap")
            union |= block
        if union != state_set:
            raise PdfaError("partition does not cover all states")
        self.partition: tuple[frozenset, ...] = tuple(blocks)
        if class_names is None:
            self.class_names: tuple[str, ...] = tuple(
                f"F{i + 1}" for i in range(len(blocks))
            )
        else:
            self.class_names = tuple(class_names)
            if len(self.class_names) != len(blocks):
                raise PdfaError("one class name per partition block required")
            if len(set(self.class_names)) != len(self.class_names):
                raise PdfaError("duplicate class names")
        self._class_of_state = {
            q: i for i, block in enumerate(blocks) for q in block
        }
        self._name_index = {name: i for i, name in enumerate(self.class_names)}

        k = len(blocks)
        adjacency = np.zeros((k, k), dtype=bool)
        self.edges: frozenset[tuple[int, int]] = frozenset(
            (self._class_index(a), self._class_index(b)) for a, b in edges
        )
        for i, j in self.edges:
            adjacency[i, j] = True
        self.class_reach = ClassReachability(transitive_closure(adjacency))
        cyclic = [
            (i, j)
            for i in range(k)
            for j in range(i + 1, k)
            if self.class_reach(i, j) and self.class_reach(j, i)
        ]
        for i, j in cyclic:
            warnings.warn(
                f"classes {self.class_names[i]} and {self.class_names[j]} are "
                "mutually reachable through improving flips; they are treated "
                "as indifferent",
                PreferenceCycleWarning,
                stacklevel=2,
            )

    def _class_index(self, ref: int | str) -> int:
        if isinstance(ref, str) and ref in self._name_index:
            return self._name_index[ref]
        if isinstance(ref, (int, np.integer)) and 0 <= int(ref) < len(self.partition):
            return int(ref)
        raise PdfaError(f"unknown preference class {ref!r}")

    @property
    def n_classes(self) -> int:
        return len(self.partition)

    def class_of(self, state: Hashable) -> int:
        """Index of the partition class containing the state."""
        try:
            return self._class_of_state[state]
        except KeyError:
            raise PdfaError(f"unknown state {state!r}") from None

    def step(self, state: Hashable, sym: Iterable[str]) -> Hashable:
        """One transition; the symbol may be any iterable of propositions."""
        sym = frozenset(sym)
        if state not in self._class_of_state:
            raise PdfaError(f"unknown state {state!r}")
        try:
            return self.delta[(state, sym)]
        except KeyError:
            raise PdfaError(f"symbol {sorted(sym)} not in the alphabet") from None

    def run(self, word: Iterable[Iterable[str]]) -> Hashable:
        """State reached from the initial state; the empty word stays put."""
        q = self.initial
        for pos, sym in enumerate(word):
            sym = frozenset(sym)
            if (q, sym) not in self.delta:
                raise PdfaError(
                    f"symbol {sorted(sym)} at position {pos} not in the alphabet"
                )
            q = self.delta[(q, sym)]
        return q

    def compare_words(
        self, w1: Iterable[Iterable[str]], w2: Iterable[Iterable[str]]
    ) -> WordComparison:
        """Four-case comparison by the classes the two runs land in."""
        f1 = self.class_of(self.run(w1))
        f2 = self.class_of(self.run(w2))
        if f1 == f2:
            return WordComparison.INDIFFERENT
        back = self.class_reach(f2, f1)
        forward = self.class_reach(f1, f2)
        if back and forward:
            return WordComparison.INDIFFERENT
        if back:
            return WordComparison.W1_PREFERRED
        if forward:
            return WordComparison.W2_PREFERRED
        return WordComparison.INCOMPARABLE

    def word_upper_set_classes(self, class_index: int) -> frozenset[int]:
        """Classes weakly preferred to the given one (always includes it)."""
        i = self._class_index(class_index)
        return frozenset(
            int(j) for j in np.flatnonzero(self.class_reach.reach[i])
        )

    def induced_order(self) -> PartialOrder:
        """Partial order over class indices: i above j iff i reachable from j."""
        k = self.n_classes
        weak = [
            (i, j)
            for i in range(k)
            for j in range(k)
            if self.class_reach(j, i)
        ]
        return PartialOrder(range(k), weak=weak)
