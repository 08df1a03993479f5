"""Finite partial orders and weak-stochastic dominance between outcome distributions.

A partial order over a finite outcome set is stored as a reflexive,
transitively closed boolean matrix.  The key derived object is the family
of upper sets generated by single outcomes, which induces the
weak-stochastic order on probability distributions: ``p1`` dominates
``p2`` when ``p1`` puts at least as much mass on every generator upper
set and strictly more on at least one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DEFAULT_EPS",
    "Comparison",
    "Dominance",
    "OrderError",
    "PartialOrder",
    "UpperSet",
    "WeakOrderFamily",
    "dominates_weak_stochastic",
    "transitive_closure",
]

DEFAULT_EPS = 1e-9


class OrderError(ValueError):
    """Raised for ill-formed orders, unknown elements or bad distributions."""


class Comparison(enum.Enum):
    """Outcome of comparing two elements under a partial order.

    For ``compare(x, y)``: STRICTLY_PREFERRED means x is strictly above y.
    """

    STRICTLY_PREFERRED = "strictly_preferred"
    STRICTLY_DISPREFERRED = "strictly_dispreferred"
    INDIFFERENT = "indifferent"
    INCOMPARABLE = "incomparable"


class Dominance(enum.Enum):
    """Tristate verdict of a stochastic dominance test between p1 and p2."""

    DOMINATES = "dominates"
    DOMINATED = "dominated"
    INCOMPARABLE_OR_EQUAL = "incomparable_or_equal"


def transitive_closure(relation: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean relation matrix.

    Uses repeated boolean matrix squaring, O(n^3 log n) worst case, which
    is fine for the small outcome sets this package deals with.
    """
    mat = np.asarray(relation, dtype=bool).copy()
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise OrderError("relation matrix must be square")
    np.fill_diagonal(mat, True)
    while True:
        nxt = mat | (mat @ mat)
        if np.array_equal(nxt, mat):
            return mat
        mat = nxt


@dataclass(frozen=True)
class UpperSet:
    """Upper set generated by a single element: everything at least as good."""

    base: Hashable
    members: frozenset

    def __contains__(self, item: Hashable) -> bool:
        return item in self.members

    def __len__(self) -> int:
        return len(self.members)


class WeakOrderFamily:
    """The event family that defines the weak-stochastic order.

    Contains the upper set of every element (deduplicated), the full
    outcome set and the empty set, in a deterministic order: generator
    upper sets sorted by the position of their base element, then the
    full set if not already present, then the empty set.
    """

    def __init__(self, order: "PartialOrder"):
        if len(order.elements) == 0:
            raise OrderError("weak order family of an empty order is undefined")
        self._order = order
        sets: list[frozenset] = []
        bases: list[Hashable | None] = []
        seen: set[frozenset] = set()
        for x in order.elements:
            members = order.upper_set(x).members
            if members not in seen:
                seen.add(members)
                sets.append(members)
                bases.append(x)
        full = frozenset(order.elements)
        if full not in seen:
            sets.append(full)
            bases.append(None)
        sets.append(frozenset())
        bases.append(None)
        self.sets: tuple[frozenset, ...] = tuple(sets)
        self.bases: tuple[Hashable | None, ...] = tuple(bases)

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __contains__(self, event: frozenset) -> bool:
        return frozenset(event) in set(self.sets)

    def project(self, dist: Mapping[Hashable, float]) -> np.ndarray:
        """Probability mass each family event receives under ``dist``."""
        self._order.check_distribution(dist)
        return np.array(
            [sum(dist.get(x, 0.0) for x in event) for event in self.sets]
        )


class PartialOrder:
    """A finite set of outcomes with a reflexive, transitive preference relation.

    Parameters
    ----------
    elements:
        The outcome set, in canonical order (used for deterministic
        iteration everywhere downstream).
    weak:
        Pairs ``(x, y)`` asserting x is at least as preferred as y.
    strict:
        Pairs ``(x, y)`` asserting x is strictly preferred to y.  After
        closure, a strict pair whose reverse also holds is rejected.
    """

    def __init__(
        self,
        elements: Iterable[Hashable],
        weak: Iterable[tuple[Hashable, Hashable]] = (),
        strict: Iterable[tuple[Hashable, Hashable]] = (),
    ):
        self.elements: tuple[Hashable, ...] = tuple(elements)
        if len(set(self.elements)) != len(self.elements):
            raise OrderError("duplicate elements in order")
        self._index = {x: i for i, x in enumerate(self.elements)}
        n = len(self.elements)
        geq = np.zeros((n, n), dtype=bool)
        np.fill_diagonal(geq, True)
        strict = list(strict)
        for x, y in list(weak) + strict:
            geq[self._idx(x), self._idx(y)] = True
        self._geq = transitive_closure(geq)
        for x, y in strict:
            if self._geq[self._idx(y), self._idx(x)]:
                raise OrderError(
                    f"strict preference {x!r} > {y!r} contradicts the closure "
                    f"(the reverse relation also holds)"
                )
        self._family: WeakOrderFamily | None = None

    def _idx(self, x: Hashable) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise OrderError(f"unknown element {x!r}") from None

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x: Hashable) -> bool:
        return x in self._index

    def matrix(self) -> np.ndarray:
        """Copy of the closed relation matrix; entry [i, j] means e_i >= e_j."""
        return self._geq.copy()

    def holds(self, x: Hashable, y: Hashable) -> bool:
        """True when x is at least as preferred as y."""
        return bool(self._geq[self._idx(x), self._idx(y)])

    def compare(self, x: Hashable, y: Hashable) -> Comparison:
        """Four-way comparison of two outcomes."""
        xy = self.holds(x, y)
        yx = self.holds(y, x)
        if xy and yx:
            return Comparison.INDIFFERENT
        if xy:
            return Comparison.STRICTLY_PREFERRED
        if yx:
            return Comparison.STRICTLY_DISPREFERRED
        return Comparison.INCOMPARABLE

    def upper_set(self, x: Hashable) -> UpperSet:
        """All outcomes at least as preferred as ``x`` (always contains x)."""
        col = self._geq[:, self._idx(x)]
        members = frozenset(self.elements[i] for i in np.flatnonzero(col))
        return UpperSet(base=x, members=members)

    def weak_order_family(self) -> WeakOrderFamily:
        if self._family is None:
            self._family = WeakOrderFamily(self)
        return self._family

    def check_distribution(
        self, dist: Mapping[Hashable, float], eps: float = DEFAULT_EPS
    ) -> None:
        """Validate a probability distribution over this order's elements."""
        for x, p in dist.items():
            if x not in self._index:
                raise OrderError(f"distribution assigns mass to unknown element {x!r}")
            if p < -eps:
                raise OrderError(f"negative probability {p!r} for element {x!r}")
        mass = float(sum(dist.values()))
        if not (1.0 - eps <= mass <= 1.0 + eps):
            raise OrderError(f"distribution mass {mass!r} is not 1 within {eps}")


def dominates_weak_stochastic(
    p1: Mapping[Hashable, float],
    p2: Mapping[Hashable, float],
    order: PartialOrder,
    eps: float = DEFAULT_EPS,
) -> Dominance:
    """Weak-stochastic dominance verdict between two outcome distributions.

    ``p1`` dominates ``p2`` when its mass on every event of the weak order
    family is at least as large (within ``eps``) and strictly larger
    (beyond ``eps``) on at least one.  Swapping the roles gives DOMINATED;
    anything else (equality everywhere, or strict gains in both
    directions) is INCOMPARABLE_OR_EQUAL.
    """
    family = order.weak_order_family()
    v1 = family.project(p1)
    v2 = family.project(p2)
    ge_12 = bool(np.all(v1 >= v2 - eps))
    ge_21 = bool(np.all(v2 >= v1 - eps))
    gt_12 = bool(np.any(v1 > v2 + eps))
    gt_21 = bool(np.any(v2 > v1 + eps))
    if ge_12 and gt_12 and not gt_21:
        return Dominance.DOMINATES
    if ge_21 and gt_21 and not gt_12:
        return Dominance.DOMINATED
    return Dominance.INCOMPARABLE_OR_EQUAL
