"""Terminating labeled MDPs, memoryless policies, properness and absorption.

A terminating labeled MDP has a unique action-less sink state; every
other state carries a label over atomic propositions and at least one
action.  The sink alone carries the empty word (represented as None) so
traces of terminating paths end with it and contain it nowhere else.
Models are treated as immutable once built; all evaluation operations
are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import _linsys
from ._linsys import SolverError, SparseMdp

__all__ = [
    "ImproperPolicyError",
    "MdpError",
    "MemorylessPolicy",
    "Path",
    "SolverError",
    "Tlmdp",
    "ValidationReport",
]

DEFAULT_EPS = 1e-9

# action name given to redirected dead-end states when normalizing
# multi-sink inputs; suffixed with underscores until fresh
END_ACTION = "end"


class MdpError(ValueError):
    """Raised for structurally broken models or invalid policies."""


class ImproperPolicyError(MdpError):
    """Raised when an operation requires a proper policy and gets none."""


@dataclass
class ValidationReport:
    """Validation outcome: hard invariant violations plus advisory warnings."""

    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        lines = [f"violation: {v}" for v in self.violations]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


class MemorylessPolicy:
    """Maps states to distributions over their available actions.

    ``choice`` may give each state either a single action name or a
    mapping action -> probability.
    """

    def __init__(self, choice: Mapping[Hashable, Hashable | Mapping[Hashable, float]]):
        normalized: dict[Hashable, dict[Hashable, float]] = {}
        for state, dist in choice.items():
            if isinstance(dist, Mapping):
                normalized[state] = {a: float(w) for a, w in dist.items()}
            else:
                normalized[state] = {dist: 1.0}
        self.choice: dict[Hashable, dict[Hashable, float]] = normalized

    @classmethod
    def deterministic(cls, mapping: Mapping[Hashable, Hashable]) -> "MemorylessPolicy":
        return cls(dict(mapping))

    def __contains__(self, state: Hashable) -> bool:
        return state in self.choice

    def __len__(self) -> int:
        return len(self.choice)

    def action_distribution(self, state: Hashable) -> dict[Hashable, float]:
        try:
            return self.choice[state]
        except KeyError:
            raise MdpError(f"policy does not cover state {state!r}") from None

    def support(self, state: Hashable) -> tuple[Hashable, ...]:
        return tuple(a for a, w in self.action_distribution(state).items() if w > 0)

    def sample(self, state: Hashable, rng: np.random.Generator) -> Hashable:
        dist = self.action_distribution(state)
        actions = list(dist)
        weights = np.array([dist[a] for a in actions], dtype=float)
        weights /= weights.sum()
        return actions[int(rng.choice(len(actions), p=weights))]


@dataclass(frozen=True)
class Path:
    """A sampled path with its trace.

    ``terminated`` distinguishes reaching the sink from truncation at
    the step limit.  ``trace`` is the label sequence of the visited
    states; for terminating paths it ends with the sink's empty word,
    represented as None.  ``word`` drops that final empty word, which is
    the form automata consume.
    """

    states: tuple[Hashable, ...]
    actions: tuple[Hashable, ...]
    terminated: bool
    labels: tuple[frozenset | None, ...]

    @property
    def trace(self) -> tuple[frozenset | None, ...]:
        return self.labels

    @property
    def word(self) -> tuple[frozenset, ...]:
        if self.terminated:
            return self.labels[:-1]
        return self.labels


class Tlmdp:
    """Terminating labeled MDP with sparse dict-of-dicts transitions.

    Parameters
    ----------
    states:
        All states including the sink, in canonical order.
    actions:
        Global action name order; per-state action sets follow it.
    transitions:
        ``transitions[s][a][s']`` is the probability of moving to s'.
        Zero-probability entries are dropped.  States other than the
        sink that have no actions are normalized into dead ends: they
        get a single fresh action leading to the sink with probability
        one (the label they carry is preserved, so traces are
        unaffected).
    labels:
        Label of every non-sink state as an iterable of propositions.
        The sink must not be labeled; it carries the empty word.
    initial, sink:
        Distinguished states.
    propositions:
        Atomic proposition universe; defaults to the union of labels.
    """

    def __init__(
        self,
        states: Iterable[Hashable],
        actions: Iterable[Hashable],
        transitions: Mapping[Hashable, Mapping[Hashable, Mapping[Hashable, float]]],
        labels: Mapping[Hashable, Iterable[str]],
        initial: Hashable,
        sink: Hashable,
        propositions: Iterable[str] | None = None,
    ):
        self.states: tuple[Hashable, ...] = tuple(states)
        if len(set(self.states)) != len(self.states):
            raise MdpError("duplicate states")
        self._state_index = {s: i for i, s in enumerate(self.states)}
        self.actions: tuple[Hashable, ...] = tuple(actions)
        if len(set(self.actions)) != len(self.actions):
            raise MdpError("duplicate actions")
        for name, s in (("initial", initial), ("sink", sink)):
            if s not in self._state_index:
                raise MdpError(f"{name} state {s!r} is not a state")
        self.initial = initial
        self.sink = sink

        action_set = set(self.actions)
        trans: dict[Hashable, dict[Hashable, dict[Hashable, float]]] = {}
        for s, per_action in transitions.items():
            if s not in self._state_index:
                raise MdpError(f"transition from unknown state {s!r}")
            rows: dict[Hashable, dict[Hashable, float]] = {}
            for a, dist in per_action.items():
                if a not in action_set:
                    raise MdpError(f"unknown action {a!r} at state {s!r}")
                row = {}
                for succ, p in dist.items():
                    if succ not in self._state_index:
                        raise MdpError(
                            f"transition to unknown state {succ!r} from {s!r}"
                        )
                    if float(p) != 0.0:
                        row[succ] = float(p)
                if not row:
                    raise MdpError(f"empty distribution for ({s!r}, {a!r})")
                rows[a] = row
            if rows:
                trans[s] = rows

        # normalize dead ends (multi-sink inputs) into the unique sink
        self.normalized_states: tuple[Hashable, ...] = tuple(
            s for s in self.states if s != sink and s not in trans
        )
        if self.normalized_states:
            end = END_ACTION
            while end in action_set:
                end = end + "_"
            self.actions = self.actions + (end,)
            action_set.add(end)
            for s in self.normalized_states:
                trans[s] = {end: {sink: 1.0}}
        self.transitions = trans

        self.labels: dict[Hashable, frozenset | None] = {}
        for s, props in labels.items():
            if s not in self._state_index:
                raise MdpError(f"label on unknown state {s!r}")
            if s == sink:
                if props is not None:
                    raise MdpError("the sink carries the empty word, not a label")
                continue
            self.labels[s] = frozenset(props)
        for s in self.states:
            if s != sink:
                self.labels.setdefault(s, frozenset())
        self.labels[sink] = None

        if propositions is None:
            props_union: set[str] = set()
            for lab in self.labels.values():
                if lab:
                    props_union |= lab
            self.propositions: tuple[str, ...] = tuple(sorted(props_union))
        else:
            self.propositions = tuple(propositions)

        self._action_index = {a: i for i, a in enumerate(self.actions)}
        self._sparse: SparseMdp | None = None

    # -- indexing ---------------------------------------------------------

    def state_index(self, state: Hashable) -> int:
        try:
            return self._state_index[state]
        except KeyError:
            raise MdpError(f"unknown state {state!r}") from None

    def state_actions(self, state: Hashable) -> tuple[Hashable, ...]:
        """Actions available at a state, in global canonical order."""
        rows = self.transitions.get(state, {})
        return tuple(a for a in self.actions if a in rows)

    def label(self, state: Hashable) -> frozenset | None:
        self.state_index(state)
        return self.labels[state]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(
            len(dist) for rows in self.transitions.values() for dist in rows.values()
        )

    def sparse(self) -> SparseMdp:
        """Flat CSR-like view, cached (models are immutable once built)."""
        if self._sparse is None:
            rows = []
            for si, s in enumerate(self.states):
                for a in self.state_actions(s):
                    entries = [
                        (self._state_index[succ], p)
                        for succ, p in sorted(
                            self.transitions[s][a].items(),
                            key=lambda kv: self._state_index[kv[0]],
                        )
                    ]
                    rows.append((si, self._action_index[a], entries))
            self._sparse = _linsys.build_sparse(len(self.states), rows)
        return self._sparse

    # -- validation -------------------------------------------------------

    def validate(self, eps: float = DEFAULT_EPS) -> ValidationReport:
        """Check Def.-style invariants; violations are hard, warnings advisory.

        Warnings cover unreachable states and the existence of improper
        policies (a reachable set of states from which some policy can
        avoid the sink forever), which breaks the assumption that every
        policy terminates.
        """
        report = ValidationReport()
        if self.transitions.get(self.sink):
            report.violations.append("sink has actions")
        for s in self.states:
            if s == self.sink:
                continue
            rows = self.transitions.get(s, {})
            for a, dist in rows.items():
                total = sum(dist.values())
                if any(p < 0 for p in dist.values()):
                    report.violations.append(
                        f"negative probability in row ({s!r}, {a!r})"
                    )
                elif abs(total - 1.0) > eps:
                    report.violations.append(
                        f"row ({s!r}, {a!r}) sums to {total!r}, not 1"
                    )
            lab = self.labels[s]
            extra = lab - set(self.propositions)
            if extra:
                report.violations.append(
                    f"label of {s!r} uses unknown propositions {sorted(extra)}"
                )
        reachable = self._forward_reachable_mask()
        for i in np.flatnonzero(~reachable):
            report.warnings.append(
                f"state {self.states[i]!r} unreachable from the initial state"
            )
        if not report.violations:
            sink_mask = np.zeros(self.n_states, dtype=bool)
            sink_mask[self._state_index[self.sink]] = True
            trap = _linsys.trapped_states(self.sparse(), sink_mask) & reachable
            if trap.any():
                names = [self.states[i] for i in np.flatnonzero(trap)]
                report.warnings.append(
                    "improper policies exist: termination can be avoided forever "
                    f"from {names!r}"
                )
        return report

    def _forward_reachable_mask(self) -> np.ndarray:
        sparse = self.sparse()
        all_rows = np.ones(sparse.n_sa, dtype=np.float64)
        chain = _linsys.chain_matrix(sparse, all_rows)
        return _linsys.reachable_mask(chain, self._state_index[self.initial])

    # -- policies ---------------------------------------------------------

    def policy_row_weights(
        self, policy: MemorylessPolicy, eps: float = DEFAULT_EPS
    ) -> np.ndarray:
        """Policy weight of each state-action row; validates the support."""
        try:
            return _linsys.policy_row_weights(
                self.sparse(), self._action_index, self.states, policy.choice, eps
            )
        except ValueError as exc:
            raise MdpError(str(exc)) from None

    def is_proper(self, policy: MemorylessPolicy) -> bool:
        """True iff the sink is reached with probability 1 from the start.

        Decided graph-theoretically: every state reachable under the
        policy must be able to reach the sink inside the policy's
        support.
        """
        weights = self.policy_row_weights(policy)
        chain = _linsys.chain_matrix(self.sparse(), weights)
        reachable = _linsys.reachable_mask(chain, self._state_index[self.initial])
        reaches_sink = _linsys.reachable_mask(
            chain.T.tocsr(), self._state_index[self.sink]
        )
        return bool(np.all(reaches_sink[reachable]))

    # -- evaluation -------------------------------------------------------

    def absorption_probabilities(
        self,
        policy: MemorylessPolicy,
        targets: Sequence[Iterable[Hashable]],
        method: str = "auto",
    ) -> np.ndarray:
        """Probability of terminating via each target event set.

        A path terminates via target k when its last state before the
        sink belongs to that set.  Requires a proper policy; the linear
        system is solved to the module's residual targets.
        """
        if not self.is_proper(policy):
            raise ImproperPolicyError(
                "absorption probabilities require a proper policy"
            )
        for event in targets:
            for s in event:
                self.state_index(s)
        if self.initial == self.sink:
            return np.zeros(len(targets))
        weights = self.policy_row_weights(policy)
        chain = _linsys.chain_matrix(self.sparse(), weights)
        sink_i = self._state_index[self.sink]
        init_i = self._state_index[self.initial]
        # restrict to states reachable under the policy; properness makes
        # the restricted system nonsingular
        reach = _linsys.reachable_mask(chain, init_i)
        reach[sink_i] = False
        interior = np.flatnonzero(reach).astype(np.int64)
        pos_of = {int(s): k for k, s in enumerate(interior)}
        to_sink = np.asarray(chain[:, sink_i].todense()).ravel()[interior]
        rhs = np.zeros((len(interior), len(targets)))
        for k, event in enumerate(targets):
            for s in event:
                si = self._state_index[s]
                if si in pos_of:
                    rhs[pos_of[si], k] = to_sink[pos_of[si]]
        q_block = chain[interior][:, interior]
        sol = _linsys.solve_absorbing(q_block, rhs, method=method)
        return np.asarray(sol[pos_of[init_i]])

    def rollout(
        self,
        policy: MemorylessPolicy,
        rng: int | np.random.Generator | None = None,
        max_steps: int = 10_000,
    ) -> Path:
        """Sample one path under the policy; reproducible for a fixed seed."""
        self.policy_row_weights(policy)
        gen = np.random.default_rng(rng)
        s = self.initial
        states = [s]
        actions: list[Hashable] = []
        for _ in range(max_steps):
            if s == self.sink:
                break
            a = policy.sample(s, gen)
            dist = self.transitions[s][a]
            succs = sorted(dist, key=self._state_index.get)
            probs = np.array([dist[x] for x in succs], dtype=float)
            probs /= probs.sum()
            s = succs[int(gen.choice(len(succs), p=probs))]
            actions.append(a)
            states.append(s)
        terminated = states[-1] == self.sink
        return Path(
            states=tuple(states),
            actions=tuple(actions),
            terminated=terminated,
            labels=tuple(self.labels[x] for x in states),
        )
