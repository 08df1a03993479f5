"""Tests for terminating labeled MDPs, properness and absorption."""

import numpy as np
import pytest

from prefmdp.mdp import (
    ImproperPolicyError,
    MdpError,
    MemorylessPolicy,
    Tlmdp,
)


def two_state():
    return Tlmdp(
        states=("s0", "done"),
        actions=("go",),
        transitions={"s0": {"go": {"done": 1.0}}},
        labels={"s0": {"g"}},
        initial="s0",
        sink="done",
    )


def coin():
    return Tlmdp(
        states=("s0", "heads", "tails", "done"),
        actions=("flip", "stop"),
        transitions={
            "s0": {"flip": {"heads": 0.5, "tails": 0.5}},
            "heads": {"stop": {"done": 1.0}},
            "tails": {"stop": {"done": 1.0}},
        },
        labels={"s0": set(), "heads": {"h"}, "tails": {"t"}},
        initial="s0",
        sink="done",
    )


def loopy():
    # "stay" can avoid the sink forever, "go" terminates
    return Tlmdp(
        states=("s0", "done"),
        actions=("stay", "go"),
        transitions={
            "s0": {"stay": {"s0": 1.0}, "go": {"done": 1.0}},
        },
        labels={"s0": set()},
        initial="s0",
        sink="done",
    )


def random_tlmdp(rng, n_states=None, allow_traps=True):
    """Random small model; sink always reachable from the start."""
    if n_states is None:
        n_states = int(rng.integers(2, 8))
    states = tuple(f"s{i}" for i in range(n_states - 1)) + ("done",)
    actions = ("a", "b", "c")[: int(rng.integers(1, 4))]
    transitions = {}
    for i, s in enumerate(states[:-1]):
        rows = {}
        for a in actions[: int(rng.integers(1, len(actions) + 1))]:
            n_succ = int(rng.integers(1, min(4, n_states + 1)))
            succs = rng.choice(n_states, size=n_succ, replace=False)
            if not allow_traps and i + 1 < n_states:
                # wire a guaranteed path forward so every policy is proper
                succs[0] = n_states - 1 if rng.random() < 0.5 else i + 1
            probs = rng.dirichlet(np.ones(n_succ))
            row = {}
            for j, p in zip(succs, probs):
                row[states[int(j)]] = row.get(states[int(j)], 0.0) + float(p)
            rows[a] = row
        transitions[s] = rows
    # make sure the sink is entered from somewhere
    transitions[states[-2]][actions[0]] = {"done": 1.0}
    labels = {s: ({"x"} if rng.random() < 0.5 else set()) for s in states[:-1]}
    return Tlmdp(
        states=states,
        actions=actions,
        transitions=transitions,
        labels=labels,
        initial=states[0],
        sink="done",
    )


def random_policy(rng, m):
    choice = {}
    for s in m.states:
        acts = m.state_actions(s)
        if acts:
            choice[s] = acts[int(rng.integers(len(acts)))]
    return MemorylessPolicy.deterministic(choice)


def test_wellformed_model_validates_clean():
    report = two_state().validate()
    assert report.ok
    assert report.warnings == []


def test_sink_actions_flagged():
    m = Tlmdp(
        states=("s0", "done"),
        actions=("go",),
        transitions={
            "s0": {"go": {"done": 1.0}},
            "done": {"go": {"done": 1.0}},
        },
        labels={"s0": set()},
        initial="s0",
        sink="done",
    )
    report = m.validate()
    assert any("sink has actions" in v for v in report.violations)


def test_bad_row_sum_named():
    m = Tlmdp(
        states=("s0", "done"),
        actions=("go",),
        transitions={"s0": {"go": {"done": 0.9}}},
        labels={"s0": set()},
        initial="s0",
        sink="done",
    )
    report = m.validate()
    assert not report.ok
    assert any("'s0'" in v and "'go'" in v and "0.9" in v for v in report.violations)


def test_unreachable_state_warned():
    m = Tlmdp(
        states=("s0", "orphan", "done"),
        actions=("go",),
        transitions={
            "s0": {"go": {"done": 1.0}},
            "orphan": {"go": {"done": 1.0}},
        },
        labels={},
        initial="s0",
        sink="done",
    )
    report = m.validate()
    assert report.ok
    assert any("orphan" in w and "unreachable" in w for w in report.warnings)


def test_improper_policy_hazard_warned():
    report = loopy().validate()
    assert report.ok
    assert any("improper" in w for w in report.warnings)
    assert not any("improper" in w for w in coin().validate().warnings)


def test_constructor_rejects_broken_references():
    with pytest.raises(MdpError, match="duplicate"):
        Tlmdp(("s0", "s0"), ("a",), {}, {}, "s0", "s0")
    with pytest.raises(MdpError, match="unknown action"):
        Tlmdp(
            ("s0", "done"),
            ("a",),
            {"s0": {"zz": {"done": 1.0}}},
            {},
            "s0",
            "done",
        )
    with pytest.raises(MdpError, match="unknown state"):
        Tlmdp(
            ("s0", "done"),
            ("a",),
            {"s0": {"a": {"nope": 1.0}}},
            {},
            "s0",
            "done",
        )
    with pytest.raises(MdpError, match="empty distribution"):
        Tlmdp(
            ("s0", "done"),
            ("a",),
            {"s0": {"a": {"done": 0.0}}},
            {},
            "s0",
            "done",
        )
    with pytest.raises(MdpError, match="not a state"):
        Tlmdp(("s0", "done"), ("a",), {}, {}, "s0", "zz")


def test_dead_ends_normalized_into_sink():
    # "stuck" has no actions: it gets a fresh action straight to the sink
    m = Tlmdp(
        states=("s0", "stuck", "done"),
        actions=("go",),
        transitions={"s0": {"go": {"stuck": 1.0}}},
        labels={"s0": set(), "stuck": {"x"}},
        initial="s0",
        sink="done",
    )
    assert m.normalized_states == ("stuck",)
    assert m.validate().ok
    assert m.state_actions("stuck") == ("end",)
    policy = MemorylessPolicy.deterministic({"s0": "go", "stuck": "end"})
    path = m.rollout(policy, rng=0)
    assert path.terminated
    assert path.states == ("s0", "stuck", "done")
    assert path.trace == (frozenset(), frozenset({"x"}), None)
    assert path.word == (frozenset(), frozenset({"x"}))


def test_normalization_avoids_action_name_clash():
    m = Tlmdp(
        states=("s0", "stuck", "done"),
        actions=("end",),
        transitions={"s0": {"end": {"stuck": 1.0}}},
        labels={},
        initial="s0",
        sink="done",
    )
    assert m.state_actions("stuck") == ("end_",)


def test_is_proper_basic():
    m = loopy()
    assert m.is_proper(MemorylessPolicy.deterministic({"s0": "go"}))
    assert not m.is_proper(MemorylessPolicy.deterministic({"s0": "stay"}))
    # randomizing over both actions leaks mass to the sink: proper
    assert m.is_proper(MemorylessPolicy({"s0": {"stay": 0.9, "go": 0.1}}))


def test_policy_validation_errors():
    m = loopy()
    with pytest.raises(MdpError, match="does not cover"):
        m.is_proper(MemorylessPolicy({}))
    with pytest.raises(MdpError, match="unavailable"):
        m.is_proper(MemorylessPolicy.deterministic({"s0": "jump"}))
    with pytest.raises(MdpError, match="sum"):
        m.is_proper(MemorylessPolicy({"s0": {"go": 0.5}}))


def test_absorption_deterministic_chain():
    m = two_state()
    policy = MemorylessPolicy.deterministic({"s0": "go"})
    probs = m.absorption_probabilities(policy, [{"s0"}])
    assert probs.tolist() == [1.0]


def test_absorption_fair_coin():
    m = coin()
    policy = MemorylessPolicy.deterministic(
        {"s0": "flip", "heads": "stop", "tails": "stop"}
    )
    probs = m.absorption_probabilities(policy, [{"heads"}, {"tails"}])
    assert np.allclose(probs, [0.5, 0.5], atol=1e-12)
    # events partition the pre-sink states: masses sum to one
    assert abs(probs.sum() - 1.0) < 1e-12


def test_absorption_requires_proper_policy():
    m = loopy()
    with pytest.raises(ImproperPolicyError):
        m.absorption_probabilities(
            MemorylessPolicy.deterministic({"s0": "stay"}), [{"s0"}]
        )


def test_absorption_matches_monte_carlo():
    rng = np.random.default_rng(19)
    m = random_tlmdp(rng, n_states=5, allow_traps=False)
    policy = random_policy(rng, m)
    assert m.is_proper(policy)
    targets = [{"s0", "s2"}, {"s1", "s3"}]
    exact = m.absorption_probabilities(policy, targets)
    n = 20_000
    hits = np.zeros(2)
    for k in range(n):
        path = m.rollout(policy, rng=np.random.default_rng(1000 + k), max_steps=500)
        assert path.terminated
        last = path.states[-2]
        for j, event in enumerate(targets):
            if last in event:
                hits[j] += 1
    freq = hits / n
    sigma = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / n)
    assert np.all(np.abs(freq - exact) <= 3 * sigma + 1e-9)


def test_absorption_on_random_proper_policies_partitions_mass():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(40):
        m = random_tlmdp(rng)
        policy = random_policy(rng, m)
        if not m.is_proper(policy):
            with pytest.raises(ImproperPolicyError):
                m.absorption_probabilities(policy, [set(m.states)])
            continue
        non_sink = [s for s in m.states if s != m.sink]
        probs = m.absorption_probabilities(policy, [{s} for s in non_sink])
        assert np.all(probs >= -1e-12)
        assert abs(probs.sum() - 1.0) < 1e-9
        checked += 1
    assert checked >= 10


def test_rollout_reproducible_and_truncation_flagged():
    m = loopy()
    policy = MemorylessPolicy({"s0": {"stay": 0.7, "go": 0.3}})
    p1 = m.rollout(policy, rng=42)
    p2 = m.rollout(policy, rng=42)
    assert p1 == p2
    stuck = m.rollout(MemorylessPolicy.deterministic({"s0": "stay"}), rng=0, max_steps=7)
    assert not stuck.terminated
    assert len(stuck.actions) == 7
    assert None not in stuck.trace


def test_rollout_termination_frequency_grows():
    m = loopy()
    policy = MemorylessPolicy({"s0": {"stay": 0.5, "go": 0.5}})
    short = sum(
        m.rollout(policy, rng=np.random.default_rng(k), max_steps=2).terminated
        for k in range(300)
    )
    long = sum(
        m.rollout(policy, rng=np.random.default_rng(k), max_steps=60).terminated
        for k in range(300)
    )
    assert long == 300  # P(not done in 60 steps) ~ 1e-18
    assert short < 300


def test_trace_has_empty_word_only_at_the_end():
    m = coin()
    policy = MemorylessPolicy.deterministic(
        {"s0": "flip", "heads": "stop", "tails": "stop"}
    )
    for k in range(5):
        path = m.rollout(policy, rng=k)
        assert path.terminated
        assert path.trace[-1] is None
        assert all(lab is not None for lab in path.trace[:-1])
