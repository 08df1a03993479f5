"""Exhaustive enumeration against the scalarized solver and the theory."""

import numpy as np
import pytest

from prefmdp.mdp import Tlmdp
from prefmdp.momdp import Momdp, evaluate_policy, sample_weights, solve_scalarized
from prefmdp.oracle import (
    CapError,
    OracleError,
    check_theorem1,
    enumerate_solutions,
    random_instance,
)
from prefmdp.pdfa import Pdfa
from prefmdp.product import build_product
from prefmdp.scenarios import build_garden_mini


@pytest.fixture(scope="module")
def garden_enum():
    m, a = build_garden_mini("3x3")
    mo = Momdp(build_product(m, a))
    return mo, enumerate_solutions(mo)


def test_garden_policy_count(garden_enum):
    mo, enum = garden_enum
    assert enum.total_policies == 81
    # the battery always drains, so every policy is proper
    assert enum.proper_count == 81
    assert enum.identity_gap <= 1e-9
    assert np.all(enum.values >= -1e-12) and np.all(enum.values <= 1 + 1e-12)
    assert len(enum.nondominated) >= 1


def test_enumeration_agrees_with_policy_evaluation(garden_enum):
    mo, enum = garden_enum
    for i in (0, len(enum.assignments) // 2, len(enum.assignments) - 1):
        sol = evaluate_policy(mo, enum.policy(i))
        assert sol.value == pytest.approx(enum.values[i], abs=1e-9)
        assert sol.outcome_probs == pytest.approx(enum.outcome_probs[i], abs=1e-9)


def test_scalarized_solver_matches_the_enumerated_optimum(garden_enum):
    mo, enum = garden_enum
    for w in sample_weights(8, 4, seed=2):
        arr = np.array(list(w))
        best = float(np.max(enum.values @ arr))
        sol = solve_scalarized(mo, w)
        assert float(sol.value @ arr) == pytest.approx(best, abs=1e-8)


def test_dominance_views_agree_on_the_garden(garden_enum):
    mo, enum = garden_enum
    report = check_theorem1(mo, enum)
    assert report.ok
    assert report.routes_coincide
    assert report.forward_holds and report.converse_holds
    assert report.n_policies == 81
    assert "agree" in report.summary()


@pytest.mark.parametrize("seed", range(12))
def test_random_instances_check_out(seed):
    mo = random_instance(seed)
    enum = enumerate_solutions(mo)
    assert enum.proper_count >= 1
    assert enum.identity_gap <= 1e-9
    report = check_theorem1(mo, enum)
    assert report.ok, report.mismatches
    for w in sample_weights(2, mo.n_objectives, seed=seed):
        arr = np.array(list(w))
        best = float(np.max(enum.values @ arr))
        sol = solve_scalarized(mo, w)
        assert float(sol.value @ arr) == pytest.approx(best, abs=1e-8)


def test_cap_refusal_names_the_counts():
    m, a = build_garden_mini("4x4")
    mo = Momdp(build_product(m, a))
    with pytest.raises(CapError, match="free states exceed"):
        enumerate_solutions(mo)
    try:
        enumerate_solutions(mo)
    except CapError as exc:
        assert exc.n_free == 612
        assert exc.max_states == 12


def test_no_proper_policy_is_an_error():
    m = Tlmdp(
        states=("s0", "done"),
        actions=("stay",),
        transitions={"s0": {"stay": {"s0": 1.0}}},
        labels={"s0": set()},
        initial="s0",
        sink="done",
    )
    a = Pdfa(
        states=("q",),
        propositions=(),
        delta={("q", frozenset()): "q"},
        initial="q",
        partition=({"q"},),
        edges=[],
    )
    mo = Momdp(build_product(m, a))
    with pytest.raises(OracleError, match="proper"):
        enumerate_solutions(mo)


def test_properness_filter_drops_trap_choices():
    # one state, two actions: looping is improper, leaving is proper
    m = Tlmdp(
        states=("s0", "done"),
        actions=("stay", "leave"),
        transitions={
            "s0": {"stay": {"s0": 1.0}, "leave": {"done": 1.0}},
        },
        labels={"s0": set()},
        initial="s0",
        sink="done",
    )
    a = Pdfa(
        states=("q",),
        propositions=(),
        delta={("q", frozenset()): "q"},
        initial="q",
        partition=({"q"},),
        edges=[],
    )
    mo = Momdp(build_product(m, a))
    enum = enumerate_solutions(mo)
    assert enum.total_policies == 2
    assert enum.proper_count == 1
    assert enum.values[0] == pytest.approx([1.0])
