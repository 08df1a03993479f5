"""Garden pollination case study at configurable scale.

A bee robot with a finite battery flies over a grid garden pollinating
flowers of up to three types, while a bird roams a region of the grid
(co-location forces the robot to hide) and rain comes and goes in
streaks (no pollination while raining).  Labels report the cumulative
set of pollinated types, which the accompanying preference automaton
classifies into the four outcomes: tulips first then another type (p1,
best), two types not starting with tulips (p2), tulips only (p3), at
most one non-tulip type (p4, worst); p2 and p3 are incomparable.

Construction notes, since the environment is reconstructed rather than
copied: the bird chain defaults to a uniform random walk over its region
with a self-loop; stochastic actuation puts the leftover 0.1 mass on
staying; the rain-onset probability resets to its first value when an
episode ends; pollination happens on arrival in a flower cell (not at
the initial placement, and not on the final arrival that empties the
battery).  States that differ only in ways no future label can reflect
are collapsed: once the battery reaches one step or the task completes,
the model moves to a terminal announcement state carrying the final
label, then terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .mdp import Tlmdp
from .pdfa import Pdfa

__all__ = [
    "FLOWER_TYPES",
    "GardenConfig",
    "MINI_PRESETS",
    "ScenarioError",
    "build_garden",
    "build_garden_mini",
    "garden_pdfa",
    "large_garden_config",
]

Cell = tuple[int, int]

FLOWER_TYPES = ("tulip", "daisy", "orchid")
ALL_ACTIONS = ("N", "S", "E", "W", "T")

MOVES = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0)}
LATERALS = {"N": ("E", "W"), "S": ("E", "W"), "E": ("N", "S"), "W": ("N", "S")}


class ScenarioError(ValueError):
    """Raised for invalid garden configurations or unknown presets."""


@dataclass(frozen=True)
class GardenConfig:
    """Everything that determines one garden instance.

    Cells are (column, row) pairs with (0, 0) the bottom-left corner.
    The seed only matters for the "random" bird chain variant; the
    default "uniform" chain is seed-free.
    """

    width: int
    height: int
    tulips: tuple[Cell, ...] = ()
    daisies: tuple[Cell, ...] = ()
    orchids: tuple[Cell, ...] = ()
    start: Cell = (0, 0)
    battery: int = 12
    actions: tuple[str, ...] = ALL_ACTIONS
    actuation: str = "stochastic"
    success_prob: float = 0.7
    slip_prob: float = 0.1
    bird_region: tuple[Cell, ...] = ()
    bird_start: Cell | None = None
    bird_self_loop: float = 0.25
    bird_chain: str = "uniform"
    rain: bool = True
    rain_onset_increment: float = 0.2
    rain_stop_schedule: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    terminate_on_completion: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ScenarioError("grid dimensions must be positive")
        if self.battery < 1:
            raise ScenarioError("battery horizon must be at least 1")
        for name, cells in (
            ("tulip", self.tulips),
            ("daisy", self.daisies),
            ("orchid", self.orchids),
        ):
            for cell in cells:
                if not self._in_grid(cell):
                    raise ScenarioError(f"{name} cell {cell} is outside the grid")
        flat = list(self.tulips) + list(self.daisies) + list(self.orchids)
        if len(set(flat)) != len(flat):
            raise ScenarioError("a cell can hold at most one flower")
        if not self.tulips or not (self.daisies or self.orchids):
            raise ScenarioError(
                "the garden needs tulips and at least one other flower type"
            )
        if not self._in_grid(self.start):
            raise ScenarioError(f"start cell {self.start} is outside the grid")
        if not self.actions or any(a not in ALL_ACTIONS for a in self.actions):
            raise ScenarioError(f"actions must be a nonempty subset of {ALL_ACTIONS}")
        if len(set(self.actions)) != len(self.actions):
            raise ScenarioError("duplicate actions")
        if self.actuation not in ("deterministic", "stochastic"):
            raise ScenarioError(f"unknown actuation mode {self.actuation!r}")
        if not 0 < self.success_prob <= 1 or self.slip_prob < 0:
            raise ScenarioError("actuation probabilities out of range")
        if self.success_prob + 2 * self.slip_prob > 1 + 1e-12:
            raise ScenarioError("success plus two side slips exceeds probability 1")
        for cell in self.bird_region:
            if not self._in_grid(cell):
                raise ScenarioError(f"bird cell {cell} is outside the grid")
        if len(set(self.bird_region)) != len(self.bird_region):
            raise ScenarioError("duplicate bird region cells")
        if self.bird_start is not None and self.bird_start not in self.bird_region:
            raise ScenarioError("bird start must lie in the bird region")
        if not 0 <= self.bird_self_loop < 1:
            raise ScenarioError("bird self-loop probability must be in [0, 1)")
        if self.bird_chain not in ("uniform", "random"):
            raise ScenarioError(f"unknown bird chain kind {self.bird_chain!r}")
        if self.rain:
            if not 0 < self.rain_onset_increment <= 1:
                raise ScenarioError("rain onset increment must be in (0, 1]")
            sched = self.rain_stop_schedule
            if not sched or any(not 0 <= p <= 1 for p in sched):
                raise ScenarioError("rain stop schedule must be probabilities")
            if sched[-1] != 1.0:
                raise ScenarioError("rain stop schedule must end with 1.0")

    def _in_grid(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    @property
    def flower_at(self) -> dict[Cell, str]:
        out: dict[Cell, str] = {}
        for name, cells in (
            ("tulip", self.tulips),
            ("daisy", self.daisies),
            ("orchid", self.orchids),
        ):
            for cell in cells:
                out[cell] = name
        return out

    @property
    def flower_types_present(self) -> tuple[str, ...]:
        present = []
        for name, cells in (
            ("tulip", self.tulips),
            ("daisy", self.daisies),
            ("orchid", self.orchids),
        ):
            if cells:
                present.append(name)
        return tuple(present)


def garden_pdfa(flower_types: Iterable[str] = FLOWER_TYPES) -> Pdfa:
    """The six-state preference automaton for the garden outcomes.

    Symbols are cumulative pollinated-type sets.  q0: nothing yet; q1:
    tulips only; q2: tulips were first, then more (p1); q3: exactly one
    non-tulip type; q4: two or more types not led by tulips (p2); q5:
    evolutions no garden trace produces (shrinking or jumping sets),
    kept least-preferred.  Every state is idempotent per symbol, which
    is what makes the scenario's terminal collapse sound.
    """
    types = tuple(flower_types)
    if "tulip" not in types or len(types) < 2:
        raise ScenarioError(
            "the preference structure needs tulips and at least one other type"
        )
    if len(set(types)) != len(types):
        raise ScenarioError("duplicate flower types")
    states = ("q0", "q1", "q2", "q3", "q4", "q5")
    symbols: list[frozenset] = []
    for bits in range(2 ** len(types)):
        symbols.append(
            frozenset(t for i, t in enumerate(types) if bits >> i & 1)
        )
    delta: dict[tuple[str, frozenset], str] = {}
    for sym in symbols:
        has_tulip = "tulip" in sym
        if not sym:
            delta[("q0", sym)] = "q0"
        elif sym == frozenset({"tulip"}):
            delta[("q0", sym)] = "q1"
        elif len(sym) == 1:
            delta[("q0", sym)] = "q3"
        else:
            delta[("q0", sym)] = "q5"
        if sym == frozenset({"tulip"}):
            delta[("q1", sym)] = "q1"
        elif has_tulip and len(sym) >= 2:
            delta[("q1", sym)] = "q2"
        else:
            delta[("q1", sym)] = "q5"
        if len(sym) == 1 and not has_tulip:
            delta[("q3", sym)] = "q3"
        elif len(sym) >= 2:
            delta[("q3", sym)] = "q4"
        else:
            delta[("q3", sym)] = "q5"
        for absorbing in ("q2", "q4", "q5"):
            delta[(absorbing, sym)] = absorbing
    return Pdfa(
        states=states,
        propositions=types,
        delta=delta,
        initial="q0",
        partition=({"q2"}, {"q4"}, {"q1"}, {"q0", "q3", "q5"}),
        edges=(("p4", "p2"), ("p4", "p3"), ("p2", "p1"), ("p3", "p1")),
        class_names=("p1", "p2", "p3", "p4"),
    )


def _pol_letters(pol: frozenset) -> str:
    return "".join(sorted(t[0] for t in pol)) or "0"


def _rain_phases(config: GardenConfig):
    """Phase list and per-phase successor distribution.

    Dry phase k rains next with min(k * increment, 1); wet phase j stops
    with the j-th schedule entry (the last entry is 1, so episodes end).
    A finished episode resets the dry counter.
    """
    if not config.rain:
        return {None: {None: 1.0}}, {None: False}
    inc = config.rain_onset_increment
    n_dry = 1
    while n_dry * inc < 1.0 - 1e-12:
        n_dry += 1
    rows: dict[str, dict[str, float]] = {}
    raining: dict[str, bool] = {}
    for k in range(1, n_dry + 1):
        p = min(k * inc, 1.0)
        row = {"w1": p}
        if p < 1.0:
            row[f"d{k + 1}"] = 1.0 - p
        rows[f"d{k}"] = row
        raining[f"d{k}"] = False
    sched = config.rain_stop_schedule
    for j, p in enumerate(sched, start=1):
        row = {"d1": p}
        if p < 1.0:
            row[f"w{j + 1}"] = 1.0 - p
        rows[f"w{j}"] = row
        raining[f"w{j}"] = True
    return rows, raining


def _bird_rows(config: GardenConfig) -> dict[Cell | None, dict[Cell | None, float]]:
    """Per-cell successor distribution of the bird chain."""
    region = sorted(config.bird_region)
    if not region:
        return {None: {None: 1.0}}
    cells = set(region)
    rng = np.random.default_rng(config.seed)
    rows: dict[Cell | None, dict[Cell | None, float]] = {}
    for cell in region:
        x, y = cell
        neighbors = [
            c
            for c in ((x, y + 1), (x, y - 1), (x + 1, y), (x - 1, y))
            if c in cells
        ]
        if config.bird_chain == "random":
            probs = rng.dirichlet(np.ones(1 + len(neighbors)))
            row = {cell: float(probs[0])}
            for c, p in zip(neighbors, probs[1:]):
                row[c] = float(p)
        elif not neighbors:
            row = {cell: 1.0}
        else:
            stay = config.bird_self_loop
            step = (1.0 - stay) / len(neighbors)
            row = {c: step for c in neighbors}
            if stay > 0:
                row[cell] = stay
        rows[cell] = row
    return rows


def _robot_rows(
    config: GardenConfig,
) -> dict[Cell, dict[str, dict[Cell, float]]]:
    """Per-cell, per-action movement outcomes (ignoring hiding)."""

    def clamp(cell: Cell, action: str) -> Cell:
        dx, dy = MOVES[action]
        target = (cell[0] + dx, cell[1] + dy)
        return target if config._in_grid(target) else cell

    rows: dict[Cell, dict[str, dict[Cell, float]]] = {}
    for x in range(config.width):
        for y in range(config.height):
            cell = (x, y)
            per_action: dict[str, dict[Cell, float]] = {}
            for action in config.actions:
                if action == "T":
                    per_action[action] = {cell: 1.0}
                elif config.actuation == "deterministic":
                    per_action[action] = {clamp(cell, action): 1.0}
                else:
                    out: dict[Cell, float] = {}
                    success = config.success_prob
                    slip = config.slip_prob
                    out[clamp(cell, action)] = success
                    for side in LATERALS[action]:
                        dest = clamp(cell, side)
                        out[dest] = out.get(dest, 0.0) + slip
                    residual = 1.0 - success - 2 * slip
                    if residual > 0:
                        out[cell] = out.get(cell, 0.0) + residual
                    per_action[action] = out
            rows[cell] = per_action
    return rows


def build_garden(config: GardenConfig) -> tuple[Tlmdp, Pdfa]:
    """Materialize one garden instance as a terminating MDP plus its PDFA.

    States are explored forward from the start, so only reachable
    configurations appear.  Arrival in a flower cell pollinates it
    unless it is raining, the bird shares the cell, or the battery just
    ran out.  Once the battery drops to one step (nothing can change the
    final label any more) or the task completes, the state collapses to
    a terminal announcement state that carries the final label and then
    terminates.
    """
    pdfa = garden_pdfa(config.flower_types_present)
    flower_at = config.flower_at
    all_types = frozenset(config.flower_types_present)
    rain_rows, raining = _rain_phases(config)
    bird_rows = _bird_rows(config)
    robot_rows = _robot_rows(config)
    start_phase = "d1" if config.rain else None
    start_bird = (
        None
        if not config.bird_region
        else (config.bird_start or sorted(config.bird_region)[0])
    )

    def live_id(robot: Cell, bird: Cell | None, phase: str | None,
                pol: frozenset, k: int) -> str:
        parts = [f"x{robot[0]}y{robot[1]}"]
        if bird is not None:
            parts.append(f"b{bird[0]}.{bird[1]}")
        if phase is not None:
            parts.append(phase)
        parts.append(f"P{_pol_letters(pol)}")
        parts.append(f"k{k}")
        return "_".join(parts)

    def end_id(pol: frozenset) -> str:
        return f"end_P{_pol_letters(pol)}"

    def arrive(robot: Cell, bird: Cell | None, phase: str | None,
               pol: frozenset, k: int):
        """Destination after one step; k is the battery after the step."""
        pol_next = pol
        kind = flower_at.get(robot)
        if (
            k >= 1
            and kind is not None
            and kind not in pol
            and not raining[phase]
            and bird != robot
        ):
            pol_next = pol | {kind}
        complete = config.terminate_on_completion and pol_next == all_types
        if k <= 1 or complete:
            return end_id(pol_next), None, pol_next
        key = (robot, bird, phase, pol_next, k)
        return live_id(*key), key, pol_next

    init_key = (config.start, start_bird, start_phase, frozenset(), config.battery)
    initial = live_id(*init_key)
    order: list[str] = [initial]
    labels: dict[str, frozenset] = {initial: frozenset()}
    transitions: dict[str, dict[str, dict[str, float]]] = {}
    queue: list[tuple[Cell, Cell | None, str | None, frozenset, int]] = [init_key]
    head = 0
    while head < len(queue):
        robot, bird, phase, pol, k = queue[head]
        head += 1
        sid = live_id(robot, bird, phase, pol, k)
        hiding = bird is not None and bird == robot
        per_action: dict[str, dict[str, float]] = {}
        for action in config.actions:
            moves = {robot: 1.0} if hiding else robot_rows[robot][action]
            dest_probs: dict[str, float] = {}
            for r_next, pr in moves.items():
                for b_next, pb in bird_rows[bird].items():
                    for ph_next, pw in rain_rows[phase].items():
                        dest, new_key, pol_dest = arrive(
                            r_next, b_next, ph_next, pol, k - 1
                        )
                        p = pr * pb * pw
                        dest_probs[dest] = dest_probs.get(dest, 0.0) + p
                        if dest not in labels:
                            order.append(dest)
                            labels[dest] = pol_dest
                            if new_key is not None:
                                queue.append(new_key)
            per_action[action] = dest_probs
        transitions[sid] = per_action

    sink = "done"
    states = tuple(order) + (sink,)
    # terminal announcement states carry no transitions here; the model
    # constructor normalizes them into single-step moves to the sink
    mdp = Tlmdp(
        states=states,
        actions=config.actions,
        transitions=transitions,
        labels=labels,
        initial=initial,
        sink=sink,
        propositions=config.flower_types_present,
    )
    return mdp, pdfa


MINI_PRESETS: dict[str, GardenConfig] = {
    # oracle-enumerable: 9 non-terminal product states, 81 policies
    "3x3": GardenConfig(
        width=3,
        height=3,
        tulips=((0, 1), (2, 0)),
        daisies=((1, 0), (1, 1)),
        start=(0, 0),
        battery=3,
        actions=("N", "E", "T"),
        actuation="stochastic",
        rain=False,
    ),
    # desk-scale integration instance with all three flower types,
    # rain and a bird
    "4x4": GardenConfig(
        width=4,
        height=4,
        tulips=((0, 1), (3, 0)),
        daisies=((1, 0), (2, 2)),
        orchids=((3, 3),),
        start=(0, 0),
        battery=5,
        actuation="stochastic",
        bird_region=((2, 0), (3, 0), (2, 1), (3, 1)),
        rain=True,
    ),
}


def build_garden_mini(preset: str) -> tuple[Tlmdp, Pdfa]:
    """Desk-scale presets preserving the four-class preference structure."""
    try:
        config = MINI_PRESETS[preset]
    except KeyError:
        raise ScenarioError(
            f"unknown preset {preset!r}; available: {sorted(MINI_PRESETS)}"
        ) from None
    return build_garden(config)


def large_garden_config(actuation: str = "deterministic") -> GardenConfig:
    """Full-scale layout.

    A 4 x 4 garden with two tulips, two daisies and an orchid, a
    three-cell bird patch in the south east and the default rain
    streaks.  The deterministic variant materializes to 11,620 MDP
    states and a product with roughly 14,000 states.
    """
    return GardenConfig(
        width=4,
        height=4,
        tulips=((0, 2), (2, 3)),
        daisies=((1, 2), (3, 2)),
        orchids=((3, 3),),
        start=(0, 0),
        battery=12,
        actuation=actuation,
        bird_region=((2, 0), (3, 0), (3, 1)),
        rain=True,
    )
