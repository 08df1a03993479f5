"""Command-line front end.

Subcommands cover the pipeline end to end: ``scenario`` materializes
instances as model files, ``build`` compiles model files into a product
artifact, ``solve`` runs the scalarized sweep and writes the CSV report,
``evaluate`` replays a stored policy, ``compare`` cross-checks report
rows for dominance, and ``oracle`` brute-force-verifies small instances.

Exit codes are scriptable: 0 success, 2 input/parse/validation error,
3 solver or verification failure, 4 improper policy, 5 enumeration cap
exceeded.  Timing is printed per phase on stdout and deliberately kept
out of the CSV so reports are byte-for-byte reproducible under a fixed
seed.  ``PREFMDP_WORKERS`` sets the default thread count for the solve
sweep.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from ._linsys import SolverError
from .mdp import ImproperPolicyError, MdpError, Tlmdp
from .modelfile import (
    ModelFileError,
    load_garden_config,
    load_model,
    load_policy,
    load_product,
    load_report,
    load_weights,
    write_model,
    write_policy,
    write_product,
    write_report,
)
from .momdp import (
    VI_TOL,
    Momdp,
    MomdpError,
    WeightVector,
    evaluate_policy,
    pareto_dominates,
    pareto_front,
    sample_weights,
)
from .oracle import CapError, OracleError, check_theorem1, enumerate_solutions
from .order import Dominance, OrderError, PartialOrder, dominates_weak_stochastic
from .pdfa import Pdfa, PdfaError
from .product import ProductError, ProductMdp, build_product
from .scenarios import (
    MINI_PRESETS,
    ScenarioError,
    build_garden,
    large_garden_config,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_POLICY = 4
EXIT_CAP = 5

IDENTITY_TOL = 1e-9
WORKERS_ENV = "PREFMDP_WORKERS"


class _Timings:
    """Phase stopwatch; printed on stdout, never written into reports."""

    def __init__(self):
        self.phases: list[tuple[str, float]] = []

    def time(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        self.phases.append((name, time.perf_counter() - start))
        return result

    def emit(self) -> None:
        for name, seconds in self.phases:
            print(f"timing: {name} {seconds:.3f}s")


def _fmt_vec(values) -> str:
    return "[" + ", ".join(f"{float(v):.6f}" for v in values) + "]"


def _mdp_transition_count(mdp: Tlmdp) -> int:
    return sum(
        len(dist) for rows in mdp.transitions.values() for dist in rows.values()
    )


def _default_workers() -> int | None:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return None
    try:
        count = int(raw)
    except ValueError:
        raise ModelFileError(
            f"{WORKERS_ENV} must be an integer, got {raw!r}"
        ) from None
    if count < 1:
        raise ModelFileError(f"{WORKERS_ENV} must be positive, got {count}")
    return count


def _load_both_sections(
    paths: list[str],
) -> tuple[Tlmdp, Pdfa]:
    """MDP and PDFA from one combined file or two single-section files."""
    mdp = pdfa = None
    for path in paths:
        m, p = load_model(path)
        if m is not None:
            if mdp is not None:
                raise ModelFileError("more than one mdp section supplied")
            mdp = m
        if p is not None:
            if pdfa is not None:
                raise ModelFileError("more than one pdfa section supplied")
            pdfa = p
    if mdp is None:
        raise ModelFileError("no mdp section found in the given files")
    if pdfa is None:
        raise ModelFileError("no pdfa section found in the given files")
    return mdp, pdfa


def _load_product_any(path: str, timings: _Timings) -> ProductMdp:
    """Product from an artifact, or built on the fly from a model file."""
    with open(path, "rb") as fh:
        head = fh.read(1)
    if head == b"{":
        return timings.time("parse", load_product, path)
    mdp, pdfa = timings.time("parse", _load_both_sections, [path])
    return timings.time("build", build_product, mdp, pdfa)


def _order_from_reach(objectives, reach: np.ndarray) -> PartialOrder:
    weak = [
        (objectives[j], objectives[i])
        for i in range(len(objectives))
        for j in range(len(objectives))
        if reach[i, j]
    ]
    return PartialOrder(objectives, weak=weak)


# -- build ----------------------------------------------------------------


def cmd_build(args) -> int:
    timings = _Timings()
    mdp, pdfa = timings.time("parse", _load_both_sections, args.model)
    product = timings.time("build", build_product, mdp, pdfa)
    write_product(args.output, product)
    print(f"mdp: {len(mdp.states)} states, {_mdp_transition_count(mdp)} transitions")
    print(f"pdfa: {len(pdfa.states)} states, {pdfa.n_classes} classes")
    print(
        f"product: {len(product.states)} states, "
        f"{product.sparse.n_transitions} transitions"
    )
    per_class = ", ".join(
        f"{name} {int(np.sum(product.terminal_class == i))}"
        for i, name in enumerate(product.class_names)
    )
    terminal_total = int(np.sum(product.terminal_class >= 0))
    print(f"terminal states: {terminal_total} ({per_class})")
    print(f"artifact: {args.output}")
    timings.emit()
    return EXIT_OK


# -- solve ----------------------------------------------------------------


def _requested_weights(args, n_objectives: int) -> tuple[list[WeightVector], str]:
    sources = [
        args.weights is not None,
        bool(args.weight),
        args.num_weights is not None,
    ]
    if sum(sources) > 1:
        raise ModelFileError(
            "give exactly one of --weights, --weight or --num-weights"
        )
    if args.weights is not None:
        return load_weights(args.weights), f"file {args.weights}"
    if args.weight:
        out = []
        for text in args.weight:
            try:
                out.append(WeightVector.of(float(c) for c in text.split(",")))
            except (ValueError, MomdpError) as exc:
                raise ModelFileError(f"bad --weight {text!r}: {exc}") from None
        return out, "explicit"
    n = 10 if args.num_weights is None else args.num_weights
    if n < 1:
        raise ModelFileError("--num-weights must be positive")
    return (
        sample_weights(n, n_objectives, seed=args.seed),
        f"sampled (seed {args.seed})",
    )


def cmd_solve(args) -> int:
    timings = _Timings()
    product = _load_product_any(args.product, timings)
    momdp = Momdp(product)
    names = list(product.class_names)
    try:
        weights, source = _requested_weights(args, len(names))
    except MomdpError as exc:
        raise ModelFileError(str(exc)) from None
    for w in weights:
        momdp.check_weight(w)
    workers = args.workers if args.workers is not None else _default_workers()
    print(
        f"product: {len(product.states)} states, "
        f"{product.sparse.n_transitions} transitions, "
        f"{len(names)} objectives ({', '.join(names)})"
    )
    print(f"requested weights: {len(weights)}, {source}")
    try:
        front = timings.time(
            "solve", pareto_front, momdp, weights, args.tol, workers=workers
        )
    except MomdpError as exc:
        # a dominated pair in the deduplicated front is a solver failure,
        # not an input problem
        raise SolverError(str(exc)) from None
    print(
        f"front size: {len(front)} "
        f"({len(weights) - len(front)} duplicate solves merged)"
    )
    print(f"mutual nondominance: confirmed (eps {1e-9:g})")

    gap = max(float(sol.identity_gap) for sol in front)
    if gap > IDENTITY_TOL:
        raise SolverError(
            f"consistency identity violated: max |value - R outcome| = {gap:.3e} "
            f"> {IDENTITY_TOL:g}"
        )
    print(f"identity check: max |value - R outcome| = {gap:.3e} <= {IDENTITY_TOL:g}")

    front_of: dict[tuple[float, ...], int] = {}
    for k, sol in enumerate(front):
        for w in (sol.weight, *sol.merged_weights):
            front_of[w.components] = k
    for k, sol in enumerate(front):
        hits = 1 + len(sol.merged_weights)
        print(
            f"front {k}: value {_fmt_vec(sol.value)} "
            f"outcome {_fmt_vec(sol.outcome_probs)} ({hits} weight(s))"
        )

    if args.output is not None:
        rows = [
            (w.array, front[front_of[w.components]].value,
             front[front_of[w.components]].outcome_probs,
             front_of[w.components])
            for w in weights
        ]
        metadata = {
            "command": "solve",
            "tol": repr(args.tol),
            "requested": str(len(weights)),
            "front_size": str(len(front)),
            "identity_gap": f"{gap:.3e}",
            "weights_source": source,
        }
        if args.seed is not None and source.startswith("sampled"):
            metadata["seed"] = str(args.seed)
        write_report(args.output, names, product.class_reach.astype(int),
                     rows, metadata)
        print(f"report: {args.output}")
    if args.policies is not None:
        os.makedirs(args.policies, exist_ok=True)
        for k, sol in enumerate(front):
            path = os.path.join(args.policies, f"policy_{k:03d}.yaml")
            write_policy(path, sol.policy, product)
        print(f"policies: {len(front)} file(s) in {args.policies}")
    timings.emit()
    return EXIT_OK


# -- evaluate -------------------------------------------------------------


def cmd_evaluate(args) -> int:
    timings = _Timings()
    product = _load_product_any(args.product, timings)
    policy = timings.time("parse-policy", load_policy, args.policy)
    momdp = Momdp(product)
    solution = timings.time("solve", evaluate_policy, momdp, policy)
    gap = float(solution.identity_gap)
    if gap > IDENTITY_TOL:
        raise SolverError(
            f"consistency identity violated: |value - R outcome| = {gap:.3e} "
            f"> {IDENTITY_TOL:g}"
        )
    names = list(product.class_names)
    print(f"objectives: {', '.join(names)}")
    print(f"value:   {_fmt_vec(solution.value)}")
    print(f"outcome: {_fmt_vec(solution.outcome_probs)}")
    print(f"identity check: |value - R outcome| = {gap:.3e} <= {IDENTITY_TOL:g}")
    if args.output is not None:
        with open(args.output, "w") as fh:
            fh.write("# prefmdp-evaluation v1\n")
            fh.write("objective,value,outcome_prob\n")
            for i, name in enumerate(names):
                fh.write(
                    f"{name},{solution.value[i]:.6f},"
                    f"{solution.outcome_probs[i]:.6f}\n"
                )
        print(f"evaluation: {args.output}")
    timings.emit()
    return EXIT_OK


# -- compare --------------------------------------------------------------


_VERDICT_CHAR = {
    Dominance.DOMINATES: ">",
    Dominance.DOMINATED: "<",
    Dominance.INCOMPARABLE_OR_EQUAL: ".",
}


def cmd_compare(args) -> int:
    report = load_report(args.report)
    names = list(report.objectives)
    n_rows = len(report.front_ids)
    print(
        f"report: {n_rows} rows, {len(names)} objectives ({', '.join(names)})"
    )
    order = _order_from_reach(names, report.reach)
    dists = [
        {name: float(p) for name, p in zip(names, row)}
        for row in report.outcome_probs
    ]
    value_verdicts = {}
    outcome_verdicts = {}
    for i in range(n_rows):
        for j in range(n_rows):
            if i == j:
                continue
            value_verdicts[(i, j)] = pareto_dominates(
                report.values[i], report.values[j], eps=args.eps
            )
            outcome_verdicts[(i, j)] = dominates_weak_stochastic(
                dists[i], dists[j], order, eps=args.eps
            )
    print(f"pareto dominance on values (row vs column, eps {args.eps:g}):")
    for i in range(n_rows):
        cells = " ".join(
            "=" if i == j else _VERDICT_CHAR[value_verdicts[(i, j)]]
            for j in range(n_rows)
        )
        print(f"  row {i:>3}: {cells}")
    agree = sum(
        value_verdicts[key] is outcome_verdicts[key] for key in value_verdicts
    )
    print(
        f"weak-stochastic verdicts agree on {agree}/{len(value_verdicts)} "
        "ordered pairs"
    )
    for key in sorted(value_verdicts):
        if value_verdicts[key] is not outcome_verdicts[key]:
            i, j = key
            print(
                f"  disagreement ({i}, {j}): values {value_verdicts[key].value}, "
                f"outcomes {outcome_verdicts[key].value}"
            )
    equal_pairs = [
        (i, j)
        for i in range(n_rows)
        for j in range(i + 1, n_rows)
        if float(np.abs(report.values[i] - report.values[j]).max()) <= args.eps
    ]
    if equal_pairs:
        listed = ", ".join(f"({i}, {j})" for i, j in equal_pairs)
        print(f"mutually equal rows (non-strict duplicates): {listed}")
    dominated = sorted(
        {
            j
            for (i, j), verdict in value_verdicts.items()
            if verdict is Dominance.DOMINATES
        }
        | {
            j
            for (i, j), verdict in outcome_verdicts.items()
            if verdict is Dominance.DOMINATES
        }
    )
    if dominated:
        for j in dominated:
            by_value = sorted(
                i for i in range(n_rows)
                if i != j and value_verdicts[(i, j)] is Dominance.DOMINATES
            )
            by_outcome = sorted(
                i for i in range(n_rows)
                if i != j and outcome_verdicts[(i, j)] is Dominance.DOMINATES
            )
            detail = []
            if by_value:
                detail.append(f"values: by row(s) {by_value}")
            if by_outcome:
                detail.append(f"outcomes: by row(s) {by_outcome}")
            print(f"dominated row {j} ({'; '.join(detail)})")
        print(f"dominated rows: {len(dominated)}")
    else:
        print("dominated rows: none")
    return EXIT_OK


# -- scenario -------------------------------------------------------------


def cmd_scenario(args) -> int:
    timings = _Timings()
    if (args.preset is None) == (args.config is None):
        raise ModelFileError("give exactly one of --preset or --config")
    if args.preset is not None:
        if args.preset == "large":
            config = large_garden_config()
        elif args.preset in MINI_PRESETS:
            config = MINI_PRESETS[args.preset]
        else:
            known = sorted(MINI_PRESETS) + ["large"]
            raise ModelFileError(
                f"unknown preset {args.preset!r}; available: {known}"
            )
        base = args.preset
    else:
        config = timings.time("parse", load_garden_config, args.config)
        base = os.path.splitext(os.path.basename(args.config))[0]
    mdp, pdfa = timings.time("build", build_garden, config)
    os.makedirs(args.out_dir, exist_ok=True)
    mdp_path = os.path.join(args.out_dir, f"{base}_mdp.yaml")
    pdfa_path = os.path.join(args.out_dir, f"{base}_pdfa.yaml")

    def _write() -> None:
        write_model(mdp_path, mdp=mdp)
        write_model(pdfa_path, pdfa=pdfa)

    timings.time("write", _write)
    print(
        f"scenario {base}: {len(mdp.states)} states, "
        f"{_mdp_transition_count(mdp)} transitions, "
        f"{len(mdp.propositions)} propositions"
    )
    print(f"pdfa: {len(pdfa.states)} states, {pdfa.n_classes} classes")
    print(f"files: {mdp_path} {pdfa_path}")
    timings.emit()
    return EXIT_OK


# -- oracle ---------------------------------------------------------------


def cmd_oracle(args) -> int:
    timings = _Timings()
    product = _load_product_any(args.product, timings)
    momdp = Momdp(product)
    enumeration = timings.time(
        "enumerate",
        enumerate_solutions,
        momdp,
        max_states=args.max_states,
        max_actions=args.max_actions,
        eps=args.eps,
    )
    print(
        f"policies: {enumeration.total_policies} deterministic, "
        f"{enumeration.proper_count} proper"
    )
    report = timings.time(
        "check", check_theorem1, momdp, enumeration, eps=args.eps
    )
    print(report.summary())
    timings.emit()
    if report.ok:
        print("oracle verdict: ok")
        return EXIT_OK
    print("oracle verdict: VIOLATIONS FOUND")
    return EXIT_SOLVER


# -- parser ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefmdp",
        description=(
            "Weak-stochastic nondominated policies for terminating MDPs "
            "with partially ordered temporal goals."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser(
        "build",
        help="compile model files into a product artifact",
        description=(
            "Parse MDP and PDFA model files (one combined document or two "
            "single-section documents), build the product, write it as a "
            "JSON artifact and print size statistics."
        ),
    )
    p_build.add_argument("model", nargs="+", help="model file(s) (YAML)")
    p_build.add_argument(
        "-o", "--output", required=True, help="artifact path to write (JSON)"
    )
    p_build.set_defaults(func=cmd_build)

    p_solve = sub.add_parser(
        "solve",
        help="scalarized sweep over weight vectors, CSV report",
        description=(
            "Solve one scalarized problem per weight vector, deduplicate "
            "into a front, confirm mutual nondominance and the "
            "value = R outcome identity, and optionally write the CSV "
            "report and the front's policies."
        ),
    )
    p_solve.add_argument(
        "product", help="product artifact (JSON) or combined model file"
    )
    p_solve.add_argument("--weights", help="weights file, one vector per line")
    p_solve.add_argument(
        "--weight",
        action="append",
        metavar="W1,W2,...",
        help="explicit weight vector (repeatable)",
    )
    p_solve.add_argument(
        "--num-weights", type=int, help="sample this many weight vectors"
    )
    p_solve.add_argument(
        "--seed", type=int, default=0, help="sampling seed (default 0)"
    )
    p_solve.add_argument(
        "--tol",
        type=float,
        default=VI_TOL,
        help=f"value-iteration tolerance (default {VI_TOL:g})",
    )
    p_solve.add_argument("-o", "--output", help="CSV report path")
    p_solve.add_argument(
        "--policies", help="directory for the front's policy files"
    )
    p_solve.add_argument(
        "--workers",
        type=int,
        help=f"solver threads (default ${WORKERS_ENV} or serial)",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_eval = sub.add_parser(
        "evaluate",
        help="evaluate a stored policy on a product",
        description=(
            "Replay a policy file against a product, print its value "
            "vector and outcome distribution, and verify the "
            "value = R outcome identity."
        ),
    )
    p_eval.add_argument(
        "product", help="product artifact (JSON) or combined model file"
    )
    p_eval.add_argument("policy", help="policy file (YAML)")
    p_eval.add_argument("-o", "--output", help="evaluation CSV path")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser(
        "compare",
        help="pairwise dominance checks over a report's rows",
        description=(
            "Read a solve report and print the pairwise Pareto-dominance "
            "matrix on value vectors plus weak-stochastic verdicts on "
            "outcome distributions, flagging dominated rows."
        ),
    )
    p_cmp.add_argument("report", help="CSV report from the solve command")
    p_cmp.add_argument(
        "--eps",
        type=float,
        default=1e-6,
        help=(
            "dominance tolerance (default 1e-6, matching the report's "
            "six-decimal columns)"
        ),
    )
    p_cmp.set_defaults(func=cmd_compare)

    p_scen = sub.add_parser(
        "scenario",
        help="materialize a garden instance as model files",
        description=(
            "Build a pollination-garden instance from a preset or a YAML "
            "config and write its MDP and PDFA model files."
        ),
    )
    p_scen.add_argument(
        "--preset",
        help=f"preset name: {', '.join(sorted(MINI_PRESETS) + ['large'])}",
    )
    p_scen.add_argument("--config", help="garden config file (YAML)")
    p_scen.add_argument(
        "--out-dir", default=".", help="output directory (default .)"
    )
    p_scen.set_defaults(func=cmd_scenario)

    p_oracle = sub.add_parser(
        "oracle",
        help="brute-force verification on a small product",
        description=(
            "Enumerate every proper deterministic policy, then check that "
            "Pareto dominance on value vectors and weak-stochastic "
            "dominance on outcome distributions tell the same story."
        ),
    )
    p_oracle.add_argument(
        "product", help="product artifact (JSON) or combined model file"
    )
    p_oracle.add_argument(
        "--max-states",
        type=int,
        default=12,
        help="cap on free (non-terminal) product states (default 12)",
    )
    p_oracle.add_argument(
        "--max-actions",
        type=int,
        default=3,
        help="cap on actions per state (default 3)",
    )
    p_oracle.add_argument(
        "--eps", type=float, default=1e-9, help="dominance tolerance"
    )
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ImproperPolicyError as exc:
        print(f"error: improper policy: {exc}", file=sys.stderr)
        return EXIT_POLICY
    except (SolverError, OracleError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (
        ModelFileError,
        MdpError,
        PdfaError,
        ProductError,
        ScenarioError,
        MomdpError,
        OrderError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
