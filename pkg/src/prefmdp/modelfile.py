"""File formats: model documents, product artifacts, policies, reports.

Model documents are versioned YAML with an ``mdp`` and/or ``pdfa``
section, strict about unknown keys so typos fail loudly.  Writing is
hand-rolled line emission (not a generic YAML dumper) so that equal
models produce byte-identical files; probabilities are emitted with
``repr`` and therefore parse back to the exact same float.  Product
artifacts are JSON carrying the flat sparse arrays.  Solution reports
are CSV with '#' metadata lines, values at fixed six decimals, and the
class-reachability matrix embedded so a report is self-describing.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
import yaml

from ._linsys import SparseMdp
from .mdp import MemorylessPolicy, Tlmdp
from .momdp import WeightVector
from .pdfa import Pdfa
from .product import ProductMdp
from .scenarios import GardenConfig

__all__ = [
    "MODEL_VERSION",
    "ModelFileError",
    "SolutionReport",
    "load_garden_config",
    "load_model",
    "load_policy",
    "load_product",
    "load_report",
    "load_weights",
    "write_model",
    "write_policy",
    "write_product",
    "write_report",
    "write_weights",
]

MODEL_VERSION = 1
MODEL_KIND = "prefmdp-model"
PRODUCT_KIND = "prefmdp-product"
POLICY_KIND = "prefmdp-policy"
REPORT_HEADER = "# prefmdp-report v1"


class ModelFileError(ValueError):
    """Malformed or mistyped model, artifact, policy or report file."""


def _q(value) -> str:
    """Double-quoted YAML scalar for a state/action/proposition name."""
    text = str(value)
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _seq(values) -> str:
    return "[" + ", ".join(_q(v) for v in values) + "]"


def _check_keys(section: str, mapping: dict, allowed: set[str],
                required: set[str]) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ModelFileError(
            f"unknown key {sorted(unknown)[0]!r} in section {section!r}"
        )
    missing = required - set(mapping)
    if missing:
        raise ModelFileError(
            f"section {section!r} is missing key {sorted(missing)[0]!r}"
        )


def write_model(path, mdp: Tlmdp | None = None, pdfa: Pdfa | None = None) -> None:
    """Emit a model document with the given sections, byte-stable."""
    if mdp is None and pdfa is None:
        raise ModelFileError("nothing to write: no mdp and no pdfa given")
    lines: list[str] = [f"version: {MODEL_VERSION}", f"kind: {MODEL_KIND}"]
    if mdp is not None:
        lines.append("mdp:")
        lines.append(f"  states: {_seq(mdp.states)}")
        lines.append(f"  actions: {_seq(mdp.actions)}")
        lines.append(f"  initial: {_q(mdp.initial)}")
        lines.append(f"  sink: {_q(mdp.sink)}")
        lines.append(f"  propositions: {_seq(mdp.propositions)}")
        lines.append("  labels:")
        for s in mdp.states:
            if s == mdp.sink:
                continue
            lines.append(f"    {_q(s)}: {_seq(sorted(mdp.label(s)))}")
        lines.append("  transitions:")
        for s, rows in mdp.transitions.items():
            for a, dist in rows.items():
                for t, p in dist.items():
                    lines.append(
                        f"    - [{_q(s)}, {_q(a)}, {_q(t)}, {p!r}]"
                    )
    if pdfa is not None:
        lines.append("pdfa:")
        lines.append(f"  states: {_seq(pdfa.states)}")
        lines.append(f"  propositions: {_seq(pdfa.propositions)}")
        lines.append("  alphabet:")
        for sym in pdfa.alphabet:
            lines.append(f"    - {_seq(sorted(sym))}")
        lines.append(f"  initial: {_q(pdfa.initial)}")
        lines.append("  transitions:")
        for q in pdfa.states:
            for sym in pdfa.alphabet:
                lines.append(
                    f"    - [{_q(q)}, {_seq(sorted(sym))}, "
                    f"{_q(pdfa.delta[(q, sym)])}]"
                )
        lines.append("  partition:")
        for i, name in enumerate(pdfa.class_names):
            block = sorted(
                q for q in pdfa.states if pdfa.class_of(q) == i
            )
            lines.append(f"    - name: {_q(name)}")
            lines.append(f"      states: {_seq(block)}")
        if pdfa.edges:
            lines.append("  edges:")
            for i, j in sorted(pdfa.edges):
                lines.append(
                    f"    - [{_q(pdfa.class_names[i])}, {_q(pdfa.class_names[j])}]"
                )
        else:
            lines.append("  edges: []")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_yaml(path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ModelFileError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: expected a mapping at the top level")
    return doc


def load_model(path) -> tuple[Tlmdp | None, Pdfa | None]:
    """Parse and validate a model document; returns its two sections."""
    doc = _parse_yaml(path)
    _check_keys("top level", doc, {"version", "kind", "mdp", "pdfa"},
                {"version", "kind"})
    if doc["version"] != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {doc['version']!r}")
    if doc["kind"] != MODEL_KIND:
        raise ModelFileError(f"unexpected document kind {doc['kind']!r}")
    mdp = pdfa = None
    if "mdp" in doc:
        sec = doc["mdp"]
        if not isinstance(sec, dict):
            raise ModelFileError("section 'mdp' must be a mapping")
        _check_keys(
            "mdp", sec,
            {"states", "actions", "initial", "sink", "propositions",
             "labels", "transitions"},
            {"states", "actions", "initial", "sink", "transitions"},
        )
        transitions: dict = {}
        for row in sec["transitions"]:
            if not (isinstance(row, list) and len(row) == 4):
                raise ModelFileError(
                    f"mdp transition rows are [src, action, dst, prob]; got {row!r}"
                )
            s, a, t, p = row
            dist = transitions.setdefault(s, {}).setdefault(a, {})
            if t in dist:
                raise ModelFileError(
                    f"duplicate mdp transition ({s!r}, {a!r}, {t!r})"
                )
            dist[t] = float(p)
        labels = {
            s: set(props) for s, props in (sec.get("labels") or {}).items()
        }
        mdp = Tlmdp(
            states=sec["states"],
            actions=sec["actions"],
            transitions=transitions,
            labels=labels,
            initial=sec["initial"],
            sink=sec["sink"],
            propositions=sec.get("propositions"),
        )
    if "pdfa" in doc:
        sec = doc["pdfa"]
        if not isinstance(sec, dict):
            raise ModelFileError("section 'pdfa' must be a mapping")
        _check_keys(
            "pdfa", sec,
            {"states", "propositions", "alphabet", "initial", "transitions",
             "partition", "edges", "default_state"},
            {"states", "propositions", "initial", "transitions",
             "partition", "edges"},
        )
        delta = {}
        for row in sec["transitions"]:
            if not (isinstance(row, list) and len(row) == 3):
                raise ModelFileError(
                    f"pdfa transition rows are [state, [props], next]; got {row!r}"
                )
            q, sym, q2 = row
            key = (q, frozenset(sym))
            if key in delta:
                raise ModelFileError(
                    f"duplicate pdfa transition ({q!r}, {sorted(sym)})"
                )
            delta[key] = q2
        partition = []
        names = []
        for block in sec["partition"]:
            if not isinstance(block, dict):
                raise ModelFileError("partition entries are mappings")
            _check_keys("pdfa.partition", block, {"name", "states"},
                        {"name", "states"})
            names.append(block["name"])
            partition.append(set(block["states"]))
        pdfa = Pdfa(
            states=sec["states"],
            propositions=sec["propositions"],
            delta=delta,
            initial=sec["initial"],
            partition=partition,
            edges=[tuple(e) for e in (sec["edges"] or [])],
            class_names=names,
            default_state=sec.get("default_state"),
        )
        if "alphabet" in sec:
            declared = {frozenset(sym) for sym in sec["alphabet"]}
            if declared != set(pdfa.alphabet):
                raise ModelFileError(
                    "declared alphabet disagrees with the proposition subsets"
                )
    return mdp, pdfa


def write_product(path, product: ProductMdp) -> None:
    """Persist a built product as a JSON artifact (models not included)."""
    sp = product.sparse
    doc = {
        "version": MODEL_VERSION,
        "kind": PRODUCT_KIND,
        "states": [[str(s), str(q)] for s, q in product.states],
        "action_names": [str(a) for a in product.action_names],
        "terminal_class": product.terminal_class.tolist(),
        "class_names": list(product.class_names),
        "class_reach": product.class_reach.astype(int).tolist(),
        "edges": sorted(list(e) for e in product.edges),
        "act_ptr": sp.act_ptr.tolist(),
        "sa_state": sp.sa_state.tolist(),
        "sa_action": sp.sa_action.tolist(),
        "sa_tptr": sp.sa_tptr.tolist(),
        "t_cols": sp.t_cols.tolist(),
        "t_probs": sp.t_probs.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_product(path) -> ProductMdp:
    """Load a product artifact; the source models are not reattached."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("kind") != PRODUCT_KIND:
        raise ModelFileError(f"{path}: not a product artifact")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported artifact version {doc.get('version')!r}")
    needed = {
        "states", "action_names", "terminal_class", "class_names",
        "class_reach", "edges", "act_ptr", "sa_state", "sa_action",
        "sa_tptr", "t_cols", "t_probs",
    }
    missing = needed - set(doc)
    if missing:
        raise ModelFileError(f"artifact is missing key {sorted(missing)[0]!r}")
    act_ptr = np.asarray(doc["act_ptr"], dtype=np.int64)
    sparse = SparseMdp(
        n_states=len(doc["states"]),
        act_ptr=act_ptr,
        sa_state=np.asarray(doc["sa_state"], dtype=np.int64),
        sa_action=np.asarray(doc["sa_action"], dtype=np.int64),
        sa_tptr=np.asarray(doc["sa_tptr"], dtype=np.int64),
        t_cols=np.asarray(doc["t_cols"], dtype=np.int64),
        t_probs=np.asarray(doc["t_probs"], dtype=np.float64),
        has_actions=np.flatnonzero(np.diff(act_ptr) > 0).astype(np.int64),
    )
    return ProductMdp(
        states=tuple((s, q) for s, q in doc["states"]),
        action_names=tuple(doc["action_names"]),
        sparse=sparse,
        terminal_class=np.asarray(doc["terminal_class"], dtype=np.int64),
        class_names=tuple(doc["class_names"]),
        class_reach=np.asarray(doc["class_reach"], dtype=bool),
        edges=frozenset(tuple(e) for e in doc["edges"]),
    )


def write_policy(path, policy: MemorylessPolicy, product: ProductMdp) -> None:
    """Store a deterministic product policy as 'state|automaton: action'."""
    lines = [f"version: {MODEL_VERSION}", f"kind: {POLICY_KIND}", "policy:"]
    for i, x in enumerate(product.states):
        if product.is_terminal(i):
            continue
        s, q = (str(part) for part in x)
        if "|" in s or "|" in q:
            raise ModelFileError(
                f"state name {x!r} contains '|' and cannot be stored"
            )
        dist = policy.action_distribution(x)
        if len(dist) != 1:
            raise ModelFileError("only deterministic policies can be stored")
        (action,) = dist
        lines.append(f"  {_q(f'{s}|{q}')}: {_q(action)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_policy(path) -> MemorylessPolicy:
    """Read a policy file back as a mapping over (state, automaton) pairs."""
    doc = _parse_yaml(path)
    _check_keys("top level", doc, {"version", "kind", "policy"},
                {"version", "kind", "policy"})
    if doc["kind"] != POLICY_KIND:
        raise ModelFileError(f"unexpected document kind {doc['kind']!r}")
    if doc["version"] != MODEL_VERSION:
        raise ModelFileError(f"unsupported policy version {doc['version']!r}")
    if not isinstance(doc["policy"], dict):
        raise ModelFileError("'policy' must map states to actions")
    choice = {}
    for key, action in doc["policy"].items():
        if "|" not in key:
            raise ModelFileError(
                f"policy key {key!r} is not of the form 'state|automaton'"
            )
        s, _, q = key.rpartition("|")
        choice[(s, q)] = action
    return MemorylessPolicy.deterministic(choice)


def write_weights(path, weights) -> None:
    """One weight vector per line, comma separated, full precision."""
    with open(path, "w") as fh:
        fh.write("# prefmdp-weights v1\n")
        for w in weights:
            fh.write(",".join(repr(float(c)) for c in w) + "\n")


def load_weights(path) -> list[WeightVector]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(WeightVector.of(float(c) for c in line.split(",")))
            except ValueError as exc:
                raise ModelFileError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise ModelFileError(f"{path}: no weight vectors found")
    return out


@dataclass(frozen=True)
class SolutionReport:
    """Parsed solution report: one row per requested weight vector.

    ``front_ids[k]`` names the distinct front entry weight k produced,
    so duplicates across weights are visible without comparing floats.
    ``reach`` is the class-reachability matrix the solver used.
    """

    objectives: tuple[str, ...]
    weights: np.ndarray
    values: np.ndarray
    outcome_probs: np.ndarray
    front_ids: tuple[int, ...]
    reach: np.ndarray
    metadata: dict[str, str]


def write_report(
    path,
    objectives,
    reach: np.ndarray,
    rows,
    metadata: dict[str, str],
) -> None:
    """Write the solve report CSV.

    ``rows`` holds (weight, value, outcome_probs, front_id) per
    requested weight; data columns are fixed to six decimals, which is
    part of the format contract.
    """
    names = list(objectives)
    reach_text = ";".join(
        ",".join(str(int(v)) for v in row) for row in np.asarray(reach, int)
    )
    with open(path, "w", newline="") as fh:
        fh.write(REPORT_HEADER + "\n")
        fh.write(f"# objectives: {','.join(names)}\n")
        fh.write(f"# reach: {reach_text}\n")
        for key in sorted(metadata):
            fh.write(f"# {key}: {metadata[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [f"w_{n}" for n in names]
            + [f"v_{n}" for n in names]
            + [f"o_{n}" for n in names]
            + ["front_id"]
        )
        for weight, value, probs, front_id in rows:
            writer.writerow(
                [f"{float(c):.6f}" for c in weight]
                + [f"{float(c):.6f}" for c in value]
                + [f"{float(c):.6f}" for c in probs]
                + [str(int(front_id))]
            )


def load_report(path) -> SolutionReport:
    """Parse a solution report CSV (metadata lines, then data rows)."""
    metadata: dict[str, str] = {}
    data_lines: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    metadata[key.strip()] = val.strip()
                continue
            if line.strip():
                data_lines.append(line)
    if not data_lines:
        raise ModelFileError(f"{path}: no data rows")
    reader = csv.reader(io.StringIO("\n".join(data_lines)))
    header = next(reader)
    n = (len(header) - 1) // 3
    if n < 1 or len(header) != 3 * n + 1 or header[-1] != "front_id":
        raise ModelFileError(f"{path}: unrecognized report header {header!r}")
    objectives = tuple(h[2:] for h in header[:n])
    expected = (
        [f"w_{o}" for o in objectives]
        + [f"v_{o}" for o in objectives]
        + [f"o_{o}" for o in objectives]
        + ["front_id"]
    )
    if header != expected:
        raise ModelFileError(f"{path}: unrecognized report header {header!r}")
    weights, values, probs, front_ids = [], [], [], []
    for row in reader:
        if len(row) != len(header):
            raise ModelFileError(f"{path}: row has {len(row)} fields: {row!r}")
        try:
            nums = [float(c) for c in row[:-1]]
            front_ids.append(int(row[-1]))
        except ValueError:
            raise ModelFileError(f"{path}: non-numeric field in {row!r}") from None
        weights.append(nums[:n])
        values.append(nums[n:2 * n])
        probs.append(nums[2 * n:])
    if "reach" not in metadata:
        raise ModelFileError(
            f"{path}: missing '# reach:' metadata; cannot compare reports "
            "without the class-reachability matrix"
        )
    try:
        reach = np.array(
            [[int(v) for v in row.split(",")] for row in metadata["reach"].split(";")],
            dtype=np.float64,
        )
    except ValueError:
        raise ModelFileError(f"{path}: malformed reach metadata") from None
    if reach.shape != (n, n):
        raise ModelFileError(
            f"{path}: reach matrix shape {reach.shape} does not match "
            f"{n} objectives"
        )
    return SolutionReport(
        objectives=objectives,
        weights=np.array(weights),
        values=np.array(values),
        outcome_probs=np.array(probs),
        front_ids=tuple(front_ids),
        reach=reach,
        metadata=metadata,
    )


_CELL_FIELDS = {"tulips", "daisies", "orchids", "bird_region"}


def load_garden_config(path) -> GardenConfig:
    """Garden configuration from YAML, keys mirroring the config fields."""
    doc = _parse_yaml(path)
    import dataclasses

    allowed = {f.name for f in dataclasses.fields(GardenConfig)}
    _check_keys("garden config", doc, allowed, {"width", "height"})
    kwargs = {}
    for key, val in doc.items():
        if key in _CELL_FIELDS:
            kwargs[key] = tuple(tuple(int(c) for c in cell) for cell in val)
        elif key in ("start", "bird_start") and val is not None:
            kwargs[key] = tuple(int(c) for c in val)
        elif key in ("actions", "rain_stop_schedule"):
            kwargs[key] = tuple(val)
        else:
            kwargs[key] = val
    return GardenConfig(**kwargs)
