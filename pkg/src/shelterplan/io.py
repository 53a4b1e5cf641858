"""Problem ingestion and result serialization.

Formats:
  network   — directory with nodes.csv + links.csv, or one JSON document
  shelters  — CSV (node_id,capacity_vph)
  scenario  — JSON {"name": ..., "productions": {origin_id: vehicles}}
  config    — flat text, dotted keys (ga.population_size = 20)

All writes are whole-file atomic (write to a temp file, then rename).
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .assignment import AssignmentResult
from .enumeration import EnumerationReport, SubsetEvaluation
from .ga import EvaluationRecord, GenerationStats, SolveReport
from .network import Link, Network, Node, validate_network
from .problem import (
    AssignmentConfig,
    CandidateShelter,
    DemandScenario,
    GAConfig,
    ImpedanceParameter,
    PenaltyConfig,
    ShelterSet,
    selection_from_string,
    selection_to_string,
)

FREE_FLOW_SPEED_MPH = 35.0

NODE_COLUMNS = ("id", "kind")
LINK_COLUMNS = ("id", "from", "to", "capacity_vph", "free_flow_min", "length_mi", "max_saturation")
SHELTER_COLUMNS = ("node_id", "capacity_vph")


class ProblemLoadError(Exception):
    """Raised on parse failures (with file/line) or validation findings."""

    def __init__(self, message: str, findings: Sequence = ()):
        self.findings = tuple(findings)
        if findings:
            message = message + "\n" + "\n".join(f"  {f}" for f in findings)
        super().__init__(message)


@dataclass(frozen=True)
class ProblemBundle:
    network: Network
    shelters: ShelterSet
    scenarios: tuple[DemandScenario, ...]
    impedance: ImpedanceParameter
    penalties: PenaltyConfig
    ga: GAConfig
    assignment: AssignmentConfig

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ValueError("a problem bundle needs at least one scenario")


def minutes_from_length(length_mi: float, speed_mph: float = FREE_FLOW_SPEED_MPH) -> float:
    """Free-flow minutes for a link of the given length at the given speed."""
    if not (math.isfinite(length_mi) and length_mi > 0):
        raise ValueError("length_mi must be finite and > 0")
    return length_mi / speed_mph * 60.0


def _float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ProblemLoadError(f"{where}: not a number: {value!r}") from None


def _read_csv(path: Path, allowed: tuple[str, ...], required: tuple[str, ...]):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemLoadError(f"{path}: {exc}") from None
    reader = csv.DictReader(_io.StringIO(text))
    header = reader.fieldnames or []
    unknown = [c for c in header if c not in allowed]
    if unknown:
        raise ProblemLoadError(f"{path}:1: unknown column(s) {unknown}; allowed: {list(allowed)}")
    missing = [c for c in required if c not in header]
    if missing:
        raise ProblemLoadError(f"{path}:1: missing required column(s) {missing}")
    for line, row in enumerate(reader, start=2):
        yield line, {k: (v.strip() if v is not None else "") for k, v in row.items()}


def _link_from_fields(fields: Mapping[str, str], where: str) -> Link:
    free_flow = fields.get("free_flow_min", "")
    length = fields.get("length_mi", "")
    if free_flow:
        free_flow_min = _float(free_flow, where)
        if length:
            warnings.warn(
                f"{where}: both free_flow_min and length_mi given; free_flow_min wins",
                stacklevel=2,
            )
    elif length:
        free_flow_min = minutes_from_length(_float(length, where))
    else:
        raise ProblemLoadError(f"{where}: need free_flow_min or length_mi")
    saturation = fields.get("max_saturation", "")
    try:
        return Link(
            id=fields["id"],
            from_node=fields["from"],
            to_node=fields["to"],
            capacity_vph=_float(fields["capacity_vph"], where),
            free_flow_min=free_flow_min,
            max_saturation=_float(saturation, where) if saturation else 1.0,
        )
    except KeyError as exc:
        raise ProblemLoadError(f"{where}: missing field {exc}") from None
    except ValueError as exc:
        raise ProblemLoadError(f"{where}: {exc}") from None


def load_network(path: str | os.PathLike) -> Network:
    """Load a network from a nodes.csv/links.csv directory or a JSON file."""
    p = Path(path)
    if p.is_dir():
        nodes = []
        for line, row in _read_csv(p / "nodes.csv", NODE_COLUMNS, NODE_COLUMNS):
            try:
                nodes.append(Node(id=row["id"], kind=row["kind"]))
            except ValueError as exc:
                raise ProblemLoadError(f"{p / 'nodes.csv'}:{line}: {exc}") from None
        links = [
            _link_from_fields(row, f"{p / 'links.csv'}:{line}")
            for line, row in _read_csv(
                p / "links.csv", LINK_COLUMNS, ("id", "from", "to", "capacity_vph")
            )
        ]
        return Network(nodes, links)
    if p.suffix == ".json":
        try:
            doc = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ProblemLoadError(f"{p}: {exc}") from None
        try:
            nodes = [Node(id=str(n["id"]), kind=str(n["kind"])) for n in doc["nodes"]]
            links = [
                _link_from_fields({k: str(v) for k, v in entry.items()}, f"{p}: link {i}")
                for i, entry in enumerate(doc["links"])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemLoadError(f"{p}: malformed network document: {exc}") from None
        return Network(nodes, links)
    raise ProblemLoadError(f"{p}: expected a directory with nodes.csv/links.csv or a .json file")


def load_shelters(path: str | os.PathLike) -> ShelterSet:
    p = Path(path)
    candidates = []
    for line, row in _read_csv(p, SHELTER_COLUMNS, SHELTER_COLUMNS):
        try:
            candidates.append(
                CandidateShelter(
                    node_id=row["node_id"],
                    capacity_vph=_float(row["capacity_vph"], f"{p}:{line}"),
                )
            )
        except ValueError as exc:
            raise ProblemLoadError(f"{p}:{line}: {exc}") from None
    if not candidates:
        raise ProblemLoadError(f"{p}: no shelter candidates")
    return ShelterSet(candidates=tuple(candidates))


def load_scenario(path: str | os.PathLike) -> DemandScenario:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemLoadError(f"{p}: {exc}") from None
    if not isinstance(doc, dict) or "productions" not in doc:
        raise ProblemLoadError(f"{p}: scenario document needs a 'productions' object")
    name = str(doc.get("name", p.stem))
    raw = doc["productions"]
    if not isinstance(raw, dict):
        raise ProblemLoadError(f"{p}: 'productions' must map origin ids to vehicle counts")
    try:
        productions = {str(k): float(v) for k, v in raw.items()}
        return DemandScenario(name=name, productions=productions)
    except (TypeError, ValueError) as exc:
        raise ProblemLoadError(f"{p}: {exc}") from None


_CONFIG_SCHEMA: dict[str, type] = {
    "impedance.beta": float,
    "penalties.alpha_shelter": float,
    "penalties.beta_link": float,
    "ga.population_size": int,
    "ga.max_generations": int,
    "ga.reproduction_rate": float,
    "ga.mutation_probability": float,
    "ga.rng_seed": int,
    "ga.elitism_count": int,
    "ga.mutation_mode": str,
    "assignment.max_iterations": int,
    "assignment.gap_tolerance": float,
    "assignment.step_rule": str,
}


def parse_config_text(text: str, where: str = "<config>") -> dict[str, object]:
    """Parse dotted key=value lines into typed values; '#' starts a comment."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemLoadError(f"{where}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_SCHEMA:
            raise ProblemLoadError(f"{where}:{lineno}: unknown config key {key!r}")
        caster = _CONFIG_SCHEMA[key]
        try:
            values[key] = caster(value) if caster is not str else value
        except ValueError:
            raise ProblemLoadError(
                f"{where}:{lineno}: bad value {value!r} for {key!r} ({caster.__name__})"
            ) from None
    return values


def _configs_from_values(
    values: Mapping[str, object], where: str = "<config>"
) -> tuple[ImpedanceParameter, PenaltyConfig, GAConfig, AssignmentConfig]:
    def section(prefix: str) -> dict[str, object]:
        return {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith(prefix + ".")}

    try:
        impedance = ImpedanceParameter(**section("impedance"))
        penalties = PenaltyConfig(**section("penalties"))
        ga = GAConfig(**section("ga"))
        assignment = AssignmentConfig(**section("assignment"))
    except (TypeError, ValueError) as exc:
        raise ProblemLoadError(f"{where}: {exc}") from None
    return impedance, penalties, ga, assignment


def load_config(
    path: Optional[str | os.PathLike],
) -> tuple[ImpedanceParameter, PenaltyConfig, GAConfig, AssignmentConfig]:
    """Load solver configuration; a missing path means all defaults."""
    if path is None:
        return _configs_from_values({})
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ProblemLoadError(f"{p}: {exc}") from None
    return _configs_from_values(parse_config_text(text, str(p)), str(p))


def load_problem(
    network_path: str | os.PathLike,
    shelters_path: str | os.PathLike,
    scenario_paths: Sequence[str | os.PathLike],
    config_path: Optional[str | os.PathLike] = None,
) -> ProblemBundle:
    """Load and cross-validate a full problem; raises ProblemLoadError on
    any parse failure or validation finding."""
    network = load_network(network_path)
    shelters = load_shelters(shelters_path)
    if not scenario_paths:
        raise ProblemLoadError("at least one scenario file is required")
    scenarios = tuple(load_scenario(p) for p in scenario_paths)
    impedance, penalties, ga, assignment = load_config(config_path)

    findings = validate_network(network, shelters)
    if findings:
        raise ProblemLoadError("network validation failed", findings)
    origin_kind = set(network.origin_ids())
    for scenario in scenarios:
        for origin in sorted(scenario.productions):
            if origin not in origin_kind:
                raise ProblemLoadError(
                    f"scenario {scenario.name!r}: production origin {origin!r} "
                    "is not an origin node of the network"
                )
    return ProblemBundle(
        network=network,
        shelters=shelters,
        scenarios=scenarios,
        impedance=impedance,
        penalties=penalties,
        ga=ga,
        assignment=assignment,
    )


# ---- result serialization ----------------------------------------------


def canonical_json(data: object) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    """Whole-file atomic write: temp file in the same directory, then rename."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, p)
    except BaseException:
        os.unlink(tmp)
        raise


def assignment_result_to_dict(result: AssignmentResult) -> dict:
    od: dict[str, dict[str, float]] = {}
    for (origin, shelter), flow in result.od_flows.items():
        od.setdefault(origin, {})[shelter] = flow
    return {
        "link_flows": dict(result.link_flows),
        "od_flows": od,
        "link_times": dict(result.link_times),
        "relative_gap": result.relative_gap,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def assignment_result_from_dict(doc: Mapping) -> AssignmentResult:
    od_flows = {
        (origin, shelter): float(flow)
        for origin, row in doc["od_flows"].items()
        for shelter, flow in row.items()
    }
    return AssignmentResult(
        link_flows={k: float(v) for k, v in doc["link_flows"].items()},
        od_flows=od_flows,
        link_times={k: float(v) for k, v in doc["link_times"].items()},
        relative_gap=float(doc["relative_gap"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
    )


def solve_report_to_dict(report: SolveReport) -> dict:
    return {
        "best_selection": selection_to_string(report.best_selection),
        "best_penalized_objective": report.best_penalized_objective,
        "best_total_evacuation_time": report.best_total_evacuation_time,
        "feasible": report.feasible,
        "shelter_attraction": dict(report.shelter_attraction),
        "history": [
            {
                "generation": h.generation,
                "best_fitness": h.best_fitness,
                "mean_fitness": h.mean_fitness,
                "feasible_count": h.feasible_count,
            }
            for h in report.history
        ],
        "assignment_diagnostics": dict(report.assignment_diagnostics),
        "evaluation_log": [
            {
                "selection": r.selection,
                "penalized_objective": r.penalized_objective,
                "feasible": r.feasible,
                "total_excess": r.total_excess,
                "total_evacuation_time": r.total_evacuation_time,
                "converged": r.converged,
                "note": r.note,
            }
            for r in report.evaluation_log
        ],
        "best_assignment": (
            assignment_result_to_dict(report.best_assignment)
            if report.best_assignment is not None
            else None
        ),
    }


def solve_report_from_dict(doc: Mapping) -> SolveReport:
    return SolveReport(
        best_selection=selection_from_string(doc["best_selection"]),
        best_penalized_objective=float(doc["best_penalized_objective"]),
        best_total_evacuation_time=float(doc["best_total_evacuation_time"]),
        feasible=bool(doc["feasible"]),
        shelter_attraction={k: float(v) for k, v in doc["shelter_attraction"].items()},
        history=tuple(
            GenerationStats(
                generation=int(h["generation"]),
                best_fitness=float(h["best_fitness"]),
                mean_fitness=float(h["mean_fitness"]),
                feasible_count=int(h["feasible_count"]),
            )
            for h in doc["history"]
        ),
        assignment_diagnostics=dict(doc["assignment_diagnostics"]),
        evaluation_log=tuple(
            EvaluationRecord(
                selection=r["selection"],
                penalized_objective=float(r["penalized_objective"]),
                feasible=bool(r["feasible"]),
                total_excess=float(r["total_excess"]),
                total_evacuation_time=(
                    float(r["total_evacuation_time"])
                    if r["total_evacuation_time"] is not None
                    else None
                ),
                converged=r["converged"],
                note=r.get("note", ""),
            )
            for r in doc["evaluation_log"]
        ),
        best_assignment=(
            assignment_result_from_dict(doc["best_assignment"])
            if doc.get("best_assignment") is not None
            else None
        ),
    )


def enumeration_report_to_dict(report: EnumerationReport) -> dict:
    return {
        "best": report.best,
        "evaluations": [
            {
                "selection": selection_to_string(e.selection),
                "penalized_objective": e.penalized_objective,
                "feasible": e.feasible,
                "total_evacuation_time": e.total_evacuation_time,
            }
            for e in report.evaluations
        ],
    }


def enumeration_report_from_dict(doc: Mapping) -> EnumerationReport:
    return EnumerationReport(
        evaluations=tuple(
            SubsetEvaluation(
                selection=selection_from_string(e["selection"]),
                penalized_objective=float(e["penalized_objective"]),
                feasible=bool(e["feasible"]),
                total_evacuation_time=(
                    float(e["total_evacuation_time"])
                    if e["total_evacuation_time"] is not None
                    else None
                ),
            )
            for e in doc["evaluations"]
        ),
        best=int(doc["best"]),
    )


def enumeration_report_to_csv(report: EnumerationReport) -> str:
    lines = ["selection,penalized_objective,feasible,total_evacuation_time,is_best"]
    for i, e in enumerate(report.evaluations):
        time_text = repr(e.total_evacuation_time) if e.total_evacuation_time is not None else ""
        lines.append(
            f"{selection_to_string(e.selection)},{e.penalized_objective!r},"
            f"{e.feasible},{time_text},{i == report.best}"
        )
    return "\n".join(lines) + "\n"


def enumeration_report_from_csv(text: str) -> EnumerationReport:
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != "selection,penalized_objective,feasible,total_evacuation_time,is_best":
        raise ValueError("unrecognized enumeration CSV header")
    rows = []
    best = 0
    for i, line in enumerate(lines[1:]):
        selection, objective, feasible, time_text, is_best = line.split(",")
        rows.append(
            SubsetEvaluation(
                selection=selection_from_string(selection),
                penalized_objective=float(objective),
                feasible=(feasible == "True"),
                total_evacuation_time=float(time_text) if time_text else None,
            )
        )
        if is_best == "True":
            best = i
    return EnumerationReport(evaluations=tuple(rows), best=best)
