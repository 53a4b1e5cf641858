"""Exhaustive evaluation of every non-empty shelter subset.

A transparency oracle for small candidate counts: it reuses the GA's
fitness evaluation verbatim so the two are comparable term by term.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .ga import EvaluationContext, evaluate_individual
from .network import Network
from .problem import (
    AssignmentConfig,
    DemandScenario,
    ImpedanceParameter,
    PenaltyConfig,
    ShelterSet,
)

MAX_CANDIDATES = 20


@dataclass(frozen=True)
class SubsetEvaluation:
    selection: tuple[int, ...]
    penalized_objective: float
    feasible: bool
    total_evacuation_time: Optional[float]


@dataclass(frozen=True)
class EnumerationReport:
    """All 2^J - 1 subset evaluations in canonical (bit-vector value) order.

    `best` indexes the entry with the minimum penalized objective; ties go
    to fewer open shelters, then to the lexicographically smaller selection.
    """

    evaluations: tuple[SubsetEvaluation, ...]
    best: int

    @property
    def best_evaluation(self) -> SubsetEvaluation:
        return self.evaluations[self.best]


def _selection_for_mask(mask: int, count: int) -> tuple[int, ...]:
    return tuple((mask >> k) & 1 for k in range(count))


def exhaustive_solve(
    network: Network,
    shelters: ShelterSet,
    demand: DemandScenario,
    impedance: ImpedanceParameter,
    penalties: PenaltyConfig,
    assignment: AssignmentConfig,
    *,
    workers: Optional[int] = None,
) -> EnumerationReport:
    """Evaluate every non-empty shelter subset with the GA's own fitness.

    The empty subset can never win under the tie policy, so it is skipped
    rather than evaluated at sentinel fitness. Refuses more than
    MAX_CANDIDATES candidates.
    """
    count = len(shelters.candidates)
    if count > MAX_CANDIDATES:
        raise ValueError(
            f"{count} candidates would need {2 ** count - 1} evaluations; "
            f"exhaustive_solve is limited to {MAX_CANDIDATES} candidates"
        )
    context = EvaluationContext(network, shelters, demand, impedance, penalties, assignment)
    masks = range(1, 2 ** count)
    selections = [_selection_for_mask(mask, count) for mask in masks]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluations = list(pool.map(lambda s: evaluate_individual(s, context), selections))
    else:
        evaluations = [evaluate_individual(s, context) for s in selections]
    rows = tuple(
        SubsetEvaluation(
            selection=selection,
            penalized_objective=evaluation.penalized_objective,
            feasible=evaluation.feasible,
            total_evacuation_time=evaluation.total_evacuation_time,
        )
        for selection, evaluation in zip(selections, evaluations)
    )
    best = min(
        range(len(rows)),
        key=lambda i: (rows[i].penalized_objective, sum(rows[i].selection), rows[i].selection),
    )
    return EnumerationReport(evaluations=rows, best=best)
