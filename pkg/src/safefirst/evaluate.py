"""Direct-Method value functions, regret, match rate, action frequencies.

Every value is an unweighted average over the evaluated units; sums use
NumPy's pairwise reduction so results do not depend on chunking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    ActionSet,
    CriterionKind,
    DimensionMismatch,
    LengthMismatch,
    NonFiniteValue,
    PolicyAssignment,
    RiskCriterion,
    family_by_name,
)
from .moments import MomentModel
from .policy import _value_scores


@dataclass(frozen=True)
class FrequencyRow:
    action: int
    count: int
    percent: float


@dataclass(frozen=True)
class FrequencyTable:
    """Per-action counts and percents; percents sum to 100 within 0.01."""

    rows: tuple[FrequencyRow, ...]
    total: int

    def __post_init__(self) -> None:
        if self.total > 0:
            s = sum(r.percent for r in self.rows)
            if abs(s - 100.0) > 0.01:
                raise ValueError(f"percents sum to {s}, not 100")

    def counts(self) -> tuple[int, ...]:
        return tuple(r.count for r in self.rows)

    def percents(self) -> tuple[float, ...]:
        return tuple(r.percent for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": [{"action": r.action, "count": r.count, "percent": r.percent}
                     for r in self.rows],
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyTable":
        rows = tuple(FrequencyRow(int(r["action"]), int(r["count"]), float(r["percent"]))
                     for r in d["rows"])
        return cls(rows=rows, total=int(d["total"]))


def action_frequencies(assignment, action_set: ActionSet) -> FrequencyTable:
    """Tabulate how often each action is assigned."""
    actions = assignment.actions if isinstance(assignment, PolicyAssignment) else assignment
    actions = np.asarray(actions, dtype=np.int64)
    counts = np.bincount(actions, minlength=action_set.n_actions)
    n = int(actions.size)
    rows = tuple(
        FrequencyRow(a, int(counts[a]), 100.0 * counts[a] / n if n else 0.0)
        for a in action_set
    )
    return FrequencyTable(rows=rows, total=n)


def per_unit_scores(model: MomentModel, assignment: PolicyAssignment,
                    criterion: RiskCriterion, features: np.ndarray | None = None) -> np.ndarray:
    """Value-scale score of each unit's assigned action."""
    X = model.training_features if features is None else np.asarray(features, dtype=np.float64)
    acts = assignment.actions
    if acts.shape[0] != X.shape[0]:
        raise DimensionMismatch(
            f"assignment covers {acts.shape[0]} units, features {X.shape[0]}"
        )
    out = np.empty(acts.shape[0], dtype=np.float64)
    for a in model.action_set:
        mask = acts == a
        if mask.any():
            mu, sigma, _ = model.predict_mu_sigma(X[mask], a)
            out[mask] = _value_scores(mu, sigma, criterion)
    return out


def value_direct(model: MomentModel, assignment: PolicyAssignment,
                 criterion: RiskCriterion, features: np.ndarray | None = None) -> float:
    """Direct-Method value: average model score of the assigned actions.

    Uses the model's training features unless an explicit evaluation feature
    matrix is supplied.
    """
    return float(per_unit_scores(model, assignment, criterion, features).mean())


def safety_first_welfare_empirical(outcomes, y_star: float) -> float:
    """Fraction of realized outcomes at or above the threshold."""
    y = np.asarray(outcomes, dtype=np.float64)
    if y.size == 0:
        raise LengthMismatch("outcomes are empty")
    if not np.isfinite(y).all():
        raise NonFiniteValue("outcomes contain non-finite entries")
    return float((y >= float(y_star)).mean())


def regret(value_first_best: float, value_alternative: float) -> float:
    """Welfare lost relative to the first-best, on the risk-neutral scale.

    Both inputs must be risk-neutral values from the same model and data;
    a materially negative result signals inconsistent inputs and warns.
    """
    r = float(value_first_best) - float(value_alternative)
    if r < -1e-9:
        warnings.warn(
            f"negative regret {r:.3e}: the inputs are not a first-best/alternative "
            "pair from the same model and data",
            stacklevel=2,
        )
    return r


def match_rate(actual, optimal) -> float:
    """Fraction of units whose two assignments agree."""
    a = actual.actions if isinstance(actual, PolicyAssignment) else np.asarray(actual)
    b = optimal.actions if isinstance(optimal, PolicyAssignment) else np.asarray(optimal)
    if a.shape != b.shape:
        raise LengthMismatch(f"assignment lengths differ: {a.shape} vs {b.shape}")
    return float((a == b).mean())


@dataclass(frozen=True)
class EvaluationReport:
    """The quantities behind one criterion's results table."""

    criterion: RiskCriterion
    value_actual: float
    value_optimal: float
    regret_vs_first_best: float
    match_rate: float
    action_frequencies: FrequencyTable
    n_used: int

    def to_dict(self) -> dict:
        crit = {"kind": self.criterion.kind.value}
        if self.criterion.kind is CriterionKind.SAFETY_FIRST:
            crit["y_star"] = self.criterion.y_star
            crit["family"] = self.criterion.family.name
        return {
            "criterion": crit,
            "value_actual": self.value_actual,
            "value_optimal": self.value_optimal,
            "regret_vs_first_best": self.regret_vs_first_best,
            "match_rate": self.match_rate,
            "action_frequencies": self.action_frequencies.to_dict(),
            "n_used": self.n_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        crit = d["criterion"]
        kind = CriterionKind(crit["kind"])
        if kind is CriterionKind.SAFETY_FIRST:
            criterion = RiskCriterion.safety_first(
                y_star=float(crit.get("y_star", 0.0)),
                family=family_by_name(crit.get("family", "normal")),
            )
        else:
            criterion = RiskCriterion(kind)
        return cls(
            criterion=criterion,
            value_actual=float(d["value_actual"]),
            value_optimal=float(d["value_optimal"]),
            regret_vs_first_best=float(d["regret_vs_first_best"]),
            match_rate=float(d["match_rate"]),
            action_frequencies=FrequencyTable.from_dict(d["action_frequencies"]),
            n_used=int(d["n_used"]),
        )
