"""Pointwise treatment assignment under each risk criterion.

Scores on the value scale are: mu (neutral), mu/sigma (linear risk-averse),
mu/sigma^2 (quadratic risk-averse), and the exceedance probability
h = 1 - F((y* - mu)/sigma) (safety-first). Rankings use the same quantities
except safety-first, which ranks by the z-score (mu - y*)/sigma directly:
F is strictly increasing, so the argmax is identical, and the z-score stays
informative where float64 rounds h to exactly 1 (or 0) for every action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    TIE_EPSILON,
    ConditionalMoments,
    CriterionKind,
    Dataset,
    DimensionMismatch,
    LocationScaleFamily,
    PolicyAssignment,
    RiskCriterion,
    check_assignment,
)
from .moments import MomentModel, predict_moments


@dataclass(frozen=True)
class CriterionScore:
    """One action's score on the criterion's value scale."""

    action: int
    score: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ValueError(f"score for action {self.action} is not finite")


def exceedance_probability(m: ConditionalMoments, y_star: float,
                           family: LocationScaleFamily) -> float:
    """Probability that the action's outcome reaches ``y_star``.

    Equals ``1 - F((y_star - mu) / sigma)`` for the family's standardized
    cdf F; computed through the survival function so tails keep accuracy.
    """
    if not np.isfinite(y_star):
        raise ValueError(f"y_star must be finite, got {y_star!r}")
    z = (float(y_star) - m.mu) / m.sigma
    return float(np.clip(family.survival(z), 0.0, 1.0))


def _value_scores(mu: np.ndarray, sigma: np.ndarray, criterion: RiskCriterion) -> np.ndarray:
    kind = criterion.kind
    if kind is CriterionKind.NEUTRAL:
        return np.asarray(mu, dtype=np.float64)
    if kind is CriterionKind.LINEAR:
        return mu / sigma
    if kind is CriterionKind.QUADRATIC:
        return mu / (sigma * sigma)
    z = (criterion.y_star - mu) / sigma
    return np.clip(criterion.family.survival(z), 0.0, 1.0)


def _ranking_scores(mu: np.ndarray, sigma: np.ndarray, criterion: RiskCriterion) -> np.ndarray:
    if criterion.kind is CriterionKind.SAFETY_FIRST:
        return (mu - criterion.y_star) / sigma
    return _value_scores(mu, sigma, criterion)


def score_moments(moments: Sequence[ConditionalMoments],
                  criterion: RiskCriterion) -> list[CriterionScore]:
    """Value-scale score of each action given its conditional moments."""
    mu = np.array([m.mu for m in moments])
    sigma = np.array([m.sigma for m in moments])
    scores = _value_scores(mu, sigma, criterion)
    return [CriterionScore(m.action, float(s)) for m, s in zip(moments, scores)]


def score_actions(model: MomentModel, x: np.ndarray,
                  criterion: RiskCriterion) -> list[CriterionScore]:
    """Score every action at one feature vector, in action-set order."""
    moments = [predict_moments(model, x, a) for a in model.action_set]
    return score_moments(moments, criterion)


def choose_action(scores, tie_epsilon: float = TIE_EPSILON) -> tuple[int, bool]:
    """Argmax with deterministic smallest-label tie resolution.

    ``scores`` is a list of :class:`CriterionScore` (or plain floats scored
    in label order). When the top two scores are within ``tie_epsilon`` the
    smallest tied label wins and the tie flag is set.
    """
    if len(scores) < 2:
        raise ValueError("need at least two scores to choose between")
    if isinstance(scores[0], CriterionScore):
        labels = [s.action for s in scores]
        values = np.array([s.score for s in scores], dtype=np.float64)
    else:
        labels = list(range(len(scores)))
        values = np.asarray(scores, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("scores must be finite")
    order = np.argsort(labels, kind="stable")
    winners, flags = _kernels.rowwise_argmax_tie(values[order][None, :], tie_epsilon)
    return int(labels[order[winners[0]]]), bool(flags[0])


def choose_among_moments(moments: Sequence[ConditionalMoments], criterion: RiskCriterion,
                         tie_epsilon: float = TIE_EPSILON) -> tuple[int, bool]:
    """Pick the criterion-best action from explicit per-action moments."""
    mu = np.array([m.mu for m in moments])
    sigma = np.array([m.sigma for m in moments])
    keys = _ranking_scores(mu, sigma, criterion)
    j, tie = choose_action(list(keys), tie_epsilon)
    return int(moments[j].action), tie


def _tied_labels(keys: np.ndarray, rows: np.ndarray, tie_epsilon: float):
    best = keys[rows].max(axis=1)
    within = keys[rows] > (best - tie_epsilon)[:, None]
    return [tuple(np.flatnonzero(w)) for w in within]


def assign_policy(model: MomentModel, data: Dataset, criterion: RiskCriterion,
                  tie_epsilon: float = TIE_EPSILON) -> PolicyAssignment:
    """Criterion-best action for every unit in ``data``.

    Ranking-scale ties within ``tie_epsilon`` resolve to the smallest label
    and are recorded on the assignment.
    """
    if data.p != model.p:
        raise DimensionMismatch(
            f"model fitted on {model.p} features, data has {data.p}"
        )
    mu, sigma, _ = model.moment_matrix(data.features)
    keys = np.ascontiguousarray(_ranking_scores(mu, sigma, criterion))
    actions, flags = _kernels.rowwise_argmax_tie(keys, tie_epsilon)
    tied_rows = np.flatnonzero(flags)
    ties = tuple(
        (int(i), labs)
        for i, labs in zip(tied_rows, _tied_labels(keys, tied_rows, tie_epsilon))
    )
    assignment = PolicyAssignment(actions=actions, criterion=criterion,
                                  ties=ties, source="optimal")
    return check_assignment(assignment, model.action_set)
