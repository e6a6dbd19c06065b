"""Shared domain types for risk-adjusted policy learning.

Everything in here is immutable after construction: arrays are stored with
``writeable=False`` and the dataclasses are frozen, so instances can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels

# Score gap below which two actions are treated as tied (resolved to the
# smallest label) and the floor applied to plug-in conditional variances.
TIE_EPSILON = 1e-12
VARIANCE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class SafeFirstError(Exception):
    """Base class for all toolkit errors."""


class DataError(SafeFirstError):
    """Invalid or inconsistent input data."""


class ConfigError(SafeFirstError):
    """Invalid analysis configuration."""


class EstimationError(SafeFirstError):
    """Model fitting failed."""


class LengthMismatch(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class UnknownAction(DataError):
    pass


class EmptyActionCell(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonBinaryAction(DataError):
    pass


class MissingColumn(DataError):
    pass


class ParseError(DataError):
    pass


class DegenerateDistribution(DataError):
    pass


class InsufficientCellSize(EstimationError):
    pass


class SingularDesign(EstimationError):
    pass


class NonConvergenceWarning(UserWarning):
    """An iterative fit stopped before reaching its gradient tolerance."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Action sets and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionSet:
    """The finite treatment menu ``{0, 1, ..., n_actions - 1}``."""

    n_actions: int

    def __post_init__(self) -> None:
        if not isinstance(self.n_actions, (int, np.integer)) or self.n_actions < 2:
            raise ValueError(f"need at least two actions, got {self.n_actions!r}")
        object.__setattr__(self, "n_actions", int(self.n_actions))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "ActionSet":
        """Build from explicit labels, which must be exactly 0..M-1."""
        arr = sorted(int(a) for a in labels)
        if arr != list(range(len(arr))):
            raise ValueError(f"labels must be distinct and contiguous from 0, got {labels!r}")
        return cls(len(arr))

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(range(self.n_actions))

    def __len__(self) -> int:
        return self.n_actions

    def __iter__(self):
        return iter(range(self.n_actions))

    def __contains__(self, action) -> bool:
        try:
            a = int(action)
        except (TypeError, ValueError):
            return False
        return 0 <= a < self.n_actions and float(action) == a


@dataclass(frozen=True)
class Dataset:
    """Observed outcomes, realized actions, and covariates for n units.

    Construct through :func:`validate_dataset`; direct construction skips
    the invariant checks.
    """

    outcomes: np.ndarray
    actions: np.ndarray
    features: np.ndarray
    feature_names: tuple[str, ...]
    unit_ids: tuple
    action_set: ActionSet

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


def validate_dataset(raw, action_set: ActionSet | None = None) -> Dataset:
    """Check every dataset invariant and return an immutable :class:`Dataset`.

    Parameters
    ----------
    raw :
        A :class:`Dataset` or a mapping with keys ``outcomes``, ``actions``,
        ``features`` and optionally ``feature_names`` / ``unit_ids``.
    action_set :
        The action menu. When omitted it is inferred as ``0..max(actions)``.

    Raises
    ------
    LengthMismatch, NonFiniteValue, UnknownAction, EmptyActionCell
    """
    if isinstance(raw, Dataset):
        fields = {
            "outcomes": raw.outcomes,
            "actions": raw.actions,
            "features": raw.features,
            "feature_names": raw.feature_names,
            "unit_ids": raw.unit_ids,
        }
        if action_set is None:
            action_set = raw.action_set
    elif isinstance(raw, Mapping):
        fields = dict(raw)
    else:
        raise DataError(f"cannot interpret {type(raw).__name__} as a dataset")

    try:
        outcomes = np.asarray(fields["outcomes"], dtype=np.float64)
        features = np.asarray(fields["features"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise NonFiniteValue(f"non-numeric entries: {exc}") from None
    actions_raw = np.asarray(fields["actions"])

    if outcomes.ndim != 1:
        raise DimensionMismatch(f"outcomes must be a vector, got shape {outcomes.shape}")
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    if features.ndim != 2:
        raise DimensionMismatch(f"features must be a matrix, got shape {features.shape}")
    if actions_raw.ndim != 1:
        raise DimensionMismatch(f"actions must be a vector, got shape {actions_raw.shape}")

    n = outcomes.shape[0]
    if n < 1:
        raise LengthMismatch("dataset is empty")
    if actions_raw.shape[0] != n or features.shape[0] != n:
        raise LengthMismatch(
            f"outcomes ({n}), actions ({actions_raw.shape[0]}) and features "
            f"({features.shape[0]}) must share one length"
        )

    if not np.isfinite(outcomes).all():
        idx = int(np.flatnonzero(~np.isfinite(outcomes))[0])
        raise NonFiniteValue(f"outcomes contain a non-finite entry at row {idx}")
    if not np.isfinite(features).all():
        idx = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise NonFiniteValue(f"features contain a non-finite entry at row {idx}")

    if not np.issubdtype(actions_raw.dtype, np.integer):
        as_float = np.asarray(actions_raw, dtype=np.float64)
        if not np.isfinite(as_float).all() or not (as_float == np.round(as_float)).all():
            raise UnknownAction("actions must be integer labels")
        actions = as_float.astype(np.int64)
    else:
        actions = actions_raw.astype(np.int64)

    if actions.min() < 0:
        raise UnknownAction(f"negative action label {int(actions.min())}")
    if action_set is None:
        action_set = ActionSet(max(int(actions.max()) + 1, 2))
    if int(actions.max()) >= action_set.n_actions:
        raise UnknownAction(
            f"action {int(actions.max())} outside the {action_set.n_actions}-action set"
        )
    observed = np.bincount(actions, minlength=action_set.n_actions)
    if (observed == 0).any():
        missing = np.flatnonzero(observed == 0).tolist()
        raise EmptyActionCell(f"actions {missing} never observed; cannot fit per-action models")

    feature_names = fields.get("feature_names")
    if feature_names is None:
        feature_names = tuple(f"x{j + 1}" for j in range(features.shape[1]))
    else:
        feature_names = tuple(str(c) for c in feature_names)
        if len(feature_names) != features.shape[1]:
            raise LengthMismatch(
                f"{len(feature_names)} feature names for {features.shape[1]} columns"
            )
    unit_ids = fields.get("unit_ids")
    unit_ids = tuple(range(n)) if unit_ids is None else tuple(unit_ids)
    if len(unit_ids) != n:
        raise LengthMismatch(f"{len(unit_ids)} unit ids for {n} rows")

    if isinstance(raw, Dataset) and raw.action_set == action_set:
        return raw
    return Dataset(
        outcomes=_readonly(outcomes),
        actions=_readonly(actions),
        features=_readonly(features),
        feature_names=feature_names,
        unit_ids=unit_ids,
        action_set=action_set,
    )


# ---------------------------------------------------------------------------
# Location-scale families
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocationScaleFamily:
    """A standardized noise distribution: outcome = mu + sigma * eps, eps ~ F.

    ``sf`` is the survival function 1 - F; providing it directly keeps tail
    probabilities accurate where ``1 - cdf(z)`` would cancel.
    """

    name: str
    cdf: Callable[[np.ndarray], np.ndarray]
    sf: Callable[[np.ndarray], np.ndarray] | None = None

    def survival(self, z):
        if self.sf is not None:
            return self.sf(z)
        return 1.0 - self.cdf(np.asarray(z, dtype=np.float64))


def check_family(family: LocationScaleFamily) -> LocationScaleFamily:
    """Verify tail limits and monotonicity of the family's cdf on a fixed grid."""
    lo = float(np.asarray(family.cdf(np.array([-40.0])))[0])
    hi = float(np.asarray(family.cdf(np.array([40.0])))[0])
    if not (lo <= 1e-9 and hi >= 1.0 - 1e-9):
        raise ValueError(f"family {family.name!r}: cdf({-40})={lo!r}, cdf(40)={hi!r}")
    wide = np.asarray(family.cdf(np.linspace(-40.0, 40.0, 801)), dtype=np.float64)
    if not np.isfinite(wide).all() or (np.diff(wide) < 0).any():
        raise ValueError(f"family {family.name!r}: cdf is not monotone non-decreasing")
    core = np.asarray(family.cdf(np.linspace(-6.0, 6.0, 241)), dtype=np.float64)
    if not (np.diff(core) > 0).all():
        raise ValueError(f"family {family.name!r}: cdf is not strictly increasing on [-6, 6]")
    return family


def _normal_cdf(z):
    return _kernels.normal_cdf(np.asarray(z, dtype=np.float64))


def _normal_sf(z):
    return _kernels.normal_cdf(-np.asarray(z, dtype=np.float64))


def _logistic_cdf(z):
    z = np.asarray(z, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-z))


def _logistic_sf(z):
    z = np.asarray(z, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(z))


NORMAL_FAMILY = check_family(LocationScaleFamily("normal", _normal_cdf, _normal_sf))
LOGISTIC_FAMILY = check_family(LocationScaleFamily("logistic", _logistic_cdf, _logistic_sf))

_BUILTIN_FAMILIES = {f.name: f for f in (NORMAL_FAMILY, LOGISTIC_FAMILY)}


def family_by_name(name: str) -> LocationScaleFamily:
    try:
        return _BUILTIN_FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; built-ins: {sorted(_BUILTIN_FAMILIES)}"
        ) from None


def tabulated_family(name: str, z_grid, cdf_values) -> LocationScaleFamily:
    """Family defined by a tabulated cdf with linear interpolation between knots.

    Values below/above the grid clamp to 0/1. Knot values must be strictly
    increasing so the interpolant is invertible where tabulated.
    """
    z = np.asarray(z_grid, dtype=np.float64)
    f = np.asarray(cdf_values, dtype=np.float64)
    if z.ndim != 1 or z.shape != f.shape or z.size < 2:
        raise ValueError("need matching 1-d grids with at least two knots")
    if (np.diff(z) <= 0).any() or (np.diff(f) <= 0).any():
        raise ValueError("tabulated cdf must be strictly increasing")
    if f.min() < 0.0 or f.max() > 1.0:
        raise ValueError("tabulated cdf values must lie in [0, 1]")

    def cdf(q):
        return np.interp(np.asarray(q, dtype=np.float64), z, f, left=0.0, right=1.0)

    return check_family(LocationScaleFamily(name, cdf))


# ---------------------------------------------------------------------------
# Criteria, moments, assignments
# ---------------------------------------------------------------------------

class CriterionKind(str, Enum):
    NEUTRAL = "neutral"
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    SAFETY_FIRST = "safety_first"


@dataclass(frozen=True)
class RiskCriterion:
    """The decision objective used to rank actions.

    ``y_star`` and ``family`` apply to the safety-first criterion only: the
    score of an action is then the probability that its outcome reaches
    ``y_star`` under the given location-scale family.
    """

    kind: CriterionKind
    y_star: float = 0.0
    family: LocationScaleFamily | None = None

    def __post_init__(self) -> None:
        kind = CriterionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        y = float(self.y_star)
        if not np.isfinite(y):
            raise ValueError(f"y_star must be finite, got {self.y_star!r}")
        object.__setattr__(self, "y_star", y)
        if kind is CriterionKind.SAFETY_FIRST:
            if self.family is None:
                object.__setattr__(self, "family", NORMAL_FAMILY)
        else:
            if self.family is not None:
                raise ValueError(f"{kind.value} criterion takes no family")
            if y != 0.0:
                raise ValueError(f"{kind.value} criterion takes no threshold")

    @classmethod
    def neutral(cls) -> "RiskCriterion":
        return cls(CriterionKind.NEUTRAL)

    @classmethod
    def linear_ra(cls) -> "RiskCriterion":
        return cls(CriterionKind.LINEAR)

    @classmethod
    def quadratic_ra(cls) -> "RiskCriterion":
        return cls(CriterionKind.QUADRATIC)

    @classmethod
    def safety_first(cls, y_star: float = 0.0,
                     family: LocationScaleFamily | None = None) -> "RiskCriterion":
        return cls(CriterionKind.SAFETY_FIRST, y_star=y_star, family=family)

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class ConditionalMoments:
    """Conditional mean and standard deviation of one action's outcome at one x."""

    mu: float
    sigma: float
    action: int
    floored: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "action", int(self.action))
        if not np.isfinite(self.mu):
            raise NonFiniteValue(f"mu must be finite, got {self.mu!r}")
        if not self.sigma >= np.sqrt(VARIANCE_FLOOR):
            raise ValueError(f"sigma {self.sigma!r} below the variance floor")


_ASSIGNMENT_SOURCES = ("actual", "optimal", "oracle")


@dataclass(frozen=True)
class PolicyAssignment:
    """A recommended action per unit, with provenance.

    ``ties`` lists ``(unit_index, tied_labels)`` for every unit whose top two
    criterion scores were within :data:`TIE_EPSILON`; the smallest tied label
    is always the one assigned.
    """

    actions: np.ndarray
    criterion: RiskCriterion
    ties: tuple = ()
    source: str = "optimal"

    def __post_init__(self) -> None:
        acts = np.asarray(self.actions)
        if acts.ndim != 1:
            raise DimensionMismatch(f"actions must be a vector, got shape {acts.shape}")
        object.__setattr__(self, "actions", _readonly(acts.astype(np.int64)))
        object.__setattr__(
            self, "ties", tuple((int(i), tuple(int(a) for a in labs)) for i, labs in self.ties)
        )
        if self.source not in _ASSIGNMENT_SOURCES:
            raise ValueError(f"source must be one of {_ASSIGNMENT_SOURCES}, got {self.source!r}")

    @property
    def n(self) -> int:
        return self.actions.shape[0]


def check_assignment(assignment: PolicyAssignment, action_set: ActionSet) -> PolicyAssignment:
    """Membership check shared by every assignment producer."""
    acts = assignment.actions
    if acts.size and (acts.min() < 0 or acts.max() >= action_set.n_actions):
        bad = int(acts[(acts < 0) | (acts >= action_set.n_actions)][0])
        raise UnknownAction(f"assignment contains action {bad} outside the action set")
    return assignment
