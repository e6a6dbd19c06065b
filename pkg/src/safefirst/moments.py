"""Per-action conditional mean and variance models, plus overlap diagnostics.

The conditional variance is the plug-in difference of two regressions fit on
each action's subsample: one targeting the outcome, one its square. Negative
plug-in variances are clamped to the floor and flagged, never raised.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg as sla
from scipy import optimize

from . import _kernels
from .core import (
    VARIANCE_FLOOR,
    ActionSet,
    ConditionalMoments,
    Dataset,
    DimensionMismatch,
    InsufficientCellSize,
    NonConvergenceWarning,
    SingularDesign,
    UnknownAction,
    _readonly,
    validate_dataset,
)


class RegressorMethod(str, Enum):
    LEAST_SQUARES = "least_squares"
    K_NEAREST = "k_nearest"


class BasisKind(str, Enum):
    LINEAR = "linear"
    LINEAR_PLUS_SQUARES = "linear_plus_squares"


@dataclass(frozen=True)
class RegressorConfig:
    """Estimator choice for the per-action moment regressions."""

    method: RegressorMethod = RegressorMethod.LEAST_SQUARES
    knn_k: int = 25
    ridge_lambda: float = 1e-8
    basis: BasisKind = BasisKind.LINEAR_PLUS_SQUARES

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", RegressorMethod(self.method))
        object.__setattr__(self, "basis", BasisKind(self.basis))
        if int(self.knn_k) < 1:
            raise ValueError(f"knn_k must be positive, got {self.knn_k}")
        object.__setattr__(self, "knn_k", int(self.knn_k))
        lam = float(self.ridge_lambda)
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        object.__setattr__(self, "ridge_lambda", lam)


def _standardize_stats(X: np.ndarray):
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0  # constant columns carry no information
    return center, scale


def _expand_basis(X: np.ndarray, basis: BasisKind) -> np.ndarray:
    if basis is BasisKind.LINEAR:
        return X
    return np.hstack([X, X * X])


class LeastSquaresRegressor:
    """Ridge-stabilised least squares on a fixed polynomial basis.

    Basis columns are standardized by training mean/stddev and the intercept
    is left unpenalised, so fitted values average exactly to the training
    mean of the target.
    """

    def __init__(self, basis: BasisKind = BasisKind.LINEAR_PLUS_SQUARES,
                 ridge_lambda: float = 1e-8):
        self.basis = BasisKind(basis)
        self.ridge_lambda = float(ridge_lambda)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LeastSquaresRegressor":
        Z = _expand_basis(np.asarray(X, dtype=np.float64), self.basis)
        y = np.asarray(y, dtype=np.float64)
        self._center, self._scale = _standardize_stats(Z)
        Zc = (Z - self._center) / self._scale
        gram = Zc.T @ Zc
        gram[np.diag_indices_from(gram)] += self.ridge_lambda
        try:
            chol = sla.cho_factor(gram, lower=True, check_finite=False)
        except sla.LinAlgError:
            raise SingularDesign(
                "normal equations are singular; increase ridge_lambda or drop "
                "collinear features"
            ) from None
        self._coef = sla.cho_solve(chol, Zc.T @ y, check_finite=False)
        self._intercept = float(y.mean())
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = _expand_basis(np.asarray(X, dtype=np.float64), self.basis)
        Zc = (Z - self._center) / self._scale
        return Zc @ self._coef + self._intercept


class KNearestRegressor:
    """k-nearest-neighbour average of one or more target columns.

    Distances are Euclidean on features standardized by the training
    mean/stddev; distance ties are broken by training-row order.
    """

    def __init__(self, k: int = 25):
        self.k = int(k)

    def fit(self, X: np.ndarray, targets: np.ndarray) -> "KNearestRegressor":
        X = np.asarray(X, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim == 1:
            targets = targets[:, None]
        if not 1 <= self.k <= X.shape[0]:
            raise InsufficientCellSize(f"k={self.k} exceeds the {X.shape[0]}-row cell")
        self._center, self._scale = _standardize_stats(X)
        self._train = np.ascontiguousarray((X - self._center) / self._scale)
        self._targets = np.ascontiguousarray(targets)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        Xs = (np.asarray(X, dtype=np.float64) - self._center) / self._scale
        return _kernels.knn_mean(self._train, self._targets, np.ascontiguousarray(Xs), self.k)


class _LeastSquaresPair:
    """Mean and second-moment regressions sharing one basis."""

    def __init__(self, config: RegressorConfig):
        self._mean = LeastSquaresRegressor(config.basis, config.ridge_lambda)
        self._second = LeastSquaresRegressor(config.basis, config.ridge_lambda)

    def fit(self, X, y):
        self._mean.fit(X, y)
        self._second.fit(X, y * y)
        return self

    def predict_pair(self, X):
        return self._mean.predict(X), self._second.predict(X)


class _KNearestPair:
    """Mean and second-moment targets averaged over one neighbour search."""

    def __init__(self, config: RegressorConfig):
        self._knn = KNearestRegressor(config.knn_k)

    def fit(self, X, y):
        self._knn.fit(X, np.column_stack([y, y * y]))
        return self

    def predict_pair(self, X):
        out = self._knn.predict(X)
        return out[:, 0], out[:, 1]


@dataclass(frozen=True)
class MomentModel:
    """Fitted per-action (mean, second moment) regressor pairs."""

    pairs: tuple
    config: RegressorConfig
    action_set: ActionSet
    variance_floor: float
    training_n: int
    training_features: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.training_features.shape[1]

    def predict_mu_sigma(self, X: np.ndarray, action: int):
        """Vectorised moments for one action at many feature rows.

        Returns ``(mu, sigma, floored)`` arrays; ``sigma`` is floored at
        ``sqrt(variance_floor)``.
        """
        if action not in self.action_set:
            raise UnknownAction(f"action {action!r} outside the action set")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.p:
            raise DimensionMismatch(f"expected {self.p} features, got {X.shape[1]}")
        mu, second = self.pairs[int(action)].predict_pair(X)
        raw_var = second - mu * mu
        floored = raw_var < self.variance_floor
        sigma = np.sqrt(np.maximum(raw_var, self.variance_floor))
        return mu, sigma, floored

    def moment_matrix(self, X: np.ndarray):
        """(n, M) matrices of mu and sigma plus the floored flags."""
        cols = [self.predict_mu_sigma(X, a) for a in self.action_set]
        mu = np.column_stack([c[0] for c in cols])
        sigma = np.column_stack([c[1] for c in cols])
        floored = np.column_stack([c[2] for c in cols])
        return mu, sigma, floored


def fit_moments(data: Dataset, config: RegressorConfig | None = None,
                variance_floor: float = VARIANCE_FLOOR) -> MomentModel:
    """Fit one (mean, second moment) regressor pair per observed action.

    Deterministic given ``data`` and ``config``. Each action cell must hold
    at least ``max(knn_k, p + 1)`` rows (``p + 1`` for least squares).

    Raises
    ------
    InsufficientCellSize, SingularDesign
    """
    data = validate_dataset(data)
    config = config or RegressorConfig()
    if not variance_floor > 0:
        raise ValueError(f"variance_floor must be positive, got {variance_floor}")

    needed = data.p + 1
    if config.method is RegressorMethod.K_NEAREST:
        needed = max(config.knn_k, needed)
    cells = np.bincount(data.actions, minlength=data.action_set.n_actions)
    if cells.min() < needed:
        small = int(np.argmin(cells))
        raise InsufficientCellSize(
            f"action {small} has {int(cells[small])} rows; "
            f"{needed} needed for method={config.method.value}"
        )

    pair_cls = (_KNearestPair if config.method is RegressorMethod.K_NEAREST
                else _LeastSquaresPair)
    pairs = []
    for action in data.action_set:
        mask = data.actions == action
        pairs.append(pair_cls(config).fit(data.features[mask], data.outcomes[mask]))

    model = MomentModel(
        pairs=tuple(pairs),
        config=config,
        action_set=data.action_set,
        variance_floor=float(variance_floor),
        training_n=data.n,
        training_features=_readonly(data.features),
        feature_names=data.feature_names,
    )
    for action in data.action_set:
        mu, second = model.pairs[action].predict_pair(data.features)
        if not (np.isfinite(mu).all() and np.isfinite(second).all()):
            raise SingularDesign(f"non-finite predictions for action {action}")
    return model


def predict_moments(model: MomentModel, x: np.ndarray, action: int) -> ConditionalMoments:
    """Conditional moments of one action at one feature vector.

    ``sigma`` is the plug-in standard deviation floored at
    ``sqrt(variance_floor)``; ``floored`` records whether the clamp bound.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"x must be a single feature vector, got shape {x.shape}")
    mu, sigma, floored = model.predict_mu_sigma(x[None, :], action)
    return ConditionalMoments(mu=float(mu[0]), sigma=float(sigma[0]),
                              action=int(action), floored=bool(floored[0]))


# ---------------------------------------------------------------------------
# Propensity diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropensityModel:
    """Multinomial logistic model of Pr(T = t | X), for overlap diagnostics only."""

    coef: np.ndarray  # (M - 1, p + 1), action 0 is the reference
    center: np.ndarray
    scale: np.ndarray
    action_set: ActionSet
    converged: bool
    final_gradient_norm: float
    n_iterations: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """(n, M) class probabilities, strictly inside (0, 1), rows sum to 1."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        Xs = (X - self.center) / self.scale
        logits = np.zeros((X.shape[0], self.action_set.n_actions))
        logits[:, 1:] = Xs @ self.coef[:, 1:].T + self.coef[:, 0]
        logits -= logits.max(axis=1, keepdims=True)
        np.clip(logits, -700.0, None, out=logits)  # keep exp strictly positive
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs


def _multinomial_nll_grad(theta, Xd, onehot, n_classes):
    n = Xd.shape[0]
    W = theta.reshape(n_classes - 1, Xd.shape[1])
    logits = np.zeros((n, n_classes))
    logits[:, 1:] = Xd @ W.T
    shift = logits.max(axis=1, keepdims=True)
    logz = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
    nll = (logz - (logits * onehot).sum(axis=1)).mean()
    probs = np.exp(logits - logz[:, None])
    grad = ((probs - onehot)[:, 1:].T @ Xd) / n
    return nll, grad.ravel()


def fit_propensity(data: Dataset, max_iter: int = 500, gtol: float = 1e-6) -> PropensityModel:
    """Maximum-likelihood multinomial logit of the realized action on features.

    Emits :class:`NonConvergenceWarning` (and flags the model) when the mean
    log-likelihood gradient norm is still above ``gtol`` after ``max_iter``
    iterations; the fitted model is returned either way.
    """
    data = validate_dataset(data)
    m = data.action_set.n_actions
    center, scale = _standardize_stats(data.features)
    Xd = np.hstack([np.ones((data.n, 1)), (data.features - center) / scale])
    onehot = np.zeros((data.n, m))
    onehot[np.arange(data.n), data.actions] = 1.0

    x0 = np.zeros((m - 1) * Xd.shape[1])
    res = optimize.minimize(
        _multinomial_nll_grad, x0, args=(Xd, onehot, m), jac=True,
        method="L-BFGS-B", options={"maxiter": max_iter, "gtol": gtol, "ftol": 0.0},
    )
    _, grad = _multinomial_nll_grad(res.x, Xd, onehot, m)
    gnorm = float(np.abs(grad).max())
    converged = gnorm < gtol
    if not converged:
        warnings.warn(
            f"propensity fit stopped after {res.nit} iterations with gradient "
            f"norm {gnorm:.3e} (tolerance {gtol:.1e})",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return PropensityModel(
        coef=_readonly(res.x.reshape(m - 1, Xd.shape[1])),
        center=_readonly(center),
        scale=_readonly(scale),
        action_set=data.action_set,
        converged=converged,
        final_gradient_norm=gnorm,
        n_iterations=int(res.nit),
    )


_QUANTILE_POINTS = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class OverlapDiagnostics:
    """Summary of predicted propensities and count of near-violations."""

    per_action: tuple  # one mapping per action: min/max plus quantiles
    violation_count: int
    overlap_threshold: float
    n: int

    def to_dict(self) -> dict:
        return {
            "overlap_threshold": self.overlap_threshold,
            "violation_count": self.violation_count,
            "n": self.n,
            "per_action": [dict(stats) for stats in self.per_action],
        }


def overlap_report(model: PropensityModel, data: Dataset,
                   threshold: float = 0.01) -> OverlapDiagnostics:
    """Quantiles of predicted propensities and units below ``threshold``.

    ``threshold`` must lie strictly between 0 and 1/M: anything at or above
    1/M would flag balanced assignment itself.
    """
    m = model.action_set.n_actions
    if not 0.0 < threshold < 1.0 / m:
        raise ValueError(f"threshold must be in (0, 1/{m}), got {threshold}")
    probs = model.predict_proba(data.features)
    stats = []
    for a in range(m):
        col = probs[:, a]
        qs = np.quantile(col, _QUANTILE_POINTS)
        row = {"action": a, "min": float(col.min()), "max": float(col.max())}
        row.update({f"p{int(100 * q):02d}": float(v) for q, v in zip(_QUANTILE_POINTS, qs)})
        stats.append(row)
    violations = int(((probs < threshold).any(axis=1)).sum())
    return OverlapDiagnostics(
        per_action=tuple(stats),
        violation_count=violations,
        overlap_threshold=float(threshold),
        n=data.n,
    )
