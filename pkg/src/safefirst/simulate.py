"""Two-arm Monte Carlo experiment: oracle vs risk-neutral vs risk-averse rules.

Randomness comes from the counter-based Philox4x64 generator keyed by
``(seed, stream)``, so replication r of a run is the same no matter how the
replications are scheduled. Normal variates use the inverse-CDF transform:
each 64-bit word w becomes the uniform ((w >> 11) + 0.5) * 2**-53, which is
then mapped through the standard normal quantile function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy import special

from . import _kernels
from .core import (
    LengthMismatch,
    NonBinaryAction,
    PolicyAssignment,
    RiskCriterion,
    TIE_EPSILON,
    _readonly,
)

_POLICIES = ("RN", "RA", "OR")


@dataclass(frozen=True)
class TwoArmParams:
    """Known potential-outcome moments for the binary-treatment experiment."""

    mu0: float = 30.0
    mu1: float = 75.0
    sigma0: float = 10.0
    sigma1: float = 65.0
    n: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("mu0", "mu1", "sigma0", "sigma1"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise ValueError("sigmas must be positive")
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        object.__setattr__(self, "seed", seed)


@dataclass(frozen=True)
class TwoArmSample:
    """Jointly drawn potential outcomes; only simulation ever sees both."""

    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self) -> None:
        y0 = np.asarray(self.y0, dtype=np.float64)
        y1 = np.asarray(self.y1, dtype=np.float64)
        if y0.shape != y1.shape or y0.ndim != 1:
            raise LengthMismatch(f"y0 {y0.shape} and y1 {y1.shape} must be equal vectors")
        object.__setattr__(self, "y0", _readonly(y0))
        object.__setattr__(self, "y1", _readonly(y1))

    @property
    def n(self) -> int:
        return self.y0.shape[0]


def _standard_normals(seed: int, stream: int, count: int) -> np.ndarray:
    words = Philox(key=[seed, stream]).random_raw(count)
    uniforms = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return special.ndtri(uniforms)


def draw_two_arm(params: TwoArmParams, stream: int = 0) -> TwoArmSample:
    """Draw n independent (Y0, Y1) pairs; deterministic in (seed, stream)."""
    z = _standard_normals(params.seed, stream, 2 * params.n)
    return TwoArmSample(
        y0=params.mu0 + params.sigma0 * z[: params.n],
        y1=params.mu1 + params.sigma1 * z[params.n:],
    )


def oracle_assignment(sample: TwoArmSample) -> PolicyAssignment:
    """Treat exactly the units whose realized gain y1 - y0 is strictly positive.

    Within-tolerance ties (|y1 - y0| < TIE_EPSILON) are recorded; the strict
    inequality keeps them untreated, which is the smallest-label resolution.
    """
    treated = sample.y1 > sample.y0
    near = np.flatnonzero(np.abs(sample.y1 - sample.y0) < TIE_EPSILON)
    return PolicyAssignment(
        actions=treated.astype(np.int64),
        criterion=RiskCriterion.neutral(),
        ties=tuple((int(i), (0, 1)) for i in near),
        source="oracle",
    )


def realized_outcomes(sample: TwoArmSample, assignment: PolicyAssignment) -> np.ndarray:
    """Per-unit outcome under the assignment: y1 where treated, else y0."""
    acts = assignment.actions
    if acts.shape[0] != sample.n:
        raise LengthMismatch(f"assignment covers {acts.shape[0]} units, sample {sample.n}")
    if not np.isin(acts, (0, 1)).all():
        bad = int(acts[~np.isin(acts, (0, 1))][0])
        raise NonBinaryAction(f"two-arm outcomes need binary actions, got {bad}")
    return np.where(acts == 1, sample.y1, sample.y0)


def rn_rule_treats(params: TwoArmParams) -> bool:
    """Risk-neutral rule: treat everyone iff mu1 beats mu0."""
    return params.mu1 > params.mu0


def ra_rule_treats(params: TwoArmParams) -> bool:
    """Linear risk-averse rule: treat everyone iff mu1/sigma1 beats mu0/sigma0."""
    return params.mu1 / params.sigma1 > params.mu0 / params.sigma0


def closed_form_rn_welfare(params: TwoArmParams) -> float:
    """Expected welfare of the risk-neutral all-or-nothing rule."""
    return params.mu1 if rn_rule_treats(params) else params.mu0


def closed_form_ra_welfare(params: TwoArmParams) -> float:
    """Expected welfare of the linear risk-averse all-or-nothing rule."""
    return params.mu1 if ra_rule_treats(params) else params.mu0


def closed_form_oracle_welfare(params: TwoArmParams) -> float:
    """E[max(Y0, Y1)] for independent normal arms.

    With theta = sqrt(sigma0^2 + sigma1^2) and d = (mu1 - mu0)/theta this is
    mu1*Phi(d) + mu0*Phi(-d) + theta*phi(d).
    """
    theta = float(np.hypot(params.sigma0, params.sigma1))
    d = (params.mu1 - params.mu0) / theta
    pdf = np.exp(-0.5 * d * d) / np.sqrt(2.0 * np.pi)
    cdf = float(_kernels.normal_cdf(np.array([d]))[0])
    return params.mu1 * cdf + params.mu0 * (1.0 - cdf) + theta * float(pdf)


@dataclass(frozen=True)
class MonteCarloSummary:
    """Replication averages against their closed-form expectations."""

    params: TwoArmParams
    reps: int
    mean_rn: float
    mean_ra: float
    mean_or: float
    se_rn: float
    se_ra: float
    se_or: float
    closed_form_rn_welfare: float
    closed_form_ra_welfare: float
    closed_form_oracle_welfare: float
    # per-replication count of treated units whose y1 fell below mu1
    # (the "worst scenario" tally under the oracle policy)
    treated_below_mean_counts: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "treated_below_mean_counts",
            _readonly(np.asarray(self.treated_below_mean_counts, dtype=np.int64)),
        )

    def mean_welfare(self, policy: str) -> float:
        return {"RN": self.mean_rn, "RA": self.mean_ra, "OR": self.mean_or}[policy]

    def se_welfare(self, policy: str) -> float:
        return {"RN": self.se_rn, "RA": self.se_ra, "OR": self.se_or}[policy]

    def to_dict(self) -> dict:
        return {
            "params": {
                "mu0": self.params.mu0, "mu1": self.params.mu1,
                "sigma0": self.params.sigma0, "sigma1": self.params.sigma1,
                "n": self.params.n, "seed": self.params.seed,
            },
            "reps": self.reps,
            "mean_welfare": {p: self.mean_welfare(p) for p in _POLICIES},
            "se_welfare": {p: self.se_welfare(p) for p in _POLICIES},
            "closed_form": {
                "RN": self.closed_form_rn_welfare,
                "RA": self.closed_form_ra_welfare,
                "OR": self.closed_form_oracle_welfare,
            },
            "treated_below_mean_counts": self.treated_below_mean_counts.tolist(),
        }


def run_simulation(params: TwoArmParams, reps: int = 2000) -> MonteCarloSummary:
    """Replicate the two-arm experiment and summarize welfare per policy.

    Each replication draws a fresh sample from substream ``(seed, rep)``,
    applies the risk-neutral, risk-averse, and oracle rules, and records the
    sample-mean welfare of each.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    rn_all = rn_rule_treats(params)
    ra_all = ra_rule_treats(params)
    welfare = np.empty((reps, 3), dtype=np.float64)
    below = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        sample = draw_two_arm(params, stream=r)
        w_rn = sample.y1.mean() if rn_all else sample.y0.mean()
        w_ra = sample.y1.mean() if ra_all else sample.y0.mean()
        treated = sample.y1 > sample.y0
        w_or = np.where(treated, sample.y1, sample.y0).mean()
        welfare[r] = (w_rn, w_ra, w_or)
        below[r] = int((sample.y1[treated] < params.mu1).sum())
    means = welfare.mean(axis=0)
    if reps > 1:
        ses = welfare.std(axis=0, ddof=1) / np.sqrt(reps)
    else:
        ses = np.zeros(3)
    return MonteCarloSummary(
        params=params,
        reps=int(reps),
        mean_rn=float(means[0]), mean_ra=float(means[1]), mean_or=float(means[2]),
        se_rn=float(ses[0]), se_ra=float(ses[1]), se_or=float(ses[2]),
        closed_form_rn_welfare=closed_form_rn_welfare(params),
        closed_form_ra_welfare=closed_form_ra_welfare(params),
        closed_form_oracle_welfare=closed_form_oracle_welfare(params),
        treated_below_mean_counts=below,
    )
