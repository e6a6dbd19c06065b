"""Command-line front end: ingest CSV data, bin treatments into quantile
levels, run the fit/assign/evaluate pipeline per criterion, and drive the
two-arm simulator.

Subcommands: ``synth`` (write a synthetic dataset), ``fit`` (full analysis),
``report`` (render a saved JSON report as text), ``simulate``. Exit codes:
0 success, 2 config error, 3 data error, 4 numeric failure. ``SAFEFIRST_LOG``
(off|info|debug) controls logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox

from .core import (
    ActionSet,
    ConfigError,
    CriterionKind,
    DataError,
    Dataset,
    DegenerateDistribution,
    EstimationError,
    MissingColumn,
    NonFiniteValue,
    ParseError,
    PolicyAssignment,
    RiskCriterion,
    SafeFirstError,
    family_by_name,
    validate_dataset,
)
from .evaluate import (
    EvaluationReport,
    action_frequencies,
    match_rate,
    per_unit_scores,
    regret,
    value_direct,
)
from .moments import (
    BasisKind,
    RegressorConfig,
    RegressorMethod,
    fit_moments,
    fit_propensity,
    overlap_report,
)
from .policy import assign_policy
from .simulate import MonteCarloSummary, TwoArmParams, run_simulation

logger = logging.getLogger("safefirst")

CRITERION_NAMES = ("neutral", "linear", "quadratic", "safety_first")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisConfig:
    """Everything `fit` needs; JSON config keys match the field names."""

    input_path: str
    outcome_column: str
    treatment_column: str
    feature_columns: tuple[str, ...]
    output_dir: str = "safefirst_out"
    n_bins: int = 3
    criteria: tuple[str, ...] = CRITERION_NAMES
    y_star: float = 0.0
    family: str = "normal"
    method: str = "least_squares"
    knn_k: int = 25
    ridge_lambda: float = 1e-8
    basis: str = "linear_plus_squares"
    overlap_threshold: float = 0.01
    plot_sample_fraction: float = 0.005
    id_column: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        cols = (self.outcome_column, self.treatment_column, *self.feature_columns)
        if len(set(cols)) != len(cols):
            raise ConfigError(f"outcome, treatment and feature columns overlap: {cols}")
        if not self.feature_columns:
            raise ConfigError("at least one feature column is required")
        if int(self.n_bins) < 2:
            raise ConfigError(f"n_bins must be >= 2, got {self.n_bins}")
        object.__setattr__(self, "n_bins", int(self.n_bins))
        if not self.criteria:
            raise ConfigError("at least one criterion is required")
        bad = [c for c in self.criteria if c not in CRITERION_NAMES]
        if bad:
            raise ConfigError(f"unknown criteria {bad}; choose from {CRITERION_NAMES}")
        if not math.isfinite(float(self.y_star)):
            raise ConfigError(f"y_star must be finite, got {self.y_star}")
        object.__setattr__(self, "y_star", float(self.y_star))
        try:
            family_by_name(self.family)
            RegressorMethod(self.method)
            BasisKind(self.basis)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 < float(self.plot_sample_fraction) <= 1.0:
            raise ConfigError(
                f"plot_sample_fraction must be in (0, 1], got {self.plot_sample_fraction}"
            )
        object.__setattr__(self, "plot_sample_fraction", float(self.plot_sample_fraction))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        missing = {"input_path", "outcome_column", "treatment_column",
                   "feature_columns"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def regressor_config(self) -> RegressorConfig:
        try:
            return RegressorConfig(
                method=RegressorMethod(self.method),
                knn_k=self.knn_k,
                ridge_lambda=self.ridge_lambda,
                basis=BasisKind(self.basis),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def criterion_objects(self) -> list[RiskCriterion]:
        out = []
        for name in self.criteria:
            if name == "safety_first":
                out.append(RiskCriterion.safety_first(self.y_star, family_by_name(self.family)))
            else:
                out.append(RiskCriterion(CriterionKind(name)))
        return out


# ---------------------------------------------------------------------------
# CSV ingestion and treatment binning
# ---------------------------------------------------------------------------

def discretize_treatment(values, n_bins: int) -> np.ndarray:
    """Quantile-bin a continuous treatment into labels 0..n_bins-1.

    Boundaries are type-1 empirical quantiles (the ceil(n*k/n_bins)-th order
    statistic); values equal to a boundary fall in the lower bin. Raises
    :class:`DegenerateDistribution` when the values cannot fill every bin.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DataError(f"treatment values must be a non-empty vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        idx = int(np.flatnonzero(~np.isfinite(v))[0])
        raise NonFiniteValue(f"treatment contains a non-finite entry at row {idx}")
    n_bins = int(n_bins)
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    if np.unique(v).size < n_bins:
        raise DegenerateDistribution(
            f"only {np.unique(v).size} distinct treatment values for {n_bins} bins"
        )
    srt = np.sort(v)
    n = v.size
    boundaries = np.array([srt[-(-n * k // n_bins) - 1] for k in range(1, n_bins)])
    bins = (v[:, None] > boundaries[None, :]).sum(axis=1).astype(np.int64)
    counts = np.bincount(bins, minlength=n_bins)
    if (counts == 0).any():
        empty = np.flatnonzero(counts == 0).tolist()
        raise DegenerateDistribution(f"ties leave bins {empty} empty; use fewer bins")
    return bins


def load_csv(path, config: AnalysisConfig) -> Dataset:
    """Parse a UTF-8 comma-separated file into a validated :class:`Dataset`.

    The treatment column is read as a continuous value and quantile-binned
    into ``config.n_bins`` levels. Row order is preserved.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    needed = [config.outcome_column, config.treatment_column, *config.feature_columns]
    if config.id_column is not None:
        needed.append(config.id_column)
    for col in needed:
        if col not in header:
            raise MissingColumn(f"{path}: column {col!r} not in header {header}")
    col_idx = {c: header.index(c) for c in needed}

    def parse(row_i: int, row: list, col: str) -> float:
        try:
            return float(row[col_idx[col]])
        except (ValueError, IndexError):
            raise ParseError(
                f"{path}: cannot parse column {col!r} at data row {row_i}"
            ) from None

    n = len(rows)
    if n == 0:
        raise ParseError(f"{path}: no data rows")
    outcomes = np.empty(n)
    treatment = np.empty(n)
    features = np.empty((n, len(config.feature_columns)))
    for i, row in enumerate(rows):
        outcomes[i] = parse(i, row, config.outcome_column)
        treatment[i] = parse(i, row, config.treatment_column)
        for j, col in enumerate(config.feature_columns):
            features[i, j] = parse(i, row, col)

    for name, arr in (("outcome", outcomes), ("treatment", treatment)):
        if not np.isfinite(arr).all():
            idx = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise NonFiniteValue(f"{path}: non-finite {name} at data row {idx}")
    if not np.isfinite(features).all():
        idx = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise NonFiniteValue(f"{path}: non-finite feature at data row {idx}")

    actions = discretize_treatment(treatment, config.n_bins)
    if config.id_column is not None:
        unit_ids = tuple(row[col_idx[config.id_column]] for row in rows)
    else:
        unit_ids = tuple(range(n))
    return validate_dataset(
        {
            "outcomes": outcomes,
            "actions": actions,
            "features": features,
            "feature_names": config.feature_columns,
            "unit_ids": unit_ids,
        },
        action_set=ActionSet(config.n_bins),
    )


# ---------------------------------------------------------------------------
# Synthetic data (stand-in for the proprietary farm panel)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Size and noise knobs for the synthetic farm-like dataset."""

    n: int = 5000
    levels: int = 3
    flat_rate_share: float = 0.10  # farms paid one fixed per-ha subsidy (creates ties)

    def __post_init__(self) -> None:
        if int(self.n) < 30:
            raise ConfigError(f"synthetic n must be >= 30, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if int(self.levels) < 2:
            raise ConfigError(f"levels must be >= 2, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))
        if not 0.0 <= float(self.flat_rate_share) < 1.0:
            raise ConfigError("flat_rate_share must be in [0, 1)")


# Per-level outcome model, in thousand euro/ha: mu_t = a + b.x, sigma_t = c + d.x.
# Both moments are driven by variable costs alone (so the default quadratic
# basis spans the true E[Y^2] exactly); the other covariates confound the
# subsidy but carry zero outcome weight. Means cross around x4 ~ 1.1 and 1.6
# while dispersion rises steeply with the support level, so risk-neutral and
# risk-averse optima genuinely disagree.
_SYNTH_MU = {
    0: (0.95, 0.0, 0.0, 0.0, 0.28),
    1: (0.60, 0.0, 0.0, 0.0, 0.60),
    2: (0.00, 0.0, 0.0, 0.0, 0.98),
}
_SYNTH_SIGMA = {
    0: (0.34, 0.0, 0.0, 0.0, 0.26),
    1: (0.65, 0.0, 0.0, 0.0, 0.28),
    2: (0.90, 0.0, 0.0, 0.0, 0.55),
}
_SYNTH_COLUMNS = ("farm_id", "net_output", "subsidy_per_ha", "machinery_kw",
                  "labour_units", "fixed_costs", "variable_costs")


def synthetic_true_moments(features: np.ndarray, truth: dict):
    """Evaluate the generator's ground-truth (mu, sigma) per support level."""
    X = np.asarray(features, dtype=np.float64)
    levels = sorted(int(k) for k in truth["mu_coef"])
    mu = np.empty((X.shape[0], len(levels)))
    sigma = np.empty_like(mu)
    for t in levels:
        cm = np.asarray(truth["mu_coef"][str(t)], dtype=np.float64)
        cs = np.asarray(truth["sigma_coef"][str(t)], dtype=np.float64)
        mu[:, t] = cm[0] + X @ cm[1:]
        sigma[:, t] = cs[0] + X @ cs[1:]
    return mu, sigma


def generate_synthetic(spec: SyntheticSpec, seed: int, out_path,
                       truth_path=None) -> tuple[Path, Path]:
    """Write a synthetic observational CSV plus its ground-truth JSON.

    Covariates are lognormal intensities per hectare; the continuous subsidy
    depends on them (confounding) with a point mass at one flat rate to
    produce realistic ties; outcomes are heteroskedastic normals around the
    level-specific means above. Deterministic given ``seed``.
    """
    if spec.levels != 3:
        raise ConfigError("the built-in outcome model is calibrated for 3 levels")
    out_path = Path(out_path)
    truth_path = Path(truth_path) if truth_path else out_path.with_suffix(".truth.json")
    rng = Generator(Philox(key=[int(seed), 424242]))
    n = spec.n

    machinery = rng.lognormal(2.42, 0.35, n)
    labour = rng.lognormal(-2.42, 0.35, n)
    fixed = rng.lognormal(-0.70, 0.40, n)
    variable = rng.lognormal(0.36, 0.40, n)
    X = np.column_stack([machinery, labour, fixed, variable])

    subsidy = (0.05 * machinery + 2.0 * labour + 0.4 * fixed + 0.22 * variable
               + 1.1 * rng.lognormal(0.0, 0.5, n))
    subsidy = np.round(subsidy, 2)
    flat = rng.random(n) < spec.flat_rate_share
    subsidy[flat] = np.round(np.median(subsidy), 2)

    level = discretize_treatment(subsidy, spec.levels)
    mu_true = np.empty(n)
    sigma_true = np.empty(n)
    for t in range(spec.levels):
        mask = level == t
        cm = _SYNTH_MU[t]
        cs = _SYNTH_SIGMA[t]
        mu_true[mask] = cm[0] + X[mask] @ np.asarray(cm[1:])
        sigma_true[mask] = cs[0] + X[mask] @ np.asarray(cs[1:])
    outcome = mu_true + sigma_true * rng.standard_normal(n)

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SYNTH_COLUMNS)
        for i in range(n):
            writer.writerow([
                f"F{i:06d}", repr(float(outcome[i])), repr(float(subsidy[i])),
                repr(float(machinery[i])), repr(float(labour[i])),
                repr(float(fixed[i])), repr(float(variable[i])),
            ])

    srt = np.sort(subsidy)
    boundaries = [float(srt[-(-n * k // spec.levels) - 1]) for k in range(1, spec.levels)]
    truth = {
        "seed": int(seed),
        "n": n,
        "levels": spec.levels,
        "feature_columns": list(_SYNTH_COLUMNS[3:]),
        "tercile_boundaries": boundaries,
        "mu_coef": {str(t): list(_SYNTH_MU[t]) for t in range(spec.levels)},
        "sigma_coef": {str(t): list(_SYNTH_SIGMA[t]) for t in range(spec.levels)},
        "model": "Y = mu_t(x) + sigma_t(x) * N(0,1); mu_t = a0 + a.x; sigma_t = c0 + c.x",
    }
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_path, truth_path


def synthetic_config(csv_path, output_dir, **overrides) -> AnalysisConfig:
    """AnalysisConfig wired to the synthetic generator's column names."""
    base = dict(
        input_path=str(csv_path),
        outcome_column="net_output",
        treatment_column="subsidy_per_ha",
        feature_columns=_SYNTH_COLUMNS[3:],
        id_column="farm_id",
        output_dir=str(output_dir),
    )
    base.update(overrides)
    return AnalysisConfig(**base)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlotData:
    """Per-unit actual vs optimal actions and scores for one criterion."""

    unit_ids: tuple
    actual_actions: np.ndarray
    optimal_actions: np.ndarray
    actual_scores: np.ndarray
    optimal_scores: np.ndarray


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_report_text(report: EvaluationReport, meta: dict) -> str:
    """Plain-text report with the table layout used for the JSON twin."""
    crit = report.criterion
    lines = [
        f"safefirst report — criterion: {crit.label}",
        "=" * 44,
        "",
        "Data Information",
        "----------------",
        f"Number of training observations                            = {report.n_used}",
        f"Number of used training observations (optimal policy)     = {report.n_used}",
        "Number of used training observations (non-optimal policy)  = .",
        "Number of new observations                                 = 0",
        "Number of used new observations (optimal policy)           = 0",
        "Number of used new observations (non-optimal policy)       = .",
        "",
        "Policy Information",
        "------------------",
        f"Target variable        : {meta['outcome_column']}",
        f"Features               : {', '.join(meta['feature_columns'])}",
        f"Policy variable        : {meta['treatment_column']}",
        f"Number of actions      = {meta['n_actions']}",
        f"Actions                = {{{', '.join(str(a) for a in range(meta['n_actions']))}}}",
    ]
    if crit.kind is CriterionKind.SAFETY_FIRST:
        lines.append(f"Criterion              = {crit.label} "
                     f"(y_star = {_fmt(crit.y_star)}, family = {crit.family.name})")
    else:
        lines.append(f"Criterion              = {crit.label}")
    lines += [
        "",
        "Frequencies of the actions (training data)",
        "-------------------------------------------",
    ]
    for row in report.action_frequencies.rows:
        lines.append(f"Action {row.action}   Freq. = {row.count}   Percent = {row.percent:.2f}")
    lines.append(f"Total      Freq. = {report.action_frequencies.total}   Percent = 100.00")
    lines += [
        "",
        "Training Data Results",
        "---------------------",
        f"Value-function of the policy (training)         = {_fmt(report.value_actual)}",
        "Value-function of the non-optimal policy        = .",
        f"Value-function of the optimal policy (training) = {_fmt(report.value_optimal)}",
        f"Rate of optimal policy matches                  = {report.match_rate:.4f}",
        f"Regret vs first-best (risk-neutral metric)      = {_fmt(report.regret_vs_first_best)}",
        "",
        "New Data Results",
        "----------------",
        "Value-function of the non-optimal policy (new)  = .",
        "Value-function of the optimal policy (new)      = .",
    ]
    overlap = meta.get("overlap")
    if overlap is not None:
        lines += [
            "",
            "Overlap Diagnostics",
            "-------------------",
            f"Overlap threshold                  = {_fmt(overlap['overlap_threshold'])}",
            f"Units with any propensity below it = {overlap['violation_count']}",
        ]
        for row in overlap["per_action"]:
            lines.append(
                f"Action {row['action']}: min = {row['min']:.4f}, p05 = {row['p05']:.4f}, "
                f"p50 = {row['p50']:.4f}, p95 = {row['p95']:.4f}, max = {row['max']:.4f}"
            )
    return "\n".join(lines) + "\n"


def load_report_json(path) -> EvaluationReport:
    """Parse the machine-readable twin back into an :class:`EvaluationReport`."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return EvaluationReport.from_dict(payload["report"])


def export_plot_data(data_by_criterion: dict, output_dir,
                     sample_fraction: float = 0.005, seed: int = 0) -> list[Path]:
    """Write per-criterion CSVs of actual vs optimal actions and scores.

    Always writes the full file; when ``sample_fraction < 1`` also writes a
    deterministically down-sampled variant for plotting.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    header = ["unit_id", "actual_action", "optimal_action",
              "actual_expected_score", "optimal_expected_score"]
    written: list[Path] = []

    def dump(path: Path, pd: PlotData, rows) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i in rows:
                writer.writerow([
                    pd.unit_ids[i], int(pd.actual_actions[i]), int(pd.optimal_actions[i]),
                    repr(float(pd.actual_scores[i])), repr(float(pd.optimal_scores[i])),
                ])
        written.append(path)

    for label, pd in data_by_criterion.items():
        n = len(pd.unit_ids)
        dump(output_dir / f"{label}.plotdata.csv", pd, range(n))
        if sample_fraction < 1.0:
            size = max(1, int(n * sample_fraction))
            rng = Generator(Philox(key=[int(seed), 777001]))
            rows = np.sort(rng.choice(n, size=size, replace=False))
            dump(output_dir / f"{label}.plotdata.sample.csv", pd, rows)
    return written


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def run_analysis(config: AnalysisConfig) -> dict[str, EvaluationReport]:
    """Fit once, then assign/evaluate/report for every requested criterion.

    Writes ``<criterion>.report.txt``, ``<criterion>.report.json`` and plot
    data under ``config.output_dir``; partial outputs are removed when any
    step fails. Returns the reports keyed by criterion label.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        logger.info("loading %s", config.input_path)
        data = load_csv(config.input_path, config)
        logger.info("fitting moment model (%s) on n=%d", config.method, data.n)
        model = fit_moments(data, config.regressor_config())
        propensity = fit_propensity(data)
        overlap = overlap_report(propensity, data, config.overlap_threshold)
        logger.info("overlap violations below %.3g: %d",
                    config.overlap_threshold, overlap.violation_count)

        neutral = RiskCriterion.neutral()
        first_best = assign_policy(model, data, neutral)
        value_first_best = value_direct(model, first_best, neutral)

        meta = {
            "input": Path(config.input_path).name,
            "outcome_column": config.outcome_column,
            "treatment_column": config.treatment_column,
            "feature_columns": list(config.feature_columns),
            "n_actions": data.action_set.n_actions,
            "overlap": overlap.to_dict(),
        }
        reports: dict[str, EvaluationReport] = {}
        plots: dict[str, PlotData] = {}
        for criterion in config.criterion_objects():
            actual = PolicyAssignment(actions=data.actions, criterion=criterion,
                                      source="actual")
            optimal = (first_best if criterion.kind is CriterionKind.NEUTRAL
                       else assign_policy(model, data, criterion))
            value_neutral_optimal = (
                value_first_best if criterion.kind is CriterionKind.NEUTRAL
                else value_direct(model, optimal, neutral)
            )
            report = EvaluationReport(
                criterion=criterion,
                value_actual=value_direct(model, actual, criterion),
                value_optimal=value_direct(model, optimal, criterion),
                regret_vs_first_best=regret(value_first_best, value_neutral_optimal),
                match_rate=match_rate(actual, optimal),
                action_frequencies=action_frequencies(actual, data.action_set),
                n_used=data.n,
            )
            reports[criterion.label] = report
            plots[criterion.label] = PlotData(
                unit_ids=data.unit_ids,
                actual_actions=actual.actions,
                optimal_actions=optimal.actions,
                actual_scores=per_unit_scores(model, actual, criterion),
                optimal_scores=per_unit_scores(model, optimal, criterion),
            )

            txt_path = out_dir / f"{criterion.label}.report.txt"
            txt_path.write_text(render_report_text(report, meta), encoding="utf-8")
            written.append(txt_path)
            json_path = out_dir / f"{criterion.label}.report.json"
            payload = {"report": report.to_dict(), "meta": meta}
            json_path.write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            written.append(json_path)
            logger.info("%s: actual=%.6g optimal=%.6g match=%.4f", criterion.label,
                        report.value_actual, report.value_optimal, report.match_rate)

        written += export_plot_data(plots, out_dir, config.plot_sample_fraction,
                                    config.seed)
        return reports
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _render_simulation_text(summary: MonteCarloSummary) -> str:
    p = summary.params
    lines = [
        "safefirst two-arm simulation",
        "============================",
        f"mu0 = {_fmt(p.mu0)}, mu1 = {_fmt(p.mu1)}, "
        f"sigma0 = {_fmt(p.sigma0)}, sigma1 = {_fmt(p.sigma1)}",
        f"n per replication = {p.n}, replications = {summary.reps}, seed = {p.seed}",
        "",
        "policy   mean welfare   std. error   closed form",
    ]
    closed = {"RN": summary.closed_form_rn_welfare,
              "RA": summary.closed_form_ra_welfare,
              "OR": summary.closed_form_oracle_welfare}
    for pol in ("RN", "RA", "OR"):
        lines.append(f"{pol:<6} {summary.mean_welfare(pol):>13.4f}"
                     f" {summary.se_welfare(pol):>12.4f} {closed[pol]:>13.4f}")
    share = summary.treated_below_mean_counts.mean() / p.n
    lines += ["", f"mean share of treated units with y1 below mu1 (oracle): {share:.4f}"]
    return "\n".join(lines) + "\n"


def _merge_config(args: argparse.Namespace) -> AnalysisConfig:
    base: dict = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise ConfigError(f"config file not found: {cfg_path}")
        try:
            base = json.loads(cfg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{cfg_path}: invalid JSON ({exc})") from None
        if not isinstance(base, dict):
            raise ConfigError(f"{cfg_path}: config must be a JSON object")
    overrides = {
        "input_path": args.input,
        "outcome_column": args.outcome_col,
        "treatment_column": args.treatment_col,
        "feature_columns": args.features.split(",") if args.features else None,
        "output_dir": args.out,
        "n_bins": args.n_bins,
        "criteria": args.criteria.split(",") if args.criteria else None,
        "y_star": args.y_star,
        "family": args.family,
        "method": args.method,
        "knn_k": args.knn_k,
        "ridge_lambda": args.ridge_lambda,
        "basis": args.basis,
        "overlap_threshold": args.overlap_threshold,
        "plot_sample_fraction": args.plot_sample_fraction,
        "id_column": args.id_col,
        "seed": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return AnalysisConfig.from_dict(base)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safefirst",
        description="Risk-adjusted optimal policy learning on observational data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a synthetic farm-like dataset")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--truth", default=None, help="ground-truth JSON path")
    synth.add_argument("--n", type=int, default=5000)
    synth.add_argument("--seed", type=int, default=0)

    fit = sub.add_parser("fit", help="run the full fit/assign/evaluate pipeline")
    fit.add_argument("--config", default=None, help="JSON config file")
    fit.add_argument("--input", default=None, help="input CSV (overrides config)")
    fit.add_argument("--out", default=None, help="output directory (overrides config)")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--outcome-col", default=None)
    fit.add_argument("--treatment-col", default=None)
    fit.add_argument("--features", default=None, help="comma-separated feature columns")
    fit.add_argument("--id-col", default=None)
    fit.add_argument("--n-bins", type=int, default=None)
    fit.add_argument("--criteria", default=None,
                     help=f"comma-separated subset of {','.join(CRITERION_NAMES)}")
    fit.add_argument("--y-star", type=float, default=None)
    fit.add_argument("--family", default=None, choices=("normal", "logistic"))
    fit.add_argument("--method", default=None,
                     choices=tuple(m.value for m in RegressorMethod))
    fit.add_argument("--knn-k", type=int, default=None)
    fit.add_argument("--ridge-lambda", type=float, default=None)
    fit.add_argument("--basis", default=None, choices=tuple(b.value for b in BasisKind))
    fit.add_argument("--overlap-threshold", type=float, default=None)
    fit.add_argument("--plot-sample-fraction", type=float, default=None)

    rep = sub.add_parser("report", help="render a saved JSON report as text")
    rep.add_argument("json_path", help="a <criterion>.report.json file")
    rep.add_argument("--out", default=None, help="write text here instead of stdout")

    sim = sub.add_parser("simulate", help="run the two-arm Monte Carlo experiment")
    sim.add_argument("--mu0", type=float, default=30.0)
    sim.add_argument("--mu1", type=float, default=75.0)
    sim.add_argument("--sigma0", type=float, default=10.0)
    sim.add_argument("--sigma1", type=float, default=65.0)
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--reps", type=int, default=2000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=None, help="directory for summary files")
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("SAFEFIRST_LOG", "off").strip().lower()
    levels = {"off": logging.CRITICAL + 10, "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(level_name, logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)


def main(argv=None) -> int:
    _configure_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            spec = SyntheticSpec(n=args.n)
            csv_path, truth_path = generate_synthetic(spec, args.seed, args.out,
                                                      args.truth)
            print(f"wrote {csv_path} and {truth_path}")
        elif args.command == "fit":
            config = _merge_config(args)
            reports = run_analysis(config)
            for label, report in reports.items():
                print(f"{label}: value_actual = {_fmt(report.value_actual)}, "
                      f"value_optimal = {_fmt(report.value_optimal)}, "
                      f"match_rate = {report.match_rate:.4f}")
            print(f"reports written to {config.output_dir}")
        elif args.command == "report":
            report = load_report_json(args.json_path)
            with open(args.json_path, encoding="utf-8") as fh:
                meta = json.load(fh)["meta"]
            text = render_report_text(report, meta)
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                print(text, end="")
        elif args.command == "simulate":
            params = TwoArmParams(mu0=args.mu0, mu1=args.mu1, sigma0=args.sigma0,
                                  sigma1=args.sigma1, n=args.n, seed=args.seed)
            summary = run_simulation(params, reps=args.reps)
            text = _render_simulation_text(summary)
            if args.out:
                out_dir = Path(args.out)
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / "simulation.report.txt").write_text(text, encoding="utf-8")
                (out_dir / "simulation.report.json").write_text(
                    json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8",
                )
                print(f"simulation summary written to {out_dir}")
            else:
                print(text, end="")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (EstimationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except SafeFirstError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
