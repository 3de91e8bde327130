"""Command-line pipeline: ``fit``, ``evaluate``, ``simulate``, ``report``.

``fit`` loads a dataset, estimates per-arm conditional moments, assigns an
optimal action to every unit under each requested risk preference, and
writes the assignments, moment matrices, and plot data. ``evaluate`` fits a
propensity model and scores saved policy columns with the RA, IPW, and DR
welfare estimators plus regret against the first-best (neutral) column.
``simulate`` draws a synthetic dataset with a ground-truth sidecar, and
``report`` renders scatter/share plot data and SVGs from a completed fit
run.

Options come from a JSON config file and/or command flags; flags win.
Every command writes a manifest with config, input, and artifact hashes,
and identical inputs reproduce identical artifact bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import reporting
from .data import (
    ColumnSchema,
    DataFormatError,
    Dataset,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .moments import LinearLearner, build_arm_moments, estimate_conditional_means
from .policies import PolicyAssignment, RiskPreference, assign_policy
from .regression import fit_mnlogit, predict_proba
from .simulate import DGPSpec, generate
from .values import ValueEstimate, clip_propensities, value_dr, value_ipw, value_ra


class PipelineError(RuntimeError):
    """A pipeline step could not complete."""


@dataclass
class RunConfig:
    """Resolved options for one command invocation."""

    input: str | None = None
    outdir: str = "run"
    schema: ColumnSchema | None = None
    preferences: tuple[RiskPreference, ...] = (
        RiskPreference.NEUTRAL,
        RiskPreference.LINEAR,
        RiskPreference.QUADRATIC,
    )
    variance_floor: float | None = None
    clip_bounds: tuple[float, float] = (0.01, 0.99)
    ridge: float = 1e-6
    max_iter: int = 100
    tol: float = 1e-8
    estimators: tuple[str, ...] = ("RA", "IPW", "DR")
    seed: int | None = None
    table_format: str = "csv"
    delimiter: str = ","
    allow_unconverged: bool = False
    dgp: dict | None = None

    def __post_init__(self) -> None:
        low, high = self.clip_bounds
        if not (0.0 < low < high < 1.0):
            raise ValueError(f"invalid clip bounds ({low}, {high})")
        if self.table_format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")
        for kind in self.estimators:
            if kind not in ("RA", "IPW", "DR"):
                raise ValueError(f"unknown estimator {kind!r}")

    def hash_payload(self) -> dict:
        """Config as hashed into the manifest; outdir is excluded so the
        same run into two directories hashes identically."""
        payload = {
            "input": self.input,
            "schema": (
                None
                if self.schema is None
                else {
                    "outcome": self.schema.outcome,
                    "action": self.schema.action,
                    "features": list(self.schema.features),
                }
            ),
            "preferences": [p.value for p in self.preferences],
            "variance_floor": self.variance_floor,
            "clip": list(self.clip_bounds),
            "learner": {
                "ridge": self.ridge,
                "max_iter": self.max_iter,
                "tol": self.tol,
            },
            "estimators": list(self.estimators),
            "seed": self.seed,
            "format": self.table_format,
            "delimiter": self.delimiter,
            "allow_unconverged": self.allow_unconverged,
            "dgp": self.dgp,
        }
        return payload


@dataclass
class RunReport:
    """Summary of one command: shares, value/regret tables, diagnostics."""

    command: str
    action_shares: dict[str, list[float]] = field(default_factory=dict)
    value_table: list[dict] = field(default_factory=list)
    regret_table: list[dict] = field(default_factory=list)
    clamp_count: int = 0
    clip_count: int = 0
    diagnostics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for label, shares in self.action_shares.items():
            if abs(sum(shares) - 1.0) > 1e-9:
                raise ValueError(f"action shares for {label!r} do not sum to 1")

    @property
    def all_converged(self) -> bool:
        return all(
            bool(v) for k, v in self.diagnostics.items() if k.endswith("converged")
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "action_shares": self.action_shares,
            "value_table": self.value_table,
            "regret_table": self.regret_table,
            "clamp_count": self.clamp_count,
            "clip_count": self.clip_count,
            "diagnostics": self.diagnostics,
            "warnings": self.warnings,
        }


_CONFIG_KEYS = {
    "input",
    "outdir",
    "schema",
    "preferences",
    "variance_floor",
    "clip",
    "learner",
    "estimators",
    "seed",
    "format",
    "delimiter",
    "allow_unconverged",
    "dgp",
}


def load_config(path: str | Path | None, overrides: Mapping[str, object]) -> RunConfig:
    """Merge a JSON config file with command-line overrides (flags win)."""
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise PipelineError(f"unknown config option(s): {sorted(unknown)}")
    merged = dict(raw)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value

    learner = merged.get("learner", {}) or {}
    schema = merged.get("schema")
    if schema is not None and not isinstance(schema, ColumnSchema):
        schema = ColumnSchema.from_mapping(schema)
    preferences = tuple(
        RiskPreference(p) for p in merged.get("preferences", ("neutral", "linear", "quadratic"))
    )
    clip = merged.get("clip", (0.01, 0.99))
    return RunConfig(
        input=merged.get("input"),
        outdir=str(merged.get("outdir", "run")),
        schema=schema,
        preferences=preferences,
        variance_floor=merged.get("variance_floor"),
        clip_bounds=(float(clip[0]), float(clip[1])),
        ridge=float(learner.get("ridge", 1e-6)),
        max_iter=int(learner.get("max_iter", 100)),
        tol=float(learner.get("tol", 1e-8)),
        estimators=tuple(merged.get("estimators", ("RA", "IPW", "DR"))),
        seed=merged.get("seed"),
        table_format=str(merged.get("format", "csv")),
        delimiter=str(merged.get("delimiter", ",")),
        allow_unconverged=bool(merged.get("allow_unconverged", False)),
        dgp=merged.get("dgp"),
    )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise PipelineError(message)


def _load_valid_dataset(config: RunConfig) -> tuple[Dataset, list[str]]:
    _require(config.input is not None, "no input dataset configured")
    _require(config.schema is not None, "no column schema configured")
    dataset = load_dataset(config.input, config.schema, delimiter=config.delimiter)
    report = validate_dataset(dataset)
    _require(
        report.passed,
        f"dataset failed validation; arm counts {report.arm_counts.tolist()}",
    )
    return dataset, list(report.warnings)


def _table_name(stem: str, fmt: str) -> str:
    return f"{stem}.{'json' if fmt == 'json' else 'csv'}"


def _write_table(
    outdir: Path, stem: str, header: Sequence[str], rows: list[list[object]], fmt: str
) -> str:
    name = _table_name(stem, fmt)
    if fmt == "json":
        records = [
            {key: (v.item() if isinstance(v, np.generic) else v) for key, v in zip(header, row)}
            for row in rows
        ]
        reporting.write_json(outdir / name, records)
    else:
        reporting.write_csv(outdir / name, header, rows)
    return name


def _read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if path.suffix == ".json":
        records = json.loads(path.read_text())
        if not records:
            raise PipelineError(f"empty table: {path}")
        header = list(records[0].keys())
        return header, [[str(rec[k]) for k in header] for rec in records]
    return reporting.read_csv(path)


def _find_table(outdir: Path, stem: str) -> Path:
    for suffix in (".csv", ".json"):
        candidate = outdir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    raise PipelineError(f"missing artifact {stem}.csv (or .json) in {outdir}")


def _shares_rows(assignments: Mapping[str, PolicyAssignment]) -> list[list[object]]:
    rows: list[list[object]] = []
    for label, pol in assignments.items():
        shares = pol.action_shares()
        for a, share in enumerate(shares):
            rows.append([label, a, int((pol.actions == a).sum()), float(share)])
    return rows


def cmd_fit(config: RunConfig) -> RunReport:
    """Load, validate, estimate moments, assign policies, write artifacts."""
    dataset, warnings = _load_valid_dataset(config)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    moments = build_arm_moments(
        dataset, LinearLearner(), variance_floor=config.variance_floor
    )
    assignments = {
        pref.value: assign_policy(moments, pref) for pref in config.preferences
    }
    for label, pol in assignments.items():
        if pol.n_negative_mu:
            warnings.append(
                f"{label}: {pol.n_negative_mu} unit(s) with negative mean estimates; "
                "risk-adjusted ranking is fragile there"
            )

    artifacts: list[str] = []
    idx = np.arange(dataset.n_units)
    header = ["unit"]
    header += [f"{label}_action" for label in assignments]
    for label in assignments:
        header += [f"{label}_utility_{a}" for a in range(dataset.n_actions)]
    rows: list[list[object]] = []
    for i in idx:
        row: list[object] = [int(i)]
        row += [int(assignments[label].actions[i]) for label in assignments]
        for label in assignments:
            row += [float(u) for u in assignments[label].utility[i]]
        rows.append(row)
    artifacts.append(
        _write_table(outdir, "assignments", header, rows, config.table_format)
    )

    moment_rows = [
        [int(i), a, float(moments.mu[i, a]), float(moments.sigma[i, a])]
        for i in idx
        for a in range(dataset.n_actions)
    ]
    artifacts.append(
        _write_table(
            outdir,
            "moments",
            ["unit", "arm", "mu", "sigma"],
            moment_rows,
            config.table_format,
        )
    )

    for label, pol in assignments.items():
        chosen = pol.actions
        scatter_rows = [
            [
                int(i),
                int(chosen[i]),
                float(moments.mu[i, chosen[i]]),
                float(moments.sigma[i, chosen[i]]),
            ]
            for i in idx
        ]
        artifacts.append(
            _write_table(
                outdir,
                f"scatter_{label}",
                ["unit", "action", "mu", "sigma"],
                scatter_rows,
                config.table_format,
            )
        )

    artifacts.append(
        _write_table(
            outdir,
            "shares",
            ["preference", "action", "count", "share"],
            _shares_rows(assignments),
            config.table_format,
        )
    )

    report = RunReport(
        command="fit",
        action_shares={
            label: pol.action_shares().tolist() for label, pol in assignments.items()
        },
        clamp_count=moments.n_clamped,
        diagnostics={
            "n_units": dataset.n_units,
            "n_actions": dataset.n_actions,
            "variance_floor": moments.variance_floor,
            "ties_broken": {
                label: pol.ties_broken for label, pol in assignments.items()
            },
        },
        warnings=warnings,
    )
    reporting.write_json(outdir / "report.json", report.to_dict())
    artifacts.append("report.json")
    reporting.write_json(outdir / "config.json", config.hash_payload())
    artifacts.append("config.json")
    reporting.write_manifest(
        outdir,
        config_payload=config.hash_payload(),
        input_path=Path(config.input),
        artifact_names=artifacts,
    )
    return report


def _read_assignments(path: Path, n_units: int) -> dict[str, np.ndarray]:
    header, rows = _read_table(path)
    _require("unit" in header, f"assignments file {path} has no 'unit' column")
    policy_cols = [h for h in header if h.endswith("_action")]
    _require(bool(policy_cols), f"assignments file {path} has no '*_action' column")
    unit_col = header.index("unit")
    units = np.array([int(float(r[unit_col])) for r in rows])
    if len(units) != n_units or not np.array_equal(units, np.arange(n_units)):
        raise PipelineError(
            "assignments do not align with the dataset by unit id "
            f"({len(units)} rows vs {n_units} units)"
        )
    policies = {}
    for col in policy_cols:
        j = header.index(col)
        policies[col[: -len("_action")]] = np.array(
            [int(float(r[j])) for r in rows], dtype=np.int64
        )
    return policies


def cmd_evaluate(config: RunConfig, assignments_path: str | Path) -> RunReport:
    """Score saved policy columns with the configured welfare estimators."""
    dataset, warnings = _load_valid_dataset(config)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    policies = _read_assignments(Path(assignments_path), dataset.n_units)
    for label, actions in policies.items():
        if actions.min() < 0 or actions.max() >= dataset.n_actions:
            raise PipelineError(f"policy {label!r} contains invalid arm indices")

    q_hat = estimate_conditional_means(dataset, LinearLearner())
    logit = fit_mnlogit(
        dataset.features,
        dataset.actions,
        max_iter=config.max_iter,
        tol=config.tol,
        ridge=config.ridge,
    )
    if not logit.converged:
        warnings.append(
            f"propensity model did not converge in {logit.iterations} iterations "
            f"(gradient norm {logit.final_gradient_norm:.3g})"
        )
    propensities = clip_propensities(
        predict_proba(logit, dataset.features), *config.clip_bounds
    )

    estimates: dict[str, dict[str, ValueEstimate]] = {}
    for label, actions in policies.items():
        per_kind: dict[str, ValueEstimate] = {}
        if "RA" in config.estimators:
            per_kind["RA"] = value_ra(q_hat, actions, label=label)
        if "IPW" in config.estimators:
            per_kind["IPW"] = value_ipw(dataset, actions, propensities, label=label)
        if "DR" in config.estimators:
            per_kind["DR"] = value_dr(dataset, actions, q_hat, propensities, label=label)
        estimates[label] = per_kind

    first_best = estimates.get("neutral")
    if first_best is None:
        warnings.append("no 'neutral' policy column; regret left unreported")
    value_table: list[dict] = []
    regret_table: list[dict] = []
    for label, per_kind in estimates.items():
        for kind, estimate in per_kind.items():
            gap = None
            if first_best is not None and kind in first_best:
                gap = first_best[kind].value - estimate.value
            value_table.append(
                {
                    "policy_label": label,
                    "estimator": kind,
                    "value": estimate.value,
                    "regret_vs_fb": gap,
                }
            )
            if gap is not None and label != "neutral":
                regret_table.append({"policy_label": label, "estimator": kind, "regret": gap})

    report = RunReport(
        command="evaluate",
        value_table=value_table,
        regret_table=regret_table,
        clip_count=propensities.clipped_count,
        diagnostics={
            "propensity_converged": logit.converged,
            "propensity_iterations": logit.iterations,
            "propensity_gradient_norm": logit.final_gradient_norm,
        },
        warnings=warnings,
    )
    artifacts = ["values.json", "report.json", "config.json"]
    reporting.write_json(outdir / "values.json", value_table)
    reporting.write_json(outdir / "report.json", report.to_dict())
    reporting.write_json(outdir / "config.json", config.hash_payload())
    reporting.write_manifest(
        outdir,
        config_payload=config.hash_payload(),
        input_path=Path(config.input),
        artifact_names=artifacts,
    )
    return report


def cmd_simulate(config: RunConfig) -> RunReport:
    """Draw a synthetic dataset and write it with its ground-truth sidecar."""
    _require(config.dgp is not None, "no 'dgp' section configured for simulate")
    dgp = dict(config.dgp)
    if config.seed is not None:
        dgp["seed"] = config.seed
    spec = DGPSpec.from_dict(dgp)
    oracle = generate(spec)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    save_dataset(oracle.dataset, outdir / "dataset.csv", delimiter=config.delimiter)
    m = oracle.n_actions
    header = ["unit"]
    for stem in ("po", "mu", "sigma", "propensity"):
        header += [f"{stem}_{a}" for a in range(m)]
    rows = []
    for i in range(oracle.n_units):
        rows.append(
            [int(i)]
            + [float(v) for v in oracle.potential_outcomes[i]]
            + [float(v) for v in oracle.true_mu[i]]
            + [float(v) for v in oracle.true_sigma[i]]
            + [float(v) for v in oracle.true_propensity[i]]
        )
    reporting.write_csv(outdir / "oracle.csv", header, rows)

    report = RunReport(
        command="simulate",
        diagnostics={
            "seed": spec.seed,
            "n_units": spec.n_units,
            "n_actions": spec.n_actions,
            "arm_counts": oracle.dataset.arm_counts().tolist(),
        },
    )
    artifacts = ["dataset.csv", "oracle.csv", "report.json", "config.json"]
    reporting.write_json(outdir / "report.json", report.to_dict())
    payload = config.hash_payload()
    payload["dgp"] = spec.to_dict()
    reporting.write_json(outdir / "config.json", payload)
    reporting.write_manifest(
        outdir, config_payload=payload, input_path=None, artifact_names=artifacts
    )
    return report


def cmd_report(run_dir: str | Path) -> RunReport:
    """Render plot data and SVGs from a completed fit run."""
    outdir = Path(run_dir)
    _require(outdir.is_dir(), f"run directory {outdir} does not exist")
    assignments_path = _find_table(outdir, "assignments")
    moments_path = _find_table(outdir, "moments")

    header, rows = _read_table(moments_path)
    unit_c, arm_c = header.index("unit"), header.index("arm")
    mu_c, sigma_c = header.index("mu"), header.index("sigma")
    units = sorted({int(float(r[unit_c])) for r in rows})
    arms = sorted({int(float(r[arm_c])) for r in rows})
    if units != list(range(len(units))) or arms != list(range(len(arms))):
        raise PipelineError(f"moments table {moments_path} has gaps in unit/arm ids")
    mu = np.zeros((len(units), len(arms)))
    sigma = np.zeros_like(mu)
    for r in rows:
        i, a = int(float(r[unit_c])), int(float(r[arm_c]))
        mu[i, a] = float(r[mu_c])
        sigma[i, a] = float(r[sigma_c])

    policies = _read_assignments(assignments_path, len(units))
    arm_labels = [str(a) for a in arms]
    artifacts: list[str] = []
    idx = np.arange(len(units))
    scatter_stats: dict[str, float] = {}
    shares: dict[str, list[float]] = {}
    share_rows: list[list[object]] = []
    for label, actions in policies.items():
        chosen_mu = mu[idx, actions]
        chosen_sigma = sigma[idx, actions]
        scatter_rows = [
            [int(i), int(actions[i]), float(chosen_mu[i]), float(chosen_sigma[i])]
            for i in idx
        ]
        name = f"scatter_{label}"
        reporting.write_csv(
            outdir / f"{name}.csv", ["unit", "action", "mu", "sigma"], scatter_rows
        )
        artifacts.append(f"{name}.csv")
        svg = reporting.scatter_svg(
            chosen_sigma,
            chosen_mu,
            actions,
            title=f"optimal policy ({label}): chosen-arm return vs risk",
            legend_labels=arm_labels,
        )
        (outdir / f"{name}.svg").write_text(svg)
        artifacts.append(f"{name}.svg")
        scatter_stats[label] = float(chosen_sigma.mean())
        counts = np.bincount(actions, minlength=len(arms))
        shares[label] = (counts / len(units)).tolist()
        for a in arms:
            share_rows.append([label, a, int(counts[a]), float(counts[a] / len(units))])

    reporting.write_csv(
        outdir / "shares.csv", ["preference", "action", "count", "share"], share_rows
    )
    artifacts.append("shares.csv")

    summary: dict[str, object] = {
        "action_shares": shares,
        "mean_chosen_sigma": scatter_stats,
    }
    values_path = outdir / "values.json"
    if values_path.exists():
        summary["values"] = json.loads(values_path.read_text())
    reporting.write_json(outdir / "summary.json", summary)
    artifacts.append("summary.json")

    return RunReport(
        command="report",
        action_shares=shares,
        diagnostics={"artifacts": sorted(artifacts)},
    )


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--input", help="input dataset (delimited text)")
    parser.add_argument("--outdir", help="output directory")
    parser.add_argument(
        "--pref",
        action="append",
        choices=[p.value for p in RiskPreference],
        help="risk preference (repeatable)",
    )
    parser.add_argument("--clip", help="propensity clip bounds LOW,HIGH")
    parser.add_argument("--variance-floor", type=float, dest="variance_floor")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--format", choices=["csv", "json"], dest="table_format")
    parser.add_argument("--delimiter")
    parser.add_argument("--outcome-col", dest="outcome_col")
    parser.add_argument("--action-col", dest="action_col")
    parser.add_argument("--feature-cols", dest="feature_cols", help="comma-separated")
    parser.add_argument("--allow-unconverged", action="store_true", default=None)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict[str, object] = {
        "input": args.input,
        "outdir": args.outdir,
        "variance_floor": args.variance_floor,
        "seed": args.seed,
        "format": args.table_format,
        "delimiter": args.delimiter,
        "allow_unconverged": args.allow_unconverged,
    }
    if args.pref:
        overrides["preferences"] = tuple(args.pref)
    if args.clip:
        parts = args.clip.split(",")
        if len(parts) != 2:
            raise PipelineError("--clip expects LOW,HIGH")
        overrides["clip"] = (float(parts[0]), float(parts[1]))
    if args.outcome_col or args.action_col or args.feature_cols:
        if not (args.outcome_col and args.action_col and args.feature_cols):
            raise PipelineError(
                "--outcome-col, --action-col, and --feature-cols go together"
            )
        overrides["schema"] = ColumnSchema(
            args.outcome_col,
            args.action_col,
            tuple(c.strip() for c in args.feature_cols.split(",")),
        )
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oplearn",
        description="first-best optimal policy learning with risk preferences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate moments and assign optimal actions")
    _add_common_flags(fit)

    evaluate = sub.add_parser("evaluate", help="estimate policy welfare and regret")
    _add_common_flags(evaluate)
    evaluate.add_argument("--assignments", required=True, help="assignments table")

    simulate = sub.add_parser("simulate", help="draw a synthetic dataset")
    _add_common_flags(simulate)

    report = sub.add_parser("report", help="render plots for a completed fit run")
    report.add_argument("run_dir", help="directory written by 'fit'")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    allow_unconverged = False
    try:
        if args.command == "report":
            run_report = cmd_report(args.run_dir)
        else:
            config = load_config(args.config, _overrides_from_args(args))
            allow_unconverged = config.allow_unconverged
            if args.command == "fit":
                run_report = cmd_fit(config)
            elif args.command == "evaluate":
                run_report = cmd_evaluate(config, args.assignments)
            else:
                run_report = cmd_simulate(config)
    except (PipelineError, DataFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in run_report.warnings:
        print(f"warning: {line}", file=sys.stderr)
    print(json.dumps(run_report.to_dict(), indent=2, sort_keys=True))
    if not run_report.all_converged and not allow_unconverged:
        return 1
    return 0
