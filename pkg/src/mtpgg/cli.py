"""Command-line front end: fit, select, simulate.

Exit codes: 0 success, 2 unusable input data, 3 the requested fit did not
converge, 4 unusable study configuration.  Reports are JSON with NaN
mapped to null and contain nothing run-dependent, so rerunning a command
on the same input reproduces the output byte for byte; wall-clock timing
goes only into the simulate manifest.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .ggdist import Family
from .inference import FitOptions, InitializationError, fit_mtp, select_model, wald_inference
from .likelihood import Dataset, StructuralDataError
from .simstudy import ALL_FAMILIES, run_study, scenario_from_shape, summarize

__all__ = ["main"]


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mtpgg",
        description="Marginalized two-part regression for semicontinuous outcomes "
        "on the generalized gamma family and its reductions.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_data_args(sp):
        sp.add_argument("--data", required=True, help="CSV file with one row per observation")
        sp.add_argument("--outcome", required=True, help="name of the nonnegative outcome column")
        sp.add_argument(
            "--binary-covars",
            help="comma-separated covariates for the zero-versus-positive part "
            "(default: every non-outcome column)",
        )
        sp.add_argument(
            "--cont-covars",
            help="comma-separated covariates for the continuous part "
            "(default: every non-outcome column)",
        )
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--max-iter", type=int, default=500, help="optimizer iteration cap")
        sp.add_argument("--ci-level", type=float, default=0.95, help="Wald interval level")

    fit = sub.add_parser("fit", help="fit one family and report Wald inference")
    add_data_args(fit)
    fit.add_argument(
        "--family", choices=[f.value for f in Family], default=Family.GG.value,
        help="continuous-part family (default: the full family)",
    )

    sel = sub.add_parser("select", help="fit the candidate families and compare them")
    add_data_args(sel)

    sim = sub.add_parser("simulate", help="run a replication study from an INI config")
    sim.add_argument("--config", required=True, help="INI file with [study] and [scenario:NAME]")
    sim.add_argument("--out", required=True, help="output directory for CSVs and the manifest")
    sim.add_argument("--seed", type=int, help="override the configured base seed")
    sim.add_argument("--reps", type=int, help="override every scenario's replicate count")
    sim.add_argument("--workers", type=int, default=1, help="worker processes")
    sim.add_argument("--ci-level", type=float, help="override the configured interval level")
    return p


# ------------------------------------------------------------------ data IO


def _split_names(spec: str | None, fallback: list[str], what: str) -> list[str]:
    if spec is None:
        return list(fallback)
    names = [s.strip() for s in spec.split(",") if s.strip()]
    if not names:
        raise CliError(2, f"{what} must name at least one column")
    return names


def _load_dataset(args):
    path = Path(args.data)
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except OSError as err:
        raise CliError(2, f"cannot read {path}: {err}") from err
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as err:
        raise CliError(2, f"{path} is not a usable CSV file: {err}") from err
    if args.outcome not in df.columns:
        raise CliError(2, f"outcome column {args.outcome!r} not found in {path}")
    others = [c for c in df.columns if c != args.outcome]
    z_names = _split_names(args.binary_covars, others, "--binary-covars")
    x_names = _split_names(args.cont_covars, others, "--cont-covars")
    used = [args.outcome] + list(dict.fromkeys(z_names + x_names))
    for col in used:
        if col not in df.columns:
            raise CliError(2, f"column {col!r} not found in {path}")
        if not np.issubdtype(df[col].dtype, np.number):
            raise CliError(2, f"column {col!r} has non-numeric values")
        if df[col].isna().any():
            raise CliError(2, f"column {col!r} has missing values")
    y = df[args.outcome].to_numpy(dtype=float)
    ones = np.ones((len(df), 1))
    Z = np.hstack([ones, df[z_names].to_numpy(dtype=float)])
    X = np.hstack([ones, df[x_names].to_numpy(dtype=float)])
    try:
        d = Dataset(y=y, X=X, Z=Z)
    except ValueError as err:
        raise CliError(2, f"unusable data in {path}: {err}") from err
    return d, ["const"] + x_names, ["const"] + z_names


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Family):
        return v.value
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def _emit_json(report: dict, out: str | None):
    text = json.dumps(_jsonable(report), indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as err:
            raise CliError(2, f"cannot write {out}: {err}") from err


def _interpretation(name: str) -> str | None:
    part, _, cov = name.partition(":")
    if cov in ("", "const"):
        return None
    if part == "alpha":
        target = "the odds of a positive outcome"
    elif part in ("beta", "delta"):
        target = "the unconditional marginal mean"
    else:
        return None
    return (
        f"exp(estimate) is the multiplicative effect on {target} "
        f"of a one-unit increase in {cov}"
    )


def _check_common(args):
    if args.max_iter < 1:
        raise CliError(2, "--max-iter must be at least 1")
    if not 0.0 < args.ci_level < 1.0:
        raise CliError(2, "--ci-level must be strictly between 0 and 1")


# ---------------------------------------------------------------- commands


def _param_rows(fit, ci_level):
    if fit.converged:
        rows = wald_inference(fit, ci_level=ci_level)
    else:
        rows = [
            {"name": nm, "estimate": float(est), "se": None, "z": None, "p": None,
             "ci_low": None, "ci_high": None}
            for nm, est in zip(fit.names, fit.estimates)
        ]
    for row in rows:
        est = row["estimate"]
        note = _interpretation(row["name"])
        if note is not None:
            row["exp_estimate"] = math.exp(est)
            row["interpretation"] = note
    return rows


def _fit_summary(fit, ci_level):
    return {
        "family": fit.family,
        "converged": fit.converged,
        "message": fit.message,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "n_iter": fit.n_iter,
        "parameters": _param_rows(fit, ci_level),
    }


def _cmd_fit(args) -> int:
    _check_common(args)
    d, x_names, z_names = _load_dataset(args)
    try:
        fit = fit_mtp(
            d, Family(args.family), options=FitOptions(max_iter=args.max_iter),
            x_names=x_names, z_names=z_names,
        )
    except (StructuralDataError, InitializationError) as err:
        raise CliError(2, str(err)) from err
    report = {
        "command": "fit",
        "n_obs": d.n,
        "n_zero": d.n_zero,
        "n_positive": d.n_positive,
        "ci_level": args.ci_level,
        **_fit_summary(fit, args.ci_level),
    }
    _emit_json(report, args.out)
    return 0 if fit.converged else 3


def _cmd_select(args) -> int:
    _check_common(args)
    d, x_names, z_names = _load_dataset(args)
    try:
        report = select_model(
            d, options=FitOptions(max_iter=args.max_iter), x_names=x_names, z_names=z_names
        )
    except (StructuralDataError, InitializationError) as err:
        raise CliError(2, str(err)) from err
    out = {
        "command": "select",
        "n_obs": d.n,
        "n_zero": d.n_zero,
        "n_positive": d.n_positive,
        "ci_level": args.ci_level,
        "aic_best": report.aic_best,
        "suggestion": report.suggestion,
        "note": report.note,
        "fits": {fam.value: _fit_summary(fit, args.ci_level) for fam, fit in report.fits.items()},
    }
    _emit_json(out, args.out)
    return 0 if any(f.converged for f in report.fits.values()) else 3


def _read_study_config(path: str):
    cp = configparser.ConfigParser()
    try:
        read = cp.read(path)
    except configparser.Error as err:
        raise CliError(4, f"cannot parse {path}: {err}") from err
    if not read:
        raise CliError(4, f"config file not found: {path}")

    def study_get(getter, key, fallback):
        try:
            return getter("study", key, fallback=fallback)
        except (configparser.Error, ValueError) as err:
            raise CliError(4, f"[study] bad value for {key!r}: {err}") from err

    base_seed = study_get(cp.getint, "base_seed", 0)
    ci_level = study_get(cp.getfloat, "ci_level", 0.95)
    fam_spec = study_get(cp.get, "families", None)
    if fam_spec is None:
        families = ALL_FAMILIES
    else:
        try:
            families = tuple(Family(s.strip()) for s in fam_spec.split(",") if s.strip())
        except ValueError as err:
            raise CliError(4, f"[study] bad value for 'families': {err}") from err
        if not families:
            raise CliError(4, "[study] 'families' names no families")

    sections = [s for s in cp.sections() if s.startswith("scenario:")]
    if not sections:
        raise CliError(4, f"{path} defines no [scenario:NAME] sections")
    scenarios = []
    for sect in sections:
        name = sect.split(":", 1)[1]
        sec = cp[sect]
        for key in ("family", "n", "reps", "shape"):
            if key not in sec:
                raise CliError(4, f"[{sect}] missing key {key!r}")
        try:
            family = Family(sec["family"].strip())
            n = sec.getint("n")
            reps = sec.getint("reps")
            if family is Family.GG:
                parts = [s for s in sec["shape"].split(",") if s.strip()]
                if len(parts) != 2:
                    raise ValueError("the full family takes shape as 'sigma, k'")
                shape = (float(parts[0]), float(parts[1]))
            else:
                shape = float(sec["shape"])
            kwargs = {}
            for coef in ("alpha", "beta"):
                if coef in sec:
                    kwargs[coef] = tuple(float(s) for s in sec[coef].split(","))
            scenarios.append(scenario_from_shape(name, family, n, reps, shape, **kwargs))
        except ValueError as err:
            raise CliError(4, f"[{sect}] {err}") from err
    return scenarios, base_seed, ci_level, families


def _cmd_simulate(args) -> int:
    scenarios, base_seed, ci_level, families = _read_study_config(args.config)
    if args.seed is not None:
        base_seed = args.seed
    if args.ci_level is not None:
        ci_level = args.ci_level
    if not 0.0 < ci_level < 1.0:
        raise CliError(4, "ci_level must be strictly between 0 and 1")
    if args.reps is not None:
        if args.reps < 1:
            raise CliError(4, "--reps must be at least 1")
        scenarios = [replace(sc, reps=args.reps) for sc in scenarios]
    if args.workers < 1:
        raise CliError(2, "--workers must be at least 1")
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise CliError(2, f"cannot create {out_dir}: {err}") from err

    t0 = time.perf_counter()
    rows = run_study(scenarios, base_seed, fit_families=families, workers=args.workers)
    elapsed = time.perf_counter() - t0
    summary = summarize(rows, scenarios, ci_level=ci_level)
    rows.to_csv(out_dir / "replicates.csv", index=False)
    summary.to_csv(out_dir / "summary.csv", index=False)
    manifest = {
        "command": "simulate",
        "version": __version__,
        "config": str(args.config),
        "base_seed": base_seed,
        "ci_level": ci_level,
        "workers": args.workers,
        "fit_families": [f.value for f in families],
        "scenarios": [
            {"name": sc.name, "family": sc.family.value, "n": sc.n, "reps": sc.reps,
             "sigma": sc.sigma, "k": sc.k, "alpha": list(sc.alpha), "beta": list(sc.beta)}
            for sc in scenarios
        ],
        "n_replicate_rows": len(rows),
        "elapsed_seconds": elapsed,
    }
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "select":
            return _cmd_select(args)
        return _cmd_simulate(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
