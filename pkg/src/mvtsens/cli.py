"""Command-line front end.

Subcommands: analyze (sensitivity analysis of a CSV dataset), simulate
(Monte Carlo study), verify (solver cross-checks and invariants).

Exit codes: 0 success, 1 property failure (verify), 2 input validation,
3 numerical failure. Settings come from flags or a JSON config file
(--config); the JSON value wins a conflict, with a warning.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .bootstrap import BootstrapConfig, bootstrap_ci_table
from .contrasts import pairwise_ate_table
from .data import ContrastVector, all_pairwise_contrasts, load_csv, pairwise_contrast
from .errors import InputError, NumericalError
from .extrema import SensitivityParams
from .gps import MODEL_TYPES, GpsSpec, predict_gps
from .report import (
    config_sha256,
    render_results_figure,
    write_metadata_json,
    write_plot_data_csv,
    write_results_csv,
    write_study_csv,
)
from .simulation import ScenarioConfig, run_study
from . import verify as verify_mod

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _split_list(values, cast=str):
    """Flatten repeatable comma-separated flags into one list."""
    if values is None:
        return None

    def convert(p):
        try:
            return cast(p)
        except ValueError:
            raise InputError(f"cannot parse {p!r} as {cast.__name__}") from None

    out = []
    for v in values:
        if isinstance(v, str):
            out.extend(convert(p.strip()) for p in v.split(",") if p.strip())
        elif isinstance(v, (list, tuple)):
            out.extend(convert(p) for p in v)
        else:
            out.append(convert(v))
    return out


def _merge_config(args, keys):
    """Resolve flag values against the JSON config; JSON wins conflicts."""
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(keys)
        if unknown:
            raise InputError(f"unknown keys in config JSON: {sorted(unknown)}")
    merged = {}
    for key in keys:
        cli_val = getattr(args, key, None)
        if key in file_cfg:
            json_val = file_cfg[key]
            if cli_val is not None and cli_val != json_val:
                logger.warning(
                    "config JSON overrides --%s: %r -> %r",
                    key.replace("_", "-"), cli_val, json_val,
                )
            merged[key] = json_val
        else:
            merged[key] = cli_val
    return merged


def _parse_contrast(text, num_levels: int) -> ContrastVector:
    """Either a level pair "k,l" or an explicit length-J vector."""
    vals = text if isinstance(text, (list, tuple)) else [
        p.strip() for p in str(text).split(",") if p.strip()
    ]
    try:
        nums = [float(v) for v in vals]
    except (TypeError, ValueError):
        raise InputError(f"contrast {text!r} has non-numeric entries") from None
    is_pair = (
        len(nums) == 2
        and all(v == int(v) and 1 <= v <= num_levels for v in nums)
        and nums[0] != nums[1]
    )
    if is_pair:
        return pairwise_contrast(int(nums[0]), int(nums[1]), num_levels)
    if len(nums) != num_levels:
        raise InputError(
            f"contrast {text!r} is neither a level pair nor a length-{num_levels} vector"
        )
    return ContrastVector(nums)


def _resolve_lambdas(raw) -> list:
    lambdas = _split_list(raw, float)
    if not lambdas:
        lambdas = [0.0]
    if any(l < 0 for l in lambdas):
        raise InputError("lambda values must be >= 0")
    return sorted(set(lambdas))


def _normalize_model(name: str) -> str:
    alias = {
        "multinomial": "multinomial_logit",
        "multinomial_logit": "multinomial_logit",
        "continuation": "continuation_ratio",
        "continuation_ratio": "continuation_ratio",
    }
    if name not in alias:
        raise InputError(f"--gps-model must be one of {MODEL_TYPES}, not {name!r}")
    return alias[name]


# ---------------------------------------------------------------------------
# analyze

_ANALYZE_KEYS = (
    "data", "treatment", "outcome", "covariates", "levels", "gps_model",
    "contrast", "lambdas", "B", "alpha", "seed", "threads", "out",
    "plot_data", "figure", "no_figure", "dump_replicates",
)


def cmd_analyze(args) -> int:
    t0 = time.monotonic()
    cfg = _merge_config(args, _ANALYZE_KEYS)
    if not cfg["data"]:
        raise InputError("--data is required")
    covariates = _split_list(cfg["covariates"])
    if not covariates:
        raise InputError("--covariates is required")
    levels = _split_list(cfg["levels"])
    gps_model = _normalize_model(cfg["gps_model"] or "multinomial_logit")
    lambdas = _resolve_lambdas(cfg["lambdas"])
    B = int(cfg["B"]) if cfg["B"] is not None else 1000
    alpha = float(cfg["alpha"]) if cfg["alpha"] is not None else 0.10
    seed = int(cfg["seed"]) if cfg["seed"] is not None else 0
    threads = int(cfg["threads"]) if cfg["threads"] is not None else 1
    out = Path(cfg["out"] or "results.csv")
    plot_path = Path(cfg["plot_data"]) if cfg["plot_data"] else \
        out.with_name(out.stem + "_plot_data.csv")
    figure_path = None
    if not cfg["no_figure"]:
        figure_path = Path(cfg["figure"]) if cfg["figure"] else out.with_suffix(".png")

    data = load_csv(
        cfg["data"],
        treatment_col=cfg["treatment"] or "treatment",
        outcome_col=cfg["outcome"] or "outcome",
        covariate_cols=covariates,
        levels=levels,
    )
    contrasts = (
        [_parse_contrast(c, data.num_levels) for c in cfg["contrast"]]
        if cfg["contrast"] else all_pairwise_contrasts(data.num_levels)
    )
    params = [SensitivityParams(l) for l in lambdas]

    spec = GpsSpec(model_type=gps_model)
    model = spec.fit(data)
    gps = predict_gps(model, data)
    results = pairwise_ate_table(data, gps, params, contrasts)
    cis, bounds, diagnostics = bootstrap_ci_table(
        data, spec, contrasts, params,
        BootstrapConfig(B=B, alpha=alpha, seed=seed),
        n_jobs=threads,
    )
    cis_flat = [cis[i][j] for i in range(len(contrasts)) for j in range(len(params))]

    resolved = {
        "command": "analyze", "data": str(cfg["data"]),
        "treatment": cfg["treatment"] or "treatment",
        "outcome": cfg["outcome"] or "outcome",
        "covariates": covariates, "levels": levels,
        "gps_model": gps_model, "lambdas": lambdas,
        "contrasts": [c.label for c in contrasts],
        "B": B, "alpha": alpha, "seed": seed,
    }
    sha = config_sha256(resolved)
    from . import __version__
    csv_meta = {
        "tool": "mvtsens analyze",
        "version": __version__,
        "seed": seed,
        "B": B,
        "alpha": alpha,
        "gps_model": gps_model,
        "lambdas": ",".join(repr(l) for l in lambdas),
        "config_sha256": sha,
    }
    write_results_csv(out, results, cis_flat, csv_meta)
    write_plot_data_csv(plot_path, results, cis_flat, csv_meta)
    if figure_path is not None:
        render_results_figure(figure_path, results, cis_flat)

    sidecar = dict(resolved)
    sidecar.update({
        "version": __version__,
        "config_sha256": sha,
        "threads": threads,
        "runtime_s": round(time.monotonic() - t0, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "bootstrap": diagnostics,
        "outputs": {
            "results": str(out),
            "plot_data": str(plot_path),
            "figure": str(figure_path) if figure_path else None,
        },
        "model_loglik": model.diagnostics.loglik,
        "model_iterations": model.diagnostics.iterations,
    })
    if cfg["dump_replicates"]:
        sidecar["replicates"] = [
            {
                "contrast": contrasts[i].label,
                "lambda": lambdas[j],
                "L": bounds[:, i, j, 0].tolist(),
                "U": bounds[:, i, j, 1].tolist(),
            }
            for i in range(len(contrasts)) for j in range(len(params))
        ]
    write_metadata_json(Path(str(out) + ".meta.json"), sidecar)
    print(f"wrote {out}, {plot_path}"
          + (f", {figure_path}" if figure_path else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_SIMULATE_KEYS = (
    "scenario", "n", "R", "B", "lambdas", "alpha", "seed", "k2", "k3",
    "x3_sd", "oracle_n", "threads", "out",
)


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    cfg = _merge_config(args, _SIMULATE_KEYS)
    scenario = cfg["scenario"] or "I"
    n = int(cfg["n"]) if cfg["n"] is not None else 750
    R = int(cfg["R"]) if cfg["R"] is not None else 300
    B = int(cfg["B"]) if cfg["B"] is not None else 500
    alpha = float(cfg["alpha"]) if cfg["alpha"] is not None else 0.10
    seed = int(cfg["seed"]) if cfg["seed"] is not None else 0
    threads = int(cfg["threads"]) if cfg["threads"] is not None else 1
    oracle_n = int(cfg["oracle_n"]) if cfg["oracle_n"] is not None else 10 ** 6
    lambdas = _resolve_lambdas(cfg["lambdas"])
    out = Path(cfg["out"] or "study.csv")

    scen_cfg = ScenarioConfig(
        scenario=scenario, n=n, seed=seed,
        k2=float(cfg["k2"]) if cfg["k2"] is not None else None,
        k3=float(cfg["k3"]) if cfg["k3"] is not None else None,
        x3_sd=float(cfg["x3_sd"]) if cfg["x3_sd"] is not None else 0.5,
    )

    batch = max(1, R // 10)

    def progress(done):
        if done % batch == 0 or done == R:
            print(f"replication {done}/{R}", file=sys.stderr, flush=True)

    metrics = run_study(
        scen_cfg, lambdas, R, B, alpha=alpha, n_jobs=threads,
        oracle_n=oracle_n, progress=progress,
    )

    resolved = {
        "command": "simulate", "scenario": scenario, "n": n, "R": R, "B": B,
        "alpha": alpha, "seed": seed, "lambdas": lambdas,
        "k2": scen_cfg.k2, "k3": scen_cfg.k3, "x3_sd": scen_cfg.x3_sd,
        "oracle_n": oracle_n,
    }
    sha = config_sha256(resolved)
    from . import __version__
    csv_meta = {
        "tool": "mvtsens simulate",
        "version": __version__,
        "scenario": scenario,
        "n": n, "R": R, "B": B,
        "alpha": alpha,
        "seed": seed,
        "oracle_n": oracle_n,
        "lambdas": ",".join(repr(l) for l in lambdas),
        "config_sha256": sha,
    }
    write_study_csv(out, metrics, csv_meta)
    sidecar = dict(resolved)
    sidecar.update({
        "version": __version__,
        "config_sha256": sha,
        "threads": threads,
        "runtime_s": round(time.monotonic() - t0, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "R_effective": metrics.R_effective,
        "failures": metrics.failures,
        "failure_reasons": list(metrics.failure_reasons),
        "outputs": {"study": str(out)},
    })
    write_metadata_json(Path(str(out) + ".meta.json"), sidecar)
    print(f"wrote {out} ({metrics.R_effective}/{R} replications used)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    results = verify_mod.run_all(
        seed=args.seed if args.seed is not None else 0,
        bruteforce_cases=args.bruteforce_cases,
        lp_cases=args.lp_cases,
        collapse_datasets=args.collapse_datasets,
        nesting_datasets=args.nesting_datasets,
    )
    failed = False
    for res in results:
        print(res.summary())
        if not res.ok:
            failed = True
            for ce in res.counterexamples[:3]:
                print(f"  counterexample: {json.dumps(ce)}")
    return EXIT_PROPERTY if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvtsens",
        description="Sensitivity analysis for causal effects of multivalued "
                    "treatments under unmeasured confounding.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    pa = sub.add_parser("analyze", help="sensitivity analysis of a CSV dataset")
    pa.add_argument("--data")
    pa.add_argument("--treatment")
    pa.add_argument("--outcome")
    pa.add_argument("--covariates", action="append",
                    help="comma-separated covariate column names (repeatable)")
    pa.add_argument("--levels", action="append",
                    help="treatment labels in order, lowest first")
    pa.add_argument("--gps-model", dest="gps_model",
                    choices=["multinomial", "multinomial_logit",
                             "continuation", "continuation_ratio"])
    pa.add_argument("--contrast", action="append",
                    help='level pair "k,l" or explicit vector "1,0,-1" (repeatable)')
    pa.add_argument("--lambda", dest="lambdas", action="append",
                    help="sensitivity parameter(s), comma-separated or repeated")
    pa.add_argument("--B", type=int)
    pa.add_argument("--alpha", type=float)
    pa.add_argument("--seed", type=int)
    pa.add_argument("--threads", type=int)
    pa.add_argument("--out")
    pa.add_argument("--plot-data", dest="plot_data")
    pa.add_argument("--figure")
    pa.add_argument("--no-figure", dest="no_figure", action="store_const", const=True)
    pa.add_argument("--dump-replicates", dest="dump_replicates",
                    action="store_const", const=True)
    pa.add_argument("--config", help="JSON settings file; wins conflicts with flags")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="Monte Carlo study against the truth oracle")
    ps.add_argument("--scenario", choices=["I", "II", "custom"])
    ps.add_argument("--n", type=int)
    ps.add_argument("--R", type=int)
    ps.add_argument("--B", type=int)
    ps.add_argument("--lambda", dest="lambdas", action="append")
    ps.add_argument("--alpha", type=float)
    ps.add_argument("--seed", type=int)
    ps.add_argument("--k2", type=float)
    ps.add_argument("--k3", type=float)
    ps.add_argument("--x3-sd", dest="x3_sd", type=float)
    ps.add_argument("--oracle-n", dest="oracle_n", type=int)
    ps.add_argument("--threads", type=int)
    ps.add_argument("--out")
    ps.add_argument("--config", help="JSON settings file; wins conflicts with flags")
    ps.set_defaults(func=cmd_simulate)

    pv = sub.add_parser("verify", help="run solver cross-checks and invariants")
    pv.add_argument("--seed", type=int)
    pv.add_argument("--bruteforce-cases", type=int, default=100)
    pv.add_argument("--lp-cases", type=int, default=1000)
    pv.add_argument("--collapse-datasets", type=int, default=50)
    pv.add_argument("--nesting-datasets", type=int, default=20)
    pv.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO, stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"MissingFile: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
