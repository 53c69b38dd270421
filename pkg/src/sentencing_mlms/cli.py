"""Command-line entry point: ``sentencing-mlms {simulate,fit,bound,validate}``.

Exit codes: 0 success, 2 validation failure, 3 configuration error, 4 I/O
error.  Failures print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import FORMATS, MODES, PRESETS, RunConfig, resolve_config
from .dataset import Dataset, load_dataset, validate_exclusivity
from .errors import CapacityError, ConfigError, SentencingError, StreamError, ValidationError
from .metrics import oracle_predict, relative_accuracy, theorem2_bound
from .mlms import run_stream
from .noise import GaussianNoiseModel, fit_sigma
from .report import Report, emit_report, trace_rows
from .simulator import run_experiment
from .sms_core import build_regressors

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4


class DatasetInvalid(ValidationError):
    """The input file has rows that failed validation."""

    def __init__(self, errors):
        self.errors = errors
        super().__init__(f"{len(errors)} invalid row(s)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--seeds", type=int, dest="n_seeds", metavar="N", help="number of seeded replications")
    common.add_argument("--seed-list", help="comma-separated explicit seeds")
    common.add_argument("--mu", type=float)
    common.add_argument("--beta", type=float, help="constant momentum coefficient")
    common.add_argument("--delta", type=float, help="decaying momentum exponent, beta_k = k**-delta")
    common.add_argument("--box-radius", type=float)
    common.add_argument("--sigma", type=float, help="noise standard deviation")
    common.add_argument("--workers", type=int, help="parallel replications (simulate)")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--strict", action="store_true", help="abort on the first malformed row")

    parser = _Parser(prog="sentencing-mlms", description="Saturated sentencing model with online momentum LMS.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(MODES) + "}")
    sub.add_parser("simulate", parents=[common], help="seeded synthetic replications")
    p_fit = sub.add_parser("fit", parents=[common], help="stream a case file through the learner")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--theta-out", help="write the final estimate as JSON")
    p_bound = sub.add_parser("bound", parents=[common], help="best attainable accuracy for a case file")
    p_bound.add_argument("--input", required=True)
    p_bound.add_argument("--theta", help="JSON parameter vector; default: fit on the input first")
    p_val = sub.add_parser("validate", parents=[common], help="schema and exclusivity checks")
    p_val.add_argument("--input", required=True)
    return parser


def _seed_list(text: Optional[str]):
    if text is None:
        return None
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --seed-list {text!r}") from exc


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "n_seeds": args.n_seeds,
        "seed_list": _seed_list(args.seed_list),
        "mu": args.mu,
        "beta": args.beta,
        "delta": args.delta,
        "box_radius": args.box_radius,
        "sigma": args.sigma,
        "workers": args.workers,
    }
    return resolve_config(args.config, args.preset, overrides)


# -- commands -------------------------------------------------------------


def _noise(cfg: RunConfig, command: str) -> GaussianNoiseModel:
    if cfg.sigma is None:
        raise ConfigError(f"{command} needs a noise level: use --sigma, --preset or [noise] sigma")
    return GaussianNoiseModel(cfg.sigma)


def _load(args, cfg: RunConfig) -> Dataset:
    ds = load_dataset(args.input, cfg.z_columns, cfg.v_columns, strict=args.strict)
    if ds.errors:
        raise DatasetInvalid([e.as_dict() for e in ds.errors])
    return ds


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _columns(ds: Dataset):
    recs = ds.records
    if not recs:
        return np.empty((0, 0)), np.empty(0), np.empty(0), np.empty(0)
    phi = build_regressors(
        np.array([r.a for r in recs]),
        np.array([r.x for r in recs], dtype=float),
        np.array([r.z for r in recs], dtype=float).reshape(len(recs), ds.m1),
        np.array([r.v for r in recs], dtype=float).reshape(len(recs), ds.m2),
    )
    lower = np.array([r.lower for r in recs])
    upper = np.array([r.upper for r in recs])
    y = np.array([np.nan if r.y is None else r.y for r in recs])
    return phi, lower, upper, y


def _fit(ds: Dataset, cfg: RunConfig):
    phi, lower, upper, y = _columns(ds)
    items = ((phi[k], lower[k], upper[k], None if np.isnan(y[k]) else y[k]) for k in range(len(y)))
    return run_stream(items, _noise(cfg, "fit"), cfg.hyperparams()), phi, lower, upper, y


def _momentum_label(cfg: RunConfig) -> dict:
    if cfg.delta is not None:
        return {"schedule": "decaying", "delta": cfg.delta}
    return {"schedule": "constant", "beta": cfg.beta}


def cmd_simulate(args, cfg: RunConfig) -> Report:
    spec = cfg.stream_spec()
    summary = run_experiment(
        spec, cfg.hyperparams(), seeds=cfg.seeds(), workers=cfg.workers, steady_fraction=cfg.steady_fraction
    )
    body = {"sigma": spec.noise.sigma, "T": spec.T, "dim": spec.dim, **summary.as_dict()}
    columns = (
        "seed", "ra_mlms", "ra_plain_lms", "ra_steady_mlms", "ra_steady_plain_lms",
        "ra_oracle", "ra_oracle_steady", "bound",
    )
    rows = [
        {
            "seed": r.seed,
            "ra_mlms": r.ra["mlms"],
            "ra_plain_lms": r.ra["plain_lms"],
            "ra_steady_mlms": r.ra_steady["mlms"],
            "ra_steady_plain_lms": r.ra_steady["plain_lms"],
            "ra_oracle": r.ra_oracle,
            "ra_oracle_steady": r.ra_oracle_steady,
            "bound": r.bound,
        }
        for r in summary.replications
    ]
    return Report("simulate", cfg.config_hash(), summary.seeds, body, rows, columns)


def cmd_fit(args, cfg: RunConfig) -> Report:
    ds = _load(args, cfg)
    if not ds.records:
        body = {"T": 0, "rows": 0, "prediction_only": 0, "input_sha256": _file_digest(args.input)}
        return Report("fit", cfg.config_hash(), [], body)
    run, *_ = _fit(ds, cfg)
    y_obs, yh_obs = run.pairs()
    trace = relative_accuracy(y_obs, yh_obs)
    rel = np.full(run.y.size, np.nan)
    observed = ~np.isnan(run.y)
    rel[observed] = trace.rel_err
    theta = run.final_state.theta_hat
    body = {
        "T": trace.T,
        "input_sha256": _file_digest(args.input),
        "rows": len(ds),
        "prediction_only": int(np.sum(~observed)),
        "m1": ds.m1,
        "m2": ds.m2,
        "sigma": cfg.sigma,
        "mu": cfg.mu,
        "momentum": _momentum_label(cfg),
        "box_radius": cfg.box_radius,
        "theta_hat": theta,
    }
    if trace.ra is not None:
        body["ra"] = trace.ra
    if args.theta_out:
        Path(args.theta_out).write_text(json.dumps({"theta": [float(t) for t in theta]}) + "\n", encoding="utf-8")
    rows = trace_rows(run.y, run.y_hat, rel, run.theta_norm)
    return Report("fit", cfg.config_hash(), [], body, rows)


def _read_theta(path: str, dim: int) -> np.ndarray:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        raw = raw.get("theta", raw.get("summary", {}).get("theta_hat"))
    if raw is None:
        raise ConfigError(f"{path}: no parameter vector found (expected a list or a 'theta' key)")
    theta = np.asarray(raw, dtype=float)
    if theta.shape != (dim,):
        raise ConfigError(f"{path}: parameter has {theta.size} entries, the case file needs {dim}")
    return theta


def cmd_bound(args, cfg: RunConfig) -> Report:
    ds = _load(args, cfg)
    phi, lower, upper, y = _columns(ds)
    observed = ~np.isnan(y)
    if not observed.any():
        raise ValidationError("bound needs at least one row with an observed outcome")
    if args.theta:
        theta = _read_theta(args.theta, phi.shape[1])
        theta_source = "supplied"
    else:
        if cfg.sigma is None:
            raise ConfigError("fitting before the bound needs a noise level: use --sigma or --preset")
        theta = _fit(ds, cfg)[0].final_state.theta_hat
        theta_source = "fitted"
    y_hat = oracle_predict(theta, phi, lower, upper)
    if cfg.sigma is not None:
        sigma, sigma_source = cfg.sigma, "configured"
    else:
        sigma, sigma_source = fit_sigma(y[observed] - y_hat[observed]).sigma, "residuals"
    noise = GaussianNoiseModel(sigma)
    bound = theorem2_bound(phi[observed] @ theta, lower[observed], upper[observed], y[observed], noise)
    plug_in = relative_accuracy(y[observed], y_hat[observed])
    body = {
        "T": int(observed.sum()),
        "input_sha256": _file_digest(args.input),
        "rows": len(ds),
        "bound": bound,
        "ra_plug_in": plug_in.ra,
        "sigma": sigma,
        "sigma_source": sigma_source,
        "theta_source": theta_source,
        "theta": theta,
    }
    rel = np.full(y.size, np.nan)
    rel[observed] = plug_in.rel_err
    norm = np.full(y.size, float(np.linalg.norm(theta)))
    return Report("bound", cfg.config_hash(), [], body, trace_rows(y, y_hat, rel, norm))


def cmd_validate(args, cfg: RunConfig) -> Report:
    ds = load_dataset(args.input, cfg.z_columns, cfg.v_columns, strict=args.strict)
    excl = validate_exclusivity(ds.rows, ds.lines)
    body = {
        "valid": not ds.errors and excl.ok,
        "input_sha256": _file_digest(args.input),
        "rows_valid": len(ds),
        "m1": ds.m1,
        "m2": ds.m2,
        "errors": [e.as_dict() for e in ds.errors],
        "exclusivity": excl.as_dict(),
    }
    return Report("validate", cfg.config_hash(), [], body, columns=("line", "column", "message"),
                  rows=[e.as_dict() for e in ds.errors])


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "bound": cmd_bound, "validate": cmd_validate}


def _error_record(exc: BaseException, code: int) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("row", "column", "step"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    if isinstance(exc, DatasetInvalid):
        rec["errors"] = exc.errors
    return rec


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (ValidationError, StreamError, CapacityError)):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (SentencingError, ValueError)):
        return EXIT_CONFIG
    raise exc


def run_cli(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        report = COMMANDS[args.command](args, cfg)
        emit_report(report, args.output, args.format, stream=stdout)
    except (SentencingError, ValueError, OSError) as exc:
        code = _exit_code(exc)
        stderr.write(json.dumps(_error_record(exc, code), sort_keys=True) + "\n")
        return code
    if args.command == "validate" and not report.summary["valid"]:
        return EXIT_VALIDATION
    return EXIT_OK


def main():  # pragma: no cover - console script
    sys.exit(run_cli())


if __name__ == "__main__":  # pragma: no cover
    main()
