"""``heston-weak-lab`` batch front-end.

Settings come from a flat ``key=value`` config file and command-line flags;
flags win.  Every command writes CSV to ``--out`` (or stdout).
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

from .engine import (DESK_SAMPLES, FULL_SAMPLES, BudgetExceeded, CoarseGridWarning, ZeroErrorError,
                     estimate, reference_for, run_study, study_seed, weak_error)
from .lemmas import EPSILON_GRID, LemmaPreconditionError, check_lemmas, estimate_negativity
from .model import PRESETS, HestonParams, Payoff, PayoffKind
from .reference import QuadratureError, reference_set
from .schemes import SchemeKind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUADRATURE = 3
EXIT_ZERO_ERROR = 4
EXIT_LEMMA = 5

CONVERGE_COLUMNS = ["model", "scheme", "payoff", "N", "M", "seed", "estimate", "std_error", "ref", "abs_error"]
SUMMARY_COLUMNS = ["model", "scheme", "payoff", "rate", "intercept", "r_squared", "min_N", "max_N", "M", "seed"]
REFERENCE_COLUMNS = ["model", "call", "put", "digital", "parity_residual", "call_dual_residual",
                     "digital_dual_residual"]
LEMMA_COLUMNS = ["model", "N", "epsilon", "alpha_N", "max_cj_slack", "min_aj", "plugin_bound",
                 "mc_estimate", "mc_stderr", "pass"]

DEFAULT_GRID = [8, 16, 32, 64, 128]
DEFAULT_SEED = 20240607
PARAM_KEYS = [f.name for f in fields(HestonParams)]


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    models: list[str] = field(default_factory=lambda: ["model1"])
    scheme: SchemeKind = SchemeKind.SYMMETRIZED
    payoff: Payoff = field(default_factory=lambda: Payoff(PayoffKind.CALL))
    grid_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_GRID))
    steps: int = 128
    samples: int | None = None
    seed: int = DEFAULT_SEED
    threads: int | None = None
    epsilons: list[float] = field(default_factory=lambda: list(EPSILON_GRID))
    output_path: str | None = None
    overrides: dict[str, float] = field(default_factory=dict)

    def params(self, model: str) -> HestonParams:
        if model == "inline":
            missing = [k for k in PARAM_KEYS if k not in self.overrides]
            if missing:
                raise ConfigError(f"inline model is missing parameters: {', '.join(missing)}")
            return HestonParams(**self.overrides)
        if model not in PRESETS:
            raise ConfigError(f"unknown model {model!r}; valid presets: {', '.join(PRESETS)} (or 'inline')")
        try:
            return PRESETS[model].replace(**self.overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of integers, got {text!r}") from None


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _as_int(text, what: str) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be an integer, got {text!r}") from None


def build_config(command: str, raw: dict[str, str], full_scale: bool = False) -> StudyConfig:
    cfg = StudyConfig()
    raw = dict(raw)
    if command in ("reference", "verify-lemmas"):
        cfg.models = list(PRESETS)
    if "model" in raw:
        cfg.models = [m.strip() for m in raw.pop("model").split(",") if m.strip()]
        if not cfg.models:
            raise ConfigError("model must not be empty")
    if "scheme" in raw:
        try:
            cfg.scheme = SchemeKind.parse(raw.pop("scheme"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "payoff" in raw:
        name = raw.pop("payoff")
        try:
            cfg.payoff = Payoff.parse(name)
        except ValueError:
            raise ConfigError(f"unknown payoff {name!r}; use one of "
                              f"{', '.join(k.value for k in PayoffKind)}") from None
    if full_scale:
        cfg.samples = FULL_SAMPLES
        cfg.grid_sizes = [8, 16, 32, 64, 128, 256]
    if "grid_sizes" in raw:
        cfg.grid_sizes = _int_list(raw.pop("grid_sizes"), "grid_sizes")
    if "steps" in raw:
        cfg.steps = _as_int(raw.pop("steps"), "steps")
    if "samples" in raw:
        cfg.samples = _as_int(raw.pop("samples"), "samples")
    if "seed" in raw:
        cfg.seed = _as_int(raw.pop("seed"), "seed")
    if "threads" in raw:
        cfg.threads = _as_int(raw.pop("threads"), "threads")
    if "epsilon" in raw:
        cfg.epsilons = _float_list(raw.pop("epsilon"), "epsilon")
    if "out" in raw:
        cfg.output_path = raw.pop("out") or None
    for key in PARAM_KEYS:
        if key in raw:
            try:
                cfg.overrides[key] = float(raw.pop(key))
            except ValueError:
                raise ConfigError(f"parameter {key} must be a number") from None
    if raw:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(raw))}")

    if cfg.samples is None and command in ("price", "converge"):
        cfg.samples = DESK_SAMPLES
    if cfg.samples is not None and cfg.samples < 2:
        raise ConfigError(f"samples must be at least 2 (standard error is undefined), got {cfg.samples}")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {cfg.threads}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed}")
    sizes = cfg.grid_sizes
    if not sizes or any(n < 1 or n & (n - 1) for n in sizes) or sizes != sorted(set(sizes)):
        raise ConfigError(f"grid_sizes must be ascending powers of two, got {sizes}")
    if command == "converge" and len(sizes) < 3:
        raise ConfigError("converge needs at least 3 grid sizes")
    if cfg.steps < 1:
        raise ConfigError(f"steps must be positive, got {cfg.steps}")
    for eps in cfg.epsilons:
        if not 0.0 < eps <= 0.5:
            raise ConfigError(f"epsilon must lie in (0, 1/2], got {eps}")
    for model in cfg.models:
        cfg.params(model)
    return cfg


def _write_csv(columns, rows, path: str | None, stream) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    if path is None:
        stream.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _summary_path(out: str | None) -> str | None:
    if out is None:
        return None
    p = Path(out)
    return str(p.with_name(p.stem + "_summary" + (p.suffix or ".csv")))


def cmd_price(cfg: StudyConfig, stdout=sys.stdout) -> int:
    rows = []
    for model in cfg.models:
        params = cfg.params(model)
        seed = study_seed(cfg.seed, cfg.steps)
        est = estimate(cfg.scheme, params, cfg.payoff, cfg.steps, cfg.samples, seed, threads=cfg.threads)
        ref = reference_for(cfg.payoff, params)
        rows.append({"model": model, "scheme": cfg.scheme.value, "payoff": cfg.payoff.name, "N": cfg.steps,
                     "M": cfg.samples, "seed": cfg.seed, "estimate": est.mean, "std_error": est.std_error,
                     "ref": ref.value, "abs_error": weak_error(est, ref)})
    _write_csv(CONVERGE_COLUMNS, rows, cfg.output_path, stdout)
    return EXIT_OK


def cmd_converge(cfg: StudyConfig, stdout=sys.stdout, stderr=sys.stderr) -> int:
    rows, summaries = [], []
    for model in cfg.models:
        params = cfg.params(model)
        dt0 = params.T / cfg.grid_sizes[0]
        if dt0 >= 1.0 / params.kappa:
            print(f"warning: {model}: coarsest dt={dt0:.4g} is not below 1/kappa={1 / params.kappa:.4g}",
                  file=stderr)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CoarseGridWarning)
            study = run_study(cfg.scheme, params, cfg.payoff, cfg.grid_sizes, cfg.samples, cfg.seed,
                              threads=cfg.threads)
        base = {"model": model, "scheme": cfg.scheme.value, "payoff": cfg.payoff.name}
        for n, err, est in zip(study.grid_sizes, study.errors, study.estimates):
            rows.append({**base, "N": n, "M": cfg.samples, "seed": cfg.seed, "estimate": est.mean,
                         "std_error": est.std_error, "ref": study.reference.value, "abs_error": err})
        summaries.append({**base, "rate": study.rate, "intercept": study.intercept,
                          "r_squared": study.r_squared, "min_N": study.grid_sizes[0],
                          "max_N": study.grid_sizes[-1], "M": cfg.samples, "seed": cfg.seed})
    _write_csv(CONVERGE_COLUMNS, rows, cfg.output_path, stdout)
    if cfg.output_path is None:
        stdout.write("\n")
    _write_csv(SUMMARY_COLUMNS, summaries, _summary_path(cfg.output_path), stdout)
    return EXIT_OK


def cmd_reference(cfg: StudyConfig, stdout=sys.stdout) -> int:
    rows = []
    for model in cfg.models:
        refs = reference_set(cfg.params(model))
        rows.append({"model": model, "call": refs["call"].value, "put": refs["put"].value,
                     "digital": refs["digital"].value, "parity_residual": refs["parity_residual"],
                     "call_dual_residual": refs["call_dual_residual"],
                     "digital_dual_residual": refs["digital_dual_residual"]})
    _write_csv(REFERENCE_COLUMNS, rows, cfg.output_path, stdout)
    return EXIT_OK


def _lemma_grid(cfg: StudyConfig, explicit: bool, params: HestonParams) -> list[int]:
    sizes = cfg.grid_sizes if explicit else [2**e for e in range(3, 13)]
    if explicit:
        for n in sizes:
            if not params.T / n < 1.0 / params.kappa:
                raise LemmaPreconditionError(
                    f"N={n} gives dt={params.T / n:.6g}, not below 1/kappa={1 / params.kappa:.6g}")
        return sizes
    return [n for n in sizes if params.T / n < 1.0 / params.kappa]


def cmd_verify_lemmas(cfg: StudyConfig, explicit_grid: bool = False, stdout=sys.stdout, stderr=sys.stderr) -> int:
    rows = []
    failed = False
    for model in cfg.models:
        params = cfg.params(model)
        for n in _lemma_grid(cfg, explicit_grid, params):
            mc = None
            if cfg.samples is not None:
                mc = estimate_negativity(cfg.scheme, params, n, cfg.samples, study_seed(cfg.seed, n),
                                         threads=cfg.threads)
            for eps in cfg.epsilons:
                row = check_lemmas(params, n, eps)
                ok = row.deterministic_pass
                failed |= not ok
                mc_est = mc_se = None
                if mc is not None:
                    worst = max(mc, key=lambda t: t[1])
                    mc_est, mc_se = worst[1], worst[2]
                    ok = ok and all(p <= row.plugin_bound + 3.0 * se for _, p, se in mc)
                rows.append({"model": model, "N": n, "epsilon": eps, "alpha_N": row.alpha_N,
                             "max_cj_slack": row.max_cj_slack, "min_aj": row.min_aj,
                             "plugin_bound": row.plugin_bound, "mc_estimate": mc_est, "mc_stderr": mc_se,
                             "pass": ok})
    _write_csv(LEMMA_COLUMNS, rows, cfg.output_path, stdout)
    if failed:
        print("error: a deterministic lemma inequality failed", file=stderr)
        return EXIT_LEMMA
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heston-weak-lab",
                                     description="Weak convergence experiments for Euler schemes of the log-Heston model.")
    parser.add_argument("command", choices=["price", "converge", "reference", "verify-lemmas"])
    parser.add_argument("--config", help="flat key=value settings file")
    parser.add_argument("--model", help="preset name(s) model1..model4, comma separated, or 'inline'")
    parser.add_argument("--scheme", help="sym or abs")
    parser.add_argument("--payoff", help="call, put, digital, smooth_v or smooth_x")
    parser.add_argument("--samples", help="Monte Carlo sample count M")
    parser.add_argument("--seed", help="master seed")
    parser.add_argument("--threads", help="worker threads (default $HESTON_LAB_THREADS or 1); never changes results")
    parser.add_argument("--out", help="output CSV path (stdout if omitted)")
    parser.add_argument("--grid-sizes", help="comma-separated powers of two, e.g. 8,16,32,64,128")
    parser.add_argument("--steps", help="number of time steps N for 'price'")
    parser.add_argument("--epsilon", help="comma-separated epsilon values in (0, 1/2] for 'verify-lemmas'")
    parser.add_argument("--full-scale", action="store_true", help="M = 2e7 and N up to 2^8")
    for key in PARAM_KEYS:
        parser.add_argument(f"--{key}", dest=f"param_{key}", help=f"override model parameter {key}")
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        raw = read_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in
                 ("model", "scheme", "payoff", "samples", "seed", "threads", "out", "grid_sizes", "steps", "epsilon")}
        flags.update({k: getattr(args, f"param_{k}") for k in PARAM_KEYS})
        raw.update({k: v for k, v in flags.items() if v is not None})
        explicit_grid = "grid_sizes" in raw
        cfg = build_config(args.command, raw, full_scale=args.full_scale)
        if args.command == "price":
            return cmd_price(cfg, stdout)
        if args.command == "converge":
            return cmd_converge(cfg, stdout, stderr)
        if args.command == "reference":
            return cmd_reference(cfg, stdout)
        return cmd_verify_lemmas(cfg, explicit_grid, stdout, stderr)
    except (ConfigError, LemmaPreconditionError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"error: quadrature failed: {exc}", file=stderr)
        return EXIT_QUADRATURE
    except ZeroErrorError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_ZERO_ERROR
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
