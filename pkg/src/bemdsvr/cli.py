"""Command-line entry point.

Subcommands::

    ingest         hourly demand CSV -> one log-scale interval file per hour
    gen-synthetic  synthetic interval series
    decompose      bivariate decomposition dump of one series
    forecast       one-step-ahead interval forecast from a full history
    evaluate       replicated hold-out evaluation with ANOVA / Tukey ranking

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
``BEMDSVR_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bemd import SiftConfig, write_decomposition_csv
from .errors import DataError, NumericalError
from .forecasters import (
    MODEL_KEYS,
    PipelineConfig,
    build_models,
    desk_grids,
    rolling_evaluation,
)
from .interval_ts import (
    LOG,
    MODES,
    RAW,
    TRANS1,
    aggregate_to_intervals,
    fmt,
    log_transform,
    next_period,
    read_demand_csv,
    read_interval_csv,
    read_interval_series,
    to_complex,
    write_interval_csv,
)
from .stats import AccuracySample, tukey_hsd
from .synthetic import SyntheticConfig, gen_synthetic

OUTPUT_ENV = "BEMDSVR_OUTPUT_DIR"
DEFAULT_OUTPUT = "bemdsvr-out"
SCALE_NAMES = {"raw": RAW, "log": LOG}

log = logging.getLogger("bemdsvr")


class UsageError(Exception):
    pass


# run configuration

def _parse_hours(text):
    if text in (None, "", "all"):
        return None
    hours = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            hours.extend(range(int(a), int(b) + 1))
        else:
            hours.append(int(part))
    if any(not 1 <= h <= 24 for h in hours):
        raise UsageError(f"hours must lie in 1..24, got {text!r}")
    return tuple(sorted(set(hours)))


def _parse_period(text):
    try:
        y, m = str(text).split("-")
        y, m = int(y), int(m)
    except ValueError:
        raise UsageError(f"split must look like YYYY-MM, got {text!r}") from None
    if not 1 <= m <= 12:
        raise UsageError(f"bad month in split {text!r}")
    return y, m


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    input: str = ""
    hours: tuple | None = None
    split: tuple | None = None
    holdout: int = 24
    models: tuple = MODEL_KEYS
    replications: int = 20
    base_seed: int = 0
    output_dir: str = ""
    scale: str = "raw"
    grid: str = "desk"
    lags: int = 12
    folds: int = 5
    num_directions: int = 64
    sd_threshold: float = 0.04
    max_sift_iterations: int = 100
    repair: str = "swap"
    max_lag: int = 4
    retune_each_step: bool = False
    alpha: float = 0.05

    _parsers = {
        "hours": _parse_hours,
        "split": lambda t: None if t in (None, "", "none") else _parse_period(t),
        "models": lambda t: tuple(m.strip() for m in str(t).split(",") if m.strip()),
        "retune_each_step": _parse_bool,
    }

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def update(self, values: dict):
        types = {f.name: f.type for f in dataclasses.fields(self)}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in types:
                raise UsageError(f"unknown configuration key {key!r}")
            if key in self._parsers:
                val = self._parsers[key](raw) if isinstance(raw, str) else raw
            elif types[key] in ("int", int):
                val = int(raw)
            elif types[key] in ("float", float):
                val = float(raw)
            else:
                val = str(raw)
            setattr(self, key, val)
        return self

    def validate(self):
        if not self.input:
            raise UsageError("no input file given")
        if not Path(self.input).is_file():
            raise DataError(f"input file not found: {self.input}")
        if self.scale not in SCALE_NAMES:
            raise UsageError(f"scale must be raw or log, got {self.scale!r}")
        if self.grid not in ("desk", "full"):
            raise UsageError(f"grid must be desk or full, got {self.grid!r}")
        bad = [m for m in self.models if m not in MODEL_KEYS]
        if bad or not self.models:
            raise UsageError(f"unknown model(s) {bad}; choose from {', '.join(MODEL_KEYS)}")
        if self.replications < 1:
            raise UsageError("replications must be >= 1")
        if self.alpha not in (0.05, 0.01):
            raise UsageError("alpha must be 0.05 or 0.01")
        return self

    def pipeline(self) -> PipelineConfig:
        grids = desk_grids() if self.grid == "desk" else {}
        return PipelineConfig(
            sift=SiftConfig(
                num_directions=self.num_directions,
                max_sift_iterations=self.max_sift_iterations,
                sd_threshold=self.sd_threshold,
            ),
            lags=self.lags,
            folds=self.folds,
            repair=self.repair,
            seed=self.base_seed,
            retune_each_step=self.retune_each_step,
            **grids,
        )

    def as_dict(self):
        d = {k: getattr(self, k) for k in self.keys()}
        d["hours"] = None if self.hours is None else list(self.hours)
        d["split"] = None if self.split is None else "%04d-%02d" % self.split
        d["models"] = list(self.models)
        return d


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _output_dir(flag):
    return Path(flag or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions():
    import numba
    import scipy

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _hour_label(h):
    return "-" if h is None else str(h)


# subcommands

def cmd_ingest(args):
    records = read_demand_csv(args.input)
    hours = _parse_hours(args.hours) or tuple(range(1, 25))
    out = _output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = Counter((r.hour, r.date.year, r.date.month) for r in records)
    written = []
    for h in hours:
        s = log_transform(aggregate_to_intervals(records, h, args.min_count))
        path = out / f"hour_{h:02d}.csv"
        write_interval_csv(s, path)
        written.append(path.name)
    with open(out / "ingest_manifest.csv", "w") as fh:
        fh.write("hour,year,month,count\n")
        for (h, y, m), c in sorted(counts.items()):
            if h in hours:
                fh.write(f"{h},{y},{m},{c}\n")
    print(f"wrote {len(written)} interval series to {out}")
    return 0


def cmd_gen_synthetic(args):
    cfg = SyntheticConfig(
        slope=args.slope,
        seasonal_amplitude=args.amplitude,
        radius_ar=args.radius_ar,
        noise_std=args.noise,
        length=args.length,
        seed=args.seed,
        level=args.level,
        radius_mean=args.radius_mean,
        radius_noise_std=args.radius_noise,
    )
    s = gen_synthetic(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_interval_csv(s, out)
    print(f"wrote {len(s)} periods to {out}")
    return 0


def _load_one(args):
    return read_interval_series(args.input, SCALE_NAMES[args.scale], args.hour)


def cmd_decompose(args):
    s = _load_one(args)
    c = to_complex(s, args.mode)
    cfg = SiftConfig(num_directions=args.directions)
    from .bemd import bemd_decompose

    dec = bemd_decompose(c.samples, cfg)
    err = np.max(np.abs(dec.reconstruct() - c.samples)) / np.max(np.abs(c.samples))
    out = Path(args.out) if args.out else _output_dir(None) / "decomposition.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_decomposition_csv(dec, out)
    print(f"imfs: {dec.n_imfs}")
    print(f"sift iterations: {list(dec.sift_counts)}")
    print(f"reconstruction error (relative max): {err:.3e}")
    print(f"wrote {out}")
    return 0


def cmd_forecast(args):
    s = _load_one(args)
    grids = desk_grids() if args.grid == "desk" else {}
    cfg = PipelineConfig(lags=args.lags, seed=args.seed, **grids)
    (name, factory), = build_models([args.model], cfg, args.max_lag).items()
    model = factory().fit(s, args.seed)
    lo, up = model.predict_next(s)
    from .forecasters import repair_interval

    lo, up, fixed = repair_interval(lo, up, cfg.repair)
    if s.scale == LOG:
        lo, up = float(np.exp(lo)), float(np.exp(up))
    y, m = next_period(s.periods[-1])
    print("model,year,month,lower,upper,repaired")
    print(f"{name},{y},{m},{fmt(lo)},{fmt(up)},{int(fixed)}")
    return 0


def _holdout_length(series, run: RunConfig):
    if run.split is None:
        h = run.holdout
    else:
        if run.split not in series.periods:
            raise DataError("split %04d-%02d is outside the series" % run.split)
        h = len(series) - series.periods.index(run.split)
    n_est = len(series) - h
    if n_est < 24 or h < 2:
        raise DataError(f"split leaves {n_est} estimation and {h} hold-out periods; need >= 24 and >= 2")
    return h


def evaluate_run(run: RunConfig):
    """Run the evaluation and return ``(tables, per-hour results)``."""
    series_by_hour = read_interval_csv(run.input, SCALE_NAMES[run.scale])
    hours = sorted(series_by_hour, key=lambda h: (h is not None, h or 0))
    if run.hours is not None:
        missing = [h for h in run.hours if h not in series_by_hour]
        if missing:
            raise DataError(f"input has no series for hours {missing}")
        hours = list(run.hours)
    cfg = run.pipeline()
    models = build_models(run.models, cfg, run.max_lag)
    results = {}
    for h in hours:
        s = series_by_hour[h]
        holdout = _holdout_length(s, run)
        log.info("hour %s: %d periods, hold-out %d", _hour_label(h), len(s), holdout)
        results[h] = rolling_evaluation(s, holdout, models, run.replications, run.base_seed, run.repair)
    return results


def render_tables(results, run: RunConfig):
    """Mean-U table, per-hour comparison reports and the summary CSV."""
    names = [n for n in build_models(run.models, run.pipeline(), run.max_lag)]
    if "Naive" not in names:
        names.append("Naive")
    width = max(12, *(len(n) for n in names))
    head = f"{'hour':>4}  " + "  ".join(f"{n:>{width}}" for n in names) + f"  {'ANOVA p':>9}  ranking"
    table = [head]
    summary = ["hour,model,mean_u,replications"]
    reports = {}
    for h, res in results.items():
        means = res.mean_u()
        rep = None
        if run.replications >= 2 and len(names) >= 2:
            groups = [AccuracySample(n, res.u[n]) for n in names]
            rep = tukey_hsd(groups, run.alpha)
            reports[h] = rep
        p_txt = f"{rep.p:9.4g}" if rep else f"{'n/a':>9}"
        rank = rep.ranking_line() if rep else "n/a"
        table.append(
            f"{_hour_label(h):>4}  " + "  ".join(f"{means[n]:>{width}.3f}" for n in names)
            + f"  {p_txt}  {rank}"
        )
        for n in names:
            summary.append(f"{_hour_label(h)},{n},{fmt(means[n])},{res.replications}")
    return "\n".join(table) + "\n", "\n".join(summary) + "\n", reports


def cmd_evaluate(args):
    run = RunConfig()
    if args.config:
        run.update(read_config_file(args.config))
    flags = {k: getattr(args, k, None) for k in RunConfig.keys()}
    run.update(flags)
    if not run.output_dir:
        run.output_dir = str(_output_dir(None))
    run.validate()
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    results = evaluate_run(run)
    table, summary, reports = render_tables(results, run)
    (out / "mean_u.txt").write_text(table)
    (out / "mean_u.csv").write_text(summary)
    for h, rep in reports.items():
        tag = "series" if h is None else f"hour_{h:02d}"
        (out / f"comparison_{tag}.txt").write_text(rep.render_text())
        (out / f"tukey_{tag}.csv").write_text(rep.to_csv())
    repairs = {}
    for h, res in results.items():
        tag = "series" if h is None else f"hour_{h:02d}"
        res.write_records_csv(out / f"records_{tag}.csv")
        repairs[_hour_label(h)] = res.repairs
    manifest = {
        "config": run.as_dict(),
        "seeds": [run.base_seed + r for r in range(run.replications)],
        "input_sha256": _sha256(run.input),
        "versions": _versions(),
        "repairs": repairs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(table)
    print(f"forecast repairs: {sum(repairs.values())}")
    print(f"wrote results to {out}")
    return 0


# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="bemdsvr", description="Interval-valued demand forecasting experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("ingest", help="aggregate hourly demand into monthly interval series")
    q.add_argument("input")
    q.add_argument("--out", help="output directory")
    q.add_argument("--hours", help="e.g. 1-24 or 8,18 (default all)")
    q.add_argument("--min-count", type=int, default=20)
    q.set_defaults(func=cmd_ingest)

    q = sub.add_parser("gen-synthetic", help="write a synthetic interval series")
    d = SyntheticConfig()
    q.add_argument("--out", required=True)
    q.add_argument("--slope", type=float, default=d.slope)
    q.add_argument("--amplitude", type=float, default=d.seasonal_amplitude)
    q.add_argument("--radius-ar", type=float, default=d.radius_ar)
    q.add_argument("--noise", type=float, default=d.noise_std)
    q.add_argument("--radius-noise", type=float, default=None)
    q.add_argument("--radius-mean", type=float, default=d.radius_mean)
    q.add_argument("--level", type=float, default=d.level)
    q.add_argument("--length", type=int, default=d.length)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_gen_synthetic)

    for name, func, helptext in (
        ("decompose", cmd_decompose, "bivariate decomposition of one series"),
        ("forecast", cmd_forecast, "one-step-ahead forecast after the last period"),
    ):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("input")
        q.add_argument("--hour", type=int)
        q.add_argument("--scale", choices=sorted(SCALE_NAMES), default="raw")
        if name == "decompose":
            q.add_argument("--mode", choices=MODES, default=TRANS1)
            q.add_argument("--directions", type=int, default=64)
            q.add_argument("--out")
        else:
            q.add_argument("--model", choices=MODEL_KEYS, default="bemd-svr-trans1")
            q.add_argument("--grid", choices=("desk", "full"), default="desk")
            q.add_argument("--lags", type=int, default=12)
            q.add_argument("--max-lag", type=int, default=4)
            q.add_argument("--seed", type=int, default=0)
        q.set_defaults(func=func)

    q = sub.add_parser("evaluate", help="replicated hold-out evaluation")
    q.add_argument("input", nargs="?")
    q.add_argument("--config", help="flat key = value file; flags override it")
    q.add_argument("--out", dest="output_dir")
    q.add_argument("--hours")
    q.add_argument("--split", help="first hold-out month, YYYY-MM")
    q.add_argument("--holdout", type=int)
    q.add_argument("--models", help="comma list of " + ",".join(MODEL_KEYS))
    q.add_argument("--replications", type=int)
    q.add_argument("--base-seed", type=int)
    q.add_argument("--scale", choices=sorted(SCALE_NAMES))
    q.add_argument("--grid", choices=("desk", "full"))
    q.add_argument("--lags", type=int)
    q.add_argument("--folds", type=int)
    q.add_argument("--num-directions", type=int)
    q.add_argument("--repair", choices=("swap", "none"))
    q.add_argument("--max-lag", type=int)
    q.add_argument("--retune-each-step", action="store_const", const=True)
    q.add_argument("--alpha", type=float)
    q.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.verbose:
        warnings.simplefilter("ignore", UserWarning)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
