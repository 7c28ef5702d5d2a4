"""Batch command-line driver: prepare, train, predict, evaluate, plot.

A declarative YAML run configuration mirrors RunConfig; every setting can
be overridden on the command line (flags win).  Commands are idempotent
for fixed inputs and seed; the only timestamps live in provenance.json.
Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import difflib
import hashlib
import json
import logging
import re
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .baselines import (
    Forecast,
    benchmark_forecast,
    five_median_forecasts,
    median_combine,
    write_forecast_csv,
)
from .data import (
    AlignmentError,
    CsvDataError,
    CsvFormatError,
    PageKeyError,
    SeriesTable,
    load_answer_key,
    load_wide_csv,
)
from .ensemble import EnsembleInputs, average_lstm_pair, final_forecast
from .metrics import mae, smape
from .neuralnet import (
    CheckpointFormatError,
    TrainConfig,
    load_checkpoint,
    predict,
    save_checkpoint,
    train_both_models,
)
from .transform import fill_missing, log1p_invert, prepare_windows, save_sidecar

log = logging.getLogger("wikitraffic.cli")

METHODS = ("benchmark", "medians", "lstm", "ensemble")
TARGETS = ("test", "validate", "train")


class ConfigError(ValueError):
    """Run configuration is missing or inconsistent."""


@dataclass
class RunConfig:
    """Declarative description of one pipeline run."""

    input: str | None = None
    answer_key: str | None = None
    horizon: int = 60
    out_dir: str = "out"
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    scaler_range: tuple[float, float] = (0.0, 1.0)
    train: TrainConfig = field(default_factory=TrainConfig)
    lstm_average_space: str = "log1p"
    calendar_start: dt.date | None = None
    calendar_end: dt.date | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if not self.methods:
            raise ConfigError("at least one method must be enabled")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")


_CONFIG_KEYS = {
    "input", "answer_key", "horizon", "out_dir", "seed", "methods",
    "scaler_range", "train", "lstm_average_space", "calendar_start", "calendar_end",
}


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    kwargs = dict(doc)
    if "train" in kwargs:
        try:
            kwargs["train"] = TrainConfig(**kwargs["train"])
        except TypeError as exc:
            raise ConfigError(f"{path}: bad train block ({exc})") from None
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "scaler_range" in kwargs:
        kwargs["scaler_range"] = tuple(float(v) for v in kwargs["scaler_range"])
    for key in ("calendar_start", "calendar_end"):
        if kwargs.get(key) is not None and not isinstance(kwargs[key], dt.date):
            kwargs[key] = dt.date.fromisoformat(str(kwargs[key]))
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolve_config(args) -> RunConfig:
    """Config file plus command-line overrides, seed pushed into training."""
    cfg = load_run_config(args.config) if args.config else RunConfig()
    updates = {}
    if getattr(args, "input", None):
        updates["input"] = args.input
    if getattr(args, "answer_key", None):
        updates["answer_key"] = args.answer_key
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if getattr(args, "method", None):
        methods = []
        for entry in args.method:
            methods.extend(m.strip() for m in entry.split(",") if m.strip())
        updates["methods"] = tuple(methods)
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    train = dataclasses.replace(cfg.train, seed=cfg.seed)
    if getattr(args, "epochs", None) is not None:
        train = dataclasses.replace(train, epochs=args.epochs)
    return dataclasses.replace(cfg, train=train)


class OutPaths:
    """Fixed artifact names under the run's output directory."""

    def __init__(self, out_dir):
        self.root = Path(out_dir)

    def ensure(self) -> "OutPaths":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def sidecar(self) -> Path:
        return self.root / "sidecar.json"

    def checkpoint(self, which: str) -> Path:
        return self.root / f"checkpoint_{which}.bin"

    @property
    def history(self) -> Path:
        return self.root / "history.json"

    def forecast(self, method: str, target: str) -> Path:
        name = "final" if method == "ensemble" else method
        stem = f"forecast_{name}" if target == "test" else f"forecast_{name}_{target}"
        return self.root / f"{stem}.csv"

    @property
    def scores(self) -> Path:
        return self.root / "scores.csv"

    @property
    def scores_per_page(self) -> Path:
        return self.root / "scores_per_page.csv"

    @property
    def provenance(self) -> Path:
        return self.root / "provenance.json"

    @property
    def plots(self) -> Path:
        return self.root / "plots"


def _write_provenance(paths: OutPaths, command: str, extra: dict) -> None:
    doc = {
        "command": command,
        "written_at": dt.datetime.now().isoformat(timespec="seconds"),
        "version": __version__,
    }
    doc.update(extra)
    with open(paths.provenance, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_input_table(cfg: RunConfig) -> SeriesTable:
    if not cfg.input:
        raise ConfigError("no input CSV configured (set `input` or pass --input)")
    return load_wide_csv(cfg.input)


def _target_frame(
    cfg: RunConfig,
    filled: SeriesTable,
    target: str,
    table: SeriesTable,
    want_truth: bool = True,
):
    """Anchor table, horizon dates and truth grid (or None) for one target."""
    h = cfg.horizon
    T = filled.n_dates
    if target == "test":
        anchor = filled
        dates = [filled.last_date + dt.timedelta(days=i + 1) for i in range(h)]
        truth = None
        if want_truth and cfg.answer_key:
            key = load_answer_key(cfg.answer_key, table, h)
            truth = fill_missing(key).values
        return anchor, dates, truth
    if target == "validate":
        return filled.drop_last(h), filled.dates[T - h :], filled.values[:, T - h :]
    if target == "train":
        anchor = filled.drop_last(2 * h)
        return anchor, filled.dates[T - 2 * h : T - h], filled.values[:, T - 2 * h : T - h]
    raise ConfigError(f"unknown target {target!r}")


def _lstm_views_forecast(cfg, paths, split, pages, dates, target) -> Forecast:
    """Views-space LSTM forecast for a target.

    The test horizon averages both models; the validation window is
    predicted by the model fitted on the training window, and the training
    window by the refinement model (which never saw it).
    """
    if target == "test":
        ck_a = load_checkpoint(paths.checkpoint("train"))
        ck_b = load_checkpoint(paths.checkpoint("validate"))
        pred_a = predict(ck_a, split.X_test)
        pred_b = predict(ck_b, split.X_test)
        return average_lstm_pair(pred_a, pred_b, pages, dates, cfg.lstm_average_space)
    if target == "validate":
        ck = load_checkpoint(paths.checkpoint("train"))
        pred = predict(ck, split.X_validate)
    else:
        ck = load_checkpoint(paths.checkpoint("validate"))
        pred = predict(ck, split.X_train)
    return Forecast(pages, list(dates), log1p_invert(pred), "lstm")


def cmd_prepare(cfg: RunConfig, args) -> int:
    table = _load_input_table(cfg)
    filled, split, scaler = prepare_windows(table, cfg.horizon, cfg.scaler_range)
    paths = OutPaths(cfg.out_dir).ensure()
    save_sidecar(paths.sidecar, scaler, split)
    widths = {k: b - a for k, (a, b) in split.ranges.items()}
    log.info("loaded %d pages x %d days from %s", table.n_pages, table.n_dates, cfg.input)
    log.info("window widths: %s", json.dumps(widths, sort_keys=True))
    log.info("sidecar written to %s", paths.sidecar)
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    table = _load_input_table(cfg)
    filled, split, scaler = prepare_windows(table, cfg.horizon, cfg.scaler_range)
    paths = OutPaths(cfg.out_dir).ensure()
    save_sidecar(paths.sidecar, scaler, split)
    ck_a, hist_a, ck_b, hist_b = train_both_models(
        split, cfg.train, scaler_ref=str(paths.sidecar)
    )
    save_checkpoint(ck_a, paths.checkpoint("train"))
    save_checkpoint(ck_b, paths.checkpoint("validate"))
    with open(paths.history, "w", encoding="utf-8") as fh:
        json.dump({"train_model": hist_a, "validate_model": hist_b}, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_provenance(paths, "train", {"seed": cfg.seed, "epochs": cfg.train.epochs})
    log.info(
        "checkpoints written: %s (val %.6f), %s (val %.6f)",
        paths.checkpoint("train"), ck_a.val_loss,
        paths.checkpoint("validate"), ck_b.val_loss,
    )
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    target = args.target
    table = _load_input_table(cfg)
    filled, split, scaler = prepare_windows(table, cfg.horizon, cfg.scaler_range)
    paths = OutPaths(cfg.out_dir).ensure()
    anchor, dates, _ = _target_frame(cfg, filled, target, table, want_truth=False)
    pages = filled.raw_keys()

    five = None
    lstm_fc = None
    written = {}
    for method in METHODS:
        if method not in cfg.methods:
            continue
        if method == "benchmark":
            fc = benchmark_forecast(anchor, cfg.horizon)
        elif method == "medians":
            five = five_median_forecasts(anchor, dates, cfg.calendar_start, cfg.calendar_end)
            fc = median_combine(five, "medians")
        elif method == "lstm":
            lstm_fc = _lstm_views_forecast(cfg, paths, split, pages, dates, target)
            fc = lstm_fc
        else:  # ensemble
            if five is None:
                five = five_median_forecasts(anchor, dates, cfg.calendar_start, cfg.calendar_end)
            if lstm_fc is None:
                lstm_fc = _lstm_views_forecast(cfg, paths, split, pages, dates, target)
            fc = final_forecast(EnsembleInputs(lstm_fc, five))
        out_path = paths.forecast(method, target)
        write_forecast_csv(fc, out_path)
        written[method] = str(out_path)
        log.info("wrote %s", out_path)
    candidates = [f.label for f in five] if five else []
    if lstm_fc is not None:
        candidates.append(lstm_fc.label)
    _write_provenance(
        paths, "predict", {"target": target, "files": written, "candidates": candidates}
    )
    return 0


def _aligned_forecast_values(path: Path, filled: SeriesTable, dates) -> np.ndarray:
    fc = load_wide_csv(path)
    if fc.raw_keys() != filled.raw_keys():
        raise AlignmentError(f"{path}: page set or order differs from the input table")
    if fc.dates != list(dates):
        raise AlignmentError(f"{path}: forecast dates do not match the target window")
    return np.nan_to_num(fc.values, nan=0.0)


def cmd_evaluate(cfg: RunConfig, args) -> int:
    targets = args.target or ["test"]
    table = _load_input_table(cfg)
    filled = fill_missing(table)
    paths = OutPaths(cfg.out_dir).ensure()

    rows = []
    per_page_rows = []
    for target in targets:
        _, dates, truth = _target_frame(cfg, filled, target, table)
        if truth is None:
            raise ConfigError("evaluating the test target needs an answer key")
        for method in METHODS:
            if method not in cfg.methods:
                continue
            path = paths.forecast(method, target)
            if not path.exists():
                log.warning("skipping %s/%s: %s not found (run predict)", method, target, path)
                continue
            pred = _aligned_forecast_values(path, filled, dates)
            s = smape(truth, pred, per_page=args.per_page)
            m = mae(truth, pred)
            rows.append((method, target, "smape", s.value, s.n))
            rows.append((method, target, "mae", m.value, m.n))
            if args.per_page and s.per_page is not None:
                for raw, v in zip(filled.raw_keys(), s.per_page):
                    per_page_rows.append((method, target, raw, v))
    if not rows:
        raise ConfigError("no forecast files found to evaluate")

    with open(paths.scores, "w", encoding="utf-8") as fh:
        fh.write("method,target,metric,value,n\n")
        for method, target, metric, value, n in rows:
            fh.write(f"{method},{target},{metric},{value!r},{n}\n")
    if per_page_rows:
        import csv as _csv

        with open(paths.scores_per_page, "w", newline="", encoding="utf-8") as fh:
            w = _csv.writer(fh)
            w.writerow(["method", "target", "page", "smape"])
            for method, target, raw, v in per_page_rows:
                w.writerow([method, target, raw, repr(float(v))])

    log.info("%-10s %-9s %10s %12s", "method", "target", "smape", "mae")
    by_key = {(m, t): {} for m, t, _, _, _ in rows}
    for method, target, metric, value, _ in rows:
        by_key[(method, target)][metric] = value
    for (method, target), vals in by_key.items():
        log.info(
            "%-10s %-9s %10.4f %12.4f", method, target,
            vals.get("smape", float("nan")), vals.get("mae", float("nan")),
        )
    log.info("scores written to %s", paths.scores)
    return 0


def _safe_page_filename(raw: str) -> str:
    stem = re.sub(r"[^A-Za-z0-9._-]+", "_", raw)[:80]
    digest = hashlib.sha1(raw.encode("utf-8")).hexdigest()[:8]
    return f"{stem}-{digest}"


def cmd_plot(cfg: RunConfig, args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wikitraffic"

    target = args.target
    table = _load_input_table(cfg)
    filled = fill_missing(table)
    paths = OutPaths(cfg.out_dir).ensure()
    _, dates, truth = _target_frame(cfg, filled, target, table)
    if truth is None:
        raise ConfigError("plotting the test target needs an answer key")

    keys = filled.raw_keys()
    matches = [k for k in keys if k == args.page]
    if not matches:
        matches = [k for k in keys if args.page in k]
    if not matches:
        near = difflib.get_close_matches(args.page, keys, n=5, cutoff=0.3)
        hint = "; ".join(near) if near else "no similar keys"
        raise ConfigError(f"no page matches {args.page!r} (nearest: {hint})")
    if len(matches) > args.max_pages:
        log.warning("selector matches %d pages; plotting first %d", len(matches), args.max_pages)
        matches = matches[: args.max_pages]

    series: dict[str, np.ndarray] = {}
    for method in METHODS:
        if method not in cfg.methods:
            continue
        path = paths.forecast(method, target)
        if path.exists():
            series[method] = _aligned_forecast_values(path, filled, dates)
    if not series:
        raise ConfigError("no forecast files found to plot (run predict)")

    paths.plots.mkdir(parents=True, exist_ok=True)
    for raw in matches:
        i = filled.page_index(raw)
        stem = _safe_page_filename(raw)
        csv_path = paths.plots / f"{stem}.csv"
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("date,series,value\n")
            for name, grid in [("true", truth)] + list(series.items()):
                for d, v in zip(dates, grid[i]):
                    fh.write(f"{d.isoformat()},{name},{float(v)!r}\n")

        fig, ax = plt.subplots(figsize=(10, 4))
        ax.plot(dates, truth[i], label="true", linewidth=2, color="black")
        for name, grid in series.items():
            ax.plot(dates, grid[i], label=name, alpha=0.8)
        ax.set_title(raw)
        ax.set_ylabel("daily views")
        ax.legend(loc="best", fontsize=8)
        fig.autofmt_xdate()
        fig.tight_layout()
        fig.savefig(paths.plots / f"{stem}.svg", format="svg", metadata={"Date": None})
        plt.close(fig)
        log.info("plotted %s -> %s.{svg,csv}", raw, paths.plots / stem)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikitraffic",
        description="Median baselines, a from-scratch LSTM and their ensemble "
        "for multistep web-traffic forecasting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "-c", help="YAML run configuration")
        p.add_argument("--input", help="wide-format training CSV")
        p.add_argument("--answer-key", dest="answer_key", help="future-views CSV")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="global RNG seed")
        p.add_argument("--epochs", type=int, help="training epochs override")
        p.add_argument("--horizon", type=int, help="forecast horizon in days")
        p.add_argument(
            "--method", action="append",
            help="enabled methods (repeatable or comma-separated): "
            "benchmark, medians, lstm, ensemble",
        )

    p = sub.add_parser("prepare", help="fit and persist the preprocessing sidecar")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train both LSTM models and save checkpoints")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write forecast CSVs for the enabled methods")
    common(p)
    p.add_argument("--target", choices=TARGETS, default="test")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score forecast files against the truth")
    common(p)
    p.add_argument("--target", choices=TARGETS, action="append")
    p.add_argument("--per-page", action="store_true", dest="per_page")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="per-page overlay of truth and forecasts")
    common(p)
    p.add_argument("--page", required=True, help="page key or substring selector")
    p.add_argument("--target", choices=TARGETS, default="test")
    p.add_argument("--max-pages", type=int, default=12)
    p.set_defaults(func=cmd_plot)
    return parser


INPUT_ERRORS = (
    ConfigError,
    CsvFormatError,
    CsvDataError,
    PageKeyError,
    AlignmentError,
    CheckpointFormatError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    ValueError,
)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stdout)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
