"""End-to-end run orchestration.

Stage order: synth (or ingest) -> align -> window -> split -> scaler
fit/apply -> selector fit on train rows -> column filter -> train ->
evaluate -> render. A run directory collects the report trio
(txt/csv/json), confusion and correlation exports, ranking CSV, loss curve,
checkpoint, figures, and a manifest with content hashes and timings.

report.json and checkpoints contain no timestamps, so identical configs and
seeds reproduce them byte for byte; wall-clock timings live only in the
manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__, figures
from .datafusion import (
    AlignedDataset,
    Scaler,
    WindowSet,
    align,
    apply_scaler,
    concat_aligned,
    correlation_matrix,
    fit_scaler,
    load_labels,
    load_stream,
    split,
    window,
    write_aligned_csv,
    write_correlation_csv,
)
from .errors import ConfigError, ValidationError
from .evalmetrics import (
    MetricsReport,
    build_report,
    render_table,
    write_confusion_csv,
    write_report_csv,
    write_report_json,
)
from .featsel import (
    ExtraTreesConfig,
    FeatureMatrix,
    ImportanceRanking,
    anova_ranking,
    fit_extra_trees,
    pca_fit,
    pca_transform,
    select_top_k,
    variance_threshold,
    write_ranking_csv,
)
from .nncore import SampleBatch, TrainConfig, fit, init_params, predict, save_checkpoint
from .synthgen import SynthConfig, generate_dataset

log = logging.getLogger(__name__)

SELECTORS = ("variance_threshold", "pca", "anova", "extra_trees", "random", "none")
COMPARED_SELECTORS = ("variance_threshold", "pca", "anova", "extra_trees")

OUT_DIR_ENV = "COGLOAD_OUT_DIR"


@dataclass
class RunConfig:
    """Everything one pipeline run needs; YAML maps onto this 1:1."""

    synth: SynthConfig = field(default_factory=SynthConfig)
    data_dir: Optional[str] = None  # ingest instead of synthesizing when set
    out_dir: Optional[str] = None
    selector: str = "extra_trees"
    top_k: int = 20
    variance_tau: float = 0.0
    n_trees: int = 100
    selector_seed: int = 0
    window_length: int = 16
    window_stride: int = 8
    split_ratio: float = 0.8
    split_mode: str = "random"
    split_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    init_seed: int = 0
    averaging: str = "weighted"

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ConfigError(f"unknown selector {self.selector!r}, expected one of {SELECTORS}")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.window_length < 5:
            raise ConfigError("window_length must be >= 5")
        if self.window_stride < 1:
            raise ConfigError("window_stride must be >= 1")
        if not (0.0 < self.split_ratio < 1.0):
            raise ConfigError("split_ratio must lie strictly between 0 and 1")
        if self.split_mode not in ("random", "by_block"):
            raise ConfigError("split_mode must be random or by_block")
        if self.averaging not in ("macro", "weighted"):
            raise ConfigError("averaging must be macro or weighted")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")

    def fingerprint(self, selector: Optional[str] = None) -> Dict[str, object]:
        """The config subset that determines a run's outputs."""
        return {
            "selector": selector or self.selector,
            "top_k": self.top_k,
            "variance_tau": self.variance_tau,
            "n_trees": self.n_trees,
            "selector_seed": self.selector_seed,
            "window_length": self.window_length,
            "window_stride": self.window_stride,
            "split_ratio": self.split_ratio,
            "split_mode": self.split_mode,
            "split_seed": self.split_seed,
            "epochs": self.train.epochs,
            "batch_size": self.train.batch_size,
            "lr": self.train.lr,
            "train_seed": self.train.seed,
            "init_seed": self.init_seed,
            "averaging": self.averaging,
            "synth_seed": self.synth.seed,
            "effect_size": self.synth.effect_size,
            "n_informative_fnirs": self.synth.n_informative_fnirs,
            "sessions": self.synth.sessions,
            "data_dir": self.data_dir,
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "synth": {
                "seed": self.synth.seed,
                "fnirs_rate": self.synth.fnirs_rate,
                "eye_rate": self.synth.eye_rate,
                "driving_rate": self.synth.driving_rate,
                "block_schedule": [[lv, d] for lv, d in self.synth.block_schedule],
                "n_informative_fnirs": self.synth.n_informative_fnirs,
                "effect_size": self.synth.effect_size,
                "noise_sigma": self.synth.noise_sigma,
                "drift_amplitude": self.synth.drift_amplitude,
                "sessions": self.synth.sessions,
            },
            "data_dir": self.data_dir,
            "out_dir": self.out_dir,
            "selector": {
                "method": self.selector,
                "k": self.top_k,
                "variance_tau": self.variance_tau,
                "n_trees": self.n_trees,
                "seed": self.selector_seed,
            },
            "window": {"length": self.window_length, "stride": self.window_stride},
            "split": {
                "ratio": self.split_ratio,
                "mode": self.split_mode,
                "seed": self.split_seed,
            },
            "train": {
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "lr": self.train.lr,
                "seed": self.train.seed,
            },
            "init_seed": self.init_seed,
            "averaging": self.averaging,
        }


def config_from_dict(raw: Dict[str, object]) -> RunConfig:
    """Build a RunConfig from a nested mapping (parsed YAML).

    A top-level `seed` fills every component seed not given explicitly.
    Unknown keys raise ConfigError so typos do not silently vanish.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = dict(raw)
    master = raw.pop("seed", None)
    if master is not None and not isinstance(master, int):
        raise ConfigError("seed must be an integer")

    def section(name) -> Dict[str, object]:
        value = raw.pop(name, {}) or {}
        if not isinstance(value, dict):
            raise ConfigError(f"config section {name!r} must be a mapping")
        return dict(value)

    synth_kw = section("synth")
    sel = section("selector")
    win = section("window")
    spl = section("split")
    trn = section("train")
    top = {
        "data_dir": raw.pop("data_dir", None),
        "out_dir": raw.pop("out_dir", None),
        "init_seed": raw.pop("init_seed", master if master is not None else 0),
        "averaging": raw.pop("averaging", "weighted"),
    }
    if raw:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(raw))}")

    def seeded(d, key="seed"):
        if key not in d and master is not None:
            d[key] = master
        return d

    try:
        if "block_schedule" in synth_kw and synth_kw["block_schedule"] is not None:
            synth_kw["block_schedule"] = [
                (int(lv), float(dur)) for lv, dur in synth_kw["block_schedule"]
            ]
        synth = SynthConfig(**seeded(synth_kw))
        sel = seeded(sel)
        spl = seeded(spl)
        trn = seeded(trn)
        cfg = RunConfig(
            synth=synth,
            data_dir=top["data_dir"],
            out_dir=top["out_dir"],
            selector=sel.pop("method", "extra_trees"),
            top_k=int(sel.pop("k", 20)),
            variance_tau=float(sel.pop("variance_tau", 0.0)),
            n_trees=int(sel.pop("n_trees", 100)),
            selector_seed=int(sel.pop("seed", 0)),
            window_length=int(win.pop("length", 16)),
            window_stride=int(win.pop("stride", 8)),
            split_ratio=float(spl.pop("ratio", 0.8)),
            split_mode=str(spl.pop("mode", "random")),
            split_seed=int(spl.pop("seed", 0)),
            train=TrainConfig(
                epochs=int(trn.pop("epochs", 1000)),
                batch_size=int(trn.pop("batch_size", 32)),
                lr=float(trn.pop("lr", 0.001)),
                seed=int(trn.pop("seed", 0)),
            ),
            init_seed=int(top["init_seed"]),
            averaging=str(top["averaging"]),
        )
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    for name, leftover in (("selector", sel), ("window", win), ("split", spl), ("train", trn)):
        if leftover:
            raise ConfigError(f"unknown {name} config keys: {', '.join(sorted(leftover))}")
    return cfg


# ---------------------------------------------------------------------------
# data preparation (shared across selectors)


@dataclass
class PreparedData:
    """Windowed, split, standardized data plus the fitted scaler."""

    train: WindowSet
    test: WindowSet
    scaler: Scaler
    names: List[str]
    aligned_rows: int
    timings: Dict[str, float] = field(default_factory=dict)


def _flatten_windows(ws: WindowSet) -> Tuple[np.ndarray, np.ndarray]:
    """(n, c, L) windows -> (n*L, c) rows; labels repeat per row."""
    n, c, length = ws.windows.shape
    rows = ws.windows.transpose(0, 2, 1).reshape(n * length, c)
    return rows, np.repeat(ws.labels, length)


def _standardize(ws: WindowSet, scaler: Scaler) -> WindowSet:
    z = (ws.windows - scaler.mean[None, :, None]) / scaler.std[None, :, None]
    return WindowSet(z, ws.labels, ws.block_ids, ws.names)


def ingest_dataset(data_dir: str) -> AlignedDataset:
    """Load and align every session under a synthgen-layout directory."""
    manifest_path = os.path.join(data_dir, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            session_names = json.load(fh).get("sessions", [])
    else:
        session_names = sorted(
            d for d in os.listdir(data_dir)
            if os.path.isdir(os.path.join(data_dir, d)) and d.startswith("session_")
        )
    if not session_names:
        raise ValidationError(f"{data_dir}: no session directories found")
    aligned = []
    for i, name in enumerate(session_names):
        base = os.path.join(data_dir, name)
        fnirs = load_stream(os.path.join(base, "fnirs.csv"), "fnirs")
        eye = load_stream(os.path.join(base, "eye.csv"), "eye")
        driving = load_stream(os.path.join(base, "driving.csv"), "driving")
        labels = load_labels(os.path.join(base, "labels.csv"))
        aligned.append(align(fnirs, eye, driving, labels, session_id=i))
    return concat_aligned(aligned)


def build_aligned(cfg: RunConfig) -> AlignedDataset:
    """Synthesize (or ingest) and fuse all sessions into one dataset."""
    if cfg.data_dir is not None:
        return ingest_dataset(cfg.data_dir)
    sessions = generate_dataset(cfg.synth)
    aligned = [
        align(s.fnirs, s.eye, s.driving, s.labels, session_id=s.session_index)
        for s in sessions
    ]
    return concat_aligned(aligned)


def prepare_data(cfg: RunConfig, aligned: Optional[AlignedDataset] = None) -> PreparedData:
    """Window, split, and standardize; the scaler is fitted on train rows only."""
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    if aligned is None:
        aligned = build_aligned(cfg)
        timings["data"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ws = window(aligned, cfg.window_length, cfg.window_stride)
    train_ws, test_ws = split(ws, cfg.split_ratio, cfg.split_seed, cfg.split_mode)
    timings["window_split"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    train_rows, _ = _flatten_windows(train_ws)
    scaler = fit_scaler(train_rows, ws.names)
    train_ws = _standardize(train_ws, scaler)
    test_ws = _standardize(test_ws, scaler)
    timings["scale"] = time.perf_counter() - t0
    log.info(
        "prepared %d train / %d test windows over %d features",
        train_ws.n_windows, test_ws.n_windows, len(ws.names),
    )
    return PreparedData(
        train=train_ws,
        test=test_ws,
        scaler=scaler,
        names=list(ws.names),
        aligned_rows=aligned.n_rows,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# selector application


@dataclass
class SelectionResult:
    selector: str
    names: List[str]  # surviving channel names, in final column order
    ranking: Optional[ImportanceRanking]
    train: WindowSet
    test: WindowSet


def _filter_channels(ws: WindowSet, names: List[str], keep: List[str]) -> WindowSet:
    idx = [names.index(n) for n in keep]
    return WindowSet(ws.windows[:, idx, :], ws.labels, ws.block_ids, keep)


def apply_selector(cfg: RunConfig, prepared: PreparedData, selector: str) -> SelectionResult:
    """Fit the chosen selector on train rows and filter both window sets."""
    train_rows, row_labels = _flatten_windows(prepared.train)
    names = prepared.names
    ranking: Optional[ImportanceRanking] = None

    if selector == "extra_trees":
        X = FeatureMatrix(train_rows, names)
        _, ranking = fit_extra_trees(
            X,
            row_labels,
            ExtraTreesConfig(n_trees=cfg.n_trees, seed=cfg.selector_seed),
        )
        keep = select_top_k(ranking, min(cfg.top_k, len(names)))
    elif selector == "anova":
        ranking = anova_ranking(FeatureMatrix(train_rows, names), row_labels)
        keep = select_top_k(ranking, min(cfg.top_k, len(names)))
    elif selector == "variance_threshold":
        X = FeatureMatrix(train_rows, names)
        mask = variance_threshold(X, cfg.variance_tau)
        keep = [n for n, m in zip(names, mask) if m]
        if not keep:
            raise ValidationError(
                f"variance threshold {cfg.variance_tau} removed every feature"
            )
        variances = X.values.var(axis=0)
        entries = sorted(zip(names, variances.tolist()), key=lambda e: (-e[1], e[0]))
        ranking = ImportanceRanking(entries)
    elif selector == "pca":
        k = min(cfg.top_k, len(names), train_rows.shape[0])
        model = pca_fit(FeatureMatrix(train_rows, names), k)
        keep = [f"pc_{i + 1:02d}" for i in range(k)]
        entries = list(zip(keep, model.explained_variance.tolist()))
        ranking = ImportanceRanking(entries)
        train_ws = _project_windows(prepared.train, model, keep)
        test_ws = _project_windows(prepared.test, model, keep)
        return SelectionResult(selector, keep, ranking, train_ws, test_ws)
    elif selector == "random":
        rng = np.random.default_rng(np.random.SeedSequence([cfg.selector_seed, 3]))
        k = min(cfg.top_k, len(names))
        picked = rng.choice(len(names), size=k, replace=False)
        keep = [names[i] for i in sorted(picked)]
    elif selector == "none":
        keep = list(names)
    else:
        raise ConfigError(f"unknown selector {selector!r}")

    return SelectionResult(
        selector,
        keep,
        ranking,
        _filter_channels(prepared.train, names, keep),
        _filter_channels(prepared.test, names, keep),
    )


def _project_windows(ws: WindowSet, model, component_names: List[str]) -> WindowSet:
    n, c, length = ws.windows.shape
    rows = ws.windows.transpose(0, 2, 1).reshape(n * length, c)
    reduced = pca_transform(model, rows)
    wins = reduced.reshape(n, length, len(component_names)).transpose(0, 2, 1)
    return WindowSet(np.ascontiguousarray(wins), ws.labels, ws.block_ids, component_names)


# ---------------------------------------------------------------------------
# single-selector run


@dataclass
class SelectorRun:
    report: MetricsReport
    history: List[float]
    selection: SelectionResult
    params: object
    timings: Dict[str, float]


def run_selector(cfg: RunConfig, prepared: PreparedData, selector: str) -> SelectorRun:
    """Select features, train the classifier, and evaluate on the test side."""
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    selection = apply_selector(cfg, prepared, selector)
    timings["select"] = time.perf_counter() - t0
    log.info("%s kept %d features", selector, len(selection.names))

    t0 = time.perf_counter()
    train_batch = SampleBatch(selection.train.windows, selection.train.labels)
    params = init_params(len(selection.names), cfg.init_seed)
    params, history = fit(train_batch, cfg.train, params)
    timings["train"] = time.perf_counter() - t0
    log.info("%s trained %d epochs, final loss %.4f", selector, len(history), history[-1])

    t0 = time.perf_counter()
    test_batch = SampleBatch(selection.test.windows, selection.test.labels)
    predicted, scores = predict(test_batch, params)
    report = build_report(
        selector,
        selection.test.labels,
        predicted,
        scores,
        averaging=cfg.averaging,
        config_fingerprint=cfg.fingerprint(selector),
    )
    timings["evaluate"] = time.perf_counter() - t0
    log.info("%s test accuracy %.4f", selector, report.accuracy)
    return SelectorRun(report, history, selection, params, timings)


# ---------------------------------------------------------------------------
# artifacts and manifest


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: str, cfg: RunConfig, artifacts: Dict[str, str],
                    timings: Dict[str, float], extra: Dict[str, object]) -> None:
    """Manifest with config, artifact hashes, and timings; written atomically."""
    out_dir = os.path.dirname(path)
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "seeds": {
            "synth": cfg.synth.seed,
            "split": cfg.split_seed,
            "train": cfg.train.seed,
            "init": cfg.init_seed,
            "selector": cfg.selector_seed,
        },
        "artifacts": {
            name: {"path": rel, "sha256": _sha256_file(os.path.join(out_dir, rel))}
            for name, rel in sorted(artifacts.items())
        },
        "timings_s": {k: round(v, 6) for k, v in sorted(timings.items())},
    }
    manifest.update(extra)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def resolve_out_dir(cfg_out_dir: Optional[str], fallback: str = "runs/latest") -> str:
    if cfg_out_dir:
        return cfg_out_dir
    return os.environ.get(OUT_DIR_ENV, fallback)


@dataclass
class PipelineResult:
    reports: List[MetricsReport]
    out_dir: str
    artifacts: Dict[str, str]
    manifest_path: str
    runs: List[SelectorRun]
    failures: Dict[str, str] = field(default_factory=dict)


def _emit_selector_artifacts(out_dir: str, cfg: RunConfig, run: SelectorRun,
                             artifacts: Dict[str, str]) -> None:
    sel = run.selection.selector
    cm_csv = f"confusion_{sel}.csv"
    write_confusion_csv(os.path.join(out_dir, cm_csv), run.report.confusion)
    artifacts[f"confusion_{sel}_csv"] = cm_csv
    cm_svg = f"confusion_{sel}.svg"
    figures.confusion_heatmap(
        run.report.confusion, os.path.join(out_dir, cm_svg),
        title=f"Confusion ({sel})",
    )
    artifacts[f"confusion_{sel}_svg"] = cm_svg
    loss_svg = f"loss_{sel}.svg"
    figures.loss_curve(run.history, os.path.join(out_dir, loss_svg), title=f"Training loss ({sel})")
    artifacts[f"loss_{sel}_svg"] = loss_svg
    ckpt = f"checkpoint_{sel}.txt"
    save_checkpoint(os.path.join(out_dir, ckpt), run.params, cfg.init_seed)
    artifacts[f"checkpoint_{sel}"] = ckpt
    if run.selection.ranking is not None:
        rank_csv = f"ranking_{sel}.csv"
        write_ranking_csv(os.path.join(out_dir, rank_csv), run.selection.ranking, sel)
        artifacts[f"ranking_{sel}_csv"] = rank_csv
        bars_svg = f"importance_{sel}.svg"
        figures.importance_bars(
            run.selection.ranking, os.path.join(out_dir, bars_svg),
            top_n=max(cfg.top_k, 20), title=f"Feature scores ({sel})",
        )
        artifacts[f"importance_{sel}_svg"] = bars_svg


def _emit_shared_artifacts(out_dir: str, prepared: PreparedData,
                           artifacts: Dict[str, str]) -> None:
    train_rows, _ = _flatten_windows(prepared.train)
    corr = correlation_matrix(train_rows, prepared.names)
    write_correlation_csv(os.path.join(out_dir, "correlation.csv"), corr)
    artifacts["correlation_csv"] = "correlation.csv"
    figures.correlation_heatmap(corr, os.path.join(out_dir, "correlation.svg"))
    artifacts["correlation_svg"] = "correlation.svg"


def run_pipeline(cfg: RunConfig, write_figures: bool = True) -> PipelineResult:
    """Full single-selector run; writes every artifact plus the manifest."""
    out_dir = resolve_out_dir(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    total0 = time.perf_counter()
    prepared = prepare_data(cfg)
    run = run_selector(cfg, prepared, cfg.selector)

    artifacts: Dict[str, str] = {}
    reports = [run.report]
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_table(reports))
    artifacts["report_txt"] = "report.txt"
    write_report_csv(os.path.join(out_dir, "report.csv"), reports)
    artifacts["report_csv"] = "report.csv"
    write_report_json(os.path.join(out_dir, "report.json"), reports)
    artifacts["report_json"] = "report.json"
    _emit_selector_artifacts(out_dir, cfg, run, artifacts)
    if write_figures:
        _emit_shared_artifacts(out_dir, prepared, artifacts)

    timings = dict(prepared.timings)
    timings.update({f"{cfg.selector}.{k}": v for k, v in run.timings.items()})
    timings["total"] = time.perf_counter() - total0
    manifest_path = os.path.join(out_dir, "manifest.json")
    _write_manifest(manifest_path, cfg, artifacts, timings, {"mode": "pipeline"})
    return PipelineResult(reports, out_dir, artifacts, manifest_path, [run])


def compare_selectors(cfg: RunConfig, include_random_control: bool = False,
                      write_figures: bool = True) -> PipelineResult:
    """Run every compared selector on identical data, splits, and seeds.

    A selector failure is recorded and the rest still run; failures are
    reported in the result and the manifest.
    """
    out_dir = resolve_out_dir(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    total0 = time.perf_counter()
    prepared = prepare_data(cfg)

    selectors = list(COMPARED_SELECTORS)
    if include_random_control:
        selectors.append("random")
    runs: List[SelectorRun] = []
    failures: Dict[str, str] = {}
    artifacts: Dict[str, str] = {}
    timings = dict(prepared.timings)
    for selector in selectors:
        try:
            run = run_selector(cfg, prepared, selector)
        except Exception as exc:  # noqa: BLE001 - per-selector isolation is the contract
            log.error("selector %s failed: %s", selector, exc)
            failures[selector] = str(exc)
            continue
        runs.append(run)
        timings.update({f"{selector}.{k}": v for k, v in run.timings.items()})
        _emit_selector_artifacts(out_dir, cfg, run, artifacts)

    reports = [r.report for r in runs]
    if reports:
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_table(reports))
        artifacts["report_txt"] = "report.txt"
        write_report_csv(os.path.join(out_dir, "report.csv"), reports)
        artifacts["report_csv"] = "report.csv"
        write_report_json(os.path.join(out_dir, "report.json"), reports)
        artifacts["report_json"] = "report.json"
    if write_figures:
        _emit_shared_artifacts(out_dir, prepared, artifacts)

    timings["total"] = time.perf_counter() - total0
    manifest_path = os.path.join(out_dir, "manifest.json")
    _write_manifest(
        manifest_path, cfg, artifacts, timings,
        {"mode": "compare_selectors", "failures": failures},
    )
    return PipelineResult(reports, out_dir, artifacts, manifest_path, runs, failures)


# ---------------------------------------------------------------------------
# standalone stage helpers (used by the CLI subcommands)


def fuse_to_csv(cfg: RunConfig, out_path: str) -> AlignedDataset:
    """Ingest/synthesize, align, and export the fused dataset as CSV."""
    aligned = build_aligned(cfg)
    write_aligned_csv(out_path, aligned)
    return aligned
