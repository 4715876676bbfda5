"""Command-line front end.

Subcommands cover the full workflow (`pipeline`, `compare-selectors`) and the
individual stages (`synth`, `fuse`, `select`, `train`, `eval`) so intermediate
artifacts can be produced and consumed standalone. Configuration comes from a
YAML file; flags override file values. Logs go to stderr, machine-readable
outputs to files.

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric divergence,
4 partial comparison failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

import yaml

from .datafusion import fit_scaler, load_aligned_csv, apply_scaler
from .errors import (
    CogloadError,
    ConfigError,
    DimensionError,
    DivergenceError,
    NumericError,
    ParseError,
    RangeError,
    ValidationError,
)
from .evalmetrics import (
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
    write_ranking_csv,
)
from .nncore import SampleBatch, load_checkpoint, predict, save_checkpoint
from .pipeline import (
    RunConfig,
    apply_selector,
    build_aligned,
    compare_selectors,
    config_from_dict,
    fuse_to_csv,
    prepare_data,
    resolve_out_dir,
    run_pipeline,
    run_selector,
)
from .synthgen import generate_dataset, write_dataset
from . import figures

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3
EXIT_PARTIAL = 4


def _load_raw_config(path: Optional[str]) -> Dict[str, object]:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    return raw


def _apply_set_overrides(raw: Dict[str, object], overrides: List[str]) -> None:
    """`--set split.mode=by_block` style dotted-path assignments."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value_text = item.partition("=")
        path = key.strip().split(".")
        if not all(path):
            raise ConfigError(f"--set key must be a dotted path, got {key!r}")
        try:
            value = yaml.safe_load(value_text)
        except yaml.YAMLError:
            raise ConfigError(f"--set value for {key!r} is not valid YAML") from None
        node = raw
        for part in path[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            elif not isinstance(nxt, dict):
                raise ConfigError(f"--set path {key!r} descends into a non-mapping")
            node = nxt
        node[path[-1]] = value


def _build_config(args: argparse.Namespace) -> RunConfig:
    raw = _load_raw_config(getattr(args, "config", None))
    _apply_set_overrides(raw, getattr(args, "set", None) or [])
    # flag shortcuts beat both the file and --set
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "out_dir", None) is not None:
        raw["out_dir"] = args.out_dir
    if getattr(args, "data_dir", None) is not None:
        raw["data_dir"] = args.data_dir
    if getattr(args, "selector", None) is not None:
        raw.setdefault("selector", {})
        if not isinstance(raw["selector"], dict):
            raise ConfigError("config section 'selector' must be a mapping")
        raw["selector"]["method"] = args.selector
    if getattr(args, "epochs", None) is not None:
        raw.setdefault("train", {})
        if not isinstance(raw["train"], dict):
            raise ConfigError("config section 'train' must be a mapping")
        raw["train"]["epochs"] = args.epochs
    if getattr(args, "effect_size", None) is not None:
        raw.setdefault("synth", {})
        if not isinstance(raw["synth"], dict):
            raise ConfigError("config section 'synth' must be a mapping")
        raw["synth"]["effect_size"] = args.effect_size
    if getattr(args, "split_mode", None) is not None:
        raw.setdefault("split", {})
        if not isinstance(raw["split"], dict):
            raise ConfigError("config section 'split' must be a mapping")
        raw["split"]["mode"] = args.split_mode
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# subcommand bodies


def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    out_dir = resolve_out_dir(cfg.out_dir, fallback="synth_data")
    sessions = generate_dataset(cfg.synth)
    manifest = write_dataset(cfg.synth, sessions, out_dir)
    print(manifest)
    return EXIT_OK


def cmd_fuse(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = args.out or os.path.join(resolve_out_dir(cfg.out_dir), "fused.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    aligned = fuse_to_csv(cfg, out)
    log.info("fused %d rows x %d features", aligned.n_rows, len(aligned.names))
    print(out)
    return EXIT_OK


def cmd_select(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Rank features over a whole aligned dataset (no split)."""
    if args.data:
        aligned = load_aligned_csv(args.data)
    else:
        aligned = build_aligned(cfg)
    scaler = fit_scaler(aligned.values, aligned.names)
    z = apply_scaler(scaler, aligned.values)
    X = FeatureMatrix(z, aligned.names)
    if cfg.selector == "extra_trees":
        _, ranking = fit_extra_trees(
            X, aligned.labels, ExtraTreesConfig(n_trees=cfg.n_trees, seed=cfg.selector_seed)
        )
    elif cfg.selector == "anova":
        ranking = anova_ranking(X, aligned.labels)
    elif cfg.selector == "variance_threshold":
        variances = X.values.var(axis=0)
        entries = sorted(zip(X.names, variances.tolist()), key=lambda e: (-e[1], e[0]))
        ranking = ImportanceRanking(entries)
    elif cfg.selector == "pca":
        k = min(cfg.top_k, len(X.names), X.values.shape[0])
        model = pca_fit(X, k)
        names = [f"pc_{i + 1:02d}" for i in range(k)]
        ranking = ImportanceRanking(list(zip(names, model.explained_variance.tolist())))
    else:
        raise ConfigError(f"selector {cfg.selector!r} does not produce a ranking")
    out = args.out or os.path.join(resolve_out_dir(cfg.out_dir), f"ranking_{cfg.selector}.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_ranking_csv(out, ranking, cfg.selector)
    print(out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    aligned = load_aligned_csv(args.data) if args.data else None
    prepared = prepare_data(cfg, aligned)
    run = run_selector(cfg, prepared, cfg.selector)
    out_dir = resolve_out_dir(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, f"checkpoint_{cfg.selector}.txt")
    save_checkpoint(ckpt, run.params, cfg.init_seed)
    figures.loss_curve(
        run.history, os.path.join(out_dir, f"loss_{cfg.selector}.svg"),
        title=f"Training loss ({cfg.selector})",
    )
    if run.selection.ranking is not None:
        write_ranking_csv(
            os.path.join(out_dir, f"ranking_{cfg.selector}.csv"),
            run.selection.ranking, cfg.selector,
        )
    print(ckpt)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Evaluate a saved checkpoint on the config's test split.

    The split, scaler, and selection are re-derived from the config seeds, so
    the same config that produced the checkpoint evaluates it consistently.
    """
    aligned = load_aligned_csv(args.data) if args.data else None
    prepared = prepare_data(cfg, aligned)
    selection = apply_selector(cfg, prepared, cfg.selector)
    params, _ = load_checkpoint(args.checkpoint)
    expected = params.conv1.weights.shape[1]
    if expected != len(selection.names):
        raise DimensionError(
            f"checkpoint expects {expected} input channels but the selector "
            f"kept {len(selection.names)} features"
        )
    test_batch = SampleBatch(selection.test.windows, selection.test.labels)
    predicted, scores = predict(test_batch, params)
    report = build_report(
        cfg.selector, selection.test.labels, predicted, scores,
        averaging=cfg.averaging, config_fingerprint=cfg.fingerprint(),
    )
    out_dir = resolve_out_dir(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_table([report]))
    write_report_csv(os.path.join(out_dir, "report.csv"), [report])
    write_report_json(os.path.join(out_dir, "report.json"), [report])
    write_confusion_csv(os.path.join(out_dir, f"confusion_{cfg.selector}.csv"), report.confusion)
    figures.confusion_heatmap(
        report.confusion, os.path.join(out_dir, f"confusion_{cfg.selector}.svg"),
        title=f"Confusion ({cfg.selector})",
    )
    print(render_table([report]), end="")
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace, cfg: RunConfig) -> int:
    result = run_pipeline(cfg, write_figures=not args.no_figures)
    with open(os.path.join(result.out_dir, "report.txt"), "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    log.info("artifacts written to %s", result.out_dir)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, cfg: RunConfig) -> int:
    result = compare_selectors(
        cfg,
        include_random_control=args.include_random_control,
        write_figures=not args.no_figures,
    )
    if result.reports:
        print(render_table(result.reports), end="")
    log.info("artifacts written to %s", result.out_dir)
    if result.failures:
        for selector, message in sorted(result.failures.items()):
            log.error("selector %s failed: %s", selector, message)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, *, data_flag: bool = False) -> None:
    p.add_argument("--config", "-c", help="YAML config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry by dotted path (repeatable)")
    p.add_argument("--seed", type=int, help="master seed for every component")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--data-dir", help="recorded dataset directory (skips synthesis)")
    p.add_argument("--selector", help="feature selection method")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--effect-size", type=float, help="synthetic class separation")
    p.add_argument("--split-mode", choices=["random", "by_block"], help="split strategy")
    if data_flag:
        p.add_argument("--data", help="aligned CSV produced by `fuse`")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogload",
        description="Cognitive-load classification from fused fNIRS, eye, and driving data.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording set")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fuse", help="align and merge streams into one CSV")
    _add_common(p)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("select", help="rank features on an aligned dataset")
    _add_common(p, data_flag=True)
    p.add_argument("--out", help="ranking CSV path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train the classifier, save a checkpoint")
    _add_common(p, data_flag=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    _add_common(p, data_flag=True)
    p.add_argument("--checkpoint", required=True, help="checkpoint file from `train`")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run the full workflow end to end")
    _add_common(p)
    p.add_argument("--no-figures", action="store_true", help="skip SVG rendering")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("compare-selectors", help="run all four selectors on one split")
    _add_common(p)
    p.add_argument("--no-figures", action="store_true", help="skip SVG rendering")
    p.add_argument("--include-random-control", action="store_true",
                   help="add a random-feature control row")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _build_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        log.error("training diverged at epoch %d: %s", exc.epoch, exc)
        return EXIT_DIVERGED
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_DIVERGED
    except (ParseError, ValidationError, RangeError, DimensionError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except FileNotFoundError as exc:
        log.error("data error: missing file %s", exc.filename or exc)
        return EXIT_DATA
    except CogloadError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
