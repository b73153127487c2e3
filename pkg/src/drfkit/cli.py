"""Command-line entry point: ``drfkit {extract,screen,classify,synth,run-all}``.

Exit codes: 0 success, 2 when some patients failed extraction but the run
finished, 1 on a fatal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import DrfError
from .pipeline import (
    RunConfig,
    build_config,
    extract_cohort_features,
    read_config_file,
    read_feature_table,
    read_manifest,
    run_classification,
    run_univariate,
    write_classification,
    write_error_ledger,
    write_feature_table,
    write_run_manifest,
    write_screening,
)
from .pipeline.synth import SynthSpec, generate_synthetic_cohort

log = logging.getLogger("drfkit")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _common(p: argparse.ArgumentParser, manifest: bool = True):
    p.add_argument("--config", type=Path, help="key=value file; flags override it")
    if manifest:
        p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _run_flags(p: argparse.ArgumentParser):
    p.add_argument("--weights", type=Path, help="network weight file (default: seeded weights)")
    p.add_argument("--input-size", type=int, dest="input_size")
    p.add_argument("--workers", type=int)


def _model_flags(p: argparse.ArgumentParser):
    p.add_argument("--folds", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False)


def _features_flag(p: argparse.ArgumentParser):
    p.add_argument("--features", type=Path, help="feature CSV (default: OUT/features.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drfkit", description="Deep and standard radiomic texture survival study.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="SRF and DRF feature table for a cohort")
    _common(p)
    _run_flags(p)

    p = sub.add_parser("screen", help="median-split log-rank screen of all 82 features")
    _common(p)
    _features_flag(p)
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False)

    p = sub.add_parser("classify", help="random-forest survival classification")
    _common(p)
    _features_flag(p)
    _model_flags(p)

    p = sub.add_parser("run-all", help="extract, screen and classify")
    _common(p)
    _run_flags(p)
    _model_flags(p)

    p = sub.add_parser("synth", help="write a synthetic cohort")
    _common(p, manifest=False)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--dims", type=int, default=64, help="cube edge in voxels")
    p.add_argument("--censor-fraction", type=float, default=0.06)
    p.add_argument("--coupling", type=float, default=SynthSpec.coupling)
    p.add_argument("--medians", type=float, nargs=2, default=SynthSpec.medians_days, metavar=("DAYS0", "DAYS1"))
    p.add_argument("--length-scales", type=float, nargs=2, default=SynthSpec.length_scales, metavar=("LS0", "LS1"))
    return parser


_CONFIG_FLAGS = ("manifest", "out", "seed", "weights", "input_size", "workers", "folds", "trees", "figures")


def config_from_args(args) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if hasattr(args, k)}
    return build_config(file_values, **overrides)


def _need_manifest(config: RunConfig):
    if config.manifest is None:
        raise DrfError("a cohort manifest is required (--manifest or manifest= in --config)")
    return read_manifest(config.manifest)


def _extract(config: RunConfig, rows):
    table, errors = extract_cohort_features(rows, config)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    write_feature_table(table, out / "features.csv")
    write_error_ledger(errors, out / "errors.csv")
    if len(table) == 0:
        raise DrfError(f"every patient failed extraction; see {out / 'errors.csv'}")
    log.info("extracted %d patients, %d failed", len(table), len(errors))
    return table, errors, [out / "features.csv", out / "errors.csv"]


def _screen(config: RunConfig, table, rows):
    result = run_univariate(table, rows)
    paths = write_screening(result, config.out)
    if config.figures:
        from .pipeline.figures import screening_figures

        paths += screening_figures(result, config.out / "figures")
    n_sig = sum(r.significant for r in result.screen)
    log.info("screen: %d of %d features significant after Holm", n_sig, len(result.screen))
    return result, paths, {"significant_features": n_sig}


def _classify(config: RunConfig, table, rows):
    result = run_classification(table, rows, config)
    paths = write_classification(result, config.out)
    if config.figures:
        from .pipeline.figures import classification_figures

        paths += classification_figures(result, config.out / "figures")
    summary = {f"{k}_mean_auc": r.mean_auc for k, r in result.cv.items()}
    summary["auc_comparison_p"] = result.comparison.p_value
    summary["median_days"] = result.median_days
    for kind, cmp in result.predicted_km.items():
        summary[f"{kind}_predicted_logrank_p"] = None if cmp.logrank is None else cmp.logrank.p_value
    log.info("classify: %s", ", ".join(f"{k}={v:.4g}" for k, v in summary.items() if v is not None))
    return result, paths, summary


def _load_table(args, config):
    return read_feature_table(args.features or config.out / "features.csv")


def cmd_synth(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else file_values.get("seed", 0)
    out = args.out or file_values.get("out") or Path("synthetic_cohort")
    spec = SynthSpec(
        n=args.n,
        dims=(args.dims,) * 3,
        length_scales=tuple(args.length_scales),
        medians_days=tuple(args.medians),
        censor_fraction=args.censor_fraction,
        coupling=args.coupling,
        seed=seed,
    )
    manifest = generate_synthetic_cohort(spec, out)
    print(manifest)
    return EXIT_OK


def run(args) -> int:
    if args.command == "synth":
        return cmd_synth(args)
    config = config_from_args(args)
    rows = _need_manifest(config)
    config.out.mkdir(parents=True, exist_ok=True)
    paths, summary, errors = [], {}, []

    if args.command in ("extract", "run-all"):
        table, errors, p = _extract(config, rows)
        paths += p
        summary.update(patients=len(table), failed=len(errors))
    else:
        table = _load_table(args, config)
    if args.command in ("screen", "run-all"):
        _, p, s = _screen(config, table, rows)
        paths += p
        summary.update(s)
    if args.command in ("classify", "run-all"):
        _, p, s = _classify(config, table, rows)
        paths += p
        summary.update(s)

    write_run_manifest(config, config.out, args.command, paths, summary)
    return EXIT_PARTIAL if errors else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (DrfError, OSError, ValueError, KeyError) as exc:
        print(f"drfkit: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
