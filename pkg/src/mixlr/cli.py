"""Command-line interface.

Subcommands: synth, experiment, train, evaluate, sensitivity, serve.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import _jsonutil
from .augmentation import AugmentationError, BackgroundLevels, SplitSpec
from .calibrate import CalibrationError
from .casework import CaseError, CaseObservation, ModelStore, ModelVariant, evaluate_case
from .classify import ConvergenceError, TrainingConfig
from .metrics import DEFAULT_LR_CAP
from .pipeline import (
    ConfigError,
    ExperimentConfig,
    make_trainer,
    run_experiment,
    sensitivity_analysis,
    train_variant,
)
from .profiles import (
    BodyFluid,
    DetectionRates,
    MarkerPanel,
    ProfileError,
    dataset_to_csv,
    parse_profile_table,
    reference_detection_rates,
    synthesize_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

logger = logging.getLogger(__name__)


def _parse_interest(text: str) -> frozenset[BodyFluid]:
    return frozenset(BodyFluid.from_name(part) for part in text.split(","))


def _parse_background_overrides(entries: list[str]) -> dict[BodyFluid, float]:
    overrides: dict[BodyFluid, float] = {}
    for entry in entries:
        if "=" not in entry:
            raise ConfigError(f"--background expects fluid=level, got {entry!r}")
        name, value = entry.split("=", 1)
        aliases = {"penile": BodyFluid.SKIN_PENILE}
        fluid = aliases.get(name.strip()) or BodyFluid.from_name(name)
        overrides[fluid] = float(value)
    return overrides


def _load_rates(path: str | None) -> DetectionRates:
    if path is None:
        return reference_detection_rates()
    return DetectionRates.from_csv(Path(path).read_text())


def cmd_synth(args: argparse.Namespace) -> int:
    rates = _load_rates(args.rates)
    ds = synthesize_dataset(rates, n_per_fluid=args.n_per_fluid,
                            reps_per_sample=args.reps, rng_seed=args.seed)
    Path(args.out).write_text(dataset_to_csv(ds))
    print(f"wrote {len(ds)} samples to {args.out}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    report = run_experiment(cfg)
    report.write(args.out)
    print(f"wrote report for {len(report.cells)} grid cells to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    panel = MarkerPanel()
    if args.data:
        singles = parse_profile_table(Path(args.data).read_text(), panel)
    else:
        rates = _load_rates(args.rates)
        singles = synthesize_dataset(rates, n_per_fluid=30, reps_per_sample=4,
                                     rng_seed=args.seed)
    backgrounds = BackgroundLevels.default().with_levels(
        _parse_background_overrides(args.background))
    variant, metrics = train_variant(
        singles, _parse_interest(args.interest), backgrounds,
        dichotomized=args.dichotomize,
        split=SplitSpec(seed=args.seed),
        training=TrainingConfig(seed=args.seed), seed=args.seed)
    Path(args.out).write_text(variant.to_json())
    print(f"wrote model {variant.variant_id} to {args.out} "
          f"(held-out cllr={metrics.cllr:.3f}, auc={metrics.auc:.3f})")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    variant = ModelVariant.from_json(Path(args.model).read_text())
    obs = CaseObservation.from_json(Path(args.case).read_text(), variant.panel)
    report = evaluate_case(variant, obs, cap=args.cap)
    if args.json:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    result = sensitivity_analysis(cfg, BodyFluid.from_name(args.fluid),
                                  level=args.level)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "pairs.csv").write_text(result.rows_csv())
    (outdir / "summary.json").write_text(
        _jsonutil.dumps(result.summary_dict(), indent=2) + "\n")
    print(f"wrote {len(result.rows)} paired LRs to {outdir}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import create_app

    model_dir = args.model_dir or os.environ.get("MIXLR_MODEL_DIR")
    if not model_dir:
        raise ConfigError("provide --model-dir or set MIXLR_MODEL_DIR")
    trainer = None
    if args.allow_train:
        if not args.data:
            raise ConfigError("--allow-train requires --data with singles CSV")
        singles = parse_profile_table(Path(args.data).read_text(), MarkerPanel())
        trainer = make_trainer(singles, seed=args.seed)
    store = ModelStore.load_dir(model_dir, trainer=trainer)
    app = create_app(store, ui_dir=args.ui_dir)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlr",
        description="Likelihood ratios for body-fluid mixtures in mRNA profiles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a singles dataset from detection rates")
    p.add_argument("--rates", default=None,
                   help="rates CSV (default: built-in reference rates)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-fluid", type=int, default=30)
    p.add_argument("--reps", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="run a seeded experiment grid")
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("train", help="train a deployable model variant")
    p.add_argument("--data", default=None, help="singles CSV")
    p.add_argument("--rates", default=None,
                   help="synthesize singles from this rates CSV when no --data")
    p.add_argument("--interest", required=True,
                   help="comma-separated fluids of interest")
    p.add_argument("--strategy", choices=["one-vs-rest"], default="one-vs-rest")
    p.add_argument("--dichotomize", action="store_true", default=True)
    p.add_argument("--no-dichotomize", dest="dichotomize", action="store_false")
    p.add_argument("--background", action="append", default=[],
                   metavar="FLUID=LEVEL",
                   help="override a background level (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a case against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--case", required=True, help="case JSON")
    p.add_argument("--cap", type=float, default=DEFAULT_LR_CAP)
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sensitivity", help="background-level sensitivity analysis")
    p.add_argument("--config", required=True)
    p.add_argument("--fluid", required=True)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--out", default="sensitivity")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("serve", help="run the HTTP evaluation service")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", default=None, help="singles CSV for on-demand training")
    p.add_argument("--allow-train", action="store_true")
    p.add_argument("--ui-dir", default=None, help="static UI assets to serve at /")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AugmentationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProfileError, CaseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, CalibrationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
