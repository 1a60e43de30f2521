"""``reponlab`` command line.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from reponlab.harness.config import ConfigError, Experiment, load_config
from reponlab.harness.figures import FIGURES, FigureError, default_panels, emit_figure_data
from reponlab.harness.runner import RunError, relation_variants, run

log = logging.getLogger("reponlab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

ALLOWED = {
    "statics": {Experiment.STATICS_CURVE, Experiment.STATICS_ANALYTIC},
    "repon": {Experiment.REPON_PHASE_SPACE, Experiment.REPON_PROBABILITY},
    "train": {Experiment.TRAIN_ONCE, Experiment.FRACTION_SWEEP},
    "phase-diagram": {Experiment.LR_PHASE_DIAGRAM, Experiment.WD_PHASE_DIAGRAM},
    "goldilocks": {Experiment.GOLDILOCKS},
    "figure": set(Experiment),
}

HELP = {
    "statics": "oracle accuracy curves and analytic critical fractions",
    "repon": "repon phase space or collision probability sweep",
    "train": "train one model, or sweep the training fraction",
    "phase-diagram": "learning-rate or weight-decay phase diagram",
    "goldilocks": "test accuracy versus decoder depth",
    "figure": "run what a figure needs and emit its plot data",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reponlab", description="Generalization effective-theory laboratory.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, type=Path, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="base seed (overrides [run] seed)")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides [run] out)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
        if name == "figure":
            p.add_argument("--id", dest="figure_id", default=None, choices=sorted(FIGURES), help="figure to build")
            p.add_argument("--no-svg", action="store_true", help="skip SVG rendering")
    return parser


def _figure(cfg, out: Path, figure_id: str | None, workers: int, svg: bool):
    figure_id = figure_id or cfg.figure.id
    if figure_id is None:
        raise ConfigError("figure id missing: pass --id or set figure.id")
    if figure_id not in FIGURES:
        raise ConfigError(f"figure.id: unknown figure id {figure_id!r}")
    need = FIGURES[figure_id]
    if cfg.experiment is not need:
        raise ConfigError(f"run.experiment: figure {figure_id} needs {need.value}, config has {cfg.experiment.value}")
    panels = cfg.figure.relations or default_panels(figure_id)
    try:
        variants = relation_variants(cfg, panels)
    except ValueError as exc:
        raise ConfigError(f"figure.relations: {exc}") from None
    manifests = []
    for v in variants:
        target = out / "runs" / v.relation.label() if len(variants) > 1 else out / "runs" / "main"
        log.info("running %s for %s into %s", v.experiment.value, v.relation.label(), target)
        manifests.append(run(v, target, workers))
    return emit_figure_data(manifests, figure_id, out, svg=svg and cfg.figure.svg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if cfg.experiment not in ALLOWED[args.command]:
            allowed = ", ".join(sorted(e.value for e in ALLOWED[args.command]))
            raise ConfigError(f"run.experiment: {args.command} runs {allowed}, not {cfg.experiment.value}")
        out = args.out if args.out is not None else (Path(cfg.out) if cfg.out else None)
        if out is None:
            raise ConfigError("no output directory: pass --out or set run.out")
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "figure":
            manifest = _figure(cfg, out, args.figure_id, args.workers, not args.no_svg)
        else:
            manifest = run(cfg, out, args.workers)
    except (ConfigError, FigureError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, ArithmeticError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # module-level validation of parameters the config passed through
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{manifest.experiment}: wrote {len(manifest.files)} files to {manifest.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
