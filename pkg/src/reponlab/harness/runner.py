"""Execute one configured experiment and record what it wrote."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from reponlab import __version__
from reponlab.autoencoder.model import save_checkpoint
from reponlab.autoencoder.sweeps import spec_payload, goldilocks_sweep, phase_diagram_lr, phase_diagram_wd, sweep_training_fraction
from reponlab.autoencoder.train import train
from reponlab.cells import run_cells, stable_key
from reponlab.harness.config import Experiment, ExperimentConfig, parse_relation_shorthand, serialize_config
from reponlab.inference import (
    OraclePoint,
    analytic_inferable_fraction,
    analytic_upper_bound,
    critical_fraction,
    guess_probability,
    oracle_point,
)
from reponlab.relations import build_relation, default_model, description_length
from reponlab.repon import InitDistribution, phase_space_map, probability_sweep

MANIFEST = "manifest.json"
CONFIG_SNAPSHOT = "config.cfg"
CELLS_DIR = "cells"
# oracle trials use seeds seed, seed+1, ...; cells sit far enough apart not to overlap
CELL_SEED_STRIDE = 10_000


class RunError(RuntimeError):
    """A run failed for a reason other than its configuration."""


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    experiment: str
    config: str
    version: str
    timestamp: str
    files: dict[str, str] = field(default_factory=dict)
    out_dir: Path | None = None
    relation: str = ""

    def path(self, name: str) -> Path:
        if name not in self.files:
            raise KeyError(f"{name} is not an output of this run ({sorted(self.files)})")
        return Path(self.out_dir) / name

    def save(self) -> Path:
        target = Path(self.out_dir) / MANIFEST
        payload = {
            "experiment": self.experiment,
            "relation": self.relation,
            "config": self.config,
            "version": self.version,
            "timestamp": self.timestamp,
            "files": self.files,
        }
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return target

    @classmethod
    def load(cls, out_dir) -> RunManifest:
        out_dir = Path(out_dir)
        data = json.loads((out_dir / MANIFEST).read_text())
        return cls(
            data["experiment"], data["config"], data["version"], data["timestamp"], data["files"], out_dir,
            data.get("relation", ""),
        )

    def verify(self) -> list[str]:
        """Names of listed files that are missing or whose checksum changed."""
        return [
            name
            for name, digest in self.files.items()
            if not (Path(self.out_dir) / name).exists() or sha256_file(Path(self.out_dir) / name) != digest
        ]


def write_manifest(out_dir, experiment: str, config_text: str, relation: str = "") -> RunManifest:
    """Checksum every file under ``out_dir`` (except the manifest) and save."""
    out_dir = Path(out_dir)
    files = {
        p.relative_to(out_dir).as_posix(): sha256_file(p)
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != MANIFEST and not p.name.endswith(".tmp")
    }
    m = RunManifest(
        experiment, config_text, __version__, datetime.now(timezone.utc).isoformat(timespec="seconds"), files, out_dir,
        relation,
    )
    m.save()
    return m


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _check_finite(name: str, values) -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise RunError(f"non-finite values in {name}")


# experiments ----------------------------------------------------------------


def _oracle_cell(task) -> dict:
    spec, fraction, trials, seed, sequences = task
    p = oracle_point(spec, fraction, trials, seed, sequences)
    return dict(zip(OraclePoint.CSV_HEADER, p.row()))


def _analytic_rows(cfg: ExperimentConfig):
    spec = cfg.relation
    n = spec.n
    b = description_length(default_model(spec), n)
    p_star = guess_probability(spec)
    for f in cfg.statics.fractions:
        m = f * n * n
        yield (spec.label(), n, f, m, b, p_star, analytic_inferable_fraction(m, b), analytic_upper_bound(m, b, p_star))


ANALYTIC_HEADER = ("relation", "n", "fraction", "m", "b", "p_star", "inferable_fraction", "upper_bound")
CRITICAL_HEADER = ("relation", "n", "b", "alpha", "N", "p_c")


def _statics_curve(cfg, out, workers):
    s = cfg.statics
    tasks = [(cfg.relation, f, s.trials, cfg.seed + CELL_SEED_STRIDE * i, s.sequences) for i, f in enumerate(s.fractions)]
    keys = [stable_key({"oracle": spec_payload(t[0]), "f": t[1], "trials": t[2], "seed": t[3], "seq": t[4]}) for t in tasks]
    recs = run_cells(_oracle_cell, tasks, keys, workers, out / CELLS_DIR)
    write_csv(out / "oracle.csv", OraclePoint.CSV_HEADER, ([r[k] for k in OraclePoint.CSV_HEADER] for r in recs))
    write_csv(out / "analytic.csv", ANALYTIC_HEADER, _analytic_rows(cfg))


def _statics_analytic(cfg, out, workers):
    write_csv(out / "analytic.csv", ANALYTIC_HEADER, _analytic_rows(cfg))
    spec = cfg.relation
    b = description_length(default_model(spec), spec.n)
    N = spec.n * spec.n
    p_c = critical_fraction(cfg.statics.alpha, b, N) if b > 1 else float("nan")
    write_csv(out / "critical.csv", CRITICAL_HEADER, [(spec.label(), spec.n, b, cfg.statics.alpha, N, p_c)])


def _repon_phase_space(cfg, out, workers):
    r = cfg.repon
    m = phase_space_map((r.a2_min, r.a2_max), (r.c_min, r.c_max), r.grid, r.eta_A, r.eta_x)
    _check_finite("phase space", m.C)
    write_csv(out / "phase_space.csv", m.CSV_HEADER, m.rows())


def _repon_probability(cfg, out, workers):
    r = cfg.repon
    pts = probability_sweep(InitDistribution(r.sigma_a, r.sigma_c), r.ratios, r.samples, cfg.seed, r.eta_A)
    rows = [p.row() for p in pts]
    _check_finite("probability sweep", rows)
    write_csv(out / "probability.csv", pts[0].CSV_HEADER if pts else (), rows)


SUMMARY_HEADER = ("phase", "steps_to_train", "steps_to_test", "final_accuracy", "degenerate_split", "diverged", "message")


def _train_once(cfg, out, workers):
    res = train(cfg.model, cfg.train, build_relation(cfg.relation))
    write_csv(out / "trajectory.csv", res.CSV_HEADER, res.rows())
    write_csv(
        out / "summary.csv",
        SUMMARY_HEADER,
        [(res.phase.value, _blank(res.steps_to_train), _blank(res.steps_to_test), res.final_accuracy,
          res.degenerate_split, res.diverged, res.message)],
    )
    if not res.diverged:
        save_checkpoint(res.params, out / "checkpoint.bin")


def _blank(v):
    return "" if v is None else v


def _fraction_sweep(cfg, out, workers):
    s = cfg.sweep
    curve = sweep_training_fraction(cfg.model, cfg.train, cfg.relation, s.fractions, s.repeats, workers, out / CELLS_DIR)
    header = curve.CSV_HEADER + ("b", "reference_fraction")
    write_csv(out / "fraction_curve.csv", header, (r + (curve.b, curve.reference_fraction) for r in curve.rows()))


def _lr_phase_diagram(cfg, out, workers):
    s = cfg.sweep
    g = phase_diagram_lr(cfg.model, cfg.relation, s.enc_lrs, s.dec_lrs, cfg.train, s.replicates, workers, out / CELLS_DIR)
    write_csv(out / "phase_grid.csv", g.CSV_HEADER, g.rows())


def _wd_phase_diagram(cfg, out, workers):
    s = cfg.sweep
    g = phase_diagram_wd(
        cfg.model, cfg.relation, s.wds, s.dec_lrs, cfg.train, s.wd_eta_enc, s.replicates, workers, out / CELLS_DIR
    )
    write_csv(out / "phase_grid.csv", g.CSV_HEADER, g.rows())


def _goldilocks(cfg, out, workers):
    s = cfg.sweep
    d = goldilocks_sweep(
        cfg.relation, s.depths, cfg.train, s.goldilocks_width, s.goldilocks_fraction, s.repeats, cfg.model,
        workers, out / CELLS_DIR,
    )
    write_csv(out / "goldilocks.csv", d.CSV_HEADER, d.rows())


_RUNNERS = {
    Experiment.STATICS_CURVE: _statics_curve,
    Experiment.STATICS_ANALYTIC: _statics_analytic,
    Experiment.REPON_PHASE_SPACE: _repon_phase_space,
    Experiment.REPON_PROBABILITY: _repon_probability,
    Experiment.TRAIN_ONCE: _train_once,
    Experiment.FRACTION_SWEEP: _fraction_sweep,
    Experiment.LR_PHASE_DIAGRAM: _lr_phase_diagram,
    Experiment.WD_PHASE_DIAGRAM: _wd_phase_diagram,
    Experiment.GOLDILOCKS: _goldilocks,
}

# primary data file of each experiment, used by figure emission
PRIMARY_OUTPUT = {
    Experiment.STATICS_CURVE: "oracle.csv",
    Experiment.STATICS_ANALYTIC: "analytic.csv",
    Experiment.REPON_PHASE_SPACE: "phase_space.csv",
    Experiment.REPON_PROBABILITY: "probability.csv",
    Experiment.TRAIN_ONCE: "trajectory.csv",
    Experiment.FRACTION_SWEEP: "fraction_curve.csv",
    Experiment.LR_PHASE_DIAGRAM: "phase_grid.csv",
    Experiment.WD_PHASE_DIAGRAM: "phase_grid.csv",
    Experiment.GOLDILOCKS: "goldilocks.csv",
}


def run(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> RunManifest:
    """Run ``cfg`` into ``out_dir`` (default ``cfg.out``) and write its manifest.

    Finished sweep cells are cached under ``<out>/cells`` so a rerun after an
    interruption only computes what is missing. Identical configs produce
    byte-identical outputs.
    """
    target = out_dir if out_dir is not None else cfg.out
    if target is None:
        raise ValueError("no output directory given")
    out = Path(target)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RunError(f"cannot create output directory {out}: {exc}") from exc
    text = serialize_config(cfg)
    (out / CONFIG_SNAPSHOT).write_text(text)
    try:
        _RUNNERS[cfg.experiment](cfg, out, max(1, int(workers)))
    except (ArithmeticError, FloatingPointError) as exc:
        raise RunError(f"{cfg.experiment.value}: {exc}") from exc
    except OSError as exc:
        raise RunError(f"{cfg.experiment.value}: I/O failure: {exc}") from exc
    return write_manifest(out, cfg.experiment.value, text, cfg.relation.label())


def relation_variants(cfg: ExperimentConfig, shorthands) -> list[ExperimentConfig]:
    if not shorthands:
        return [cfg]
    return [cfg.with_relation(parse_relation_shorthand(s, cfg.relation.n)) for s in shorthands]

