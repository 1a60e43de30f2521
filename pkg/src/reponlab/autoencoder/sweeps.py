"""Grids of training runs: data-fraction curves, phase diagrams, depth sweeps."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, replace

import numpy as np

from reponlab.autoencoder.model import ModelConfig
from reponlab.autoencoder.train import PhaseLabel, TrainConfig, train
from reponlab.cells import run_cells, stable_key
from reponlab.relations import RelationSpec, build_relation, default_model, description_length


def spec_payload(spec: RelationSpec) -> dict:
    out = {"kind": spec.kind.value, "n": spec.n, "k": spec.k}
    if spec.part is not None:
        out["part"] = sorted(spec.part)
    if spec.matrix is not None:
        out["matrix"] = hashlib.sha256(np.ascontiguousarray(spec.matrix).tobytes()).hexdigest()
    return out


def _payload(model: ModelConfig, tc: TrainConfig, spec: RelationSpec) -> dict:
    return {"model": asdict(model), "train": asdict(tc), "spec": spec_payload(spec)}


def _train_cell(task) -> dict:
    model, tc, spec = task
    r = train(model, tc, build_relation(spec), keep_params=False)
    return {
        "phase": r.phase.value,
        "steps_to_train": r.steps_to_train,
        "steps_to_test": r.steps_to_test,
        "final_accuracy": r.final_accuracy,
        "train_acc": float(r.train_acc[-1]) if len(r.train_acc) else float("nan"),
        "test_acc": float(r.test_acc[-1]) if len(r.test_acc) else float("nan"),
        "last_step": int(r.steps[-1]) if len(r.steps) else 0,
        "diverged": r.diverged,
    }


def run_training_grid(tasks, workers: int = 1, cache_dir=None) -> list[dict]:
    """Train every ``(model_config, train_config, spec)`` triple; see :func:`run_cells`."""
    keys = [stable_key(_payload(*t)) for t in tasks]
    return run_cells(_train_cell, tasks, keys, workers, cache_dir)


# fraction sweep ---------------------------------------------------------


@dataclass
class FractionCurve:
    fractions: np.ndarray
    accuracies: np.ndarray  # (fractions, repeats), whole-dataset accuracy
    b: float
    n: int

    CSV_HEADER = ("fraction", "mean_accuracy", "std_accuracy", "repeats")

    @property
    def reference_fraction(self) -> float:
        return self.b / self.n**2

    @property
    def mean(self) -> np.ndarray:
        return self.accuracies.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        return self.accuracies.std(axis=1)

    def rows(self):
        for f, m, s in zip(self.fractions, self.mean, self.std):
            yield (float(f), float(m), float(s), self.accuracies.shape[1])

    def first_fraction_reaching(self, level: float = 0.9) -> float | None:
        hit = np.flatnonzero(self.mean >= level)
        return float(self.fractions[hit[0]]) if hit.size else None


def sweep_training_fraction(
    model_config: ModelConfig,
    train_config: TrainConfig,
    spec: RelationSpec,
    fractions,
    repeats: int = 3,
    workers: int = 1,
    cache_dir=None,
) -> FractionCurve:
    """Whole-dataset accuracy after training at each fraction; repeat ``r`` uses seed ``seed + r``."""
    fractions = np.asarray(fractions, dtype=float)
    tasks = [
        (model_config, replace(train_config, train_fraction=float(f), seed=train_config.seed + r), spec)
        for f in fractions
        for r in range(repeats)
    ]
    recs = run_training_grid(tasks, workers, cache_dir)
    acc = np.array([rec["final_accuracy"] for rec in recs]).reshape(len(fractions), repeats)
    b = description_length(default_model(spec), spec.n)
    return FractionCurve(fractions, acc, b, spec.n)


# phase diagrams ---------------------------------------------------------


@dataclass
class PhaseGrid:
    """One row per (x, y, replicate) training run.

    ``x`` is the encoder learning rate (lr diagrams) or the decoder weight
    decay (wd diagrams); ``y`` is always the decoder learning rate.
    """

    x_name: str
    x_values: np.ndarray
    dec_lrs: np.ndarray
    replicates: int
    records: list[dict]

    CSV_HEADER = ("eta_enc", "eta_dec", "wd", "phase", "steps_to_train", "steps_to_test")

    def phases(self) -> np.ndarray:
        """Array ``(len(x_values), len(dec_lrs), replicates)`` of :class:`PhaseLabel`."""
        out = np.empty((len(self.x_values), len(self.dec_lrs), self.replicates), dtype=object)
        for rec in self.records:
            out[rec["ix"], rec["iy"], rec["replicate"]] = PhaseLabel(rec["phase"])
        return out

    def generalizing_fraction(self) -> np.ndarray:
        ph = self.phases()
        return np.vectorize(lambda p: p.generalizes)(ph).mean(axis=2)

    def cell_labels(self) -> np.ndarray:
        """Most common label per cell; ties go to the label seen first in replicate order."""
        ph = self.phases()
        out = np.empty(ph.shape[:2], dtype=object)
        for idx in np.ndindex(*ph.shape[:2]):
            labels = list(ph[idx])
            out[idx] = max(labels, key=labels.count)
        return out

    def rows(self):
        for rec in self.records:
            yield (
                rec["eta_enc"], rec["eta_dec"], rec["wd"], rec["phase"],
                "" if rec["steps_to_train"] is None else rec["steps_to_train"],
                "" if rec["steps_to_test"] is None else rec["steps_to_test"],
            )


def _phase_grid(model_config, spec, base, cells, x_name, x_values, dec_lrs, replicates, workers, cache_dir):
    # every cell of one replicate shares the data split and the initialization,
    # so neighbouring cells differ only in the swept hyperparameters
    tasks, meta = [], []
    for ix, iy, (enc, dec, wd) in cells:
        for rep in range(replicates):
            tc = replace(base, eta_enc=enc, eta_dec=dec, weight_decay_dec=wd, seed=base.seed + rep)
            tasks.append((model_config, tc, spec))
            meta.append({"ix": ix, "iy": iy, "replicate": rep, "eta_enc": enc, "eta_dec": dec, "wd": wd, "seed": tc.seed})
    recs = run_training_grid(tasks, workers, cache_dir)
    records = [{**m, **r} for m, r in zip(meta, recs)]
    return PhaseGrid(x_name, np.asarray(x_values, float), np.asarray(dec_lrs, float), replicates, records)


def phase_diagram_lr(
    model_config: ModelConfig,
    spec: RelationSpec,
    enc_lrs,
    dec_lrs,
    base: TrainConfig,
    replicates: int = 1,
    workers: int = 1,
    cache_dir=None,
) -> PhaseGrid:
    cells = [
        (ix, iy, (float(e), float(d), base.weight_decay_dec))
        for ix, e in enumerate(enc_lrs)
        for iy, d in enumerate(dec_lrs)
    ]
    return _phase_grid(model_config, spec, base, cells, "eta_enc", enc_lrs, dec_lrs, replicates, workers, cache_dir)


def phase_diagram_wd(
    model_config: ModelConfig,
    spec: RelationSpec,
    wds,
    dec_lrs,
    base: TrainConfig,
    eta_enc: float = 1e-5,
    replicates: int = 1,
    workers: int = 1,
    cache_dir=None,
) -> PhaseGrid:
    cells = [
        (ix, iy, (float(eta_enc), float(d), float(w)))
        for ix, w in enumerate(wds)
        for iy, d in enumerate(dec_lrs)
    ]
    return _phase_grid(model_config, spec, base, cells, "wd", wds, dec_lrs, replicates, workers, cache_dir)


def ordering_violations(grid: PhaseGrid, labels: np.ndarray | None = None) -> list[tuple[int, int, int]]:
    """Cells breaking the monotone memorization boundary of an lr diagram.

    Within each encoder column, a generalizing cell (Generalization or
    Grokking) may sit at most one decoder-lr step above a Memorization cell.
    Returns ``(column, generalizing row, memorizing row)`` triples; the
    decoder grid must be increasing.
    """
    labels = grid.cell_labels() if labels is None else labels
    if np.any(np.diff(grid.dec_lrs) <= 0):
        raise ValueError("decoder learning rates must be increasing")
    bad = []
    for ix in range(labels.shape[0]):
        mem = [iy for iy in range(labels.shape[1]) if labels[ix, iy] is PhaseLabel.MEMORIZATION]
        gen = [iy for iy in range(labels.shape[1]) if labels[ix, iy].generalizes]
        bad += [(ix, g, m) for g in gen for m in mem if g > m + 1]
    return bad


# Goldilocks depth sweep ---------------------------------------------------


@dataclass
class DepthSweep:
    depths: np.ndarray
    test_accuracies: np.ndarray  # (depths, repeats)

    CSV_HEADER = ("depth", "mean_test_accuracy", "std_test_accuracy", "repeats")

    @property
    def mean(self) -> np.ndarray:
        return self.test_accuracies.mean(axis=1)

    def rows(self):
        for d, m, s in zip(self.depths, self.mean, self.test_accuracies.std(axis=1)):
            yield (int(d), float(m), float(s), self.test_accuracies.shape[1])

    def interior_peak(self) -> bool:
        """True when some interior depth beats both endpoints on mean test accuracy."""
        m = self.mean
        return bool(len(m) > 2 and np.max(m[1:-1]) > max(m[0], m[-1]))


def goldilocks_sweep(
    spec: RelationSpec,
    depths,
    base: TrainConfig,
    width: int = 10,
    train_fraction: float = 0.3,
    repeats: int = 3,
    model: ModelConfig | None = None,
    workers: int = 1,
    cache_dir=None,
) -> DepthSweep:
    """Final test accuracy versus decoder depth; repeat ``r`` uses seed ``seed + r``."""
    proto = model or ModelConfig(spec.n)
    tasks = [
        (
            replace(proto, n=spec.n, depth=int(d), width=width),
            replace(base, train_fraction=train_fraction, seed=base.seed + r),
            spec,
        )
        for d in depths
        for r in range(repeats)
    ]
    recs = run_training_grid(tasks, workers, cache_dir)
    acc = np.array([rec["test_acc"] for rec in recs]).reshape(len(depths), repeats)
    return DepthSweep(np.asarray(depths), acc)
