"""Full-batch training with separate encoder/decoder learning rates."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from reponlab.autoencoder.model import ModelConfig, ModelParams, init_model, loss_and_gradients, predict_proba
from reponlab.relations import RelationMatrix, sample_training_set

THRESHOLD = 0.9
HORIZON = 100_000
GROK_GAP = 1_000


class PhaseLabel(str, enum.Enum):
    GENERALIZATION = "generalization"
    GROKKING = "grokking"
    MEMORIZATION = "memorization"
    CONFUSION = "confusion"

    @property
    def generalizes(self) -> bool:
        return self in (PhaseLabel.GENERALIZATION, PhaseLabel.GROKKING)


@dataclass(frozen=True)
class Optimizer:
    """``kind`` is ``"gd"`` (plain full-batch gradient descent) or ``"adam"``."""

    kind: str = "gd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("gd", "adam"):
            raise ValueError(f"optimizer must be 'gd' or 'adam', got {self.kind!r}")


@dataclass(frozen=True)
class TrainConfig:
    eta_enc: float = 1e-3
    eta_dec: float = 1e-3
    weight_decay_dec: float = 0.0
    max_steps: int = HORIZON
    train_fraction: float = 0.75
    seed: int = 0
    optimizer: Optimizer = Optimizer()
    init_scale: float = 1.0
    eval_interval: int = 100
    early_stop: bool = True
    dtype: str = "float64"

    def __post_init__(self):
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be 'float64' or 'float32', got {self.dtype!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in [0, 1]")
        if self.eta_enc < 0 or self.eta_dec < 0 or self.weight_decay_dec < 0:
            raise ValueError("learning rates and weight decay must be >= 0")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")
        if not self.init_scale >= 0:
            raise ValueError("init_scale must be >= 0")


@dataclass
class TrainResult:
    steps: np.ndarray
    train_acc: np.ndarray
    test_acc: np.ndarray
    train_loss: np.ndarray
    phase: PhaseLabel
    final_accuracy: float
    degenerate_split: bool = False
    diverged: bool = False
    message: str = ""
    params: ModelParams | None = field(default=None, repr=False)

    CSV_HEADER = ("step", "train_acc", "test_acc", "train_loss")

    def rows(self):
        for r in zip(self.steps, self.train_acc, self.test_acc, self.train_loss):
            yield (int(r[0]), float(r[1]), float(r[2]), float(r[3]))

    @property
    def steps_to_train(self) -> int | None:
        return first_step_above(self.steps, self.train_acc)

    @property
    def steps_to_test(self) -> int | None:
        return first_step_above(self.steps, self.test_acc)


def first_step_above(steps, acc, threshold: float = THRESHOLD, horizon: int = HORIZON) -> int | None:
    hits = np.flatnonzero((np.asarray(acc) > threshold) & (np.asarray(steps) <= horizon))
    return int(steps[hits[0]]) if hits.size else None


def classify_phase(result: TrainResult, threshold=THRESHOLD, horizon=HORIZON, gap=GROK_GAP) -> PhaseLabel:
    """Phase from the first evaluation steps at which accuracies exceed ``threshold``."""
    if result.diverged:
        return PhaseLabel.CONFUSION
    t_train = first_step_above(result.steps, result.train_acc, threshold, horizon)
    t_test = first_step_above(result.steps, result.test_acc, threshold, horizon)
    if t_train is None:
        return PhaseLabel.CONFUSION
    if t_test is None:
        return PhaseLabel.MEMORIZATION
    return PhaseLabel.GENERALIZATION if t_test - t_train < gap else PhaseLabel.GROKKING


class _GD:
    def __init__(self, tensors, lrs):
        self.lrs = lrs

    def step(self, tensors, grads):
        for t, g, lr in zip(tensors, grads, self.lrs):
            if lr:
                t -= lr * g


class _Adam:
    def __init__(self, tensors, lrs, opt: Optimizer):
        self.lrs = lrs
        self.opt = opt
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]
        self.t = 0

    def step(self, tensors, grads):
        self.t += 1
        b1, b2 = self.opt.beta1, self.opt.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for t, g, m, v, lr in zip(tensors, grads, self.m, self.v, self.lrs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if lr:
                t -= lr * (m / c1) / (np.sqrt(v / c2) + self.opt.eps)


def split_masks(matrix: RelationMatrix, fraction: float, seed: int):
    pairs = sample_training_set(matrix, fraction, seed)
    mask = np.zeros((matrix.n, matrix.n), dtype=bool)
    mask[pairs[:, 0], pairs[:, 1]] = True
    return pairs, mask.reshape(-1)


def train(model_config: ModelConfig, train_config: TrainConfig, matrix: RelationMatrix, keep_params: bool = True) -> TrainResult:
    """Train on a random split of ``matrix``; evaluate every ``eval_interval`` steps.

    Embeddings move with ``eta_enc`` and every decoder tensor with
    ``eta_dec``. Training stops at ``max_steps`` or, with ``early_stop``, at
    the first evaluation where both accuracies exceed 0.9. An empty test set
    (fraction 1) scores test accuracy 1.0 and sets ``degenerate_split``.
    """
    if model_config.n != matrix.n:
        raise ValueError(f"model is for n={model_config.n} but relation has n={matrix.n}")
    tc = train_config
    pairs, train_mask = split_masks(matrix, tc.train_fraction, tc.seed)
    labels_all = matrix.entries.reshape(-1).astype(float)
    y_train = labels_all[train_mask]
    n = matrix.n
    I_all, J_all = np.divmod(np.arange(n * n), n)
    test_mask = ~train_mask
    degenerate = not test_mask.any() or not train_mask.any()

    params = init_model(model_config, tc.init_scale, [tc.seed, 1]).astype(tc.dtype)
    y_train = y_train.astype(tc.dtype)
    tensors = params.tensors()
    lrs = [tc.eta_enc] + [tc.eta_dec] * (len(tensors) - 1)
    opt = _GD(tensors, lrs) if tc.optimizer.kind == "gd" else _Adam(tensors, lrs, tc.optimizer)

    steps, tr_acc, te_acc, losses = [], [], [], []
    diverged = False
    message = ""
    # divergence is detected from the loss below, so overflow stays quiet
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(tc.max_steps + 1):
            loss, grads = loss_and_gradients(params, pairs, y_train, tc.weight_decay_dec)
            if not math.isfinite(loss):
                diverged = True
                message = f"non-finite training loss at step {step}"
                break
            if step % tc.eval_interval == 0 or step == tc.max_steps:
                correct = (predict_proba(params, I_all, J_all) > 0.5) == (labels_all == 1)
                a_tr = float(correct[train_mask].mean()) if train_mask.any() else 1.0
                a_te = float(correct[test_mask].mean()) if test_mask.any() else 1.0
                steps.append(step)
                tr_acc.append(a_tr)
                te_acc.append(a_te)
                losses.append(loss)
                if tc.early_stop and a_tr > THRESHOLD and a_te > THRESHOLD:
                    break
            if step == tc.max_steps:
                break
            opt.step(tensors, grads.tensors())

    with np.errstate(over="ignore", invalid="ignore"):
        final = (predict_proba(params, I_all, J_all) > 0.5) == (labels_all == 1)
    result = TrainResult(
        np.array(steps, dtype=np.int64),
        np.array(tr_acc),
        np.array(te_acc),
        np.array(losses),
        PhaseLabel.CONFUSION,
        float(final.mean()) if not diverged else float("nan"),
        degenerate_split=degenerate,
        diverged=diverged,
        message=message,
        params=params if keep_params else None,
    )
    result.phase = classify_phase(result)
    return result
