import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import max_relative_error
from reponlab.autoencoder import (
    ModelConfig,
    ModelParams,
    Mode,
    Optimizer,
    PhaseLabel,
    TrainConfig,
    TrainResult,
    classify_phase,
    forward,
    init_model,
    load_checkpoint,
    loss_and_gradients,
    predict_proba,
    save_checkpoint,
    train,
)
from reponlab.autoencoder.model import bce, combine
from reponlab.autoencoder.train import first_step_above, split_masks
from reponlab.relations import RelationSpec, build_relation


def all_pairs(n):
    I, J = np.divmod(np.arange(n * n), n)
    return np.stack([I, J], axis=1)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(0)
    with pytest.raises(ValueError):
        ModelConfig(5, depth=-1)
    with pytest.raises(ValueError):
        ModelConfig(5, mode="product")
    assert ModelConfig(5, embed_dim=3).input_dim == 6
    assert ModelConfig(5, embed_dim=3, mode="difference").input_dim == 3
    assert ModelConfig(5, depth=0).layer_shapes() == [(4, 1)]


def test_init_examples():
    cfg = ModelConfig(30)
    zero = init_model(cfg, 0.0, 1)
    assert all(np.all(t == 0) for t in zero.tensors())
    a, b = init_model(cfg, 1.0, 7), init_model(cfg, 1.0, 7)
    assert all(np.array_equal(x, y) for x, y in zip(a.tensors(), b.tensors()))
    assert a.embeddings.shape == (30, 2)
    assert abs(a.embeddings.std() - 1.0) < 0.2


def test_zero_params_give_half_and_ln2():
    cfg = ModelConfig(6)
    params = init_model(cfg, 0.0)
    pairs = all_pairs(6)
    assert np.all(predict_proba(params, pairs[:, 0], pairs[:, 1]) == 0.5)
    labels = np.array([0, 1] * 18)
    loss, _ = loss_and_gradients(params, pairs, labels)
    assert loss == pytest.approx(math.log(2), abs=1e-15)


def test_combine_modes():
    ei, ej = np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]])
    assert combine(ei, ej, Mode.CONCAT).tolist() == [[1, 2, 3, -1]]
    assert combine(ei, ej, Mode.DIFFERENCE).tolist() == [[-2, 3]]
    assert combine(ei, ej, Mode.SQUARED_DIFFERENCE).tolist() == [[4, 9]]
    assert np.all(combine(ei, ei, Mode.SQUARED_DIFFERENCE) == 0)


def test_forward_matches_hand_computation(rng):
    p = init_model(ModelConfig(4, depth=1, width=3, mode="difference"), 1.0, 3)
    x = p.embeddings[1] - p.embeddings[2]
    h = np.tanh(x @ p.weights[0] + p.biases[0])
    z = h @ p.weights[1] + p.biases[1]
    assert forward(p, 1, 2) == pytest.approx(1 / (1 + math.exp(-z[0])), rel=1e-14)


def test_difference_mode_input_is_antisymmetric():
    # with a linear decoder and zero bias, logit(i,j) = -logit(j,i)
    p = init_model(ModelConfig(5, depth=0, mode="difference"), 1.0, 0)
    p.biases[0][:] = 0
    a, b = forward(p, 1, 3), forward(p, 3, 1)
    assert a + b == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 4))
def test_squared_difference_is_symmetric(seed, depth):
    p = init_model(ModelConfig(8, depth=depth, width=7, mode="squared_difference"), 1.0, seed)
    pairs = all_pairs(8)
    P = predict_proba(p, pairs[:, 0], pairs[:, 1]).reshape(8, 8)
    assert np.array_equal(P, P.T)


def test_forward_mode_override():
    p = init_model(ModelConfig(5, depth=0, mode="difference"), 1.0, 0)
    assert forward(p, 0, 0, mode="squared_difference") == forward(p, 1, 1, mode="squared_difference")


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(np.zeros((3, 2)), [np.zeros((3, 1))], [np.zeros(1)], "concat")
    with pytest.raises(ValueError):
        ModelParams(np.zeros((3, 2)), [np.zeros((4, 2))], [np.zeros(2)], "concat")


def test_perfect_predictions_loss_is_decay_term():
    p = init_model(ModelConfig(3, depth=0), 1.0, 0)
    p.weights[0][:] = 0
    p.biases[0][:] = 60.0
    loss, _ = loss_and_gradients(p, [[0, 1], [1, 2]], [1, 1])
    # the clamp at 1 - 1e-12 puts a floor of about 1e-12 under the loss
    assert loss == pytest.approx(1e-12, rel=1e-3)
    p.weights[0][:] = 1.0
    p.biases[0][:] = 1e3
    loss, _ = loss_and_gradients(p, [[0, 1]], [1], weight_decay_dec=0.2)
    assert loss == pytest.approx(0.1 * 4 + 1e-12, rel=1e-12)


def test_bce_clamps():
    assert bce(np.array([0.0]), np.array([1.0])) == pytest.approx(-math.log(1e-12))
    assert np.isfinite(bce(np.array([1.0]), np.array([0.0])))


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("depth", [0, 1, 3])
def test_gradients_match_finite_differences(mode, depth):
    p = init_model(ModelConfig(7, embed_dim=3, depth=depth, width=6, mode=mode), 0.7, depth)
    rng = np.random.default_rng(1)
    pairs = rng.integers(0, 7, size=(40, 2))
    labels = rng.integers(0, 2, size=40)
    assert max_relative_error(p, pairs, labels, wd=0.05, seed=depth) < 1e-4


def test_weight_decay_leaves_embedding_gradient():
    p = init_model(ModelConfig(6, depth=2, width=5), 1.0, 2)
    pairs = all_pairs(6)
    labels = (pairs[:, 0] % 2 == pairs[:, 1] % 2).astype(int)
    _, g0 = loss_and_gradients(p, pairs, labels, 0.0)
    _, g1 = loss_and_gradients(p, pairs, labels, 0.3)
    assert np.array_equal(g0.embeddings, g1.embeddings)
    assert all(np.array_equal(a, b) for a, b in zip(g0.biases, g1.biases))
    assert np.allclose(g1.weights[1] - g0.weights[1], 0.3 * p.weights[1])


def test_embedding_gradient_accumulates_repeats():
    p = init_model(ModelConfig(4, depth=1, width=3), 1.0, 5)
    _, once = loss_and_gradients(p, [[0, 1]], [1])
    _, twice = loss_and_gradients(p, [[0, 1], [0, 1]], [1, 1])
    assert np.allclose(once.embeddings, twice.embeddings)


def test_checkpoint_round_trip(tmp_path):
    p = init_model(ModelConfig(9, depth=2, width=4, mode="squared_difference"), 1.0, 3)
    save_checkpoint(p, tmp_path / "m.bin")
    q = load_checkpoint(tmp_path / "m.bin")
    assert q.mode is Mode.SQUARED_DIFFERENCE
    assert all(np.array_equal(a, b) for a, b in zip(p.tensors(), q.tensors()))
    head = (tmp_path / "m.bin").read_bytes().split(b"\n", 1)[0]
    assert b'"format": "reponlab-checkpoint"' in head


def test_checkpoint_rejects_bad_files(tmp_path):
    p = init_model(ModelConfig(4, depth=0), 1.0, 0)
    save_checkpoint(p, tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "short.bin")
    (tmp_path / "other.bin").write_bytes(b'{"format": "x"}\n')
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "other.bin")


# training ---------------------------------------------------------------------


def _result(train_at, test_at, last=100_000, interval=100):
    steps = np.arange(interval, last + 1, interval)
    tr = np.where(steps >= train_at, 1.0, 0.5) if train_at else np.full(steps.size, 0.5)
    te = np.where(steps >= test_at, 1.0, 0.5) if test_at else np.full(steps.size, 0.5)
    return TrainResult(steps, tr, te, np.zeros(steps.size), PhaseLabel.CONFUSION, 0.0)


def test_phase_examples():
    assert classify_phase(_result(1000, 5000)) is PhaseLabel.GROKKING
    assert classify_phase(_result(2000, 2500)) is PhaseLabel.GENERALIZATION
    assert classify_phase(_result(2000, None)) is PhaseLabel.MEMORIZATION
    assert classify_phase(_result(None, None)) is PhaseLabel.CONFUSION


def test_phase_edges():
    assert classify_phase(_result(1000, 2000)) is PhaseLabel.GROKKING  # gap exactly 1e3
    assert classify_phase(_result(1000, 1900)) is PhaseLabel.GENERALIZATION
    assert classify_phase(_result(None, 500)) is PhaseLabel.CONFUSION
    late = _result(1000, 150_000, last=200_000)
    assert classify_phase(late) is PhaseLabel.MEMORIZATION
    diverged = _result(1000, 1100)
    diverged.diverged = True
    assert classify_phase(diverged) is PhaseLabel.CONFUSION
    # exactly 0.9 does not count
    assert first_step_above([100, 200], [0.9, 0.95]) == 200


def test_frozen_model_keeps_accuracy():
    m = build_relation(RelationSpec.modulo(3, 10))
    res = train(ModelConfig(10, depth=1, width=8), TrainConfig(0.0, 0.0, max_steps=300, early_stop=False), m)
    assert np.all(res.train_acc == res.train_acc[0]) and np.all(res.test_acc == res.test_acc[0])
    assert list(res.steps) == [0, 100, 200, 300]


def test_full_fraction_is_degenerate():
    m = build_relation(RelationSpec.modulo(3, 8))
    res = train(ModelConfig(8, depth=0), TrainConfig(train_fraction=1.0, max_steps=200), m)
    assert res.degenerate_split and np.all(res.test_acc == 1.0)


def test_split_masks_partition():
    m = build_relation(RelationSpec.greater_than(10))
    pairs, mask = split_masks(m, 0.3, 4)
    assert len(pairs) == 30 and mask.sum() == 30
    assert np.all(mask[pairs[:, 0] * 10 + pairs[:, 1]])


def test_training_is_deterministic():
    m = build_relation(RelationSpec.modulo(3, 12))
    cfg = TrainConfig(1e-2, 1e-2, max_steps=400, optimizer=Optimizer("adam"), eval_interval=50)
    a = train(ModelConfig(12, depth=1, width=8), cfg, m)
    b = train(ModelConfig(12, depth=1, width=8), cfg, m)
    assert np.array_equal(a.train_loss, b.train_loss) and np.array_equal(a.test_acc, b.test_acc)
    assert all(np.array_equal(x, y) for x, y in zip(a.params.tensors(), b.params.tensors()))


def test_gd_loss_decreases_with_small_rates():
    m = build_relation(RelationSpec.modulo(3, 30))
    cfg = TrainConfig(1e-3, 1e-3, max_steps=100, eval_interval=1, early_stop=False)
    res = train(ModelConfig(30), cfg, m)
    assert np.all(np.diff(res.train_loss) <= 1e-9)


def test_trajectory_invariants():
    m = build_relation(RelationSpec.bipartite(range(5), 10))
    res = train(ModelConfig(10, depth=1, width=6), TrainConfig(1e-2, 1e-2, max_steps=500, eval_interval=70), m)
    assert np.all(np.diff(res.steps) > 0) and res.steps[-1] == 500
    assert np.all((res.train_acc >= 0) & (res.train_acc <= 1))
    assert len(list(res.rows())) == len(res.steps)


def test_early_stop_when_both_accuracies_high():
    m = build_relation(RelationSpec.modulo(2, 10))
    cfg = TrainConfig(1e-2, 1e-2, max_steps=20_000, optimizer=Optimizer("adam"), init_scale=0.3)
    res = train(ModelConfig(10, depth=0, mode="squared_difference"), cfg, m)
    assert res.phase.generalizes and res.steps[-1] < 20_000
    assert res.train_acc[-1] > 0.9 and res.test_acc[-1] > 0.9


def test_divergence_reported_as_confusion():
    m = build_relation(RelationSpec.modulo(3, 10))
    cfg = TrainConfig(1e300, 1e300, max_steps=50, init_scale=1.0, early_stop=False)
    with np.errstate(all="ignore"):
        res = train(ModelConfig(10, depth=1, width=4), cfg, m)
    assert res.diverged and res.phase is PhaseLabel.CONFUSION and "non-finite" in res.message


def test_float32_training_runs():
    m = build_relation(RelationSpec.modulo(3, 10))
    cfg = TrainConfig(1e-3, 1e-3, max_steps=200, optimizer=Optimizer("adam"), dtype="float32")
    res = train(ModelConfig(10, depth=1, width=8), cfg, m)
    assert res.params.embeddings.dtype == np.float32


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(max_steps=0),
        dict(train_fraction=1.5),
        dict(eta_enc=-1.0),
        dict(eval_interval=0),
        dict(dtype="float16"),
        dict(init_scale=-1.0),
    ],
)
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)
    with pytest.raises(ValueError):
        Optimizer("sgd")
