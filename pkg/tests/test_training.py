import numpy as np
import pytest

import bearingrul.autodiff as ad
from bearingrul import features as ft, model as md, training as tr
from bearingrul.autodiff import Tensor
from bearingrul.errors import DivergedLoss, EmptyBatch, EmptyDataset, ShapeMismatch


def batch(preds, targets):
    return tr.PredictionBatch(np.asarray(preds, float), np.asarray(targets, float))


def tiny_dataset(n=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.linspace(1.0, 0.0, n)
    samples = []
    for k in range(n):
        samples.append(ft.LabeledSample(
            hor=ft.wpd_image(rng.normal(size=4096) + labels[k]),
            ver=ft.wpd_image(rng.normal(size=4096)),
            label=float(labels[k])))
    return samples


# --- loss formulas ---

def test_custom_loss_late_example():
    assert tr.custom_loss(batch([0.8], [0.5]), lam=1.0) == pytest.approx(0.39, abs=1e-12)


def test_custom_loss_early_example():
    assert tr.custom_loss(batch([0.2], [0.5]), lam=1.0) == pytest.approx(0.09, abs=1e-12)


def test_custom_loss_zero_at_exact():
    assert tr.custom_loss(batch([0.3, 0.7], [0.3, 0.7]), lam=2.0) == 0.0


def test_custom_loss_lambda_zero_equals_mse_exactly():
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = batch(rng.normal(0.5, 0.3, size=8), rng.random(8))
        assert tr.custom_loss(b, lam=0.0) == tr.mse_loss(b)


def test_custom_loss_dominates_mse():
    rng = np.random.default_rng(1)
    for _ in range(50):
        b = batch(rng.normal(0.5, 0.4, size=6), rng.random(6))
        assert tr.custom_loss(b, lam=1.0) >= tr.mse_loss(b)
        if np.all(b.errors <= 0):
            assert tr.custom_loss(b, lam=1.0) == tr.mse_loss(b)


def test_mse_loss_example():
    assert tr.mse_loss(batch([1.0, 0.0], [0.0, 1.0])) == 1.0


def test_empty_batch_rejected():
    with pytest.raises(EmptyBatch):
        batch([], [])


def test_targets_out_of_range_rejected():
    with pytest.raises(ValueError):
        batch([0.5], [1.5])


def test_loss_node_matches_metric_value():
    rng = np.random.default_rng(2)
    preds = rng.normal(0.5, 0.3, size=10)
    targets = rng.random(10)
    node = tr.loss_node(Tensor(preds), targets, tr.LossConfig(kind="custom", lam=1.3))
    assert float(node.data) == pytest.approx(
        tr.custom_loss(batch(preds, targets), 1.3), rel=1e-12)


def test_loss_node_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    preds = rng.normal(0.5, 0.3, size=8)
    targets = rng.random(8)
    # keep away from the hinge kink
    preds[np.abs(preds - targets) < 1e-3] += 0.01
    p = Tensor(preds, requires_grad=True)
    ad.backward(tr.loss_node(p, targets, tr.LossConfig(kind="custom", lam=1.0)))
    h = 1e-6
    for i in range(8):
        shifted = preds.copy()
        shifted[i] += h
        up = tr.custom_loss(batch(shifted, targets), 1.0)
        shifted[i] -= 2 * h
        down = tr.custom_loss(batch(shifted, targets), 1.0)
        num = (up - down) / (2 * h)
        assert abs(p.grad[i] - num) / max(abs(num), 1e-8) < 1e-6


def test_hinge_subgradient_zero_at_tie():
    p = Tensor(np.array([0.5]), requires_grad=True)
    ad.backward(tr.loss_node(p, np.array([0.5]), tr.LossConfig(kind="custom", lam=5.0)))
    assert p.grad[0] == 0.0


# --- scoring metric ---

def test_score_zero_error():
    assert tr.score(batch([0.5], [0.5])) == 0.0


def test_score_late_example():
    term = tr.score(batch([0.65], [0.5]), aggregation="sum")
    assert term == pytest.approx(0.030455, abs=1e-6)


def test_score_early_example():
    term = tr.score(batch([0.35], [0.5]), aggregation="sum")
    assert term == pytest.approx(0.010050, abs=1e-6)


def test_score_late_exceeds_early_for_equal_magnitude():
    rng = np.random.default_rng(4)
    for _ in range(30):
        e = rng.uniform(0.01, 0.5)
        late = tr.score_terms(np.array([e]))[0]
        early = tr.score_terms(np.array([-e]))[0]
        assert late > early > 0


def test_score_sum_additive_over_partitions():
    rng = np.random.default_rng(5)
    preds, targets = rng.normal(0.5, 0.3, 10), rng.random(10)
    whole = tr.score(batch(preds, targets), "sum")
    parts = (tr.score(batch(preds[:4], targets[:4]), "sum")
             + tr.score(batch(preds[4:], targets[4:]), "sum"))
    assert whole == pytest.approx(parts, rel=1e-12)


def test_score_mean_is_sum_over_n():
    rng = np.random.default_rng(6)
    b = batch(rng.normal(0.5, 0.2, 7), rng.random(7))
    assert tr.score(b, "mean") == pytest.approx(tr.score(b, "sum") / 7, rel=1e-12)


def test_score_unknown_aggregation():
    with pytest.raises(ValueError):
        tr.score(batch([0.5], [0.5]), "median")


# --- MAE / late fraction ---

def test_mae_example():
    assert tr.mae(batch([0.2, 0.4], [0.1, 0.5])) == pytest.approx(0.1, abs=1e-12)


def test_mae_permutation_invariant():
    b1 = batch([0.2, 0.4, 0.9], [0.1, 0.5, 0.8])
    b2 = batch([0.9, 0.2, 0.4], [0.8, 0.1, 0.5])
    assert tr.mae(b1) == tr.mae(b2)


def test_late_fraction_examples():
    assert tr.late_fraction(batch([0.1, 0.2], [0.5, 0.6])) == 0.0
    assert tr.late_fraction(batch([0.6, 0.4], [0.5, 0.5])) == 0.5


def test_late_early_tie_partition():
    b = batch([0.6, 0.4, 0.5], [0.5, 0.5, 0.5])
    late = tr.late_fraction(b)
    early = float(np.mean(b.errors < 0))
    ties = float(np.mean(b.errors == 0))
    assert late + early + ties == 1.0


def test_metrics_report_keys():
    report = tr.metrics_report(batch([0.5, 0.6], [0.5, 0.5]))
    assert set(report) == {"n", "mae", "score_sum", "score_mean", "late_fraction"}


# --- Adam ---

def test_adam_single_step_hand_value():
    cfg = tr.TrainConfig(learning_rate=1e-4, batch_size=1, epochs=1)
    theta = Tensor(np.array([1.0]), requires_grad=True)
    state = tr.AdamState()
    tr.adam_step({"w": theta}, {"w": np.array([1.0])}, state, cfg)
    expected = 1.0 - 1e-4 / (1.0 + 1e-8)
    assert theta.data[0] == pytest.approx(expected, abs=1e-18)
    assert state.t == 1


def test_adam_zero_gradient_no_move():
    cfg = tr.TrainConfig(learning_rate=1e-2, batch_size=1, epochs=1)
    theta = Tensor(np.array([2.0, -1.0]), requires_grad=True)
    tr.adam_step({"w": theta}, {"w": np.zeros(2)}, tr.AdamState(), cfg)
    np.testing.assert_allclose(theta.data, [2.0, -1.0], atol=0)


def test_adam_shape_mismatch():
    cfg = tr.TrainConfig(learning_rate=1e-2, batch_size=1, epochs=1)
    theta = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ShapeMismatch):
        tr.adam_step({"w": theta}, {"w": np.zeros(4)}, tr.AdamState(), cfg)


def test_adam_descends_quadratic():
    cfg = tr.TrainConfig(learning_rate=0.05, batch_size=1, epochs=1)
    theta = Tensor(np.array([3.0]), requires_grad=True)
    state = tr.AdamState()
    for _ in range(200):
        tr.adam_step({"w": theta}, {"w": 2.0 * theta.data}, state, cfg)
    assert abs(theta.data[0]) < 0.5


# --- training loop ---

def test_train_empty_dataset():
    with pytest.raises(EmptyDataset):
        tr.train([], md.desk_config(),
                 tr.TrainConfig(batch_size=1, epochs=1), tr.LossConfig())


def test_train_batch_larger_than_dataset():
    with pytest.raises(EmptyDataset):
        tr.train(tiny_dataset(4), md.desk_config(),
                 tr.TrainConfig(batch_size=16, epochs=1), tr.LossConfig())


def test_train_zero_epochs_returns_init():
    dataset = tiny_dataset(6)
    cfg = md.desk_config()
    tcfg = tr.TrainConfig(batch_size=4, epochs=0, seed=9)
    params, history = tr.train(dataset, cfg, tcfg, tr.LossConfig())
    reference = md.init_params(cfg, seed=9)
    assert history == []
    for name in reference.tensors:
        assert np.array_equal(params[name].data, reference[name].data)


def test_train_seeded_runs_identical():
    dataset = tiny_dataset(8)
    cfg = md.desk_config()
    tcfg = tr.TrainConfig(learning_rate=1e-3, batch_size=4, epochs=2, seed=5)
    p1, h1 = tr.train(dataset, cfg, tcfg, tr.LossConfig())
    p2, h2 = tr.train(dataset, cfg, tcfg, tr.LossConfig())
    assert [e.train_loss for e in h1] == [e.train_loss for e in h2]
    for name in p1.tensors:
        assert np.array_equal(p1[name].data, p2[name].data)


def test_train_loss_decreases():
    dataset = tiny_dataset(12)
    tcfg = tr.TrainConfig(learning_rate=1e-3, batch_size=4, epochs=6, seed=2)
    _, history = tr.train(dataset, md.desk_config(), tcfg, tr.LossConfig())
    assert history[-1].train_loss < history[0].train_loss


def test_train_records_validation_mae():
    dataset = tiny_dataset(8)
    tcfg = tr.TrainConfig(learning_rate=1e-3, batch_size=4, epochs=2, seed=3)
    _, history = tr.train(dataset, md.desk_config(), tcfg, tr.LossConfig(),
                          val_dataset=tiny_dataset(4, seed=9))
    assert all(e.val_mae is not None and np.isfinite(e.val_mae) for e in history)


def test_train_diverged_loss_aborts():
    dataset = tiny_dataset(6)
    cfg = md.desk_config()
    poisoned = md.init_params(cfg, seed=0)
    poisoned["head.out.b"].data[:] = 1e200
    tcfg = tr.TrainConfig(learning_rate=1e-3, batch_size=4, epochs=1, seed=0)
    with np.errstate(over="ignore"), pytest.raises(DivergedLoss):
        tr.train(dataset, cfg, tcfg, tr.LossConfig(), init=poisoned)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        tr.LossConfig(kind="huber")
    with pytest.raises(ValueError):
        tr.LossConfig(lam=-0.5)


def test_train_config_validation():
    with pytest.raises(ValueError):
        tr.TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        tr.TrainConfig(epochs=-1)
