import numpy as np
import pytest

from components_loss import synth
from components_loss.config import LossWeights, TrainConfig
from components_loss.signal_io import mix_at_snr
from components_loss.trainer import (
    HalvingSchedule,
    TrainingError,
    batch_loss_and_grads,
    build_dataset,
    context_windows,
    estimate_mask,
    fit_normalization,
    forward,
    init_model,
    load_checkpoint,
    mlp_train,
    save_checkpoint,
    split_by_utterance,
)


@pytest.fixture(scope="module")
def dataset():
    triples = []
    for i in range(3):
        s = synth.speech_like(0.6, seed=40 + i)
        n = synth.noise("white", s.size, seed=50 + i)
        m = mix_at_snr(s, n, 5.0, seed=i)
        triples.append((m.y.samples, m.s.samples, m.d.samples))
    return build_dataset(triples, "2cl")


def test_shapes():
    model = init_model()
    assert [w.shape for w in model.weights] == [(660, 256), (256, 256), (256, 132)]
    out = forward(model, np.zeros((3, 660)))
    assert out.shape == (3, 132)
    assert np.all((out > 0) & (out < 1))


def test_context_windows_replicate_edges():
    frames = np.arange(4.0)[:, None]
    win = context_windows(frames, 5)
    assert win[0].tolist() == [0, 0, 0, 1, 2]
    assert win[3].tolist() == [1, 2, 3, 3, 3]


def test_normalization():
    x = np.array([[1.0, 5.0], [3.0, 5.0]])
    norm = fit_normalization(x)
    assert norm.mean.tolist() == [2.0, 5.0]
    assert norm.std.tolist() == [1.0, 1e-8]
    with pytest.raises(ValueError):
        fit_normalization(x[:1])


@pytest.mark.parametrize("loss", ["2cl", "3cl", "mse", "pw-pesq"])
def test_weight_gradient_finite_difference(dataset, loss):
    model = init_model(hidden=(8, 8), seed=2)
    batch = dataset.subset(np.arange(6))
    w = LossWeights(alpha=0.3, beta=0.3)
    _, grads = batch_loss_and_grads(model, batch, loss, w)
    rng = np.random.default_rng(0)
    params = model.parameters()
    for p, g in zip(params, grads):
        for _ in range(4):
            idx = tuple(rng.integers(0, n) for n in p.shape)
            old = p[idx]
            p[idx] = old + 1e-6
            up, _ = batch_loss_and_grads(model, batch, loss, w)
            p[idx] = old - 1e-6
            down, _ = batch_loss_and_grads(model, batch, loss, w)
            p[idx] = old
            fd = (up - down) / 2e-6
            assert abs(fd - g[idx]) <= 1e-4 * max(abs(fd), abs(g[idx]), 1e-8)


def test_halving_schedule_plateau():
    sched = HalvingSchedule(2e-4, patience=2)
    history = []
    for v in [5.0, 4.0, 4.0, 4.0, 3.0, 3.5, 3.2, 2.0]:
        sched.step(v)
        history.append(sched.lr)
    assert history == [2e-4, 2e-4, 2e-4, 1e-4, 1e-4, 1e-4, 5e-5, 5e-5]


def test_split_keeps_utterances_apart(dataset):
    train, val = split_by_utterance(dataset, 0.34, seed=1)
    assert not set(train.utterance) & set(val.utterance)
    assert len(train) + len(val) == len(dataset)


def test_training_deterministic_and_decreasing(dataset):
    train, val = split_by_utterance(dataset, 0.34, seed=0)
    cfg = TrainConfig(loss="2cl", epochs=5, hidden=(16, 16), learning_rate=1e-2, batch_size=32)
    model = init_model(hidden=(16, 16), seed=3)
    m1, h1 = mlp_train(model, train, val, cfg)
    m2, h2 = mlp_train(model, train, val, cfg)
    assert h1.rows() == h2.rows()
    assert all(np.array_equal(a, b) for a, b in zip(m1.parameters(), m2.parameters()))
    assert h1.train_loss[-1] < h1.train_loss[0]


def test_adam_and_rejects_stoi(dataset):
    train, val = split_by_utterance(dataset, 0.34)
    model = init_model(hidden=(8,), seed=0)
    cfg = TrainConfig(loss="2cl", epochs=2, hidden=(8,), optimizer="adam", learning_rate=1e-3)
    _, hist = mlp_train(model, train, val, cfg)
    assert len(hist.epoch) == 2
    with pytest.raises(ValueError):
        mlp_train(model, train, val, TrainConfig(loss="pw-stoi", epochs=1))


def test_nan_raises(dataset):
    train, val = split_by_utterance(dataset, 0.34)
    model = init_model(hidden=(8,), seed=0)
    model.weights[0][:] = np.nan
    with pytest.raises(TrainingError):
        mlp_train(model, train, val, TrainConfig(loss="2cl", epochs=1, hidden=(8,)))


def test_checkpoint_round_trip(tmp_path, dataset):
    train, val = split_by_utterance(dataset, 0.34)
    model, hist = mlp_train(init_model(hidden=(8,), seed=0), train, val,
                            TrainConfig(loss="2cl", epochs=1, hidden=(8,)))
    save_checkpoint(model, tmp_path / "c.json")
    loaded = load_checkpoint(tmp_path / "c.json")
    y = synth.speech_like(0.3, seed=1)
    assert np.array_equal(estimate_mask(model, y), estimate_mask(loaded, y))
    hist.write_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().startswith("epoch,train_loss,val_loss,lr")


def test_normalization_sampling_oracle():
    x = np.random.default_rng(0).standard_normal((10_000, 132))
    z = fit_normalization(x).apply(x)
    assert np.all(np.abs(z.mean(axis=0)) < 0.05)
    assert np.all(np.abs(z.std(axis=0) - 1) < 0.05)


def test_output_strictly_inside_unit_interval():
    model = init_model(seed=1)
    x = np.random.default_rng(1).normal(0, 5, (10_000, 660))
    out = forward(model, x)
    assert out.min() > 0 and out.max() < 1


def test_single_utterance_smoke_training():
    data = build_dataset(synth.corpus(1, seed=7, snrs=(5,)), "2cl")
    cfg = TrainConfig(loss="2cl", epochs=200, optimizer="adam", learning_rate=1e-3)
    _, hist = mlp_train(init_model(seed=0), data, data.subset(slice(0, 0)), cfg)
    assert hist.train_loss[-1] < 0.1 * hist.train_loss[0]
