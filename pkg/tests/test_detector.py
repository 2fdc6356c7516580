import numpy as np
import pytest

from purelab import data, detector, nn
from purelab.rng import Rng

from oracles import finite_difference_gradient, relative_error


@pytest.fixture(scope="module")
def toy_splits():
    spec = data.SyntheticSpec(d=60, n_benign=120, n_malicious=120, signal_features=12,
                              noise_rate=0.02, background_rate=0.05, seed=17)
    ds = data.generate_synthetic(spec)
    return data.split(ds, data.SplitSpec(seed=17))


@pytest.fixture(scope="module")
def toy_model(toy_splits):
    train, val, _ = toy_splits
    cfg = detector.DetectorConfig(hidden=[32, 32], epochs=30, batch_size=32, seed=3)
    return detector.train_detector(train, val, cfg)


def test_training_learns_separable_data(toy_model, toy_splits):
    _, val, test = toy_splits
    scores, labels = detector.predict(toy_model, test.X)
    assert float(np.mean(labels == test.y)) >= 0.95
    assert toy_model.history[-1]["val_acc"] >= 0.95


def test_training_deterministic(toy_splits, toy_model):
    train, val, _ = toy_splits
    cfg = detector.DetectorConfig(hidden=[32, 32], epochs=30, batch_size=32, seed=3)
    again = detector.train_detector(train, val, cfg)
    assert np.array_equal(again.net.flat_params(), toy_model.net.flat_params())


def test_zero_epochs_near_chance(toy_splits):
    # an untrained net pushes every score close to 0.5, so the labels on one
    # seed are near-arbitrary; chance behavior shows up as the mean over inits
    train, val, test = toy_splits
    accs = []
    for seed in range(12):
        cfg = detector.DetectorConfig(hidden=[32, 32], epochs=0, seed=seed)
        model = detector.train_detector(train, val, cfg)
        scores, labels = detector.predict(model, test.X)
        assert np.all(np.abs(scores - 0.5) < 0.2)
        accs.append(float(np.mean(labels == test.y)))
    assert abs(float(np.mean(accs)) - 0.5) <= 0.1


def test_loss_decreases_over_training(toy_model):
    hist = toy_model.history
    assert hist[-1]["train_loss"] <= hist[0]["train_loss"]


def test_predict_tie_goes_malicious():
    net = nn.LayeredNet([nn.DenseLayer(2, 1, "identity")])
    model = detector.DetectorModel(net, threshold=0.5, feature_layer=1, seed=0)
    # zero weights make the score exactly 0; raise bias so score is exactly 0.5
    model.net.layers[0].b[...] = [0.5]
    score, label = detector.predict(model, np.array([0.0, 1.0]))
    assert score == 0.5 and label == 1


def test_predict_batch_shape(toy_model):
    X = np.zeros((4, 60))
    scores, labels = detector.predict(toy_model, X)
    assert scores.shape == (4,) and labels.shape == (4,)
    s_single, l_single = detector.predict(toy_model, X[0])
    assert s_single == pytest.approx(scores[0])
    assert l_single == labels[0]


def test_internal_repr_layers(toy_model):
    x = np.zeros(60)
    x[::3] = 1.0
    h1 = detector.internal_repr(toy_model, x, 1)
    h2 = detector.internal_repr(toy_model, x, 2)
    out = detector.internal_repr(toy_model, x, toy_model.net.depth)
    assert h1.shape == (32,) and h2.shape == (32,)
    score, _ = detector.predict(toy_model, x)
    assert out.shape == (1,) and out[0] == pytest.approx(score)
    # default layer is the last hidden one
    assert np.array_equal(detector.internal_repr(toy_model, x), h2)


def test_internal_repr_distinguishes_inputs(toy_model, toy_splits):
    train = toy_splits[0]
    a, b = train.X[0], train.X[1]
    if np.array_equal(a, b):
        pytest.skip("identical rows drawn")
    assert detector.internal_feature_distance(toy_model, a, b) > 0.0


def test_feature_distance_zero_on_equal(toy_model):
    x = np.zeros(60)
    assert detector.internal_feature_distance(toy_model, x, x) == 0.0


def test_feature_distance_gradient_matches_fd(toy_model):
    rng = Rng(40)
    a = (rng.uniform(60) < 0.2).astype(float)
    b = rng.uniform(60)  # continuous probe point

    for layer in (1, 2, 3):
        def f(v, layer=layer):
            return detector.internal_feature_distance(toy_model, a, v, layer)

        _, grad = detector.feature_distance_gradient(toy_model, a, b, layer)
        fd = finite_difference_gradient(f, b.copy())
        assert relative_error(grad, fd) < 1e-4


def test_threshold_sweep_monotone(toy_model, toy_splits):
    test = toy_splits[2]
    scores, _ = detector.predict(toy_model, test.X)
    pos, neg = test.y == 1, test.y == 0
    fnr_prev, fpr_prev = None, None
    for thr in np.linspace(0.9, 0.1, 9):
        labels = (scores >= thr).astype(int)
        fnr = float(np.mean(labels[pos] == 0))
        fpr = float(np.mean(labels[neg] == 1))
        if fnr_prev is not None:
            assert fnr <= fnr_prev + 1e-12
            assert fpr >= fpr_prev - 1e-12
        fnr_prev, fpr_prev = fnr, fpr


def test_adversarial_training_runs_and_stays_accurate(toy_splits):
    train, val, test = toy_splits
    cfg = detector.DetectorConfig(hidden=[32, 32], epochs=12, batch_size=32, seed=7)
    model = detector.train_detector_adversarial(train, val, cfg, at_iterations=10, at_step=0.05)
    _, labels = detector.predict(model, test.X)
    assert float(np.mean(labels == test.y)) >= 0.85


def test_adversarial_training_deterministic(toy_splits):
    train, val, _ = toy_splits
    cfg = detector.DetectorConfig(hidden=[16], epochs=3, batch_size=32, seed=9)
    a = detector.train_detector_adversarial(train, val, cfg, at_iterations=5, at_step=0.05)
    b = detector.train_detector_adversarial(train, val, cfg, at_iterations=5, at_step=0.05)
    assert np.array_equal(a.net.flat_params(), b.net.flat_params())


def test_checkpoint_round_trip(toy_model, tmp_path):
    p = tmp_path / "det.ckpt"
    detector.save_detector(toy_model, str(p))
    back = detector.load_detector(str(p))
    assert np.array_equal(back.net.flat_params(), toy_model.net.flat_params())
    assert back.threshold == toy_model.threshold
    assert back.feature_layer == toy_model.feature_layer
    x = Rng(50).bernoulli(60, 0.3).astype(float)
    assert detector.predict(back, x) == detector.predict(toy_model, x)
    # byte-stable on re-save
    p2 = tmp_path / "det2.ckpt"
    detector.save_detector(back, str(p2))
    assert p.read_bytes() == p2.read_bytes()


def test_checkpoint_type_tag(toy_model, tmp_path):
    from purelab.checkpoint import load_checkpoint
    p = tmp_path / "det.ckpt"
    detector.save_detector(toy_model, str(p))
    with pytest.raises(ValueError):
        load_checkpoint(str(p), expect_type="purifier")
