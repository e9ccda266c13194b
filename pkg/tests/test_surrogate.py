import numpy as np
import pytest

from bsmobo.core import Archive, BoxBounds, DimensionError, EvaluatedSolution, RngStream
from bsmobo.surrogate import (
    DropoutMask,
    NetworkWeights,
    SurrogateEnsemble,
    TrainingConfig,
    TrainingDiverged,
    fit_ensemble,
    forward,
    init_weights,
    input_gradient,
    load_weights,
    mc_moments,
    save_weights,
    sobolev_loss,
    train,
    train_network,
)


def naive_forward(w, z1, z2, x):
    # unvectorized reference: explicit sums over units
    H = len(w.b1)
    h1 = [max(sum(w.W1[i, k] * x[k] for k in range(len(x))) + w.b1[i], 0.0) * z1[i] for i in range(H)]
    h2 = [max(sum(w.W2[j, i] * h1[i] for i in range(H)) + w.b2[j], 0.0) * z2[j] for j in range(H)]
    return sum(w.W3[0, j] * h2[j] for j in range(H)) + w.b3[0]


def small_net(n=2, hidden=8, seed=0):
    w = init_weights(n, RngStream(seed), hidden=hidden)
    r = np.random.default_rng(seed)
    w.b1[:] = 0.3 * r.standard_normal(hidden)
    w.b2[:] = 0.3 * r.standard_normal(hidden)
    w.b3[:] = 0.1
    return w


def random_mask(hidden, rows=None, seed=0, keep=0.8):
    r = np.random.default_rng(seed)
    shape = (hidden,) if rows is None else (rows, hidden)
    return DropoutMask((r.random(shape) < keep).astype(float), (r.random(shape) < keep).astype(float))


def central_diff(fn, x, h=1e-6):
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        out.flat[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


def test_forward_matches_naive_oracle():
    w = small_net(3, 6, seed=2)
    mask = random_mask(6, seed=3)
    for x in np.random.default_rng(4).random((10, 3)):
        assert forward(w, mask, x) == pytest.approx(naive_forward(w, mask.z1, mask.z2, x), rel=1e-12, abs=1e-14)


def test_zero_weights_output_bias():
    w = init_weights(3, RngStream(0), hidden=4).zeros_like()
    w.b3[:] = 1.7
    assert forward(w, DropoutMask.ones(4), np.array([0.1, 0.2, 0.3])) == 1.7
    np.testing.assert_array_equal(input_gradient(w, DropoutMask.ones(4), np.array([0.1, 0.2, 0.3])), 0.0)


def test_batch_forward_with_per_row_masks():
    w = small_net(2, 8)
    X = np.random.default_rng(1).random((5, 2))
    mask = random_mask(8, rows=5, seed=7)
    y = forward(w, mask, X)
    for i in range(5):
        assert y[i] == pytest.approx(forward(w, DropoutMask(mask.z1[i], mask.z2[i]), X[i]), rel=1e-12)


def test_dimension_error():
    with pytest.raises(DimensionError):
        forward(small_net(2, 8), DropoutMask.ones(8), np.zeros(3))


def test_single_linear_path_gradient():
    # every pre-activation positive, so the gradient is the product of the path weights
    H = 2
    w = NetworkWeights(
        W1=np.array([[2.0, 0.0], [0.0, 0.0]]),
        b1=np.array([0.5, 0.0]),
        W2=np.array([[3.0, 0.0], [0.0, 0.0]]),
        b2=np.zeros(H),
        W3=np.array([[-0.5, 0.0]]),
        b3=np.zeros(1),
    )
    np.testing.assert_allclose(input_gradient(w, DropoutMask.ones(H), np.array([0.4, 0.9])), [2 * 3 * -0.5, 0.0])


def test_input_gradient_finite_differences():
    w = small_net(2, 8, seed=5)
    mask = random_mask(8, seed=6)
    for x in np.random.default_rng(2).random((20, 2)):
        fd = central_diff(lambda v: forward(w, mask, v), x)
        np.testing.assert_allclose(input_gradient(w, mask, x), fd, rtol=1e-4, atol=1e-8)


def test_sobolev_loss_single_sample_example():
    # y = x_1 + 1 on the positive orthant: prediction 2, gradient (1, 0)
    w = NetworkWeights(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2), np.array([[1.0, 0.0]]), np.array([1.0]))
    loss, _ = sobolev_loss(w, DropoutMask.ones(2), [[1.0, 0.5]], [0.0], [[0.0, 0.0]], sobolev_weight=1.0)
    assert loss == pytest.approx(5.0)
    loss_plain, _ = sobolev_loss(w, DropoutMask.ones(2), [[1.0, 0.5]], [0.0])
    assert loss_plain == pytest.approx(4.0)


def test_sobolev_loss_zero_when_interpolating():
    w = small_net(2, 8)
    mask = DropoutMask.ones(8)
    X = np.random.default_rng(0).random((6, 2))
    y = forward(w, mask, X)
    G = input_gradient(w, mask, X)
    loss, g = sobolev_loss(w, mask, X, y, G)
    assert loss == 0.0
    for a in g.arrays():
        np.testing.assert_array_equal(a, 0.0)


@pytest.mark.parametrize("with_grads", [False, True])
def test_weight_gradient_finite_differences(with_grads):
    w = small_net(2, 8, seed=1)
    r = np.random.default_rng(9)
    X, y, G = r.random((7, 2)), r.standard_normal(7), r.standard_normal((7, 2))
    mask = random_mask(8, rows=7, seed=3)
    grads = G if with_grads else None
    _, g = sobolev_loss(w, mask, X, y, grads, sobolev_weight=0.7, scale=1 / 7)
    for a, ga in zip(w.arrays(), g.arrays()):
        def loss_at(v, a=a):
            old = a.copy()
            a[...] = v
            val = sobolev_loss(w, mask, X, y, grads, sobolev_weight=0.7, scale=1 / 7)[0]
            a[...] = old
            return val

        fd = central_diff(loss_at, a.copy())
        np.testing.assert_allclose(ga, fd, rtol=1e-3, atol=1e-7)


def test_zero_sobolev_weight_follows_plain_trajectory():
    r = np.random.default_rng(0)
    X, y, G = r.random((12, 3)), r.standard_normal(12), r.standard_normal((12, 3))
    cfg0 = TrainingConfig(epochs=30, sobolev_weight=0.0, hidden=16)
    w_plain, h_plain = train_network(X, y, None, cfg0, RngStream(4))
    w_zero, h_zero = train_network(X, y, G, cfg0, RngStream(4))
    for a, b in zip(w_plain.arrays(), w_zero.arrays()):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(h_plain, h_zero)


def test_training_is_deterministic_and_reduces_loss():
    r = np.random.default_rng(1)
    X = r.random((20, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    cfg = TrainingConfig(epochs=200, hidden=32)
    w1, h1 = train_network(X, y, None, cfg, RngStream(2))
    w2, h2 = train_network(X, y, None, cfg, RngStream(2))
    np.testing.assert_array_equal(h1, h2)
    assert h1[-20:].mean() < 0.2 * h1[0]


def test_minibatches_cover_every_sample():
    cfg = TrainingConfig(minibatch_size=4)
    assert cfg.batch_size(10) == 4
    assert TrainingConfig().batch_size(512) == 512
    assert TrainingConfig().batch_size(513) == 256
    X = np.random.default_rng(0).random((10, 2))
    _, hist = train_network(X, X[:, 0], None, TrainingConfig(epochs=3, minibatch_size=4, hidden=8), RngStream(0))
    assert hist.shape == (3,) and np.all(np.isfinite(hist))


def test_config_validation():
    for kwargs in ({"dropout_rate": 1.0}, {"epochs": 0}, {"learning_rate": 0.0}, {"sobolev_weight": -1.0}):
        with pytest.raises(ValueError):
            TrainingConfig(**kwargs)


def test_divergence_reports_epoch():
    X = np.random.default_rng(0).random((4, 2))
    with pytest.raises(TrainingDiverged) as err:
        train_network(X, np.array([0.0, np.inf, 1.0, 2.0]), None, TrainingConfig(epochs=5, hidden=8), RngStream(0))
    assert err.value.epoch == 0


def test_mask_keep_rate():
    m = DropoutMask.sample(0.05, (400, 256), RngStream(0))
    assert set(np.unique(m.z1)) <= {0.0, 1.0}
    assert m.z1.mean() == pytest.approx(0.95, abs=0.005)
    assert m.z2.mean() == pytest.approx(0.95, abs=0.005)


def test_mc_moments_examples():
    mean, std = mc_moments(np.array([1.0, 3.0]))
    assert mean == 2.0 and std == 1.0
    mean, std = mc_moments(np.full((20, 3), 0.1))
    np.testing.assert_array_equal(mean, 0.1)
    np.testing.assert_array_equal(std, 0.0)


def archive_from(fn, X, grad_fn=None):
    arc = Archive()
    for x in X:
        arc.add(EvaluatedSolution(x, fn(x), None if grad_fn is None else grad_fn(x)))
    return arc


def test_zero_rate_gives_zero_std_and_deterministic_mean():
    b = BoxBounds.unit(2)
    X = np.random.default_rng(0).random((10, 2))
    arc = archive_from(lambda x: np.array([x[0], 1 - x[0] * x[1]]), X)
    ens = fit_ensemble(arc, b, TrainingConfig(epochs=20, dropout_rate=0.0, hidden=16), RngStream(1))
    pred = ens.predict_batch(X, RngStream(2))
    np.testing.assert_array_equal(pred.std, 0.0)
    w = ens.models[0]
    plain = forward(w.astype(float), DropoutMask.ones(16), X.astype(np.float32).astype(float))
    np.testing.assert_allclose(pred.mean[:, 0], plain * ens.y_std[0] + ens.y_mean[0], rtol=1e-5)


def test_constant_target_converges():
    b = BoxBounds.unit(2)
    X = np.random.default_rng(3).random((8, 2))
    arc = archive_from(lambda x: np.array([2.5, -1.0]), X)
    ens = fit_ensemble(arc, b, TrainingConfig(epochs=2000, dropout_rate=0.0, hidden=32), RngStream(0))
    pred = ens.predict_batch(X, RngStream(1))
    np.testing.assert_allclose(pred.mean, np.tile([2.5, -1.0], (8, 1)), atol=1e-3)


def test_predictions_come_back_in_objective_units():
    b = BoxBounds([-5.0, 0.0], [5.0, 1.0])
    X = b.from_unit(np.random.default_rng(5).random((25, 2)))
    arc = archive_from(lambda x: np.array([100.0 + 20.0 * x[0], 0.01 * x[1]]), X)
    ens = fit_ensemble(arc, b, TrainingConfig(epochs=1500, dropout_rate=0.0, hidden=32), RngStream(0))
    pred = ens.predict_batch(X, RngStream(1))
    np.testing.assert_allclose(pred.mean, arc.F(), atol=0.05 * arc.F().std(axis=0).max(), rtol=0)
    assert np.abs(pred.mean[:, 1] - arc.F()[:, 1]).max() < 1e-3


def test_prediction_independent_of_batch_company():
    b = BoxBounds.unit(2)
    X = np.random.default_rng(0).random((10, 2))
    arc = archive_from(lambda x: np.array([x[0], 1 - x[0]]), X)
    ens = fit_ensemble(arc, b, TrainingConfig(epochs=10, hidden=16), RngStream(1))
    full = ens.predict_batch(X, RngStream(7))
    one = ens.predict(X[3], RngStream(7))
    # same masks; float32 matmuls may block differently for 1 row and 10 rows
    np.testing.assert_allclose(one.mean, full.mean[3], rtol=1e-6)
    np.testing.assert_allclose(one.std, full.std[3], rtol=1e-4)
    assert np.all(full.std > 0)


def test_gradient_targets_follow_chain_rule():
    from bsmobo.surrogate import scale_targets

    b = BoxBounds([0.0, -2.0], [2.0, 2.0])
    X = b.from_unit(np.random.default_rng(0).random((6, 2)))
    arc = archive_from(lambda x: np.array([3 * x[0], x[1] ** 2]), X, lambda x: np.array([[3.0, 0.0], [0.0, 2 * x[1]]]))
    U, Y, mu, sd, G = scale_targets(arc, b, True)
    # numerical derivative of the scaled objective with respect to the scaled input
    for i in range(len(X)):
        for j in range(2):
            def scaled(u, j=j):
                x = b.from_unit(u)
                f = np.array([3 * x[0], x[1] ** 2])
                return (f[j] - mu[j]) / sd[j]

            np.testing.assert_allclose(G[i, j], central_diff(scaled, U[i].copy()), rtol=1e-6, atol=1e-9)


def test_mixed_gradient_availability_rejected():
    arc = Archive()
    arc.add(EvaluatedSolution([0.1, 0.2], [1.0, 2.0], np.zeros((2, 2))))
    arc.add(EvaluatedSolution([0.3, 0.4], [1.5, 2.5]))
    with pytest.raises(ValueError):
        train(arc, 0, TrainingConfig(epochs=1, hidden=8), RngStream(0), BoxBounds.unit(2))


def test_ensemble_validation():
    w = init_weights(2, RngStream(0), hidden=8)
    with pytest.raises(DimensionError):
        SurrogateEnsemble([w], BoxBounds.unit(2), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        SurrogateEnsemble([w], BoxBounds.unit(2), np.zeros(1), np.ones(1), mc_samples=1)


def test_checkpoint_round_trip(tmp_path):
    w = small_net(3, 8, seed=11)
    path = tmp_path / "w.txt"
    save_weights(path, w)
    back = load_weights(path)
    for a, b in zip(w.arrays(), back.arrays()):
        np.testing.assert_array_equal(a, b)
    assert path.read_text().startswith("# bsmobo-weights v1\nW1 8 3\n")


def test_checkpoint_rejects_other_files(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        load_weights(path)
