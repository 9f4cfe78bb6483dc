import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _gradcheck
from relapsegan import gan
from relapsegan.tensornet import forward


def probs(*rows):
    return np.array(rows, dtype=np.float64)


def random_probs(rng, n):
    z = rng.normal(size=(n, 3)) * 2
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# --- loss formulas -------------------------------------------------------------


def test_supervised_loss_values():
    assert gan.supervised_loss_from_probs(probs((0.45, 0.45, 0.1)), [0]) == pytest.approx(math.log(2), abs=1e-12)
    assert gan.supervised_loss_from_probs(probs((0.9, 0.0, 0.1)), [0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        gan.supervised_loss_from_probs(probs((0.5, 0.4, 0.1)), [2])
    with pytest.raises(ValueError):
        gan.supervised_loss_from_probs(np.zeros((0, 3)), [])


def test_supervised_loss_ignores_fake_logit():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(6, 3))
    labels = rng.integers(0, 2, 6)
    a = gan.supervised_loss_from_probs(gan.softmax(logits), labels)
    logits[:, 2] += rng.normal(size=6) * 3
    b = gan.supervised_loss_from_probs(gan.softmax(logits), labels)
    assert a == pytest.approx(b, abs=1e-12)


def test_unsupervised_loss_values():
    half = probs((0.25, 0.25, 0.5))
    assert gan.unsupervised_loss_from_probs(half, half) == pytest.approx(2 * math.log(2), abs=1e-12)
    perfect_real, perfect_fake = probs((0.5, 0.5, 0.0)), probs((0.0, 0.0, 1.0))
    assert 0 <= gan.unsupervised_loss_from_probs(perfect_real, perfect_fake) <= 1e-11


def test_unsupervised_monotone_in_real_fake_prob():
    fake = probs((0.2, 0.2, 0.6))
    values = [gan.unsupervised_loss_from_probs(probs((0.5 - p / 2, 0.5 - p / 2, p)), fake) for p in (0.6, 0.4, 0.2, 0.05)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_binary_value_and_cost():
    half = probs((0.25, 0.25, 0.5))
    assert gan.binary_value_from_probs(half, half) == pytest.approx(-2 * math.log(2), abs=1e-12)
    assert gan.discriminator_cost_from_probs(half, half) == pytest.approx(math.log(2), abs=1e-12)
    best = gan.binary_value_from_probs(probs((0.5, 0.5, 0.0)), probs((0.0, 0.0, 1.0)))
    assert abs(best) <= 1e-11


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_value_is_minus_twice_cost(seed, n):
    rng = np.random.default_rng(seed)
    pr, pf = random_probs(rng, n), random_probs(rng, n)
    assert abs(gan.binary_value_from_probs(pr, pf) + 2 * gan.discriminator_cost_from_probs(pr, pf)) < 1e-12


def test_generator_loss_values():
    assert gan.generator_loss_from_probs(probs((0.0, 0.0, 1.0))) == pytest.approx(-math.log(1e-12), rel=1e-9)
    assert gan.generator_loss_from_probs(probs((0.0, 0.0, 1.0))) == pytest.approx(27.631021, abs=1e-5)
    assert gan.generator_loss_from_probs(probs((0.5, 0.5, 0.0))) == pytest.approx(0.0, abs=1e-11)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_zero_sum_generator_mirrors_fake_term(seed):
    pf = random_probs(np.random.default_rng(seed), 7)
    fake_term = -np.mean(np.log(np.clip(pf[:, 2], 1e-12, 1 - 1e-12)))
    assert gan.generator_loss_from_probs(pf, zero_sum=True) + fake_term == pytest.approx(0.0, abs=1e-12)


def test_relapse_probability():
    assert gan.relapse_probability(probs((0.6, 0.3, 0.1)))[0] == pytest.approx(0.666667, abs=1e-6)
    assert gan.relapse_probability(probs((0.45, 0.45, 0.1)))[0] == 0.5
    assert gan.relapse_probability(probs((0.0, 0.9, 0.1)))[0] == 0.0
    with pytest.raises(gan.DegenerateModelError):
        gan.relapse_probability(probs((0.0, 0.0, 1.0)))


# --- model level -----------------------------------------------------------------


def test_architecture_shapes():
    model = gan.build_model(64, 0)
    assert model.discriminator.input_shape == (2, 10, 10)
    assert model.discriminator.output_shape == (3,)
    assert model.generator.input_shape == (64,)
    assert model.generator.output_shape == (2, 10, 10)


def test_zero_discriminator_is_uniform():
    model = gan.build_model(8, 0)
    for ps in model.discriminator.params:
        for p in ps:
            p[...] = 0
    p = gan.discriminator_probs(model, np.random.default_rng(0).uniform(size=(3, 2, 10, 10)))
    assert np.allclose(p, 1 / 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_probabilities_are_distributions(seed):
    model = gan.build_model(8, seed)
    x = np.random.default_rng(seed).normal(size=(4, 2, 10, 10)) * 5
    p = gan.discriminator_probs(model, x)
    assert np.all(p > 0) and np.all(np.abs(p.sum(axis=1) - 1) <= 1e-12)


def test_samples_are_deterministic_and_inside_unit_interval():
    model = gan.build_model(16, 3)
    a = gan.sample_generator(model, 5, seed=9)
    assert a.shape == (5, 2, 10, 10)
    assert np.all((a > 0) & (a < 1))
    assert np.array_equal(a, gan.sample_generator(model, 5, seed=9))
    assert not np.array_equal(a, gan.sample_generator(model, 5, seed=10))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("mode", gan.MODES)
def test_discriminator_gradients(seed, mode):
    stats = {"checked": 0, "skipped": 0}
    assert _gradcheck.check_discriminator(seed, mode, stats=stats) < 1e-4
    assert stats["skipped"] <= 0.1 * stats["checked"]


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("zero_sum", [False, True])
def test_generator_gradients(seed, zero_sum):
    stats = {"checked": 0, "skipped": 0}
    assert _gradcheck.check_generator(seed, zero_sum, stats=stats) < 1e-4
    assert stats["skipped"] <= 0.1 * stats["checked"]


def test_objective_decomposition():
    rng = np.random.default_rng(1)
    model = gan.build_model(8, 1)
    real, fake = rng.uniform(size=(5, 2, 10, 10)), rng.uniform(size=(5, 2, 10, 10))
    labels = np.array([0, 1, 1, 0, 1])
    ls, lu, lt, _ = gan.discriminator_objective(model, real, labels, fake)
    assert lt == ls + lu
    assert ls == pytest.approx(gan.supervised_loss(model, real, labels), abs=1e-12)
    assert lu == pytest.approx(gan.unsupervised_loss(model, real, fake), abs=1e-12)


def test_separate_unlabeled_pool_feeds_unsupervised_term():
    rng = np.random.default_rng(2)
    model = gan.build_model(8, 2)
    real, unl, fake = (rng.uniform(size=(4, 2, 10, 10)) for _ in range(3))
    labels = np.array([0, 1, 0, 1])
    _, lu, _, _ = gan.discriminator_objective(model, real, labels, fake, unlabeled=unl)
    assert lu == pytest.approx(gan.unsupervised_loss(model, unl, fake), abs=1e-12)


def test_small_discriminator_steps_do_not_increase_loss():
    from relapsegan.tensornet import AdamState, adam_step

    rng = np.random.default_rng(4)
    model = gan.build_model(8, 4)
    real = rng.uniform(size=(8, 2, 10, 10))
    labels = rng.integers(0, 2, 8)
    fake, _ = forward(model.generator, rng.uniform(size=(8, 8)))
    state = AdamState(learning_rate=1e-5)
    previous = math.inf
    for _ in range(10):
        _, _, total, grads = gan.discriminator_objective(model, real, labels, fake)
        assert total <= previous + 1e-12
        previous = total
        adam_step(model.discriminator.flat_params(), [g for gs in grads for g in gs], state)


# --- training --------------------------------------------------------------------


def tiny_data(seed=0, n=40):
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (n // 2))
    x = rng.uniform(0, 0.3, size=(n, 2, 10, 10))
    x[y == 0, 0, :, 4] += 0.5
    return x, y


def test_train_reports_and_identity():
    x, y = tiny_data()
    model, reports = gan.train(x, y, gan.TrainConfig(epochs=3, batch_size=16, noise_dim=8, seed=1))
    assert [r.epoch for r in reports] == [1, 2, 3]
    for r in reports:
        assert r.l_total == r.l_supervised + r.l_unsupervised


def test_train_is_deterministic():
    x, y = tiny_data()
    cfg = gan.TrainConfig(epochs=10, batch_size=16, noise_dim=8, seed=5)
    m1, r1 = gan.train(x, y, cfg)
    m2, r2 = gan.train(x, y, cfg)
    assert r1 == r2
    for a, b in zip(m1.discriminator.flat_params() + m1.generator.flat_params(), m2.discriminator.flat_params() + m2.generator.flat_params()):
        assert a.tobytes() == b.tobytes()


def test_vanilla_mode_tracks_value_only():
    x, y = tiny_data()
    _, reports = gan.train(x, y, gan.TrainConfig(epochs=2, batch_size=16, noise_dim=8, mode="vanilla"))
    for r in reports:
        assert r.l_total == r.l_unsupervised


def test_callback_sees_every_epoch():
    x, y = tiny_data()
    seen = []
    gan.train(x, y, gan.TrainConfig(epochs=4, batch_size=32, noise_dim=8), callback=lambda r, m: seen.append(r.epoch))
    assert seen == [1, 2, 3, 4]


@pytest.mark.parametrize(
    "x, y, cfg",
    [
        (np.zeros((0, 2, 10, 10)), np.zeros(0, int), gan.TrainConfig(epochs=1, batch_size=1)),
        (np.zeros((4, 2, 10, 10)), np.zeros(4, int), gan.TrainConfig(epochs=1, batch_size=2)),
        (np.zeros((4, 2, 10, 10)), np.array([0, 1, 0, 1]), gan.TrainConfig(epochs=1, batch_size=8)),
        (np.zeros((4, 2, 9, 10)), np.array([0, 1, 0, 1]), gan.TrainConfig(epochs=1, batch_size=2)),
    ],
)
def test_train_rejects_bad_data(x, y, cfg):
    with pytest.raises(ValueError):
        gan.train(x, y, cfg)


@pytest.mark.parametrize("field, value", [("epochs", 0), ("batch_size", -1), ("learning_rate", 0.0), ("mode", "wgan")])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        gan.TrainConfig(**{field: value})


def test_model_roundtrip(tmp_path):
    x, y = tiny_data()
    model, reports = gan.train(x, y, gan.TrainConfig(epochs=2, batch_size=16, noise_dim=8))
    gan.save_model(model, tmp_path / "m.ckpt", {"seed": 0})
    again, meta = gan.load_model(tmp_path / "m.ckpt")
    assert meta["noise_dim"] == "8" and meta["seed"] == "0"
    assert np.array_equal(gan.predict_relapse(again, x), gan.predict_relapse(model, x))
    gan.write_loss_csv(reports, tmp_path / "loss.csv")
    lines = (tmp_path / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,l_supervised,l_unsupervised,l_total,g_loss"
    assert len(lines) == 3


def test_validation_snapshot_equals_a_shorter_run():
    x, y = tiny_data(3, 60)
    cfg = gan.TrainConfig(epochs=12, batch_size=16, noise_dim=8, seed=4)
    seen = []

    def score(rep, model):
        p = gan.predict_relapse(model, x[40:])
        seen.append((np.mean((p >= 0.5) == (y[40:] == 0)), -gan.supervised_loss(model, x[40:], y[40:])))

    gan.train(x[:40], y[:40], cfg, callback=score)
    model, reports, best = gan.train_with_validation(x[:40], y[:40], cfg, x[40:], y[40:])
    assert len(reports) == 12
    assert seen[best - 1] == max(seen)
    short, _ = gan.train(x[:40], y[:40], gan.TrainConfig(epochs=best, batch_size=16, noise_dim=8, seed=4))
    for a, b in zip(model.discriminator.flat_params() + model.generator.flat_params(), short.discriminator.flat_params() + short.generator.flat_params()):
        assert a.tobytes() == b.tobytes()


def test_validation_set_must_be_usable():
    x, y = tiny_data()
    with pytest.raises(ValueError):
        gan.train_with_validation(x, y, gan.TrainConfig(epochs=1, batch_size=16, noise_dim=8), x[:0], y[:0])
