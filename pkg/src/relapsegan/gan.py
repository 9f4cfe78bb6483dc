"""Semi-supervised (K+1)-class GAN for relapse prediction.

Class indices: 0 = relapsed, 1 = abstinent, 2 = generated. The discriminator
emits three logits; its softmax doubles as the real/fake discriminator
(``D(x) = 1 - p_generated``) and, conditioned on "not generated", as the
relapse classifier.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .imaging import IMAGE_SHAPE
from .seeding import rng_for
from .tensornet import checkpoint
from .tensornet.layers import (
    Network,
    backward,
    conv2d,
    dense,
    flatten,
    forward,
    init_params,
    leaky_relu,
    relu,
    reshape,
    sigmoid,
    softmax,
    transposed_conv2d,
)
from .tensornet.optim import AdamState, adam_step

RELAPSED, ABSTINENT, GENERATED = 0, 1, 2
N_CLASSES = 3
CLAMP = 1e-12
MODES = ("semi_supervised", "vanilla")


class DegenerateModelError(ArithmeticError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 7000
    batch_size: int = 128
    learning_rate: float = 1e-4
    d_steps: int = 1
    noise_dim: int = 64
    seed: int = 0
    mode: str = "semi_supervised"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "d_steps", "noise_dim"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class LossReport:
    epoch: int
    l_supervised: float
    l_unsupervised: float
    l_total: float
    g_loss: float


@dataclass
class GanModel:
    generator: Network
    discriminator: Network
    noise_dim: int = 64

    def __post_init__(self):
        if self.generator.output_shape != self.discriminator.input_shape:
            raise ValueError("generator output must match discriminator input")
        if self.discriminator.output_shape != (N_CLASSES,):
            raise ValueError("discriminator must emit K+1 = 3 logits")
        if self.generator.input_shape != (self.noise_dim,):
            raise ValueError("generator input must match noise_dim")


def discriminator_specs():
    return [
        conv2d(2, 16, 3, stride=1, pad=1),
        leaky_relu(),
        conv2d(16, 32, 3, stride=2, pad=1),
        leaky_relu(),
        flatten(),
        dense(800, N_CLASSES),
    ]


def generator_specs(noise_dim: int = 64):
    return [
        dense(noise_dim, 800),
        relu(),
        reshape(32, 5, 5),
        transposed_conv2d(32, 16, 3, stride=2, pad=1, out_pad=1),
        relu(),
        conv2d(16, 2, 3, stride=1, pad=1),
        sigmoid(),
    ]


def build_model(noise_dim: int = 64, seed: int = 0) -> GanModel:
    return GanModel(
        generator=init_params(generator_specs(noise_dim), rng_for(seed, "init/generator"), (noise_dim,)),
        discriminator=init_params(discriminator_specs(), rng_for(seed, "init/discriminator"), IMAGE_SHAPE),
        noise_dim=noise_dim,
    )


# --- probability-level losses ------------------------------------------------


def _clamp(p):
    return np.clip(p, CLAMP, 1.0 - CLAMP)


def _nonempty(*arrays):
    for a in arrays:
        if len(a) == 0:
            raise ValueError("empty batch")


def conditional_real(probs, labels):
    """``p_label / (p_relapsed + p_abstinent)`` per sample."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    return probs[np.arange(len(labels)), labels] / (probs[:, RELAPSED] + probs[:, ABSTINENT])


def supervised_loss_from_probs(probs, labels) -> float:
    _nonempty(labels)
    labels = np.asarray(labels)
    if np.any((labels != RELAPSED) & (labels != ABSTINENT)):
        raise ValueError("supervised labels must be relapsed or abstinent")
    return float(-np.mean(np.log(_clamp(conditional_real(probs, labels)))))


def _real_mass(probs):
    return probs[:, RELAPSED] + probs[:, ABSTINENT]


def unsupervised_loss_from_probs(probs_real, probs_fake) -> float:
    _nonempty(probs_real, probs_fake)
    pr, pf = np.asarray(probs_real, dtype=np.float64), np.asarray(probs_fake, dtype=np.float64)
    return float(-np.mean(np.log(_clamp(_real_mass(pr)))) - np.mean(np.log(_clamp(pf[:, GENERATED]))))


def binary_value_from_probs(probs_real, probs_fake) -> float:
    """Mean log D(real) + mean log(1 - D(fake)), with D = 1 - p_generated."""
    _nonempty(probs_real, probs_fake)
    pr, pf = np.asarray(probs_real, dtype=np.float64), np.asarray(probs_fake, dtype=np.float64)
    return float(np.mean(np.log(_clamp(_real_mass(pr)))) + np.mean(np.log(_clamp(pf[:, GENERATED]))))


def discriminator_cost_from_probs(probs_real, probs_fake) -> float:
    """Binary cross-entropy cost with half the data real and half generated."""
    _nonempty(probs_real, probs_fake)
    pr, pf = np.asarray(probs_real, dtype=np.float64), np.asarray(probs_fake, dtype=np.float64)
    return float(-0.5 * np.mean(np.log(_clamp(_real_mass(pr)))) - 0.5 * np.mean(np.log(_clamp(pf[:, GENERATED]))))


def generator_loss_from_probs(probs_fake, zero_sum: bool = False) -> float:
    _nonempty(probs_fake)
    pf = np.asarray(probs_fake, dtype=np.float64)
    if zero_sum:
        return float(np.mean(np.log(_clamp(pf[:, GENERATED]))))
    return float(-np.mean(np.log(_clamp(_real_mass(pf)))))


def relapse_probability(probs) -> np.ndarray:
    """``p_relapsed / (p_relapsed + p_abstinent)`` per row."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    mass = _real_mass(probs)
    if np.any(mass <= 0):
        raise DegenerateModelError("real-class probability mass underflowed to zero")
    return probs[:, RELAPSED] / mass


# --- logit gradients (exact derivatives of the clamped expressions) ----------


def _inside(p):
    return (p > CLAMP) & (p < 1.0 - CLAMP)


def _grad_neg_log_real_mass(p):
    """d/dlogits of -log(p0 + p1), per sample (not averaged)."""
    s = _real_mass(p)
    g = p.copy()
    g[:, :2] -= p[:, :2] / s[:, None]
    g[~_inside(s)] = 0.0
    return g


def _grad_neg_log_generated(p):
    """d/dlogits of -log p2, per sample."""
    g = p.copy()
    g[:, GENERATED] -= 1.0
    g[~_inside(p[:, GENERATED])] = 0.0
    return g


def _grad_supervised(p, labels):
    """d/dlogits of -log(p_y / (p0 + p1)), per sample."""
    s = _real_mass(p)
    g = np.zeros_like(p)
    g[:, :2] = p[:, :2] / s[:, None]
    g[np.arange(len(labels)), labels] -= 1.0
    q = p[np.arange(len(labels)), labels] / s
    g[~_inside(q)] = 0.0
    return g


def discriminator_objective(model: GanModel, real, labels, fake, mode="semi_supervised", unlabeled=None, param_grads=True):
    """Discriminator loss and its gradients.

    semi_supervised: supervised + unsupervised terms (unlabeled defaults to
    ``real`` with labels ignored). vanilla: the negated binary value only.
    Returns ``(l_sup, l_unsup, l_total, grads)``.
    """
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _nonempty(real, fake)
    parts = [real] if unlabeled is None else [real, np.asarray(unlabeled, dtype=np.float64)]
    parts.append(fake)
    sizes = [len(a) for a in parts]
    logits, caches = forward(model.discriminator, np.concatenate(parts))
    p = softmax(logits)
    p_real = p[: sizes[0]]
    p_unl = p_real if unlabeled is None else p[sizes[0] : sizes[0] + sizes[1]]
    p_fake = p[-sizes[-1] :]

    l_sup = supervised_loss_from_probs(p_real, labels)
    l_unsup = unsupervised_loss_from_probs(p_unl, p_fake)
    g = np.zeros_like(p)
    if mode == "semi_supervised":
        l_total = l_sup + l_unsup
        g[: sizes[0]] += _grad_supervised(p_real, labels) / sizes[0]
    elif mode == "vanilla":
        l_total = l_unsup
    else:
        raise ValueError(f"unknown mode {mode!r}")
    unl_grad = _grad_neg_log_real_mass(p_unl) / len(p_unl)
    if unlabeled is None:
        g[: sizes[0]] += unl_grad
    else:
        g[sizes[0] : sizes[0] + sizes[1]] += unl_grad
    g[-sizes[-1] :] += _grad_neg_log_generated(p_fake) / sizes[-1]
    grads = None
    if param_grads:
        grads, _ = backward(model.discriminator, caches, g)
    return l_sup, l_unsup, l_total, grads


def generator_objective(model: GanModel, z, zero_sum: bool = False):
    """Generator loss for noise ``z`` and its gradients w.r.t. generator params."""
    z = np.asarray(z, dtype=np.float64)
    _nonempty(z)
    fake, g_caches = forward(model.generator, z)
    logits, d_caches = forward(model.discriminator, fake)
    p = softmax(logits)
    loss = generator_loss_from_probs(p, zero_sum)
    if zero_sum:
        dlogits = -_grad_neg_log_generated(p) / len(z)
    else:
        dlogits = _grad_neg_log_real_mass(p) / len(z)
    _, dfake = backward(model.discriminator, d_caches, dlogits, param_grads=False)
    grads, _ = backward(model.generator, g_caches, dfake)
    return loss, grads


# --- model-level API ---------------------------------------------------------


def discriminator_probs(model: GanModel, images) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    logits, _ = forward(model.discriminator, images)
    return softmax(logits)


def supervised_loss(model: GanModel, images, labels) -> float:
    return supervised_loss_from_probs(discriminator_probs(model, images), labels)


def unsupervised_loss(model: GanModel, real, fake) -> float:
    return unsupervised_loss_from_probs(discriminator_probs(model, real), discriminator_probs(model, fake))


def binary_value(model: GanModel, real, fake) -> float:
    return binary_value_from_probs(discriminator_probs(model, real), discriminator_probs(model, fake))


def generator_loss(model: GanModel, fake, zero_sum: bool = False) -> float:
    return generator_loss_from_probs(discriminator_probs(model, fake), zero_sum)


def predict_relapse(model: GanModel, images) -> np.ndarray:
    """Relapse probability conditioned on the input being real."""
    return relapse_probability(discriminator_probs(model, images))


def sample_noise(rng: np.random.Generator, n: int, noise_dim: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(n, noise_dim))


def sample_generator(model: GanModel, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    z = sample_noise(rng_for(seed, "sample"), n, model.noise_dim)
    out, _ = forward(model.generator, z)
    return out


@dataclass
class _Optimizers:
    d: AdamState
    g: AdamState


def train(images, labels, config: TrainConfig, unlabeled=None, callback=None):
    """Alternate discriminator and generator updates over seeded mini-batches.

    ``images`` is ``(N, 2, 10, 10)``; ``labels`` holds class indices 0/1.
    Returns ``(model, reports)`` with one :class:`LossReport` per epoch.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("no training images")
    if images.shape[1:] != IMAGE_SHAPE or len(labels) != len(images):
        raise ValueError("images must be (N, 2, 10, 10) with one label each")
    if not (np.any(labels == RELAPSED) and np.any(labels == ABSTINENT)):
        raise ValueError("training data must contain both classes")
    if config.batch_size > len(images):
        raise ValueError("batch_size exceeds the number of labeled images")
    if unlabeled is not None:
        unlabeled = np.asarray(unlabeled, dtype=np.float64)
        if len(unlabeled) == 0:
            unlabeled = None

    seed = config.seed
    model = build_model(config.noise_dim, seed)
    opt = _Optimizers(AdamState(config.learning_rate), AdamState(config.learning_rate))
    shuffle_rng = rng_for(seed, "shuffle")
    noise_rng = rng_for(seed, "noise")
    zero_sum = config.mode == "vanilla"
    d_params = model.discriminator.flat_params()
    g_params = model.generator.flat_params()
    n = len(images)
    reports = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        sup, unsup, gl = [], [], []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            m = len(idx)
            for _ in range(config.d_steps):
                z = sample_noise(noise_rng, m, config.noise_dim)
                fake, _ = forward(model.generator, z)
                unl = None
                if unlabeled is not None:
                    unl = unlabeled[shuffle_rng.integers(0, len(unlabeled), m)]
                ls, lu, _, grads = discriminator_objective(model, images[idx], labels[idx], fake, config.mode, unl)
                adam_step(d_params, [g for gs in grads for g in gs], opt.d)
                sup.append(ls)
                unsup.append(lu)
            z = sample_noise(noise_rng, m, config.noise_dim)
            loss, grads = generator_objective(model, z, zero_sum)
            adam_step(g_params, [g for gs in grads for g in gs], opt.g)
            gl.append(loss)
        l_sup = float(np.mean(sup))
        l_unsup = float(np.mean(unsup))
        l_total = l_sup + l_unsup if config.mode == "semi_supervised" else l_unsup
        rep = LossReport(epoch, l_sup, l_unsup, l_total, float(np.mean(gl)))
        reports.append(rep)
        if callback is not None:
            callback(rep, model)
    return model, reports


def train_with_validation(images, labels, config: TrainConfig, val_images, val_labels, unlabeled=None):
    """Train as :func:`train` but return the epoch snapshot that does best on a validation set.

    The adversarial game does not settle: held-out accuracy can swing by tens
    of points between neighbouring epochs. Snapshots are ranked by validation
    accuracy, then by lower validation supervised loss; the earliest wins a
    full tie. Both networks are restored to the chosen epoch. Returns
    ``(model, reports, best_epoch)``.
    """
    val_images = np.asarray(val_images, dtype=np.float64)
    val_labels = np.asarray(val_labels, dtype=np.int64)
    if len(val_images) == 0 or len(val_images) != len(val_labels):
        raise ValueError("validation set must be non-empty with one label per image")
    best = {"key": None, "epoch": 0, "params": None}

    def keep_best(report, model):
        p = discriminator_probs(model, val_images)
        s = p[:, RELAPSED] + p[:, ABSTINENT]
        pred = np.where(p[:, RELAPSED] >= 0.5 * s, RELAPSED, ABSTINENT)
        key = (float(np.mean(pred == val_labels)), -supervised_loss_from_probs(p, val_labels))
        if best["key"] is None or key > best["key"]:
            best.update(key=key, epoch=report.epoch, params=[a.copy() for a in model.discriminator.flat_params() + model.generator.flat_params()])

    model, reports = train(images, labels, config, unlabeled, callback=keep_best)
    for a, saved in zip(model.discriminator.flat_params() + model.generator.flat_params(), best["params"]):
        a[...] = saved
    return model, reports, best["epoch"]


# --- persistence -------------------------------------------------------------


def save_model(model: GanModel, path: str | os.PathLike, meta: dict | None = None) -> None:
    info = {"noise_dim": str(model.noise_dim)}
    info.update({k: str(v) for k, v in (meta or {}).items()})
    checkpoint.save(path, {"generator": model.generator, "discriminator": model.discriminator}, info)


def load_model(path: str | os.PathLike) -> tuple[GanModel, dict]:
    nets, meta = checkpoint.load(path)
    try:
        model = GanModel(nets["generator"], nets["discriminator"], int(meta["noise_dim"]))
    except KeyError as exc:
        raise checkpoint.CheckpointError(f"checkpoint lacks {exc}") from None
    return model, meta


LOSS_COLUMNS = ("epoch", "l_supervised", "l_unsupervised", "l_total", "g_loss")


def write_loss_csv(reports, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_COLUMNS)
        for r in reports:
            # repr round-trips, so the identity l_total = l_supervised + l_unsupervised rechecks exactly
            w.writerow([r.epoch] + [repr(float(v)) for v in (r.l_supervised, r.l_unsupervised, r.l_total, r.g_loss)])
