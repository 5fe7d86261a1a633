"""SGD training loop, optimizer pieces and a finite-difference gradient checker."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import attention as att

BASE_LR = 1e-2
MOMENTUM = 0.9
WEIGHT_DECAY = 1e-4
CLIP_NORM = 0.25
WARMUP_RATIO = 1.0 / 3.0
BATCH_SIZE = 256


class DataError(ValueError):
    pass


@dataclass
class OptimizerState:
    lr: float = BASE_LR
    momentum: float = MOMENTUM
    weight_decay: float = WEIGHT_DECAY
    clip_norm: float = CLIP_NORM
    warmup_ratio: float = WARMUP_RATIO
    warmup_steps: int = 0
    step: int = 0
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_gradients(grads, clip_norm=CLIP_NORM, mode="norm"):
    """Rescale all gradients together when their joint L2 norm exceeds ``clip_norm``.

    ``mode="value"`` clamps each entry to [-clip_norm, clip_norm] instead.
    """
    if mode == "value":
        return {k: np.clip(g, -clip_norm, clip_norm) for k, g in grads.items()}
    if mode != "norm":
        raise ValueError(f"unknown clip mode {mode!r}")
    norm = global_norm(grads)
    if norm <= clip_norm:
        return dict(grads)
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


def warmup(step, total_warmup_steps, base_lr=BASE_LR, ratio=WARMUP_RATIO):
    """Linear ramp from ratio * base_lr at step 0 up to base_lr."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if total_warmup_steps <= 0 or step >= total_warmup_steps:
        return base_lr
    return base_lr * (ratio + (1.0 - ratio) * step / total_warmup_steps)


def sgd_step(params, grads, state):
    """In-place momentum SGD with L2 weight decay; returns ``(params, state)``."""
    lr_t = warmup(state.step, state.warmup_steps, state.lr, state.warmup_ratio)
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {theta.shape}")
        g = g + state.weight_decay * theta
        v = state.velocity.get(name)
        v = g if v is None else state.momentum * v + g
        state.velocity[name] = v
        theta -= lr_t * v
    state.step += 1
    return params, state


# -- gradient checking -------------------------------------------------------


@dataclass
class GradcheckReport:
    errors: dict
    tolerance: float
    passed: bool
    diagnostic: str = ""

    def lines(self):
        out = [f"{name:12s} max_rel_err={err:.3e}  {'ok' if err <= self.tolerance else 'FAIL'}"
               for name, err in self.errors.items()]
        if self.diagnostic:
            out.append(self.diagnostic)
        out.append(f"gradcheck {'PASSED' if self.passed else 'FAILED'} (tolerance {self.tolerance:g})")
        return out


def relative_error(analytic, numeric):
    """Worst entrywise gap, scaled by the tensor's largest gradient magnitude."""
    scale = max(float(np.max(np.abs(analytic), initial=0.0)),
                float(np.max(np.abs(numeric), initial=0.0)))
    gap = float(np.max(np.abs(analytic - numeric), initial=0.0))
    if scale == 0.0:
        return gap
    return gap / scale


def numeric_gradient(loss_fn, arr, h=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    num = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + h
        up = loss_fn()
        arr[idx] = orig - h
        down = loss_fn()
        arr[idx] = orig
        num[idx] = (up - down) / (2.0 * h)
    return num


def check_gradients(loss_fn, tensors, analytic, h=1e-5, tolerance=1e-4):
    """Compare ``analytic[name]`` against central differences for each named tensor."""
    base = loss_fn()
    if not np.isfinite(base):
        return GradcheckReport({}, tolerance, False, f"non-finite loss {base!r}")
    errors = {}
    for name, arr in tensors.items():
        errors[name] = relative_error(analytic[name], numeric_gradient(loss_fn, arr, h))
    bad = [n for n, e in errors.items() if not e <= tolerance]
    diag = f"tensors over tolerance: {', '.join(bad)}" if bad else ""
    return GradcheckReport(errors, tolerance, not bad, diag)


GRADCHECK_CONFIG = att.ModelConfig(
    feature_dim=8, question_dim=8, question_len=6, fused_dim=10,
    rank=4, logit_rank=3, glimpses=2, answers=7,
)
GRADCHECK_COUNTS = (5, 4)  # instances, background cells


def gradcheck(config=GRADCHECK_CONFIG, seed=0, h=1e-5, tolerance=1e-4, counts=GRADCHECK_COUNTS,
              train=False, corrupt=None, include_inputs=True):
    """Finite-difference check of the full model on random inputs.

    ``train=True`` replays one fixed dropout draw per evaluation.
    ``corrupt`` names a tensor whose analytic gradient is perturbed (negative control).
    """
    rng = np.random.default_rng(seed)
    params = att.init_params(config, seed)
    rho, phi = counts
    D = rng.standard_normal((config.feature_dim, rho))
    B = rng.standard_normal((config.feature_dim, phi))
    q = rng.standard_normal((config.question_dim, config.question_len))
    label = int(rng.integers(config.answers))

    def run():
        drop = np.random.default_rng([seed, 99]) if train else None
        logits, cache = att.forward(D, B, q, params, config, train=train, rng=drop)
        return att.softmax_cross_entropy(logits, label), cache

    (loss, dlogits), cache = run()
    if not np.isfinite(loss):
        return GradcheckReport({}, tolerance, False, f"non-finite loss {loss!r}")
    grads = att.backward(cache, dlogits, params)
    if corrupt is not None:
        grads[corrupt] = grads[corrupt] + 1e-2 * (1.0 + np.abs(grads[corrupt]))
    tensors = dict(params)
    if include_inputs:
        tensors.update({"input.D": D, "input.B": B, "input.q": q})
    return check_gradients(lambda: run()[0][0], tensors, grads, h, tolerance)


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = BASE_LR
    momentum: float = MOMENTUM
    weight_decay: float = WEIGHT_DECAY
    clip_norm: float = CLIP_NORM
    clip_mode: str = "norm"
    warmup_ratio: float = WARMUP_RATIO
    warmup_fraction: float = 0.1
    epochs: int = 100
    batch_size: int = BATCH_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.clip_mode not in ("norm", "value"):
            raise ValueError(f"unknown clip_mode {self.clip_mode!r}")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1]")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class Sample:
    D: np.ndarray
    B: np.ndarray
    q: np.ndarray
    label: int


def _check_dataset(samples, config):
    if not samples:
        raise DataError("dataset is empty")
    for i, s in enumerate(samples):
        if not 0 <= s.label < config.answers:
            raise DataError(f"sample {i}: label {s.label} outside [0, {config.answers})")


def evaluate(params, samples, config):
    """Eval-mode mean loss, accuracy and predictions."""
    losses, preds = [], []
    for s in samples:
        logits, _ = att.forward(s.D, s.B, s.q, params, config)
        losses.append(att.softmax_cross_entropy(logits, s.label)[0])
        preds.append(att.predict(logits))
    correct = sum(int(p == s.label) for p, s in zip(preds, samples))
    return float(np.mean(losses)), correct / len(samples), preds


def train(samples, config, tcfg, params=None, on_epoch=None):
    """Train from a seeded init; returns ``(params, log)``.

    Shuffling, dropout and initialisation are all keyed to ``tcfg.seed``, and
    batch gradients are summed in ascending batch position, so a run is
    reproducible bit for bit.
    """
    _check_dataset(samples, config)
    if params is None:
        params = att.init_params(config, tcfg.seed)
    shuffle_rng = np.random.default_rng([tcfg.seed, 1])
    drop_rng = np.random.default_rng([tcfg.seed, 2])
    n = len(samples)
    steps_per_epoch = math.ceil(n / tcfg.batch_size)
    state = OptimizerState(
        lr=tcfg.lr, momentum=tcfg.momentum, weight_decay=tcfg.weight_decay,
        clip_norm=tcfg.clip_norm, warmup_ratio=tcfg.warmup_ratio,
        warmup_steps=math.ceil(tcfg.warmup_fraction * tcfg.epochs * steps_per_epoch),
    )
    log = []
    for epoch in range(tcfg.epochs):
        order = shuffle_rng.permutation(n)
        train_loss = 0.0
        for start in range(0, n, tcfg.batch_size):
            batch = order[start:start + tcfg.batch_size]
            acc = {k: np.zeros_like(v) for k, v in params.items()}
            for i in batch:
                s = samples[i]
                logits, cache = att.forward(s.D, s.B, s.q, params, config, train=True, rng=drop_rng)
                loss, dlogits = att.softmax_cross_entropy(logits, s.label)
                train_loss += loss
                grads = att.backward(cache, dlogits, params)
                for k in acc:
                    acc[k] += grads[k]
            grads = {k: v / len(batch) for k, v in acc.items()}
            grads = clip_gradients(grads, tcfg.clip_norm, tcfg.clip_mode)
            sgd_step(params, grads, state)
        eval_loss, accuracy, _ = evaluate(params, samples, config)
        record = {
            "epoch": epoch + 1,
            "train_loss": train_loss / n,
            "eval_loss": eval_loss,
            "train_accuracy": accuracy,
            "lr": warmup(state.step, state.warmup_steps, state.lr, state.warmup_ratio),
        }
        log.append(record)
        if on_epoch is not None and on_epoch(record):
            break
    return params, log
