"""End-to-end training methods over noisy data, and their evaluation.

Three methods share one engine:

  * selection_only: every epoch keeps the scheduled small-loss fraction
    of each batch and updates on it.
  * inscorr: selection warmup for the first warmup_epochs epochs; then a
    one-time split of the training set into clean and mislabeled parts,
    targeted correction of the mislabeled instances toward their given
    labels, and retraining on a weighted mix of both parts.
  * mix: identical, except the mislabeled instances enter the mix
    unmodified.

During the mixed phase every step draws a clean sub-batch and a
corrected sub-batch whose sizes split the configured batch size
proportionally to the partition sizes; each epoch runs
ceil(n / batch_size) steps with modular wraparound over per-epoch
permutations. The clean permutation is always drawn before the
corrected one from the epoch's generator, so runs whose corrected term
cannot influence training (weight 1 on the clean term, or no corrected
set at all) visit bit-identical clean batches.

RNG streams: epoch shuffles use [seed_epochs, T]; attacks draw their
optional random starts from [seed_noise, 4, T].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackConfig, correct_set
from .data import NO_LABEL, generate_ood_source, generate_synthetic, split_validation
from .errors import ContractError
from .nn import Model, ModelSpec, make_optimizer
from .noise import OPEN_SET, ALL_ROUTES, NoiseSpec, apply_noise
from .select import SelectionSchedule, self_teach_epoch
from .tensor import Tensor

SELECTION_ONLY = "SelectionOnly"
MIX = "Mix"
INSCORR = "InsCorr"
METHODS = (SELECTION_ONLY, MIX, INSCORR)

AGREEMENT = "agreement"
SMALL_LOSS_GLOBAL = "small_loss_global"
PARTITION_RULES = (AGREEMENT, SMALL_LOSS_GLOBAL)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = INSCORR
    hidden: tuple = (64,)
    optimizer: str = "adam"
    lr: float = 0.001
    n_train: int = 2000
    n_test: int = 1000
    num_classes: int = 4
    height: int = 16
    width: int = 16
    val_fraction: float = 0.1
    pool_size: int = None
    noise_route: str = OPEN_SET
    noise_rate: float = 0.4
    noise_spec: NoiseSpec = field(default_factory=NoiseSpec)
    tau: float = None
    ramp_epochs: int = 10
    attack: AttackConfig = field(default_factory=AttackConfig)
    lam: float = 0.5
    warmup_epochs: int = None
    total_epochs: int = 200
    batch_size: int = 128
    refresh_correction: bool = False
    partition_rule: str = AGREEMENT
    seed_data: int = 0
    seed_noise: int = 0
    seed_init: int = 0
    seed_epochs: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.partition_rule not in PARTITION_RULES:
            raise ContractError(
                f"partition_rule must be one of {PARTITION_RULES}, got {self.partition_rule!r}"
            )
        if self.noise_route not in ALL_ROUTES:
            raise ContractError(
                f"noise_route must be one of {ALL_ROUTES}, got {self.noise_route!r}"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise ContractError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.total_epochs < 0:
            raise ContractError(f"total_epochs must be non-negative, got {self.total_epochs}")
        if self.warmup_epochs is None:
            object.__setattr__(self, "warmup_epochs", self.total_epochs // 2)
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            raise ContractError(
                f"warmup_epochs must lie in [0, {self.total_epochs}], got {self.warmup_epochs}"
            )
        if self.tau is None:
            object.__setattr__(self, "tau", self.noise_rate)
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be positive, got {self.batch_size}")
        if self.pool_size is None:
            object.__setattr__(self, "pool_size", self.n_train)
        object.__setattr__(self, "hidden", tuple(self.hidden))

    def schedule(self):
        return SelectionSchedule(self.tau, self.ramp_epochs)

    def model_spec(self):
        return ModelSpec(self.height * self.width, self.hidden, self.num_classes)


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_accuracy: float
    test_accuracy: float
    selection_precision: float = None
    attack_success: float = None


@dataclass
class RunResult:
    model: Model
    optimizer: object
    metrics: list


def prepare_data(cfg):
    """(train, validation, test) per the config's data and noise settings.

    Noise is injected into the training pool first; the validation split
    is carved from the noisy data, so validation labels are noisy too.
    """
    full = generate_synthetic(
        cfg.n_train, cfg.num_classes, cfg.height, cfg.width,
        seed=[cfg.seed_data, 0],
    )
    test = generate_synthetic(
        cfg.n_test, cfg.num_classes, cfg.height, cfg.width,
        seed=[cfg.seed_data, 1],
    )
    pool = None
    if cfg.noise_route == OPEN_SET:
        pool = generate_ood_source(
            cfg.pool_size, cfg.height, cfg.width, seed=[cfg.seed_data, 2]
        )
    noisy = apply_noise(full, cfg.noise_route, cfg.noise_rate, cfg.noise_spec,
                        seed=cfg.seed_noise, pool=pool)
    train, val = split_validation(noisy, cfg.val_fraction, seed=[cfg.seed_data, 3])
    return train, val, test


def evaluate(model, ds):
    """Fraction of instances whose predicted class equals the true label."""
    if np.any(ds.true_labels == NO_LABEL):
        raise ContractError("evaluation set has instances without a true label")
    return float(np.mean(model.predict(ds.X) == ds.true_labels))


def accuracy_on_given(model, ds):
    """Accuracy against the (possibly noisy) given labels; 0.0 when empty."""
    if len(ds) == 0:
        return 0.0
    if np.any(ds.given_labels == NO_LABEL):
        raise ContractError("dataset has instances without a given label")
    return float(np.mean(model.predict(ds.X) == ds.given_labels))


def partition_clean_mislabeled(model, train, rule=AGREEMENT, tau=None):
    """Split training indices into (probably clean, probably mislabeled).

    agreement: clean iff the model's argmax equals the given label.
    small_loss_global: clean = the round((1 - tau) * n) smallest losses
    over the whole set, ties toward the lower index.
    """
    n = len(train)
    if rule == AGREEMENT:
        pred = model.predict(train.X)
        clean_mask = pred == train.given_labels
        clean = np.flatnonzero(clean_mask)
        noisy = np.flatnonzero(~clean_mask)
        return clean, noisy
    if rule == SMALL_LOSS_GLOBAL:
        if tau is None:
            raise ContractError("small_loss_global partition needs tau")
        losses = model.per_example_losses(train.X, train.given_labels)
        k = _round_half_up((1.0 - tau) * n)
        order = np.argsort(losses, kind="stable")
        return np.sort(order[:k]), np.sort(order[k:])
    raise ContractError(f"unknown partition rule {rule!r}")


def mixed_loss(model, clean_x, clean_y, corr_x, corr_y, lam):
    """lam * mean loss over the clean batch + (1 - lam) * mean loss over
    the corrected batch, as one graph scalar.

    An empty batch contributes nothing; a term whose weight is exactly 0
    is omitted from the graph rather than multiplied in, so the other
    path's gradients are untouched bit for bit. Both batches empty is a
    caller bug.
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lambda must lie in [0, 1], got {lam}")
    n_clean = 0 if clean_x is None else len(clean_x)
    n_corr = 0 if corr_x is None else len(corr_x)
    if n_clean == 0 and n_corr == 0:
        raise ContractError("mixed loss needs at least one non-empty batch")
    total = None
    if n_clean and lam != 0.0:
        total = model.forward(clean_x).softmax_cross_entropy(clean_y).mean() * lam
    if n_corr and lam != 1.0:
        term = model.forward(corr_x).softmax_cross_entropy(corr_y).mean() * (1.0 - lam)
        total = term if total is None else total + term
    if total is None:
        # the only surviving term had weight zero; nothing can flow
        return Tensor(np.zeros(()))
    return total


def last_ten_summary(metrics):
    """(mean, population std) of test accuracy over the final ten epochs."""
    if len(metrics) < 10:
        raise ContractError(f"need at least 10 epochs, got {len(metrics)}")
    tail = np.array([m.test_accuracy for m in metrics[-10:]])
    return float(tail.mean()), float(tail.std())


def _wrap_positions(perm, step, size, chunk):
    if chunk <= 0 or size == 0:
        return np.empty(0, dtype=np.int64)
    return perm[(step * chunk + np.arange(chunk)) % size]


def _mixed_epoch(model, optimizer, train, clean_idx, corr_x, corr_y, lam,
                 batch_size, n_total, rng):
    """One epoch of proportional two-part batches; returns mean step loss."""
    n_clean = len(clean_idx)
    n_corr = 0 if corr_x is None else len(corr_x)
    clean_bs = _round_half_up(batch_size * n_clean / n_total)
    corr_bs = batch_size - clean_bs
    steps = math.ceil(n_total / batch_size)
    perm_clean = rng.permutation(n_clean)
    perm_corr = rng.permutation(n_corr) if n_corr else None
    loss_sum = 0.0
    for s in range(steps):
        cpos = _wrap_positions(perm_clean, s, n_clean, clean_bs)
        rpos = _wrap_positions(perm_corr, s, n_corr, corr_bs)
        sel = clean_idx[cpos]
        cx = train.X[sel] if sel.size else None
        cy = train.given_labels[sel] if sel.size else None
        rx = corr_x[rpos] if rpos.size else None
        ry = corr_y[rpos] if rpos.size else None
        loss = mixed_loss(model, cx, cy, rx, ry, lam)
        if loss.requires_grad:
            model.zero_grads()
            loss.backward()
            optimizer.step(model)
        loss_sum += float(loss.data)
    return loss_sum / steps


def _build_corrected(cfg, model, train, noisy_idx, epoch):
    """The mislabeled side of the mix: attacked for inscorr, raw for mix."""
    xs = train.X[noisy_idx]
    ys = train.given_labels[noisy_idx]
    if cfg.method == MIX:
        return xs.copy(), ys, None
    results = correct_set(
        model, xs, ys, cfg.attack,
        seed=[cfg.seed_noise, 4, epoch] if cfg.attack.random_start else None,
    )
    corrected = (
        np.stack([r.corrected for r in results]) if results else xs.copy()
    )
    success = float(np.mean([r.success for r in results])) if results else None
    return corrected, ys, success


def run_experiment(cfg, data=None, on_epoch=None):
    """Train per the configured method; returns a RunResult.

    on_epoch(epoch, model), when given, runs after each epoch's updates;
    trajectory tests use it to snapshot parameters.
    """
    train, val, test = data if data is not None else prepare_data(cfg)
    model = Model.init(cfg.model_spec(), seed=[cfg.seed_init])
    optimizer = make_optimizer(cfg.optimizer, cfg.lr).attach(model)
    schedule = cfg.schedule()
    two_phase = cfg.method != SELECTION_ONLY and cfg.warmup_epochs < cfg.total_epochs

    clean_idx = noisy_idx = None
    corr_x = corr_y = None
    metrics = []
    for epoch in range(cfg.total_epochs):
        precision = None
        attack_success = None
        if two_phase and epoch >= cfg.warmup_epochs:
            if epoch == cfg.warmup_epochs:
                clean_idx, noisy_idx = partition_clean_mislabeled(
                    model, train, cfg.partition_rule, cfg.tau
                )
            if epoch == cfg.warmup_epochs or (
                cfg.refresh_correction and cfg.method == INSCORR
            ):
                corr_x, corr_y, attack_success = _build_corrected(
                    cfg, model, train, noisy_idx, epoch
                )
            rng = np.random.default_rng([cfg.seed_epochs, epoch])
            train_loss = _mixed_epoch(
                model, optimizer, train, clean_idx, corr_x, corr_y,
                cfg.lam, cfg.batch_size, len(train), rng,
            )
        else:
            rng = np.random.default_rng([cfg.seed_epochs, epoch])
            stats = self_teach_epoch(
                model, optimizer, train, schedule, epoch, cfg.batch_size, rng
            )
            train_loss = stats.mean_loss
            precision = stats.precision
        metrics.append(EpochMetrics(
            epoch=epoch,
            train_loss=train_loss,
            val_accuracy=accuracy_on_given(model, val),
            test_accuracy=evaluate(model, test),
            selection_precision=precision,
            attack_success=attack_success,
        ))
        if on_epoch is not None:
            on_epoch(epoch, model)
    return RunResult(model, optimizer, metrics)


def run_clean_partition_only(cfg, data=None, on_epoch=None):
    """Reduction target: after warmup, train on the clean partition alone.

    Shares the mixed-phase engine with no corrected set, so a run whose
    corrected term has weight zero must match it bit for bit.
    """
    train, val, test = data if data is not None else prepare_data(cfg)
    model = Model.init(cfg.model_spec(), seed=[cfg.seed_init])
    optimizer = make_optimizer(cfg.optimizer, cfg.lr).attach(model)
    schedule = cfg.schedule()
    clean_idx = None
    metrics = []
    for epoch in range(cfg.total_epochs):
        precision = None
        if epoch >= cfg.warmup_epochs:
            if clean_idx is None:
                clean_idx, _ = partition_clean_mislabeled(
                    model, train, cfg.partition_rule, cfg.tau
                )
            rng = np.random.default_rng([cfg.seed_epochs, epoch])
            train_loss = _mixed_epoch(
                model, optimizer, train, clean_idx, None, None,
                1.0, cfg.batch_size, len(train), rng,
            )
        else:
            rng = np.random.default_rng([cfg.seed_epochs, epoch])
            stats = self_teach_epoch(
                model, optimizer, train, schedule, epoch, cfg.batch_size, rng
            )
            train_loss = stats.mean_loss
            precision = stats.precision
        metrics.append(EpochMetrics(
            epoch=epoch,
            train_loss=train_loss,
            val_accuracy=accuracy_on_given(model, val),
            test_accuracy=evaluate(model, test),
            selection_precision=precision,
        ))
        if on_epoch is not None:
            on_epoch(epoch, model)
    return RunResult(model, optimizer, metrics)


def select_warmup_length(cfg, candidates, data=None):
    """Pick the warmup length whose snapshot scores best on validation.

    Trains once to max(candidates) with the selection schedule and
    scores each candidate's snapshot against the noisy validation
    labels; ties go to the shorter warmup.
    """
    if not candidates:
        raise ContractError("need at least one candidate")
    candidates = sorted(set(int(c) for c in candidates))
    if candidates[0] < 0:
        raise ContractError(f"warmup candidates must be non-negative, got {candidates[0]}")
    train, val, _ = data if data is not None else prepare_data(cfg)
    model = Model.init(cfg.model_spec(), seed=[cfg.seed_init])
    optimizer = make_optimizer(cfg.optimizer, cfg.lr).attach(model)
    schedule = cfg.schedule()
    scores = {}
    for epoch in range(max(candidates) + 1):
        if epoch in candidates:
            scores[epoch] = accuracy_on_given(model, val)
        if epoch == max(candidates):
            break
        rng = np.random.default_rng([cfg.seed_epochs, epoch])
        self_teach_epoch(model, optimizer, train, schedule, epoch, cfg.batch_size, rng)
    best = max(candidates, key=lambda c: (scores[c], -c))
    return best, scores
