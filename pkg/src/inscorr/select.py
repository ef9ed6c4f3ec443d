"""Small-loss selection: keep the lowest-loss fraction of each mini-batch.

The keep fraction follows a ramp schedule: starting at 1, it falls
linearly over the first ramp_epochs epochs to 1 - noise_rate and stays
there. Training updates use only the kept examples, on the premise that
the network fits clean data before noisy data, so low loss early in
training marks probably-clean examples.
"""

from dataclasses import dataclass

import numpy as np

from .data import permutation_batches
from .errors import ContractError, DataError


@dataclass(frozen=True)
class SelectionSchedule:
    noise_rate: float
    ramp_epochs: int = 10

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 1.0:
            raise ContractError(
                f"noise_rate must lie in [0, 1), got {self.noise_rate}"
            )
        if self.ramp_epochs < 1:
            raise ContractError(
                f"ramp_epochs must be at least 1, got {self.ramp_epochs}"
            )

    def keep_fraction(self, epoch):
        """1 - min(epoch/ramp * rate, rate); non-increasing, floor 1 - rate."""
        if epoch < 0:
            raise ContractError(f"epoch must be non-negative, got {epoch}")
        return 1.0 - min(epoch / self.ramp_epochs * self.noise_rate, self.noise_rate)


def select_small_loss(losses, keep_fraction):
    """Indices of the ceil(keep_fraction * b) smallest losses, and the rest.

    Ties break toward the lower index; both returned arrays preserve
    original batch order.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ContractError(f"losses must be a non-empty vector, got shape {losses.shape}")
    if not 0.0 < keep_fraction <= 1.0:
        raise ContractError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    nan = np.isnan(losses)
    if nan.any():
        raise DataError(f"loss at index {int(np.argmax(nan))} is NaN")
    b = losses.size
    k = int(np.ceil(keep_fraction * b))
    order = np.argsort(losses, kind="stable")
    kept = np.sort(order[:k])
    discarded = np.sort(order[k:])
    return kept, discarded


@dataclass
class SelfTeachStats:
    batches: int = 0
    kept_total: int = 0
    kept_clean: int = 0
    loss_sum: float = 0.0

    @property
    def precision(self):
        """Fraction of kept examples whose provenance is clean."""
        return self.kept_clean / self.kept_total if self.kept_total else float("nan")

    @property
    def mean_loss(self):
        return self.loss_sum / self.batches if self.batches else float("nan")


def self_teach_epoch(model, optimizer, train, schedule, epoch, batch_size, rng):
    """One epoch of select-then-update over a seeded batch permutation.

    Per batch: per-example losses without a graph, small-loss selection
    at this epoch's keep fraction, then one optimizer step on the mean
    loss over the kept examples only.
    """
    keep = schedule.keep_fraction(epoch)
    stats = SelfTeachStats()
    clean = train.provenance == 0
    for batch_idx in permutation_batches(rng, len(train), batch_size):
        losses = model.per_example_losses(train.X[batch_idx], train.given_labels[batch_idx])
        kept, _ = select_small_loss(losses, keep)
        sel = batch_idx[kept]
        model.zero_grads()
        loss = model.forward(train.X[sel]).softmax_cross_entropy(train.given_labels[sel]).mean()
        loss.backward()
        optimizer.step(model)
        stats.batches += 1
        stats.kept_total += sel.size
        stats.kept_clean += int(np.sum(clean[sel]))
        stats.loss_sum += float(loss.data)
    return stats
