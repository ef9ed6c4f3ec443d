"""Targeted input perturbation: nudge an instance toward a chosen label.

Projected gradient descent on the targeted cross-entropy, under an Linf
or L2 budget, with the perturbed input clamped to [0, 1] after every
step. The result carries the best iterate seen (the perturbation with
the lowest targeted loss, the unperturbed input included), so the
reported loss never exceeds the starting loss.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, LabelError, NumericError, ParameterError
from .tensor import Tensor

LINF = "linf"
L2 = "l2"


@dataclass(frozen=True)
class AttackConfig:
    norm: str = LINF
    budget: float = 8.0 / 255.0
    steps: int = 40
    step_size: float = None
    random_start: bool = False

    def __post_init__(self):
        if self.norm not in (LINF, L2):
            raise ParameterError(f"norm must be '{LINF}' or '{L2}', got {self.norm!r}")
        if self.budget <= 0:
            raise ParameterError(f"budget must be positive, got {self.budget}")
        if self.steps < 0:
            raise ParameterError(f"steps must be non-negative, got {self.steps}")
        if self.step_size is None:
            # standard heuristic: cross the ball a couple of times over the run
            object.__setattr__(
                self, "step_size", 2.5 * self.budget / max(self.steps, 1)
            )
        if self.step_size <= 0:
            raise ParameterError(f"step_size must be positive, got {self.step_size}")


@dataclass
class CorrectionResult:
    corrected: np.ndarray
    loss: float
    success: bool
    best_iteration: int
    error: str = None


def _targeted_loss_and_grad(model, x, target):
    xt = Tensor(x[None, :], requires_grad=True)
    loss = model.forward(xt, trainable=False).softmax_cross_entropy(
        np.array([target], dtype=np.int64)
    ).mean()
    loss.backward()
    grad = xt.grad[0]
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient during input correction")
    return float(loss.data), grad


def _project(delta, cfg):
    if cfg.norm == LINF:
        return np.clip(delta, -cfg.budget, cfg.budget)
    norm = float(np.linalg.norm(delta))
    if norm > cfg.budget:
        return delta * (cfg.budget / norm)
    return delta


def correct_instance(model, x, target, cfg, rng=None):
    """Perturb x within the budget so the model favors the target label."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"expected a flat instance, got shape {x.shape}")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ContractError("instance values must lie in [0, 1]")
    c = model.spec.num_classes
    if not 0 <= target < c:
        raise LabelError(f"target {target} outside [0, {c})")
    if cfg.random_start:
        if rng is None:
            raise ContractError("random_start needs an explicit rng")
        if cfg.norm == LINF:
            delta = rng.uniform(-cfg.budget, cfg.budget, size=x.shape)
        else:
            raw = rng.normal(size=x.shape)
            radius = cfg.budget * rng.uniform() ** (1.0 / x.size)
            delta = raw * (radius / max(float(np.linalg.norm(raw)), 1e-12))
        delta = np.clip(x + delta, 0.0, 1.0) - x
    else:
        delta = np.zeros_like(x)

    best_loss = np.inf
    best_delta = delta
    best_iter = 0
    for k in range(cfg.steps + 1):
        loss, grad = _targeted_loss_and_grad(model, x + delta, target)
        if loss < best_loss:
            best_loss = loss
            best_delta = delta.copy()
            best_iter = k
        if k == cfg.steps:
            break
        if cfg.norm == LINF:
            step = cfg.step_size * np.sign(grad)
        else:
            gnorm = max(float(np.linalg.norm(grad)), 1e-12)
            step = cfg.step_size * (grad / gnorm)
        delta = _project(delta - step, cfg)
        # keep the perturbed input valid; clamping only shrinks delta
        delta = np.clip(x + delta, 0.0, 1.0) - x

    corrected = x + best_delta
    success = int(model.predict(corrected[None, :])[0]) == int(target)
    return CorrectionResult(corrected, best_loss, success, best_iter)


def correct_set(model, instances, targets, cfg, seed=None):
    """correct_instance over rows, in order; model parameters read-only.

    A failing element yields an unperturbed result with success False
    and the error message attached; the rest of the batch proceeds.
    """
    instances = np.asarray(instances, dtype=np.float64)
    targets = np.asarray(targets)
    if len(instances) != len(targets):
        raise ContractError(
            f"{len(instances)} instances vs {len(targets)} targets"
        )
    if cfg.random_start and seed is None:
        raise ContractError("random_start needs a seed for correct_set")
    results = []
    for j in range(len(instances)):
        rng = np.random.default_rng([seed, j]) if cfg.random_start else None
        try:
            results.append(correct_instance(model, instances[j], int(targets[j]), cfg, rng))
        except (ContractError, LabelError, NumericError) as e:
            x = np.clip(instances[j], 0.0, 1.0)
            results.append(CorrectionResult(x, float("nan"), False, 0, error=str(e)))
    return results
