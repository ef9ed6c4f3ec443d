"""Fully connected relu networks, optimizers, and checkpointing.

A Model owns its parameters as persistent Tensors so optimizer state
stays attached across epochs. forward() builds an autodiff graph for
training; infer_logits() is a plain numpy path for evaluation, where no
gradients are needed.

Checkpoint container (version 1), fields in order after magic+version:
    input_dim u64 | n_hidden u32 | hidden widths u64 each | num_classes u32
    per layer, input to output: W float64 row-major, then b float64
    optimizer kind u8 (1 = sgd, 2 = adam) | learning rate f64
    adam only: beta1 f64 | beta2 f64 | eps f64 | step count u64
               then per parameter (same order as layers, W before b):
               first-moment float64 array, second-moment float64 array
    epoch u64 | experiment seed i64
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .containers import ContainerReader, ContainerWriter, read_file
from .errors import ContractError, DimensionError
from .tensor import Tensor

CHECKPOINT_MAGIC = b"INSCCKPT"
CHECKPOINT_VERSION = 1

_OPT_KIND_CODE = {"sgd": 1, "adam": 2}
_OPT_CODE_KIND = {v: k for k, v in _OPT_KIND_CODE.items()}


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden: tuple
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1:
            raise ContractError(f"input_dim must be positive, got {self.input_dim}")
        if self.num_classes < 2:
            raise ContractError(f"num_classes must be at least 2, got {self.num_classes}")
        if any(h < 1 for h in self.hidden):
            raise ContractError(f"hidden widths must be positive, got {self.hidden}")

    def layer_dims(self):
        dims = (self.input_dim, *self.hidden, self.num_classes)
        return list(zip(dims[:-1], dims[1:]))


class Model:
    def __init__(self, spec, weights, biases):
        self.spec = spec
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, spec, seed):
        """He-normal weights, zero biases; layer draws in input-to-output order."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in spec.layer_dims():
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            weights.append(Tensor(w, requires_grad=True))
            biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
        return cls(spec, weights, biases)

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    def _check_input(self, x):
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise DimensionError(
                f"input shape {x.shape} does not match (n, {self.spec.input_dim})"
            )

    def forward(self, x, trainable=True):
        """Graph-building forward pass. x may be a Tensor or an ndarray.

        With trainable=False the parameters enter the graph as constants,
        so backward() reaches the input without touching parameter grads.
        """
        if not isinstance(x, Tensor):
            x = Tensor(x)
        self._check_input(x.data)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not trainable:
                w = Tensor(w.data)
                b = Tensor(b.data)
            h = h @ w + b
            if i != last:
                h = h.relu()
        return h

    def infer_logits(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def predict_proba(self, x):
        logits = self.infer_logits(x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, x):
        # argmax breaks ties toward the lower class index
        return np.argmax(self.infer_logits(x), axis=1)

    def per_example_losses(self, x, labels):
        """Cross-entropy losses without building a graph."""
        logits = np.ascontiguousarray(self.infer_logits(x))
        losses, _ = kernels.softmax_xent(logits, np.asarray(labels, dtype=np.int64))
        return losses


class Sgd:
    kind = "sgd"

    def __init__(self, lr=0.001):
        self.lr = float(lr)

    def attach(self, model):
        return self

    def step(self, model):
        for p in model.parameters():
            if p.grad is None:
                raise ContractError("optimizer step before backward: a parameter has no gradient")
            p.data -= self.lr * p.grad


class Adam:
    kind = "adam"

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self._m = None
        self._v = None

    def attach(self, model):
        if self._m is None:
            self._m = [np.zeros_like(p.data) for p in model.parameters()]
            self._v = [np.zeros_like(p.data) for p in model.parameters()]
        return self

    def step(self, model):
        params = model.parameters()
        if self._m is None:
            self.attach(model)
        if len(self._m) != len(params):
            raise ContractError(
                f"optimizer holds state for {len(self._m)} parameters, model has {len(params)}"
            )
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(params, self._m, self._v):
            if p.grad is None:
                raise ContractError("optimizer step before backward: a parameter has no gradient")
            kernels.adam_update(
                p.data.reshape(-1), p.grad.reshape(-1),
                m.reshape(-1), v.reshape(-1),
                self.lr, self.beta1, self.beta2, self.eps, c1, c2,
            )


def make_optimizer(kind, lr):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr)
    raise ContractError(f"unknown optimizer kind {kind!r}")


def save_checkpoint(path, model, optimizer, epoch, seed):
    w = ContainerWriter(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    spec = model.spec
    w.pack("<Q", spec.input_dim)
    w.pack("<I", len(spec.hidden))
    for h in spec.hidden:
        w.pack("<Q", h)
    w.pack("<I", spec.num_classes)
    for wt, bt in zip(model.weights, model.biases):
        w.array(wt.data, np.float64)
        w.array(bt.data, np.float64)
    w.pack("<B", _OPT_KIND_CODE[optimizer.kind])
    w.pack("<d", optimizer.lr)
    if optimizer.kind == "adam":
        optimizer.attach(model)
        w.pack("<ddd", optimizer.beta1, optimizer.beta2, optimizer.eps)
        w.pack("<Q", optimizer.step_count)
        for m, v in zip(optimizer._m, optimizer._v):
            w.array(m, np.float64)
            w.array(v, np.float64)
    w.pack("<Q", epoch)
    w.pack("<q", seed)
    w.save(path)


def load_checkpoint(path):
    """Returns (model, optimizer, epoch, seed)."""
    r = ContainerReader(read_file(path), CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    (input_dim,) = r.unpack("<Q")
    (n_hidden,) = r.unpack("<I")
    hidden = tuple(r.unpack("<Q")[0] for _ in range(n_hidden))
    (num_classes,) = r.unpack("<I")
    spec = ModelSpec(int(input_dim), hidden, int(num_classes))
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims():
        weights.append(Tensor(r.array(np.float64, (fan_in, fan_out)), requires_grad=True))
        biases.append(Tensor(r.array(np.float64, (fan_out,)), requires_grad=True))
    model = Model(spec, weights, biases)
    (kind_code,) = r.unpack("<B")
    kind = _OPT_CODE_KIND.get(kind_code)
    if kind is None:
        raise ContractError(f"unknown optimizer code {kind_code} in checkpoint")
    (lr,) = r.unpack("<d")
    if kind == "adam":
        beta1, beta2, eps = r.unpack("<ddd")
        opt = Adam(lr, beta1, beta2, eps)
        (opt.step_count,) = r.unpack("<Q")
        opt._m = []
        opt._v = []
        for p in model.parameters():
            opt._m.append(r.array(np.float64, p.data.shape))
            opt._v.append(r.array(np.float64, p.data.shape))
    else:
        opt = Sgd(lr)
    (epoch,) = r.unpack("<Q")
    (seed,) = r.unpack("<q")
    r.finish()
    return model, opt, int(epoch), int(seed)
