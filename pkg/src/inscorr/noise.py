"""Open-set label noise: instance replacement and in-place corruption.

Two injection routes, both label-preserving (the given label never
changes; what changes is whether the instance still matches it):

  * open-set replacement: a class-balanced subset of instances is
    swapped for draws from an out-of-distribution pool. The original
    label is kept, the true label becomes absent.
  * corruption: a uniform subset of instances is damaged in place by
    one of five pixel transforms. The true label is retained since the
    underlying class is unchanged.

RNG streams are split so that which instances are hit depends only on
(seed, route), never on the corruption kind or its parameters; runs
that differ only in kind therefore damage the same subset.

    [seed, 0]            corruption: which instances
    [seed, 1, kind]      corruption: transform randomness
    [seed, 2]            replacement: which instances per class
    [seed, 3]            replacement: which pool entries

Degenerate parameters are exact identities: sigma 0, occlusion fraction
0, resolution factor 1, fog intensity 0, and blur length 1 all return
bit-equal pixels.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import NO_LABEL, Dataset, Provenance
from .errors import CapacityError, ContractError, ParameterError


class NoiseKind(enum.IntEnum):
    GAUSSIAN = 0
    OCCLUSION = 1
    RESOLUTION = 2
    FOG = 3
    MOTION_BLUR = 4


OPEN_SET = "open_set"
KIND_NAMES = {k.name.lower(): k for k in NoiseKind}
ALL_ROUTES = (OPEN_SET,) + tuple(KIND_NAMES)


@dataclass(frozen=True)
class NoiseSpec:
    gaussian_sigma: float = 0.25
    occlusion_fraction: float = 0.25
    resolution_factor: int = 4
    fog_intensity: float = 0.8
    fog_decay: float = 1.0
    blur_length: int = 5
    blur_angle_deg: float = 0.0

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ParameterError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")
        if not 0.0 <= self.occlusion_fraction <= 1.0:
            raise ParameterError(
                f"occlusion_fraction must lie in [0, 1], got {self.occlusion_fraction}"
            )
        if self.resolution_factor < 1 or int(self.resolution_factor) != self.resolution_factor:
            raise ParameterError(
                f"resolution_factor must be an integer >= 1, got {self.resolution_factor}"
            )
        if not 0.0 <= self.fog_intensity <= 1.0:
            raise ParameterError(f"fog_intensity must lie in [0, 1], got {self.fog_intensity}")
        if self.fog_decay < 0:
            raise ParameterError(f"fog_decay must be >= 0, got {self.fog_decay}")
        if self.blur_length < 1 or int(self.blur_length) != self.blur_length:
            raise ParameterError(
                f"blur_length must be an integer >= 1, got {self.blur_length}"
            )


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def corruption_transform(grid, kind, spec, rng):
    """Damaged copy of one grid; output clamped to [0, 1], shape kept."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ContractError(f"expected a 2-D grid, got shape {grid.shape}")
    h, w = grid.shape

    if kind == NoiseKind.GAUSSIAN:
        out = grid + rng.normal(0.0, spec.gaussian_sigma, size=(h, w))
    elif kind == NoiseKind.OCCLUSION:
        side = np.sqrt(spec.occlusion_fraction)
        rh = _round_half_up(h * side)
        rw = _round_half_up(w * side)
        top = int(rng.integers(0, h - rh + 1))
        left = int(rng.integers(0, w - rw + 1))
        out = grid.copy()
        out[top:top + rh, left:left + rw] = 0.5
    elif kind == NoiseKind.RESOLUTION:
        out = kernels.block_resample(grid, int(spec.resolution_factor))
    elif kind == NoiseKind.FOG:
        rows = np.arange(h, dtype=np.float64)[:, None]
        t = spec.fog_intensity * np.exp(-spec.fog_decay * rows / h)
        out = (1.0 - t) * grid + t * 1.0
    elif kind == NoiseKind.MOTION_BLUR:
        length = int(spec.blur_length)
        theta = np.deg2rad(spec.blur_angle_deg)
        offsets = np.arange(length, dtype=np.float64) - (length - 1) / 2.0
        dxs = np.array([_round_half_up(t * np.cos(theta)) for t in offsets], dtype=np.int64)
        dys = np.array([_round_half_up(t * np.sin(theta)) for t in offsets], dtype=np.int64)
        out = kernels.line_blur(grid, dys, dxs)
    else:
        raise ParameterError(f"unknown corruption kind {kind!r}")
    return np.clip(out, 0.0, 1.0)


def inject_corruption(ds, kind, rate, spec, seed):
    """Corrupt a uniform round(rate*n) subset in place (on a copy)."""
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"rate must lie in [0, 1], got {rate}")
    if ds.grid_shape is None:
        raise ContractError("corruption needs grid-shaped instances")
    if isinstance(kind, str):
        if kind not in KIND_NAMES:
            raise ParameterError(f"unknown corruption kind {kind!r}")
        kind = KIND_NAMES[kind]
    n = len(ds)
    k = _round_half_up(rate * n)
    which_rng = np.random.default_rng([seed, 0])
    hit = np.sort(which_rng.choice(n, size=k, replace=False))
    transform_rng = np.random.default_rng([seed, 1, int(kind)])
    out = ds.copy()
    for i in hit:
        out.X[i] = corruption_transform(
            ds.grid(i), kind, spec, transform_rng
        ).ravel()
        out.provenance[i] = Provenance.CORRUPTED
    return out


def inject_open_set(ds, pool, rate, seed):
    """Replace a class-balanced round(rate*n) subset with pool instances.

    Pool entries are used at most once. Counts per class are k // c with
    the remainder spread over seeded distinct classes; a class without
    enough members, or a pool smaller than k, raises CapacityError.
    """
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"rate must lie in [0, 1], got {rate}")
    if pool.dim != ds.dim:
        raise ContractError(
            f"pool width {pool.dim} does not match dataset width {ds.dim}"
        )
    n, c = len(ds), ds.num_classes
    k = _round_half_up(rate * n)
    if k > len(pool):
        raise CapacityError(
            f"need {k} replacement instances, pool holds {len(pool)}"
        )
    which_rng = np.random.default_rng([seed, 2])
    counts = np.full(c, k // c, dtype=np.int64)
    remainder = k - counts.sum()
    if remainder:
        extra = which_rng.choice(c, size=remainder, replace=False)
        counts[extra] += 1
    targets = []
    for cls in range(c):
        members = np.flatnonzero(ds.given_labels == cls)
        if counts[cls] > members.size:
            raise CapacityError(
                f"class {cls} has {members.size} members, cannot replace {int(counts[cls])}"
            )
        picked = which_rng.choice(members, size=int(counts[cls]), replace=False)
        targets.append(picked)
    targets = np.sort(np.concatenate(targets)) if targets else np.empty(0, dtype=np.int64)

    pool_rng = np.random.default_rng([seed, 3])
    sources = pool_rng.choice(len(pool), size=k, replace=False)

    out = ds.copy()
    for dst, src in zip(targets, sources):
        out.X[dst] = pool.X[src]
        out.true_labels[dst] = NO_LABEL
        out.provenance[dst] = Provenance.OPEN_SET
    return out


def apply_noise(ds, route, rate, spec, seed, pool=None):
    """Dispatch on route name: 'open_set' or one of the corruption kinds."""
    if route == OPEN_SET:
        if pool is None:
            raise ContractError("open_set noise requires a replacement pool")
        return inject_open_set(ds, pool, rate, seed)
    if route in KIND_NAMES:
        return inject_corruption(ds, route, rate, spec, seed)
    raise ParameterError(f"unknown noise route {route!r}; valid: {ALL_ROUTES}")
