"""Time the jitted kernels against their pure-numpy fallbacks.

Runs every kernel pair on a pipeline-sized workload and on a larger
stress workload, checks that the two implementations agree, and prints
one table row per case. Compilation happens before timing so the jitted
column measures steady-state cost only.

Usage:
    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import timeit

import numpy as np

from inscorr import kernels
from inscorr.kernels import (
    HAVE_NUMBA,
    _adam_update_nb,
    _adam_update_np,
    _block_resample_nb,
    _block_resample_np,
    _line_blur_nb,
    _line_blur_np,
    _softmax_xent_nb,
    _softmax_xent_np,
    _xent_backward_nb,
    _xent_backward_np,
)

ADAM_ARGS = (0.001, 0.9, 0.999, 1e-8, 0.09999999, 0.000999999)


def _best_ms(fn, number, repeats):
    times = timeit.repeat(fn, number=number, repeat=repeats)
    return min(times) / number * 1e3


def _max_diff(a, b):
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def _xent_case(rng, batch, classes):
    logits = rng.normal(size=(batch, classes))
    labels = rng.integers(classes, size=batch)
    out_np = _softmax_xent_np(logits, labels)
    out_nb = _softmax_xent_nb(logits, labels)
    diff = max(_max_diff(out_np[0], out_nb[0]), _max_diff(out_np[1], out_nb[1]))
    return (lambda: _softmax_xent_np(logits, labels),
            lambda: _softmax_xent_nb(logits, labels), diff)


def _backward_case(rng, batch, classes):
    logits = rng.normal(size=(batch, classes))
    labels = rng.integers(classes, size=batch)
    _, probs = _softmax_xent_np(logits, labels)
    gout = rng.normal(size=batch)
    diff = _max_diff(_xent_backward_np(probs, labels, gout),
                     _xent_backward_nb(probs, labels, gout))
    return (lambda: _xent_backward_np(probs, labels, gout),
            lambda: _xent_backward_nb(probs, labels, gout), diff)


def _adam_case(rng, size):
    g = rng.normal(size=size)
    state_np = [rng.normal(size=size), np.zeros(size), np.zeros(size)]
    state_nb = [s.copy() for s in state_np]
    _adam_update_np(state_np[0], g, state_np[1], state_np[2], *ADAM_ARGS)
    _adam_update_nb(state_nb[0], g, state_nb[1], state_nb[2], *ADAM_ARGS)
    diff = max(_max_diff(a, b) for a, b in zip(state_np, state_nb))
    return (lambda: _adam_update_np(state_np[0], g, state_np[1], state_np[2], *ADAM_ARGS),
            lambda: _adam_update_nb(state_nb[0], g, state_nb[1], state_nb[2], *ADAM_ARGS),
            diff)


def _blur_case(rng, side, k):
    grid = rng.uniform(size=(side, side))
    taps = np.arange(k, dtype=np.int64) - k // 2
    zeros = np.zeros(k, dtype=np.int64)
    diff = _max_diff(_line_blur_np(grid, zeros, taps), _line_blur_nb(grid, zeros, taps))
    return (lambda: _line_blur_np(grid, zeros, taps),
            lambda: _line_blur_nb(grid, zeros, taps), diff)


def _resample_case(rng, side, factor):
    grid = rng.uniform(size=(side, side))
    diff = _max_diff(_block_resample_np(grid, factor), _block_resample_nb(grid, factor))
    return (lambda: _block_resample_np(grid, factor),
            lambda: _block_resample_nb(grid, factor), diff)


def build_cases(rng):
    return [
        ("softmax_xent 128x4", 2000, *_xent_case(rng, 128, 4)),
        ("softmax_xent 4096x16", 50, *_xent_case(rng, 4096, 16)),
        ("xent_backward 128x4", 2000, *_backward_case(rng, 128, 4)),
        ("xent_backward 4096x16", 50, *_backward_case(rng, 4096, 16)),
        ("adam_update 17k", 500, *_adam_case(rng, 17_000)),
        ("adam_update 1M", 10, *_adam_case(rng, 1_000_000)),
        ("line_blur 16x16 k=5", 2000, *_blur_case(rng, 16, 5)),
        ("line_blur 256x256 k=9", 20, *_blur_case(rng, 256, 9)),
        ("block_resample 16x16 f=4", 2000, *_resample_case(rng, 16, 4)),
        ("block_resample 256x256 f=4", 50, *_resample_case(rng, 256, 4)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timeit repeats per case; the minimum is reported")
    args = parser.parse_args(argv)

    if not HAVE_NUMBA:
        print("numba is not importable; both columns run the numpy fallback")
    kernels.warmup()

    cases = build_cases(np.random.default_rng(0))
    width = max(len(name) for name, *_ in cases)
    print(f"{'kernel':<{width}}  {'numpy ms':>10}  {'numba ms':>10}  "
          f"{'speedup':>8}  {'max diff':>9}")
    worst = 0.0
    for name, number, fn_np, fn_nb, diff in cases:
        ms_np = _best_ms(fn_np, number, args.repeats)
        ms_nb = _best_ms(fn_nb, number, args.repeats)
        worst = max(worst, diff)
        print(f"{name:<{width}}  {ms_np:>10.4f}  {ms_nb:>10.4f}  "
              f"{ms_np / ms_nb:>7.1f}x  {diff:>9.1e}")
    print(f"largest backend disagreement: {worst:.1e}"
          f" ({'ok' if worst < 1e-12 else 'UNEXPECTED'})")
    return 0 if worst < 1e-12 else 1


if __name__ == "__main__":
    raise SystemExit(main())
