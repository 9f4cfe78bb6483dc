"""Compare the numba and numpy im2col/col2im kernels, then a few training epochs per backend.

    python benchmarks/bench_kernels.py [--repeat 50] [--epochs 3]

Kernel timings run in-process (both backends are always importable). Epoch
timings run in subprocesses so that RELAPSEGAN_NUMBA selects the backend the
layers actually use.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from relapsegan.tensornet.kernels import col2im_numba, col2im_numpy, im2col_numba, im2col_numpy

# (batch, height, width, channels, kernel, stride, pad) for the two discriminator convolutions
# and the generator's output convolution, at the training batch size
SHAPES = [
    (256, 10, 10, 2, 3, 1, 1),
    (256, 10, 10, 16, 3, 2, 1),
    (128, 10, 10, 16, 3, 1, 1),
]

EPOCH_SCRIPT = """
import time, numpy as np
from relapsegan import gan
from relapsegan.tensornet import BACKEND
from relapsegan._accel import tune_allocator
tune_allocator()
rng = np.random.default_rng(0)
x = rng.uniform(size=(900, 2, 10, 10))
y = np.arange(900) % 2
gan.train(x[:130], y[:130], gan.TrainConfig(epochs=1, seed=0))  # warm-up / jit
t = time.perf_counter()
gan.train(x, y, gan.TrainConfig(epochs={epochs}, seed=0))
print(BACKEND, (time.perf_counter() - t) / {epochs})
"""


def bench_kernels(repeat):
    print(f"{'shape':>34}  {'im2col np':>10} {'im2col nb':>10}  {'col2im np':>10} {'col2im nb':>10}  (ms)")
    for n, h, w, c, k, s, p in SHAPES:
        x = np.random.default_rng(0).normal(size=(n, h, w, c))
        cols = im2col_numpy(x, k, s, p)
        assert np.array_equal(cols, im2col_numba(x, k, s, p))
        im2col_numba(x, k, s, p), col2im_numba(cols, x.shape, k, s, p)  # compile
        times = [
            timeit.timeit(lambda: im2col_numpy(x, k, s, p), number=repeat),
            timeit.timeit(lambda: im2col_numba(x, k, s, p), number=repeat),
            timeit.timeit(lambda: col2im_numpy(cols, x.shape, k, s, p), number=repeat),
            timeit.timeit(lambda: col2im_numba(cols, x.shape, k, s, p), number=repeat),
        ]
        ms = [1000 * t / repeat for t in times]
        label = f"{(n, h, w, c)} k{k} s{s} p{p}"
        print(f"{label:>34}  {ms[0]:10.3f} {ms[1]:10.3f}  {ms[2]:10.3f} {ms[3]:10.3f}")


def bench_epochs(epochs):
    for flag in ("0", "1"):
        env = dict(os.environ, RELAPSEGAN_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", EPOCH_SCRIPT.format(epochs=epochs)],
            env=env, capture_output=True, text=True, check=True,
        )
        backend, secs = out.stdout.split()
        print(f"epoch on 900 images, backend {backend}: {float(secs):.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=3)
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_epochs(args.epochs)


if __name__ == "__main__":
    main()
