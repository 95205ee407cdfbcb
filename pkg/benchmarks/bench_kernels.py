"""Benchmark encoder forward+backward: numba kernels vs the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--dim 300] [--hidden 200] [--length 3]
"""
import argparse
import time

import numpy as np

from hyperdisc import kernels
from hyperdisc.encoders import EncoderConfig, encoder_backward, forward, random_params, sequence_from_array


def step(cfg, params, seq, upstream):
    _, cache = forward(cfg, params, seq)
    encoder_backward(cfg, params, cache, upstream)


def bench(fn, n_warmup=3, n_iter=200):
    """Mean time in ms."""
    for _ in range(n_warmup):
        fn()
    start = time.perf_counter()
    for _ in range(n_iter):
        fn()
    return (time.perf_counter() - start) / n_iter * 1000


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=300)
    ap.add_argument("--hidden", type=int, default=200)
    ap.add_argument("--length", type=int, default=3)
    ap.add_argument("--iters", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    seq = sequence_from_array(rng.normal(size=(args.length, args.dim)))
    backends = {"numpy": kernels.get_kernels("numpy")}
    if kernels.numba_available():
        backends["numba"] = kernels.get_kernels("numba")
    else:
        print("numba not installed; timing numpy only")

    print(f"forward+backward, D={args.dim} H={args.hidden} l={args.length}")
    print(f"{'encoder':<8}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    saved = kernels.active
    try:
        for kind in ("GRU", "LSTM", "CNN", "RCNN"):
            cfg = EncoderConfig(kind, args.dim, args.hidden, cnn_filter_widths=(2,))
            params = random_params(cfg, 0, scale=0.1)
            up = rng.normal(size=cfg.output_dim)
            times, outs = {}, {}
            for name, ns in backends.items():
                kernels.active = ns
                times[name] = bench(lambda: step(cfg, params, seq, up), n_iter=args.iters)
                outs[name] = forward(cfg, params, seq)[0]
            row = f"{kind:<8}" + "".join(f"{times[b]:>9.3f} ms" for b in backends)
            if "numba" in times:
                row += f"  {times['numpy'] / times['numba']:8.1f}x"
                if not np.allclose(outs["numpy"], outs["numba"], rtol=1e-12, atol=1e-14):
                    row += "  WARNING: outputs differ"
            print(row)
    finally:
        kernels.active = saved


if __name__ == "__main__":
    main()
