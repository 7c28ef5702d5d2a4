"""Timing comparison: compiled gate kernels vs the numpy fallback.

Measures the per-batch hot kernels in isolation and a full
forward/backward/update step at the production sizes (430 features,
256 hidden units).  Run after an editable install:

    python benchmarks/bench_kernels.py [--rows 4096] [--repeat 30]
"""

import argparse
import time

import numpy as np

from wikitraffic.neuralnet import backends
from wikitraffic.neuralnet.model import mae_loss_grad, model_backward, model_forward
from wikitraffic.neuralnet.params import TrainConfig, init_params, params_as_dict
from wikitraffic.neuralnet.training import RMSPropState, rmsprop_update


def timeit(fn, repeat):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(rows, hidden, repeat):
    rng = np.random.default_rng(0)
    A = np.ascontiguousarray(rng.normal(0, 2, (rows, 4 * hidden)))
    c_prev = np.ascontiguousarray(rng.normal(0, 1, (rows, hidden)))
    dh = np.ascontiguousarray(rng.normal(size=(rows, hidden)))
    dc = np.zeros_like(dh)
    param = rng.normal(size=rows * hidden)
    grad = rng.normal(size=rows * hidden)
    accum = rng.uniform(0.1, 1.0, rows * hidden)

    results = {}
    for name in backends.available_backends():
        impl = backends.get_backend(name)
        G, c, ct, h = impl.gate_forward(A, c_prev)
        results[name] = {
            "gate_forward": timeit(lambda: impl.gate_forward(A, c_prev), repeat),
            "gate_backward": timeit(
                lambda: impl.gate_backward(G, ct, c_prev, dh, dc), repeat
            ),
            "rmsprop_step": timeit(
                lambda: impl.rmsprop_step(param, grad, accum, 1e-3, 0.9, 1e-7), repeat
            ),
        }
    return results


def bench_full_step(rows, features, hidden, horizon, repeat):
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (rows, features))
    y = rng.uniform(0, 5, (rows, horizon))
    cfg = TrainConfig(hidden_size=hidden, dropout=0.3, seed=0)
    results = {}
    saved = backends.backend_name()
    try:
        for name in backends.available_backends():
            backends.set_backend(name)
            lstm, dense = init_params(features, horizon, cfg)
            params = params_as_dict(lstm, dense)
            state = RMSPropState.for_params(lstm, dense)
            step_rng = np.random.default_rng(2)

            def step():
                pred, cache = model_forward(
                    lstm, dense, X, dropout=0.3, train_mode=True, rng=step_rng
                )
                _, d_pred = mae_loss_grad(pred, y)
                grads = model_backward(lstm, dense, cache, d_pred)
                rmsprop_update(params, grads, state, cfg)

            results[name] = {"train_step": timeit(step, repeat)}
    finally:
        backends.set_backend(saved)
    return results


def print_table(title, results):
    print(f"\n{title}")
    kernels = list(next(iter(results.values())).keys())
    names = list(results.keys())
    header = f"{'kernel':<16}" + "".join(f"{n:>14}" for n in names)
    if names == ["cython", "python"]:
        header += f"{'py/cy':>9}"
    print(header)
    for k in kernels:
        row = f"{k:<16}" + "".join(f"{results[n][k] * 1e3:>12.3f}ms" for n in names)
        if names == ["cython", "python"]:
            row += f"{results['python'][k] / results['cython'][k]:>8.2f}x"
        print(row)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--features", type=int, default=430)
    ap.add_argument("--hidden", type=int, default=256)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=30)
    args = ap.parse_args()

    print(f"available backends: {backends.available_backends()}")
    print(f"rows={args.rows} features={args.features} hidden={args.hidden}")
    print_table(
        "elementwise kernels (best of repeats)",
        bench_kernels(args.rows, args.hidden, args.repeat),
    )
    print_table(
        "full train step (forward + backward + update)",
        bench_full_step(args.rows, args.features, args.hidden, args.horizon,
                        max(3, args.repeat // 5)),
    )


if __name__ == "__main__":
    main()
