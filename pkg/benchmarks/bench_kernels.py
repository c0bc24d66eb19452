"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; outputs are
checked for agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from labelbridge.substrate import kernels


def _gru_inputs(g, batch, steps, hidden):
    xp = g.normal(size=(batch, steps, 3 * hidden))
    us = [g.normal(scale=0.3, size=(hidden, hidden)) for _ in range(3)]
    return xp, us, np.zeros((batch, hidden))


def _hmm_inputs(g, n, steps, latent):
    lik = g.random((n, steps, latent)) + 0.05
    start = g.dirichlet(np.ones(latent))
    trans = g.dirichlet(np.ones(latent), size=latent)
    return lik, start, trans


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _close(a, b):
    if isinstance(a, (tuple, list)):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def cases(g):
    xp, us, h0 = _gru_inputs(g, 16, 24, 32)
    hs, cache = kernels.gru_forward(xp, *us, h0)
    dhs = g.normal(size=hs.shape)
    lik, start, trans = _hmm_inputs(g, 512, 12, 6)
    return {
        "gru_forward B16 T24 H32": lambda: kernels.gru_forward(xp, *us, h0),
        "gru_backward B16 T24 H32": lambda: kernels.gru_backward(dhs, cache, *us),
        "hmm_posteriors N512 T12 L6": lambda: kernels.hmm_posteriors(lik, start, trans),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20, help="timing repetitions (best is kept)")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not built; only the numpy backend is available")
    backends = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    prev = kernels.BACKEND
    try:
        rows = []
        for name in cases(np.random.default_rng(0)):
            times, outs = {}, {}
            for b in backends:
                kernels.use_backend(b)
                fn = cases(np.random.default_rng(0))[name]
                times[b], outs[b] = _time(fn, args.repeat)
            agree = _close(outs["python"], outs["cython"]) if len(backends) == 2 else True
            rows.append((name, times, agree))
    finally:
        kernels.use_backend(prev)
    print(f"{'kernel':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}  agree")
    for name, times, agree in rows:
        py = times["python"] * 1e3
        cy = times.get("cython")
        cy_s = f"{cy * 1e3:10.3f}" if cy is not None else f"{'-':>10s}"
        sp = f"{times['python'] / cy:8.1f}" if cy else f"{'-':>8s}"
        print(f"{name:28s} {py:10.3f} {cy_s} {sp}  {agree}")


if __name__ == "__main__":
    main()
