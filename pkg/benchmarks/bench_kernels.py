"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20]

Each kernel is checked for agreement between backends before timing; the
last table row times one full right-hand-side evaluation (FFTs included).
"""

import argparse
import math
import time

import numpy as np

from alphamodels import _kernels
from alphamodels.models import GalerkinSystem, ModelKind
from alphamodels.experiments import default_physics
from alphamodels.spectral import build_lattice, random_field


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, rng):
    m = 3 * n // 2 + (3 * n // 2) % 2
    u = rng.standard_normal((2, m, m))
    w = rng.standard_normal((2, m, m))
    om = rng.standard_normal((m, m))
    lat = build_lattice(2 * math.pi, n)
    hat = random_field(lat, 1).hat.copy()
    return {
        "flux_product": lambda: _kernels.flux_product(u, w),
        "flux_product_sym": lambda: _kernels.flux_product_sym(u),
        "rotational_product": lambda: _kernels.rotational_product(u, om),
        "leray_project": lambda: _kernels.leray_project(hat, lat.k, lat.k, lat.inv_k2),
    }


def rhs_case(n, model):
    cfg = default_physics(model=ModelKind(model), alpha=0.1 if model != "nse" else 0.0, resolution=n)
    sys_ = GalerkinSystem(cfg)
    u = sys_.initial_state()
    return lambda: sys_.g(u, 0.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    print(f"backends: {backends}")
    print(f"{'kernel':<22}{'N':>6}" + "".join(f"{b + ' [ms]':>14}" for b in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        rng = np.random.default_rng(0)
        cases = kernel_cases(n, rng)
        cases["rhs ns_alpha"] = rhs_case(n, "ns_alpha")
        cases["rhs nse"] = rhs_case(n, "nse")
        for name, fn in cases.items():
            outs, times = {}, {}
            for b in backends:
                _kernels.use_backend(b)
                outs[b] = np.asarray(fn())
                times[b] = best_of(fn, args.repeat)
            if len(backends) == 2:
                ref = outs["numpy"]
                err = np.abs(outs["numba"] - ref).max() / max(np.abs(ref).max(), 1e-300)
                assert err < 1e-13, (name, n, err)
            speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
            row = "".join(f"{1e3 * times[b]:>14.3f}" for b in backends)
            print(f"{name:<22}{n:>6}{row}{speed:>10.2f}")
    _kernels.use_backend(_kernels._default_backend())


if __name__ == "__main__":
    main()
