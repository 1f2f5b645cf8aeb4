"""Compare the compiled and numpy convolution backends.

Times conv forward/backward at head-sized shapes and one boosted inference
episode end to end, once per available backend.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""
import argparse
import json
import timeit

import numpy as np

from fsboost import kernels
from fsboost.boosting import BoostConfig, boosted_inference
from fsboost.data import generate_synthetic, make_folds
from fsboost.embedding import support_relevance
from fsboost.evaluation import draw_episode
from fsboost.head import init_params
from fsboost.presets import BENCHMARK
from fsboost.tensor import Rng

# (label, c_in, c_out, h, w, k)
SHAPES = [
    ("conv1 d=32 12x12", 33, 128, 12, 12, 3),
    ("conv2 12x12", 128, 2, 12, 12, 1),
    ("conv1 d=64 32x32", 65, 128, 32, 32, 3),
]


def best_of(fn, repeat):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def bench_shapes(backend, repeat):
    g = np.random.default_rng(0)
    out = {}
    for label, c_in, c_out, h, w, k in SHAPES:
        x = g.normal(size=(c_in, h, w))
        wt = g.normal(size=(c_out, c_in, k, k))
        b = g.normal(size=c_out)
        up = g.normal(size=(c_out, h, w))
        pad = (k - 1) // 2
        out[label] = {
            "forward": best_of(lambda: backend.conv2d(x, wt, b, pad), repeat),
            "backward": best_of(lambda: backend.conv2d_backward(x, wt, up, pad), repeat),
        }
    return out


def bench_episode(backend, repeat):
    ds = generate_synthetic(BENCHMARK, 3)
    split = make_folds(range(BENCHMARK.num_classes), 4)[0]
    ep = draw_episode(ds, split, 1, 0, 0, 0)
    params = init_params(BENCHMARK.d, Rng(0))
    sup = ep.support_pairs()
    r = support_relevance(sup)
    saved = kernels.active
    kernels.active = backend
    try:
        return best_of(lambda: boosted_inference(params, sup, ep.query.features, r, BoostConfig()), max(3, repeat // 4))
    finally:
        kernels.active = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    results = {}
    for name, mod in sorted(backends.items()):
        results[name] = {"shapes": bench_shapes(mod, args.repeat), "boosted_episode": bench_episode(mod, args.repeat)}

    names = sorted(results)
    print(f"{'case':32s}" + "".join(f"{n:>14s}" for n in names) + ("      speedup" if len(names) == 2 else ""))
    rows = []
    for label, *_ in SHAPES:
        for op in ("forward", "backward"):
            rows.append((f"{label} {op}", [results[n]["shapes"][label][op] for n in names]))
    rows.append(("boosted episode (N=10)", [results[n]["boosted_episode"] for n in names]))
    for label, vals in rows:
        line = f"{label:32s}" + "".join(f"{v * 1e6:12.1f}us" for v in vals)
        if len(vals) == 2:
            # names sort as cython, python
            line += f"{vals[1] / vals[0]:12.2f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=1)


if __name__ == "__main__":
    main()
