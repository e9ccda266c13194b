"""Wall time of fixed-epoch network training against dataset size, plain and Sobolev.

    python3 scripts/training_time.py --dim 30 --epochs 20 --sizes 250 500 1000 2000 4000
"""

import argparse
import time

import numpy as np

from bsmobo.core import RngStream
from bsmobo.surrogate import TrainingConfig, train_network


def timed(N: int, n: int, sobolev: bool, epochs: int, repeats: int) -> float:
    r = np.random.default_rng(N)
    X, y, G = r.random((N, n)), r.standard_normal(N), r.standard_normal((N, n))
    best = np.inf
    for i in range(repeats):
        t = time.perf_counter()
        train_network(X, y, G if sobolev else None, TrainingConfig(epochs=epochs), RngStream(i))
        best = min(best, time.perf_counter() - t)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=30)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000])
    args = ap.parse_args()
    print("N,plain_seconds,sobolev_seconds,ratio")
    for N in args.sizes:
        tp = timed(N, args.dim, False, args.epochs, args.repeats)
        ts = timed(N, args.dim, True, args.epochs, args.repeats)
        print(f"{N},{tp:.4f},{ts:.4f},{ts / tp:.3f}")


if __name__ == "__main__":
    main()
