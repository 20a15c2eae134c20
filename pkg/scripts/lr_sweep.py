#!/usr/bin/env python3
"""Sweep learning rates for one training demo and tabulate the outcomes.

Example:
    python scripts/lr_sweep.py blobs --rates 0.001 0.003 0.01 0.03 --epochs 100
"""

import argparse
import time

from tensorlite.demos import BLOBS_DEFAULTS, XOR_DEFAULTS, run_blobs, run_xor


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=("xor", "blobs"))
    ap.add_argument("--rates", type=float, nargs="+",
                    default=(0.01, 0.05, 0.1, 0.5, 1.0))
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--optimizer", default=None,
                    choices=("sgd", "adam", "rmsprop"))
    args = ap.parse_args()

    runner = run_xor if args.task == "xor" else run_blobs
    defaults = XOR_DEFAULTS if args.task == "xor" else BLOBS_DEFAULTS
    epochs = args.epochs if args.epochs is not None else defaults["epochs"]
    optimizer = args.optimizer or defaults["optimizer"]

    print(f"task={args.task} epochs={epochs} optimizer={optimizer} seed={args.seed}")
    print(f"{'lr':>10}  {'final loss':>12}  {'accuracy':>8}  {'secs':>6}  note")
    for lr in args.rates:
        t0 = time.perf_counter()
        res = runner(seed=args.seed, epochs=epochs, lr=lr, optimizer=optimizer)
        secs = time.perf_counter() - t0
        acc = "-" if res.final_accuracy is None else f"{res.final_accuracy:.3f}"
        note = f"diverged@{res.diverged_at}" if res.diverged_at is not None else ""
        print(f"{lr:>10g}  {res.final_loss:>12.5g}  {acc:>8}  {secs:>6.2f}  {note}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
