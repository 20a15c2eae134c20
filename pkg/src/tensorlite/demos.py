"""Small end-to-end training runs used by the CLI and the test suite.

Both tasks are synthetic, so nothing ships besides code. Logs are plain
`epoch,loss[,accuracy]` lines with repr-formatted floats; identical configs
reproduce them bit for bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import nn
from . import core as T
from .autograd import backward, reset_tape
from .optim import SGD, Adam, RMSprop, step_all


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr=lr)
    if name == "adam":
        return Adam(lr=lr)
    if name == "rmsprop":
        return RMSprop(lr=lr)
    raise ValueError(f"unknown optimizer {name!r} (expected sgd|adam|rmsprop)")


@dataclass
class DemoResult:
    lines: list = field(default_factory=list)
    final_loss: float = math.nan
    final_accuracy: float | None = None
    diverged_at: int | None = None  # epoch where the loss went NaN, if any


XOR_DEFAULTS = {"epochs": 5000, "lr": 0.5, "optimizer": "sgd"}
BLOBS_DEFAULTS = {"epochs": 200, "lr": 0.01, "optimizer": "adam"}


def run_xor(seed=0, epochs=5000, lr=0.5, optimizer="sgd") -> DemoResult:
    """2-8-1 tanh/sigmoid network on the four XOR points, MSE loss."""
    rng = random.Random(seed)
    x = T.tensor([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = T.tensor([[0.0], [1.0], [1.0], [0.0]])
    model = nn.Sequential(
        nn.Dense(2, 8, rng=rng), nn.Tanh(),
        nn.Dense(8, 1, rng=rng), nn.Sigmoid(),
    )
    opt = make_optimizer(optimizer, lr)
    params = model.parameters()
    res = DemoResult()

    for epoch in range(epochs):
        reset_tape()
        loss = nn.mse(model(x), y)
        lv = loss.item()
        res.lines.append(f"{epoch},{lv!r}")
        if math.isnan(lv):
            res.diverged_at = epoch
            return res
        store = backward(loss)
        step_all(opt, params, store)

    reset_tape()
    res.final_loss = nn.mse(model(x), y).item()
    res.lines.append(f"final,{res.final_loss!r}")
    if math.isnan(res.final_loss):
        res.diverged_at = epochs
    return res


def _blob_data(rng, per_class=100):
    xs = []
    labels = []
    for label, (cx, cy) in enumerate(((-2.0, -2.0), (2.0, 2.0))):
        for _ in range(per_class):
            xs.append([rng.gauss(cx, 1.0), rng.gauss(cy, 1.0)])
            labels.append(label)
    return T.tensor(xs), labels


def _accuracy(logits, labels) -> float:
    vals = logits.flat()
    b, c = logits.shape
    hits = 0
    for i, want in enumerate(labels):
        row = vals[i * c : (i + 1) * c]
        best = 0
        for j in range(1, c):
            if row[j] > row[best]:
                best = j
        hits += best == want
    return hits / b


def run_blobs(seed=0, epochs=200, lr=0.01, optimizer="adam") -> DemoResult:
    """Two-Gaussian 2-d classification, dense-relu-dense with cross-entropy."""
    rng = random.Random(seed)
    x, labels = _blob_data(rng)  # data first, then layer init, one stream
    model = nn.Sequential(
        nn.Dense(2, 16, rng=rng), nn.ReLU(),
        nn.Dense(16, 2, rng=rng),
    )
    opt = make_optimizer(optimizer, lr)
    params = model.parameters()
    res = DemoResult()

    for step in range(epochs):
        reset_tape()
        logits = model(x)
        loss = nn.cross_entropy(logits, labels)
        lv = loss.item()
        acc = _accuracy(logits, labels)
        res.lines.append(f"{step},{lv!r},{acc!r}")
        if math.isnan(lv):
            res.diverged_at = step
            return res
        store = backward(loss)
        step_all(opt, params, store)

    reset_tape()
    logits = model(x)
    res.final_loss = nn.cross_entropy(logits, labels).item()
    res.final_accuracy = _accuracy(logits, labels)
    res.lines.append(f"final,{res.final_loss!r},{res.final_accuracy!r}")
    if math.isnan(res.final_loss):
        res.diverged_at = epochs
    return res
