"""Finite-difference gradient oracle.

The numeric side never touches the tape: probes run with recording off and
use only forward evaluations. Central differences with a per-element step
eps_fd*max(1, |theta_i|); the denominator uses the actually stored float32
probe values, not the nominal step.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import nn
from . import core as T
from .autograd import backward, no_grad, reset_tape
from .errors import DeterminismError, ShapeError

DEFAULT_RTOL = 1e-2
DEFAULT_ATOL = 1e-3
DEFAULT_EPS_FD = 1e-3

MAX_PARAM_ELEMENTS = 512  # finite differences are slow; keep suites in seconds


@dataclass
class ParamRow:
    name: str
    max_abs_err: float
    max_rel_err: float
    worst_index: int
    passed: bool


@dataclass
class GradReport:
    rows: list = field(default_factory=list)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    eps_fd: float = DEFAULT_EPS_FD

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_text(self) -> str:
        lines = [
            f"{r.name} {r.max_abs_err:.3e} {r.max_rel_err:.3e} "
            f"{r.worst_index} {'PASS' if r.passed else 'FAIL'}"
            for r in self.rows
        ]
        lines.append(f"OVERALL {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _scalar_value(out) -> float:
    if not isinstance(out, T.Tensor):
        raise ShapeError("checked function must return a Tensor")
    if out.size != 1:
        raise ShapeError(f"checked function must be scalar-valued, got shape {out.shape}")
    return out.flat()[0]


def finite_difference_gradient(f, params: dict, eps_fd=DEFAULT_EPS_FD) -> dict:
    """Central differences of the scalar f() w.r.t. each named tensor.

    Perturbs elements in place and restores them; returns {name: list of
    derivative estimates in flat order}. Probes run with recording off.
    """
    grads = {}
    with no_grad():
        for name, theta in params.items():
            if theta.size > MAX_PARAM_ELEMENTS:
                raise ShapeError(
                    f"parameter {name} has {theta.size} elements, "
                    f"cap is {MAX_PARAM_ELEMENTS}"
                )
            vals = theta.flat()
            out = [0.0] * theta.size
            for i, old in enumerate(vals):
                step = eps_fd * max(1.0, abs(old))
                theta.set_flat(i, old + step)
                hi = theta.flat()[i]  # the value that was actually stored
                lp = _scalar_value(f())
                theta.set_flat(i, old - step)
                lo = theta.flat()[i]
                lm = _scalar_value(f())
                theta.set_flat(i, old)
                denom = hi - lo
                out[i] = (lp - lm) / denom if denom else math.nan
            grads[name] = out
    return grads


def check_function(f, params: dict, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                   eps_fd=DEFAULT_EPS_FD, name_prefix="") -> GradReport:
    """Compare analytic gradients of the scalar f() against the oracle."""
    report = GradReport(rtol=rtol, atol=atol, eps_fd=eps_fd)
    reset_tape()  # each check records exactly one small graph

    with no_grad():
        first = _scalar_value(f())
        second = _scalar_value(f())
    if first != second and not (math.isnan(first) and math.isnan(second)):
        raise DeterminismError(
            f"two evaluations differ ({first!r} vs {second!r}); "
            "freeze masks/seeds before checking"
        )

    loss = f()
    # a constant function records nothing; its gradients are identically zero
    store = backward(loss) if loss.node is not None else None
    numeric = finite_difference_gradient(f, params, eps_fd=eps_fd)

    for name, theta in params.items():
        g = store.get(theta) if store is not None else None
        analytic = g.flat() if g is not None else [0.0] * theta.size
        nks = numeric[name]
        max_abs = 0.0
        max_rel = 0.0
        worst = 0
        ok = True
        for i, (a, n) in enumerate(zip(analytic, nks)):
            diff = abs(a - n)
            scale = max(abs(a), abs(n))
            if not diff <= atol + rtol * scale:  # NaN-safe: NaN fails
                ok = False
            if diff > max_abs or math.isnan(diff):
                max_abs = diff
                worst = i
            rel = diff / scale if scale else (0.0 if diff == 0.0 else math.inf)
            if rel > max_rel or math.isnan(rel):
                max_rel = rel
        report.rows.append(ParamRow(name_prefix + name, max_abs, max_rel, worst, ok))
    return report


def check_gradients(build, seeds=(0, 1, 2), rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                    eps_fd=DEFAULT_EPS_FD) -> GradReport:
    """Run check_function over freshly built (f, params) for each seed."""
    report = GradReport(rtol=rtol, atol=atol, eps_fd=eps_fd)
    for seed in seeds:
        f, params = build(seed)
        sub = check_function(f, params, rtol=rtol, atol=atol, eps_fd=eps_fd,
                             name_prefix=f"seed{seed}/")
        report.rows.extend(sub.rows)
    return report


# ---------------------------------------------------------------------------
# the standard suite: builders returning (f, named params) per seed


def _rand(rng, shape, lo=-1.0, hi=1.0, grad=True):
    return T.uniform(shape, lo, hi, rng=rng, requires_grad=grad)


def _signed_off_zero(rng, shape, lo=0.1, hi=1.0):
    """Magnitudes in [lo, hi) with random signs: clear of kinks at 0."""
    n = 1
    for s in shape:
        n *= s
    vals = [rng.uniform(lo, hi) * (1.0 if rng.random() < 0.5 else -1.0)
            for _ in range(n)]
    return T.from_flat(vals, shape, requires_grad=True)


def _distinct(rng, shape, gap=0.1):
    """Pairwise-separated values so max() ties cannot flip under probing."""
    n = 1
    for s in shape:
        n *= s
    vals = [k * gap + rng.uniform(0.0, gap * 0.3) for k in range(n)]
    rng.shuffle(vals)
    return T.from_flat(vals, shape, requires_grad=True)


def _weighted_sum(out, c):
    return T.sum(T.mul(out, c))


def _const(rng, shape):
    return _rand(rng, shape, grad=False)


def _binary_builder(op):
    def build(seed):
        rng = random.Random(seed)
        a = _rand(rng, (3, 1, 4))
        b = _rand(rng, (2, 4))
        if op is T.div:
            b = _signed_off_zero(rng, (2, 4), lo=0.5, hi=1.5)
        c = _const(rng, (3, 2, 4))
        return (lambda: _weighted_sum(op(a, b), c)), {"a": a, "b": b}

    return build


def _unary_builder(op, sampler=None):
    def build(seed):
        rng = random.Random(seed)
        x = sampler(rng) if sampler else _rand(rng, (3, 4))
        c = _const(rng, x.shape)
        return (lambda: _weighted_sum(op(x), c)), {"x": x}

    return build


def _build_sum(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 4))
    c = _const(rng, (4,))
    return (lambda: _weighted_sum(T.sum(x, axis=0), c)), {"x": x}


def _build_mean(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 4))
    c = _const(rng, (3,))
    return (lambda: _weighted_sum(T.mean(x, axis=1), c)), {"x": x}


def _build_max(seed):
    rng = random.Random(seed)
    x = _distinct(rng, (3, 4))
    c = _const(rng, (3,))
    return (lambda: _weighted_sum(T.max(x, axis=1), c)), {"x": x}


def _build_matmul(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 4))
    w = _rand(rng, (2, 4))
    c = _const(rng, (3, 2))
    return (lambda: _weighted_sum(T.matmul(x, w), c)), {"x": x, "w": w}


def _build_reshape(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 4))
    c = _const(rng, (6, 2))
    return (lambda: _weighted_sum(T.reshape(x, (6, 2)), c)), {"x": x}


def _build_transpose(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 4))
    c = _const(rng, (4, 3))
    return (lambda: _weighted_sum(T.transpose2d(x), c)), {"x": x}


def _build_broadcast(seed):
    rng = random.Random(seed)
    x = _rand(rng, (3, 1))
    c = _const(rng, (2, 3, 4))
    return (lambda: _weighted_sum(T.broadcast_to(x, (2, 3, 4)), c)), {"x": x}


def _build_dense(seed):
    rng = random.Random(seed)
    layer = nn.Dense(4, 2, rng=rng)
    x = _rand(rng, (3, 4))
    c = _const(rng, (3, 2))
    params = {"x": x, "w": layer.weight, "b": layer.bias}
    return (lambda: _weighted_sum(layer(x), c)), params


def _build_conv2d(seed):
    rng = random.Random(seed)
    layer = nn.Conv2D(2, 2, 3, stride=2, padding=1, rng=rng)
    x = _rand(rng, (2, 2, 5, 5))
    c = _const(rng, (2, 2, 3, 3))
    params = {"x": x, "w": layer.weight, "b": layer.bias}
    return (lambda: _weighted_sum(layer(x), c)), params


def _build_batchnorm(seed):
    rng = random.Random(seed)
    layer = nn.BatchNorm(3)
    # rows get graded offsets so every feature's batch variance stays ~0.8,
    # keeping 1/sqrt(var+eps) factors tame for the finite-difference probes
    vals = [(r - 1.5) * 0.8 + rng.uniform(-0.3, 0.3)
            for r in range(4) for _ in range(3)]
    x = T.from_flat(vals, (4, 3), requires_grad=True)
    c = _const(rng, (4, 3))
    params = {"x": x, "gamma": layer.gamma, "beta": layer.beta}
    return (lambda: _weighted_sum(layer(x), c)), params


def _build_dropout(seed):
    rng = random.Random(seed)
    x = _rand(rng, (4, 4))
    # frozen mask: drawn once, then the checked map is a plain Hadamard
    scale = 1.0 / (1.0 - 0.3)
    mask = T.from_flat(
        [0.0 if rng.random() < 0.3 else scale for _ in range(16)], (4, 4)
    )
    c = _const(rng, (4, 4))
    return (lambda: _weighted_sum(T.mul(x, mask), c)), {"x": x}


def _build_cross_entropy(seed):
    rng = random.Random(seed)
    x = _rand(rng, (4, 3))
    labels = [rng.randrange(3) for _ in range(4)]
    return (lambda: nn.cross_entropy(x, labels)), {"logits": x}


def _build_mse(seed):
    rng = random.Random(seed)
    x = _rand(rng, (5,))
    y = _rand(rng, (5,))
    return (lambda: nn.mse(x, y)), {"pred": x, "target": y}


STANDARD_CHECKS = {
    "add": _binary_builder(T.add),
    "sub": _binary_builder(T.sub),
    "mul": _binary_builder(T.mul),
    "div": _binary_builder(T.div),
    "neg": _unary_builder(T.neg),
    "exp": _unary_builder(T.exp),
    "log": _unary_builder(T.log, lambda rng: _rand(rng, (3, 4), 0.5, 2.0)),
    "sqrt": _unary_builder(T.sqrt, lambda rng: _rand(rng, (3, 4), 0.5, 2.0)),
    "abs": _unary_builder(T.absolute, lambda rng: _signed_off_zero(rng, (3, 4))),
    "sum": _build_sum,
    "mean": _build_mean,
    "max": _build_max,
    "matmul": _build_matmul,
    "reshape": _build_reshape,
    "transpose": _build_transpose,
    "broadcast": _build_broadcast,
    "dense": _build_dense,
    "conv2d": _build_conv2d,
    "relu": _unary_builder(nn.relu, lambda rng: _signed_off_zero(rng, (3, 4))),
    "sigmoid": _unary_builder(nn.sigmoid),
    "tanh": _unary_builder(nn.tanh),
    "gelu": _unary_builder(nn.gelu),
    "batchnorm": _build_batchnorm,
    "dropout": _build_dropout,
    "cross_entropy": _build_cross_entropy,
    "mse": _build_mse,
}


def run_suite(only=None, seeds=(0, 1, 2), rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              eps_fd=DEFAULT_EPS_FD):
    """Check every registered op (or just `only`); returns (passed, text)."""
    names = [only] if only else list(STANDARD_CHECKS)
    unknown = [n for n in names if n not in STANDARD_CHECKS]
    if unknown:
        raise KeyError(f"unknown gradcheck target(s): {', '.join(unknown)}")
    lines = []
    all_pass = True
    for name in names:
        report = check_gradients(STANDARD_CHECKS[name], seeds=seeds,
                                 rtol=rtol, atol=atol, eps_fd=eps_fd)
        all_pass &= report.passed
        lines.append(f"== {name}")
        for r in report.rows:
            lines.append(
                f"{r.name} {r.max_abs_err:.3e} {r.max_rel_err:.3e} "
                f"{r.worst_index} {'PASS' if r.passed else 'FAIL'}"
            )
    lines.append(f"OVERALL {'PASS' if all_pass else 'FAIL'}")
    return all_pass, "\n".join(lines)
