"""Layers, activations, and losses on top of the tensor core.

Most layers compose recorded primitives, so their pullbacks come for free.
Conv2D and cross_entropy are fused primitives with hand-written pullbacks;
the pointwise activations are fused as well. Labels are 0-based.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import core as T
from .autograd import no_grad, record
from .errors import ShapeError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _normalize_rng(rng) -> random.Random:
    if rng is None:
        return random.Random()
    if isinstance(rng, int):
        return random.Random(rng)
    return rng


class Layer:
    """Base class: a forward map plus named parameters, buffers, and a mode."""

    def __init__(self):
        self.mode = "train"

    def forward(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def set_mode(self, mode: str):
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        self.mode = mode
        return self

    def named_parameters(self):
        return []

    def named_buffers(self):
        return []

    def parameters(self):
        seen = set()
        out = []
        for _, p in self.named_parameters():
            if id(p) not in seen:
                seen.add(id(p))
                out.append(p)
        return out


class Dense(Layer):
    """y = x W^T + b with W: (out, in), both initialized uniform +-1/sqrt(in)."""

    def __init__(self, in_features: int, out_features: int, bias=True, rng=None):
        super().__init__()
        rng = _normalize_rng(rng)
        bound = 1.0 / math.sqrt(in_features)
        self.weight = T.uniform((out_features, in_features), -bound, bound,
                                rng=rng, requires_grad=True)
        self.bias = None
        if bias:
            self.bias = T.uniform((out_features,), -bound, bound,
                                  rng=rng, requires_grad=True)

    def forward(self, x):
        y = T.matmul(x, self.weight)
        if self.bias is not None:
            y = T.add(y, self.bias)
        return y

    def named_parameters(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out


# ---------------------------------------------------------------------------
# pointwise activations (fused primitives; derivative applied in the pullback)


def _pointwise(kind, x, fn, deriv_from_input, dfn):
    """dfn maps a saved value (input or output, per deriv_from_input) to f'."""
    xs = x.flat()
    out = T.from_flat([fn(v) for v in xs], x.shape)
    src = xs if deriv_from_input else None

    def pull(g):
        vals = src if src is not None else out.flat()
        return T.mul(g, T.from_flat([dfn(v) for v in vals], x.shape))

    return record(kind, (x,), out, (pull,), saved=(x if deriv_from_input else out,))


def relu(x):
    return _pointwise("relu", x,
                      lambda v: v if v > 0.0 else 0.0,
                      True, lambda v: 1.0 if v > 0.0 else 0.0)


def _sigmoid_scalar(v: float) -> float:
    # split on sign so exp never overflows
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def sigmoid(x):
    return _pointwise("sigmoid", x, _sigmoid_scalar,
                      False, lambda y: y * (1.0 - y))


def tanh(x):
    return _pointwise("tanh", x, math.tanh,
                      False, lambda y: 1.0 - y * y)


def _gelu_scalar(v: float) -> float:
    return 0.5 * v * (1.0 + math.erf(v / _SQRT2))


def _gelu_deriv(v: float) -> float:
    cdf = 0.5 * (1.0 + math.erf(v / _SQRT2))
    pdf = _INV_SQRT_2PI * math.exp(-0.5 * v * v)
    return cdf + v * pdf


def gelu(x):
    """Exact erf-based form 0.5 x (1 + erf(x/sqrt(2)))."""
    return _pointwise("gelu", x, _gelu_scalar, True, _gelu_deriv)


class ReLU(Layer):
    def forward(self, x):
        return relu(x)


class Sigmoid(Layer):
    def forward(self, x):
        return sigmoid(x)


class Tanh(Layer):
    def forward(self, x):
        return tanh(x)


class GELU(Layer):
    def forward(self, x):
        return gelu(x)


# ---------------------------------------------------------------------------
# convolution


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: tuple  # (K_h, K_w)
    stride: int = 1
    padding: int = 0

    def out_extent(self, h: int, w: int):
        kh, kw = self.kernel
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"kernel {self.kernel} with padding {self.padding} does not fit "
                f"a {h}x{w} input"
            )
        return oh, ow


def conv2d(x, w, bias, spec: ConvSpec):
    """Zero-padded 2-D cross-correlation, fused as one tape node.

    x: (B, C_in, H, W), w: (C_out, C_in, K_h, K_w) -> (B, C_out, H', W').
    Implemented by im2col + matmul; the pullback routes cotangents back
    through the patch matrix (col2im) and into the flattened kernel.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-d, got shape {x.shape}")
    bsz, cin, h, wid = x.shape
    kh, kw = spec.kernel
    if w.shape != (spec.out_channels, spec.in_channels, kh, kw):
        raise ShapeError(f"kernel shape {w.shape} does not match {spec}")
    if cin != spec.in_channels:
        raise ShapeError(f"input has {cin} channels, spec expects {spec.in_channels}")
    if bias is not None and bias.shape != (spec.out_channels,):
        raise ShapeError(f"bias shape {bias.shape} != ({spec.out_channels},)")
    oh, ow = spec.out_extent(h, wid)
    cout = spec.out_channels
    s, p = spec.stride, spec.padding

    cols = cin * kh * kw
    rows = bsz * oh * ow
    xd = x.flat()

    # im2col: row = (b, i, j) output position, col = (c, u, v) kernel tap.
    # With a bias, a trailing ones column folds it into the same dot so the
    # output sees a single f32 rounding.
    aug = bias is not None
    pcols = cols + 1 if aug else cols
    patches = [0.0] * (rows * pcols)
    row = 0
    for b in range(bsz):
        xb = b * cin * h * wid
        for i in range(oh):
            ih0 = i * s - p
            for j in range(ow):
                iw0 = j * s - p
                base = row * pcols
                col = 0
                for c in range(cin):
                    xc = xb + c * h * wid
                    for u in range(kh):
                        ih = ih0 + u
                        if 0 <= ih < h:
                            xr = xc + ih * wid
                            for v in range(kw):
                                iw = iw0 + v
                                if 0 <= iw < wid:
                                    patches[base + col] = xd[xr + iw]
                                col += 1
                        else:
                            col += kw
                if aug:
                    patches[base + cols] = 1.0
                row += 1

    with no_grad():
        pt = T.from_flat(patches, (rows, pcols))
        wf = T.reshape(w, (cout, cols))
        if aug:
            wd_, bd_ = w.flat(), bias.flat()
            wvals = []
            for c in range(cout):
                wvals.extend(wd_[c * cols : (c + 1) * cols])
                wvals.append(bd_[c])
            y = T.matmul(pt, T.from_flat(wvals, (cout, pcols)))
        else:
            y = T.matmul(pt, wf)  # (rows, cout)

    # permute (b,i,j),c -> b,c,i,j
    yd = y.flat()
    plane = oh * ow
    out_vals = [0.0] * (rows * cout)
    for r in range(rows):
        b, pos = divmod(r, plane)
        rbase = r * cout
        obase = b * cout * plane + pos
        for c in range(cout):
            out_vals[obase + c * plane] = yd[rbase + c]
    out = T.from_flat(out_vals, (bsz, cout, oh, ow))

    def grad_rows(g):
        # cotangent back to the (rows, cout) layout of y
        gd = g.flat()
        vals = [0.0] * (rows * cout)
        for r in range(rows):
            b, pos = divmod(r, plane)
            gbase = b * cout * plane + pos
            rbase = r * cout
            for c in range(cout):
                vals[rbase + c] = gd[gbase + c * plane]
        return T.from_flat(vals, (rows, cout))

    def pull_x(g):
        dp = T.matmul(grad_rows(g), T.transpose2d(wf))  # (rows, cols)
        dpd = dp.flat()
        acc = [0.0] * x.size
        for r in range(rows):
            b, pos = divmod(r, plane)
            i, j = divmod(pos, ow)
            ih0 = i * s - p
            iw0 = j * s - p
            base = r * cols
            col = 0
            xb = b * cin * h * wid
            for c in range(cin):
                xc = xb + c * h * wid
                for u in range(kh):
                    ih = ih0 + u
                    if 0 <= ih < h:
                        xr = xc + ih * wid
                        for v in range(kw):
                            iw = iw0 + v
                            if 0 <= iw < wid:
                                acc[xr + iw] += dpd[base + col]
                            col += 1
                    else:
                        col += kw
        return T.from_flat(acc, x.shape)

    def pull_w(g):
        gt = grad_rows(g)
        dwf = T.matmul(T.transpose2d(gt), T.transpose2d(pt))  # (cout, pcols)
        if aug:
            dv = dwf.flat()
            dv = [dv[r * pcols + c] for r in range(cout) for c in range(cols)]
            return T.from_flat(dv, w.shape)
        return T.reshape(dwf, w.shape)

    def pull_b(g):
        gd = g.flat()
        acc = [0.0] * cout
        for idx, v in enumerate(gd):
            acc[(idx // plane) % cout] += v
        return T.from_flat(acc, (cout,))

    inputs = (x, w) if bias is None else (x, w, bias)
    pulls = (pull_x, pull_w) if bias is None else (pull_x, pull_w, pull_b)
    return record("conv2d", inputs, out, pulls, saved=(x, w))


class Conv2D(Layer):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, bias=True, rng=None):
        super().__init__()
        if isinstance(kernel_size, int):
            kernel_size = (kernel_size, kernel_size)
        self.spec = ConvSpec(in_channels, out_channels, tuple(kernel_size),
                             stride, padding)
        rng = _normalize_rng(rng)
        kh, kw = self.spec.kernel
        fan_in = in_channels * kh * kw
        bound = 1.0 / math.sqrt(fan_in)
        self.weight = T.uniform((out_channels, in_channels, kh, kw),
                                -bound, bound, rng=rng, requires_grad=True)
        self.bias = None
        if bias:
            self.bias = T.uniform((out_channels,), -bound, bound,
                                  rng=rng, requires_grad=True)

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.spec)

    def named_parameters(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out


# ---------------------------------------------------------------------------
# normalization and regularization


class BatchNorm(Layer):
    """Per-feature normalization over the batch axis of a (b, d) input.

    Train mode normalizes with the biased batch statistics (and refreshes the
    running buffers); eval mode normalizes with the running buffers. Only
    gamma and beta are learnable.
    """

    def __init__(self, num_features: int, eps=1e-5, momentum=0.1):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.gamma = T.ones((num_features,), requires_grad=True)
        self.beta = T.zeros((num_features,), requires_grad=True)
        self.running_mean = T.zeros((num_features,))
        self.running_var = T.ones((num_features,))

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.num_features:
            raise ShapeError(
                f"batchnorm expects (b, {self.num_features}), got {x.shape}"
            )
        if self.mode == "train":
            if x.shape[0] < 1:
                raise ShapeError("batchnorm train mode needs at least one row")
            mu = T.mean(x, axis=0)
            centered = T.sub(x, mu)
            var = T.mean(T.mul(centered, centered), axis=0)  # biased
            xhat = T.div(centered, T.sqrt(T.add(var, self.eps)))
            with no_grad():
                m = self.momentum
                self.running_mean = T.add(T.mul(self.running_mean, 1.0 - m),
                                          T.mul(mu.detach(), m))
                self.running_var = T.add(T.mul(self.running_var, 1.0 - m),
                                         T.mul(var.detach(), m))
        else:
            centered = T.sub(x, self.running_mean)
            xhat = T.div(centered, T.sqrt(T.add(self.running_var, self.eps)))
        return T.add(T.mul(xhat, self.gamma), self.beta)

    def named_parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def named_buffers(self):
        return [("running_mean", self.running_mean),
                ("running_var", self.running_var)]


def dropout(x, p: float, mode="train", rng=None):
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"drop probability must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    rng = _normalize_rng(rng)
    scale = 1.0 / (1.0 - p)
    mask = T.from_flat(
        [0.0 if rng.random() < p else scale for _ in range(x.size)], x.shape
    )
    return T.mul(x, mask)


class Dropout(Layer):
    def __init__(self, p: float, rng=None):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"drop probability must be in [0, 1), got {p}")
        self.p = p
        self.rng = _normalize_rng(rng)

    def forward(self, x):
        return dropout(x, self.p, self.mode, self.rng)


# ---------------------------------------------------------------------------
# losses


def mse(pred, target):
    """Mean over all elements of the squared difference."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    d = T.sub(pred, target)
    return T.mean(T.mul(d, d))


def cross_entropy(logits, labels):
    """Mean negative log softmax probability of the true class.

    logits: (b, C); labels: length-b sequence of 0-based class indices.
    Rowwise max is subtracted before exponentiation, so values stay finite
    for logits up to ~1e4 in magnitude.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (b, C) logits, got {logits.shape}")
    b, c = logits.shape
    if b == 0:
        raise ShapeError("cross_entropy needs at least one row")
    if isinstance(labels, T.Tensor):
        labels = [int(v) for v in labels.flat()]
    labels = list(labels)
    if len(labels) != b:
        raise ShapeError(f"{len(labels)} labels for {b} rows")
    for y in labels:
        if not 0 <= y < c:
            raise ValueError(f"label {y} out of range for {c} classes")

    zd = logits.flat()
    total = 0.0
    for i in range(b):
        row = zd[i * c : (i + 1) * c]
        m = row[0]
        for v in row[1:]:
            if v > m:
                m = v
        se = 0.0
        for v in row:
            se += math.exp(v - m)
        total += m + math.log(se) - row[labels[i]]
    out = T.from_flat([total / b], ())

    def pull(g):
        gv = g.flat()[0] / b
        grad = [0.0] * (b * c)
        for i in range(b):
            row = zd[i * c : (i + 1) * c]
            m = row[0]
            for v in row[1:]:
                if v > m:
                    m = v
            es = [math.exp(v - m) for v in row]
            se = math.fsum(es)
            for j in range(c):
                grad[i * c + j] = (es[j] / se - (1.0 if j == labels[i] else 0.0)) * gv
        return T.from_flat(grad, logits.shape)

    return record("cross_entropy", (logits,), out, (pull,), saved=(logits,))


# ---------------------------------------------------------------------------
# composition


class Sequential(Layer):
    """Applies layers in order; parameter names are 'layer{i}.{name}'."""

    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            try:
                x = layer(x)
            except ShapeError as e:
                raise ShapeError(f"layer{i} ({type(layer).__name__}): {e}") from e
        return x

    def set_mode(self, mode: str):
        super().set_mode(mode)
        for layer in self.layers:
            layer.set_mode(mode)
        return self

    def named_parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, p in layer.named_parameters():
                out.append((f"layer{i}.{name}", p))
        return out

    def named_buffers(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, bf in layer.named_buffers():
                out.append((f"layer{i}.{name}", bf))
        return out
