"""Dense float32 tensors with strided views, broadcasting, and recorded ops.

Storage is a flat array('f'); arithmetic happens in Python doubles and rounds
to float32 on store. Views (reshape of contiguous data, transpose2d, broadcast)
share the underlying buffer; broadcast axes use stride 0. Every differentiable
op records a tape node with a pullback built from these same public ops.
"""

from __future__ import annotations

import math
import operator
import random
import struct
from array import array

from .autograd import record
from .errors import BroadcastError, ShapeError
from .parallel import PARALLEL_THRESHOLD, run_spans

# builtins that module-level op names shadow below
_py_sum = sum
_py_max = max

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# scalar arithmetic with IEEE semantics (python raises where hardware wouldn't)


def _ieee_div(a: float, b: float) -> float:
    if b == 0.0 and b == b:
        if a == 0.0 or a != a:
            return math.nan
        # sign of the zero divisor decides the sign of the infinity
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _ieee_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _ieee_log(a: float) -> float:
    if a > 0.0:
        return math.log(a)
    if a == 0.0:
        return -math.inf
    return math.nan  # negative or nan


def _ieee_sqrt(a: float) -> float:
    if a >= 0.0:
        return math.sqrt(a)
    if a == math.inf:
        return a
    return math.nan


# ---------------------------------------------------------------------------
# storage and the tensor object


class Buffer:
    """Flat float32 storage plus a version counter for mutation detection."""

    __slots__ = ("data", "version")

    def __init__(self, data: array):
        self.data = data
        self.version = 0


def _contig_strides(shape):
    strides = [0] * len(shape)
    acc = 1
    for d in range(len(shape) - 1, -1, -1):
        strides[d] = acc
        acc *= shape[d]
    return tuple(strides)


def _numel(shape):
    n = 1
    for s in shape:
        n *= s
    return n


def _check_shape(shape):
    if isinstance(shape, int):
        shape = (shape,)
    shape = tuple(shape)
    for s in shape:
        if not isinstance(s, int) or s < 0:
            raise ShapeError(f"invalid shape {shape}")
    return shape


class Tensor:
    __slots__ = ("buffer", "shape", "strides", "offset", "requires_grad", "node")

    def __init__(self, buffer, shape, strides=None, offset=0, requires_grad=False):
        self.buffer = buffer
        self.shape = tuple(shape)
        self.strides = _contig_strides(self.shape) if strides is None else tuple(strides)
        self.offset = offset
        self.requires_grad = requires_grad
        self.node = None

    # -- basic introspection

    @property
    def size(self) -> int:
        return _numel(self.shape)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def is_contiguous(self) -> bool:
        return self.strides == _contig_strides(self.shape)

    def __repr__(self):
        vals = self.flat()
        head = ", ".join(f"{v:g}" for v in vals[:6])
        if self.size > 6:
            head += ", ..."
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, [{head}]{grad})"

    # -- reading values out

    def flat(self) -> list:
        """All elements as Python floats, in row-major logical order."""
        return _flat_doubles(self)

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return self.buffer.data[self.offset] if self.ndim == 0 or self.is_contiguous else self.flat()[0]

    def tolist(self):
        return _nest(self.flat(), self.shape)

    # -- mutation (bumps the buffer version so stale pullbacks are caught)

    def fill_(self, value: float):
        self.write_flat([value] * self.size)
        return self

    def set_flat(self, index: int, value: float):
        """Write one element, addressed by row-major logical position."""
        if not 0 <= index < self.size:
            raise IndexError(f"flat index {index} out of range for shape {self.shape}")
        self.buffer.data[_offset_of(self, index)] = value
        self.buffer.version += 1
        return self

    def write_flat(self, values):
        values = list(values)
        if len(values) != self.size:
            raise ShapeError(f"expected {self.size} values, got {len(values)}")
        if self.is_contiguous:
            self.buffer.data[self.offset : self.offset + self.size] = array("f", values)
        else:
            for i, v in enumerate(values):
                self.buffer.data[_offset_of(self, i)] = v
        self.buffer.version += 1
        return self

    def detach(self) -> "Tensor":
        """Same storage, severed from the tape."""
        return Tensor(self.buffer, self.shape, self.strides, self.offset)

    def copy(self) -> "Tensor":
        return Tensor(Buffer(_copy_arr(self)), self.shape)


def _offset_of(t: Tensor, flat_index: int) -> int:
    off = t.offset
    for d in range(t.ndim - 1, -1, -1):
        dim = t.shape[d]
        off += (flat_index % dim) * t.strides[d]
        flat_index //= dim
    return off


def _nest(vals, shape):
    if not shape:
        return vals[0]
    if len(shape) == 1:
        return list(vals)
    step = _numel(shape[1:])
    return [_nest(vals[i * step : (i + 1) * step], shape[1:]) for i in range(shape[0])]


# ---------------------------------------------------------------------------
# element gathering


def _gather(data, base, shape, strides, dim, out):
    if dim == len(shape) - 1:
        n = shape[dim]
        s = strides[dim]
        if s == 1:
            out.extend(data[base : base + n].tolist())
        elif s == 0:
            out.extend([data[base]] * n)
        else:
            out.extend(data[base + i * s] for i in range(n))
        return
    step = strides[dim]
    for i in range(shape[dim]):
        _gather(data, base + i * step, shape, strides, dim + 1, out)


def _flat_doubles(t: Tensor) -> list:
    if t.size == 0:
        return []
    if t.ndim == 0:
        return [t.buffer.data[t.offset]]
    if t.is_contiguous:
        return t.buffer.data[t.offset : t.offset + t.size].tolist()
    out = []
    _gather(t.buffer.data, t.offset, t.shape, t.strides, 0, out)
    return out


def _flat_seq(t: Tensor):
    """Logical-order element sequence; the raw buffer slice when possible."""
    if t.size and t.ndim and t.is_contiguous:
        if t.offset == 0 and t.size == len(t.buffer.data):
            return t.buffer.data
        return t.buffer.data[t.offset : t.offset + t.size]
    return _flat_doubles(t)


def _copy_arr(t: Tensor) -> array:
    if t.ndim and t.is_contiguous:
        return t.buffer.data[t.offset : t.offset + t.size]
    return array("f", _flat_doubles(t))


# ---------------------------------------------------------------------------
# constructors


def tensor(data, requires_grad=False) -> Tensor:
    """Build a tensor from a number or (possibly nested) lists of numbers."""
    shape, flat = _infer_nested(data)
    t = Tensor(Buffer(array("f", flat)), shape)
    t.requires_grad = requires_grad
    return t


def _infer_nested(data):
    if isinstance(data, (int, float)):
        return (), [float(data)]
    if not isinstance(data, (list, tuple)):
        raise TypeError(f"cannot build a tensor from {type(data).__name__}")
    if not data:
        return (0,), []
    shapes_flats = [_infer_nested(d) for d in data]
    child = shapes_flats[0][0]
    for s, _ in shapes_flats[1:]:
        if s != child:
            raise ShapeError("ragged nested data")
    flat = []
    for _, f in shapes_flats:
        flat.extend(f)
    return (len(data),) + child, flat


def from_flat(values, shape, requires_grad=False) -> Tensor:
    shape = _check_shape(shape)
    arr = array("f", values)
    if len(arr) != _numel(shape):
        raise ShapeError(f"{len(arr)} values cannot fill shape {shape}")
    t = Tensor(Buffer(arr), shape)
    t.requires_grad = requires_grad
    return t


def from_buffer(obj, shape, requires_grad=False) -> Tensor:
    """Wrap external float32 storage without copying.

    `obj` must export the buffer protocol with format 'f', be writable and
    C-contiguous, and hold exactly prod(shape) elements. The storage is
    shared: writes on either side are visible to the other, and the tensor
    keeps `obj` alive.
    """
    mv = memoryview(obj)
    if mv.format != "f":
        raise TypeError(f"expected float32 storage (format 'f'), got {mv.format!r}")
    if mv.readonly:
        raise ValueError("buffer must be writable")
    if not mv.c_contiguous:
        raise ValueError("buffer must be C-contiguous")
    if mv.ndim != 1:  # flatten n-d exporters; casts go through a byte view
        mv = mv.cast("B").cast("f")
    shape = _check_shape(shape)
    if len(mv) != _numel(shape):
        raise ShapeError(f"{len(mv)} buffered values cannot fill shape {shape}")
    t = Tensor(Buffer(mv), shape)
    t.requires_grad = requires_grad
    return t


def zeros(shape, requires_grad=False) -> Tensor:
    shape = _check_shape(shape)
    t = Tensor(Buffer(array("f", bytes(4 * _numel(shape)))), shape)
    t.requires_grad = requires_grad
    return t


def full(shape, value, requires_grad=False) -> Tensor:
    shape = _check_shape(shape)
    t = Tensor(Buffer(array("f", [float(value)]) * _numel(shape)), shape)
    t.requires_grad = requires_grad
    return t


def ones(shape, requires_grad=False) -> Tensor:
    return full(shape, 1.0, requires_grad=requires_grad)


def uniform(shape, low=-1.0, high=1.0, rng=None, requires_grad=False) -> Tensor:
    """Uniform samples in [low, high); rng is a random.Random, a seed, or None."""
    if rng is None:
        rng = random.Random()
    elif isinstance(rng, int):
        rng = random.Random(rng)
    shape = _check_shape(shape)
    vals = [rng.uniform(low, high) for _ in range(_numel(shape))]
    return from_flat(vals, shape, requires_grad=requires_grad)


def zeros_like(t: Tensor, requires_grad=False) -> Tensor:
    return zeros(t.shape, requires_grad=requires_grad)


def ones_like(t: Tensor, requires_grad=False) -> Tensor:
    return ones(t.shape, requires_grad=requires_grad)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return tensor(float(x))
    raise TypeError(f"expected a Tensor or number, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# broadcasting


def broadcast_shapes(s1, s2):
    """NumPy-style: right-aligned, size-1 axes stretch."""
    n1, n2 = len(s1), len(s2)
    n = _py_max(n1, n2)
    out = []
    for i in range(n):
        a = s1[n1 - n + i] if n1 - n + i >= 0 else 1
        b = s2[n2 - n + i] if n2 - n + i >= 0 else 1
        if a == b or b == 1:
            out.append(a)
        elif a == 1:
            out.append(b)
        else:
            raise BroadcastError(f"cannot broadcast {tuple(s1)} with {tuple(s2)}")
    return tuple(out)


def _expand_view(t: Tensor, shape) -> Tensor:
    """Stride-0 view of t with the given (already validated) broadcast shape."""
    pad = len(shape) - t.ndim
    strides = [0] * len(shape)
    for i in range(t.ndim):
        if t.shape[i] == shape[pad + i]:
            strides[pad + i] = t.strides[i]
        elif t.shape[i] == 1:
            strides[pad + i] = 0
        else:
            raise BroadcastError(f"cannot expand {t.shape} to {tuple(shape)}")
    return Tensor(t.buffer, shape, strides, t.offset, requires_grad=t.requires_grad)


def broadcast_to(x: Tensor, shape) -> Tensor:
    """Zero-copy broadcast view; gradient sums back over the stretched axes."""
    shape = _check_shape(shape)
    if len(shape) < x.ndim:
        raise BroadcastError(f"cannot broadcast {x.shape} to smaller rank {shape}")
    out = _expand_view(x, shape)
    out = Tensor(out.buffer, out.shape, out.strides, out.offset)
    return record("broadcast_to", (x,), out, (lambda g: reduce_to_shape(g, x.shape),))


def reduce_to_shape(t: Tensor, shape) -> Tensor:
    """Sum t down to `shape` (the adjoint of broadcasting to t.shape)."""
    shape = _check_shape(shape)
    if t.shape == shape:
        return t
    pad = t.ndim - len(shape)
    if pad < 0:
        raise ShapeError(f"cannot reduce {t.shape} to larger rank {shape}")
    padded = (1,) * pad + shape
    axes = []
    for i, (have, want) in enumerate(zip(t.shape, padded)):
        if want == have:
            continue
        if want == 1:
            axes.append(i)
        else:
            raise ShapeError(f"{shape} is not a broadcast source of {t.shape}")
    out = sum(t, axis=tuple(axes), keepdims=True) if axes else t
    return reshape(out, shape)


# ---------------------------------------------------------------------------
# elementwise ops


def _elementwise(fop, seqs, n):
    if n >= PARALLEL_THRESHOLD:
        mats = [list(s) if not isinstance(s, (list, array)) else s for s in seqs]
        parts = run_spans(lambda s, e: array("f", map(fop, *(m[s:e] for m in mats))), n)
        arr = array("f")
        for p in parts:
            arr.extend(p)
        return arr
    return array("f", map(fop, *seqs))


def _binary(kind, a, b, fop, pullbacks, save):
    a = _as_tensor(a)
    b = _as_tensor(b)
    shape = broadcast_shapes(a.shape, b.shape)
    av = _expand_view(a, shape) if a.shape != shape else a
    bv = _expand_view(b, shape) if b.shape != shape else b
    arr = _elementwise(fop, (_flat_seq(av), _flat_seq(bv)), _numel(shape))
    out = Tensor(Buffer(arr), shape)
    pa, pb = pullbacks(a, b, out)
    return record(kind, (a, b), out, (pa, pb), saved=save(a, b))


def add(a, b) -> Tensor:
    return _binary(
        "add", a, b, operator.add,
        lambda a, b, out: (
            lambda g: reduce_to_shape(g, a.shape),
            lambda g: reduce_to_shape(g, b.shape),
        ),
        lambda a, b: (),
    )


def sub(a, b) -> Tensor:
    return _binary(
        "sub", a, b, operator.sub,
        lambda a, b, out: (
            lambda g: reduce_to_shape(g, a.shape),
            lambda g: reduce_to_shape(neg(g), b.shape),
        ),
        lambda a, b: (),
    )


def mul(a, b) -> Tensor:
    return _binary(
        "mul", a, b, operator.mul,
        lambda a, b, out: (
            lambda g: reduce_to_shape(mul(g, b), a.shape),
            lambda g: reduce_to_shape(mul(g, a), b.shape),
        ),
        lambda a, b: (a, b),
    )


def div(a, b) -> Tensor:
    return _binary(
        "div", a, b, _ieee_div,
        lambda a, b, out: (
            lambda g: reduce_to_shape(div(g, b), a.shape),
            # d(a/b)/db = -a/b^2
            lambda g: reduce_to_shape(neg(div(mul(g, a), mul(b, b))), b.shape),
        ),
        lambda a, b: (a, b),
    )


def _unary(kind, x, fop, pullback, save):
    x = _as_tensor(x)
    arr = _elementwise(fop, (_flat_seq(x),), x.size)
    out = Tensor(Buffer(arr), x.shape)
    return record(kind, (x,), out, (pullback(x, out),), saved=save(x, out))


def neg(x) -> Tensor:
    return _unary("neg", x, operator.neg, lambda x, out: lambda g: neg(g), lambda x, out: ())


def exp(x) -> Tensor:
    return _unary(
        "exp", x, _ieee_exp,
        lambda x, out: lambda g: mul(g, out),
        lambda x, out: (out,),
    )


def log(x) -> Tensor:
    return _unary(
        "log", x, _ieee_log,
        lambda x, out: lambda g: div(g, x),
        lambda x, out: (x,),
    )


def sqrt(x) -> Tensor:
    return _unary(
        "sqrt", x, _ieee_sqrt,
        lambda x, out: lambda g: div(g, mul(out, 2.0)),
        lambda x, out: (out,),
    )


def _sign(v: float) -> float:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0  # subgradient choice at 0 (and for nan)


def absolute(x) -> Tensor:
    return _unary(
        "abs", x, math.fabs,
        lambda x, out: lambda g: mul(g, from_flat(map(_sign, x.flat()), x.shape)),
        lambda x, out: (x,),
    )


abs_ = absolute


# ---------------------------------------------------------------------------
# reductions


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    axes = []
    for a in axis:
        if not isinstance(a, int):
            raise ShapeError(f"axis must be an int, got {a!r}")
        if a < 0:
            a += ndim
        if not 0 <= a < ndim:
            raise ShapeError(f"axis {a} out of range for {ndim}-d tensor")
        axes.append(a)
    if len(set(axes)) != len(axes):
        raise ShapeError(f"duplicate axes in {axis}")
    return tuple(sorted(axes))


def _reduced_shapes(shape, axes, keepdims):
    kshape = tuple(1 if i in axes else s for i, s in enumerate(shape))
    oshape = kshape if keepdims else tuple(s for i, s in enumerate(shape) if i not in axes)
    return kshape, oshape


def _sum_all(t: Tensor) -> float:
    """Chunked left-to-right sum; partials always combine in chunk order, so
    the result is independent of the worker count."""
    n = t.size
    if n == 0:
        return 0.0
    seq = _flat_seq(t)
    if not isinstance(seq, (list, array)):
        seq = list(seq)
    parts = run_spans(lambda s, e: _py_sum(seq[s:e]), n)
    total = 0.0
    for p in parts:
        total += p
    return total


def _axis_scan(t: Tensor, axes, consume):
    """Walk t in row-major order calling consume(out_slot, value, flat_index).

    out_slot indexes the reduced result in its own row-major order.
    """
    n = t.ndim
    _, oshape = _reduced_shapes(t.shape, axes, keepdims=False)
    ostrides_full = _contig_strides(oshape)
    ostride = [0] * n
    j = 0
    for d in range(n):
        if d not in axes:
            ostride[d] = ostrides_full[j]
            j += 1
    data = t.buffer.data
    idx = [0] * n
    off = t.offset
    oidx = 0
    lin = 0
    shape, strides = t.shape, t.strides
    while True:
        consume(oidx, data[off], lin)
        lin += 1
        d = n - 1
        while d >= 0:
            idx[d] += 1
            off += strides[d]
            oidx += ostride[d]
            if idx[d] < shape[d]:
                break
            idx[d] = 0
            off -= strides[d] * shape[d]
            oidx -= ostride[d] * shape[d]
            d -= 1
        if d < 0:
            break


def _sum_pullback(x, axes, kshape):
    def pull(g):
        g = reshape(g, kshape)
        return _expand_view(g, x.shape).copy()

    return pull


def sum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    x = _as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    kshape, oshape = _reduced_shapes(x.shape, axes, keepdims)
    if len(axes) == x.ndim:
        out = from_flat([_sum_all(x)], kshape if keepdims else ())
    elif not axes:
        out = x.copy()
    else:
        acc = [0.0] * _numel(oshape if not keepdims else kshape)

        def consume(o, v, _):
            acc[o] += v

        if x.size:
            _axis_scan(x, axes, consume)
        out = from_flat(acc, oshape)
    return record("sum", (x,), out, (_sum_pullback(x, axes, kshape),))


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    x = _as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    kshape, oshape = _reduced_shapes(x.shape, axes, keepdims)
    count = 1
    for a in axes:
        count *= x.shape[a]
    if len(axes) == x.ndim:
        out = from_flat([_ieee_div(_sum_all(x), float(count))], oshape)
    elif not axes:
        out = x.copy()
    else:
        acc = [0.0] * _numel(oshape if not keepdims else kshape)

        def consume(o, v, _):
            acc[o] += v

        if x.size:
            _axis_scan(x, axes, consume)
        out = from_flat([_ieee_div(v, float(count)) for v in acc], oshape)

    base = _sum_pullback(x, axes, kshape)

    def pull(g):
        return div(base(g), float(count))

    return record("mean", (x,), out, (pull,))


def max(x: Tensor, axis=None, keepdims=False) -> Tensor:
    """Maximum over the given axes; ties resolve to the first element in
    row-major order, which is also where the gradient goes."""
    x = _as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    kshape, oshape = _reduced_shapes(x.shape, axes, keepdims)
    for a in axes:
        if x.shape[a] == 0:
            raise ShapeError("max over a zero-extent axis is undefined")
    if not axes:
        best = x.flat()
        argpos = list(range(x.size))
    else:
        nslots = _numel(oshape if not keepdims else kshape)
        best = [None] * nslots
        argpos = [0] * nslots

        def consume(o, v, lin):
            cur = best[o]
            if cur is None or v > cur:
                best[o] = v
                argpos[o] = lin

        if x.size:
            _axis_scan(x, axes, consume)
    out = from_flat(best, oshape)

    in_shape, in_size = x.shape, x.size

    def pull(g):
        gf = g.flat()
        acc = [0.0] * in_size
        for slot, pos in enumerate(argpos):
            acc[pos] += gf[slot]
        return from_flat(acc, in_shape)

    return record("max", (x,), out, (pull,), saved=(x,))


# ---------------------------------------------------------------------------
# shape ops


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    shape = list(shape) if not isinstance(shape, int) else [shape]
    if shape.count(-1) > 1:
        raise ShapeError("at most one -1 allowed in reshape")
    if -1 in shape:
        rest = _numel([s for s in shape if s != -1])
        if rest == 0 or x.size % rest:
            raise ShapeError(f"cannot infer -1 reshaping {x.shape} to {tuple(shape)}")
        shape[shape.index(-1)] = x.size // rest
    shape = _check_shape(shape)
    if _numel(shape) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} ({x.size} elements) to {shape}")
    if x.ndim == 0 or x.is_contiguous:
        out = Tensor(x.buffer, shape, offset=x.offset)  # view
    else:
        out = Tensor(Buffer(_copy_arr(x)), shape)
    old = x.shape
    return record("reshape", (x,), out, (lambda g: reshape(g, old),))


def transpose2d(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose2d needs a 2-d tensor, got shape {x.shape}")
    out = Tensor(x.buffer, (x.shape[1], x.shape[0]), (x.strides[1], x.strides[0]), x.offset)
    return record("transpose2d", (x,), out, (lambda g: transpose2d(g),))


# ---------------------------------------------------------------------------
# matrix product


def _rows(t: Tensor):
    m, k = t.shape
    data = t.buffer.data
    s0, s1 = t.strides
    rows = []
    for i in range(m):
        base = t.offset + i * s0
        if s1 == 1:
            rows.append(data[base : base + k])
        elif s1 == 0:
            rows.append([data[base]] * k)
        else:
            rows.append([data[base + j * s1] for j in range(k)])
    return rows


def matmul(x: Tensor, w: Tensor) -> Tensor:
    """y = x @ w^T: (m, k) with (d, k) gives (m, d).

    Each output element is a single left-to-right dot product in doubles,
    rounded to float32 on store.
    """
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeError(f"matmul needs 2-d tensors, got {x.shape} and {w.shape}")
    m, k = x.shape
    d, k2 = w.shape
    if k != k2:
        raise ShapeError(f"inner dimensions differ: {x.shape} vs {w.shape}")
    xrows = _rows(x)
    wrows = _rows(w)
    fmul = operator.mul

    def block(s, e):
        out = []
        for i in range(s, e):
            xr = xrows[i]
            out.extend(_py_sum(map(fmul, xr, wr)) for wr in wrows)
        return out

    vals = []
    for part in run_spans(block, m):
        vals.extend(part)
    out = Tensor(Buffer(array("f", vals)), (m, d))
    return record(
        "matmul", (x, w), out,
        (
            lambda g: matmul(g, transpose2d(w)),                 # x_bar = g w
            lambda g: matmul(transpose2d(g), transpose2d(x)),    # w_bar = g^T x
        ),
        saved=(x, w),
    )
