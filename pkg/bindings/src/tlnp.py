"""NumPy-facing bindings for the tensorlite engine.

One module, two jobs:

* zero-copy exchange with ``numpy.ndarray`` storage (``wrap_host_array`` /
  ``to_host_array``), falling back to a flagged copy when the layout or dtype
  rules it out;
* a small host-style API over the engine: operator-overloaded tensors,
  ``backward()`` with per-tensor ``.grad``, layer/loss/optimizer wrappers and
  train/eval switching.

Engine exceptions pass through unchanged (they are re-exported here), so any
engine failure is catchable host-side with its message intact. The engine is
pure Python: nothing here releases the GIL beyond what the engine's own
thread pool does, and handles must not be shared across host threads without
external locking. Note that writing through a wrapped numpy array directly
bypasses the engine's in-place mutation tracking; mutate via the handle when
a graph may be alive.
"""

import numpy as np

import tensorlite as tl
from tensorlite import nn as _nn
from tensorlite import optim as _optim
from tensorlite.errors import (
    BroadcastError,
    DeterminismError,
    GradError,
    ShapeError,
)
from tensorlite import no_grad, reset_tape

__version__ = "0.1.0"

__all__ = [
    "Tensor", "tensor", "wrap_host_array", "to_host_array",
    "zeros", "ones", "full", "uniform",
    "matmul", "mse", "cross_entropy",
    "Dense", "Conv2D", "BatchNorm", "Dropout",
    "ReLU", "Sigmoid", "Tanh", "GELU", "Sequential", "Module",
    "SGD", "Adam", "RMSprop",
    "no_grad", "reset_tape",
    "ShapeError", "BroadcastError", "GradError", "DeterminismError",
]

# gradients from the most recent backward(), looked up by Tensor.grad
_last_store = None


def _unwrap(v):
    if isinstance(v, Tensor):
        return v._t
    if isinstance(v, np.ndarray):
        return wrap_host_array(v)._t
    if isinstance(v, (int, float)):
        return v
    raise TypeError(f"cannot mix {type(v).__name__} into tensor arithmetic")


def _wrap(t: tl.Tensor) -> "Tensor":
    return Tensor(t)


class Tensor:
    """Handle around an engine tensor.

    origin is "host" when built from a numpy array, else "engine"; copied
    marks handles whose construction had to materialize new storage.
    """

    __slots__ = ("_t", "origin", "copied")

    def __init__(self, engine_tensor, origin="engine", copied=False):
        if not isinstance(engine_tensor, tl.Tensor):
            raise TypeError("Tensor wraps an engine tensor; use tlnp.tensor() for data")
        self._t = engine_tensor
        self.origin = origin
        self.copied = copied

    # -- introspection

    @property
    def shape(self):
        return self._t.shape

    @property
    def ndim(self):
        return self._t.ndim

    @property
    def size(self):
        return self._t.size

    @property
    def requires_grad(self):
        return self._t.requires_grad

    @requires_grad.setter
    def requires_grad(self, flag: bool):
        self._t.requires_grad = bool(flag)

    def requires_grad_(self, flag=True):
        self._t.requires_grad = bool(flag)
        return self

    def __repr__(self):
        tag = f", origin={self.origin!r}" if self.origin != "engine" else ""
        tag += ", copied" if self.copied else ""
        return f"tlnp.Tensor(shape={self.shape}{tag})"

    def __len__(self):
        if self.ndim == 0:
            raise TypeError("len() of a 0-d tensor")
        return self.shape[0]

    # -- data access

    def item(self) -> float:
        return self._t.item()

    def tolist(self):
        return self._t.tolist()

    def numpy(self) -> np.ndarray:
        return to_host_array(self)

    def __getitem__(self, idx):
        return self.numpy()[idx]

    def __setitem__(self, idx, value):
        # route through the engine so in-place mutation stays tracked
        arr = np.array(self._t.flat(), dtype=np.float32).reshape(self.shape)
        arr[idx] = value
        self._t.write_flat(arr.ravel(order="C").tolist())

    # -- autograd

    def backward(self, seed=None):
        global _last_store
        eng_seed = _unwrap(seed) if seed is not None else None
        _last_store = tl.backward(self._t, seed=eng_seed)
        return _last_store

    @property
    def grad(self):
        if _last_store is None:
            return None
        g = _last_store.get(self._t)
        return None if g is None else _wrap(g)

    def detach(self) -> "Tensor":
        return Tensor(self._t.detach(), origin=self.origin, copied=self.copied)

    # -- arithmetic operators

    def __add__(self, other):
        return _wrap(tl.add(self._t, _unwrap(other)))

    def __radd__(self, other):
        return _wrap(tl.add(_unwrap(other), self._t))

    def __sub__(self, other):
        return _wrap(tl.sub(self._t, _unwrap(other)))

    def __rsub__(self, other):
        return _wrap(tl.sub(_unwrap(other), self._t))

    def __mul__(self, other):
        return _wrap(tl.mul(self._t, _unwrap(other)))

    def __rmul__(self, other):
        return _wrap(tl.mul(_unwrap(other), self._t))

    def __truediv__(self, other):
        return _wrap(tl.div(self._t, _unwrap(other)))

    def __rtruediv__(self, other):
        return _wrap(tl.div(_unwrap(other), self._t))

    def __matmul__(self, other):
        return _wrap(tl.matmul(self._t, _unwrap(other)))

    def __neg__(self):
        return _wrap(tl.neg(self._t))

    def __abs__(self):
        return _wrap(tl.absolute(self._t))

    # -- comparisons: plain booleans, scalars only

    def _scalar(self, what) -> float:
        if self.size != 1:
            raise TypeError(f"{what} is defined for scalar tensors only, "
                            f"got shape {self.shape}")
        return self._t.item()

    def __lt__(self, other):
        return self._scalar("<") < _cmp_value(other)

    def __le__(self, other):
        return self._scalar("<=") <= _cmp_value(other)

    def __gt__(self, other):
        return self._scalar(">") > _cmp_value(other)

    def __ge__(self, other):
        return self._scalar(">=") >= _cmp_value(other)

    def __eq__(self, other):
        if not isinstance(other, (Tensor, int, float)):
            return NotImplemented
        return self._scalar("==") == _cmp_value(other)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    __hash__ = None  # value comparisons without value hashing

    def __float__(self):
        return self._scalar("float()")

    def __bool__(self):
        return bool(self._scalar("truth value"))

    # -- shape and reduction methods

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _wrap(tl.reshape(self._t, shape))

    def transpose(self):
        return _wrap(tl.transpose2d(self._t))

    @property
    def T(self):
        return self.transpose()

    def sum(self, axis=None, keepdims=False):
        return _wrap(tl.sum(self._t, axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return _wrap(tl.mean(self._t, axis=axis, keepdims=keepdims))

    def max(self, axis=None, keepdims=False):
        return _wrap(tl.max(self._t, axis=axis, keepdims=keepdims))

    def exp(self):
        return _wrap(tl.exp(self._t))

    def log(self):
        return _wrap(tl.log(self._t))

    def sqrt(self):
        return _wrap(tl.sqrt(self._t))


def _cmp_value(other) -> float:
    if isinstance(other, Tensor):
        return other._scalar("comparison")
    if isinstance(other, (int, float)):
        return other
    raise TypeError(f"cannot compare a tensor with {type(other).__name__}")


# ---------------------------------------------------------------------------
# construction and host-array exchange


def wrap_host_array(arr: np.ndarray, allow_copy: bool = False) -> Tensor:
    """Wrap a numpy array as an engine tensor, zero-copy when possible.

    float32 + C-contiguous + writable aliases the numpy storage: writes on
    either side are visible to the other. Any other float32 layout falls back
    to a copy and the handle is flagged `copied`. Wider dtypes are refused
    unless allow_copy=True (conversion is never silent).
    """
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"expected numpy.ndarray, got {type(arr).__name__}")
    if arr.dtype == np.float32:
        if arr.flags.c_contiguous and arr.flags.writeable:
            return Tensor(tl.from_buffer(arr, arr.shape), origin="host")
        # documented fallback: wrong layout, copy and flag it
        flat = arr.ravel(order="C").tolist()
        return Tensor(tl.from_flat(flat, arr.shape), origin="host", copied=True)
    if not allow_copy:
        raise TypeError(
            f"expected dtype float32, got {arr.dtype}; "
            "pass allow_copy=True to convert"
        )
    flat = [float(v) for v in arr.ravel(order="C")]
    return Tensor(tl.from_flat(flat, arr.shape), origin="host", copied=True)


def to_host_array(x: Tensor) -> np.ndarray:
    """Export a handle as a numpy array, zero-copy for contiguous tensors."""
    t = x._t if isinstance(x, Tensor) else x
    if t.is_contiguous:
        out = np.frombuffer(t.buffer.data, dtype=np.float32,
                            count=t.size, offset=4 * t.offset)
        return out.reshape(t.shape)
    # strided views export by value
    return np.array(t.flat(), dtype=np.float32).reshape(t.shape)


def tensor(data, requires_grad: bool = False) -> Tensor:
    """Build a handle from nested lists, a number, or a numpy array."""
    if isinstance(data, Tensor):
        out = Tensor(data._t, origin=data.origin, copied=data.copied)
    elif isinstance(data, np.ndarray):
        out = (wrap_host_array(data) if data.dtype == np.float32
               else wrap_host_array(data, allow_copy=True))
    else:
        out = Tensor(tl.tensor(data))
    out.requires_grad = requires_grad or out.requires_grad
    return out


def zeros(shape, requires_grad=False) -> Tensor:
    return Tensor(tl.zeros(shape, requires_grad=requires_grad))


def ones(shape, requires_grad=False) -> Tensor:
    return Tensor(tl.ones(shape, requires_grad=requires_grad))


def full(shape, value, requires_grad=False) -> Tensor:
    return Tensor(tl.full(shape, value, requires_grad=requires_grad))


def uniform(shape, low=-1.0, high=1.0, rng=None, requires_grad=False) -> Tensor:
    return Tensor(tl.uniform(shape, low=low, high=high, rng=rng,
                             requires_grad=requires_grad))


def matmul(a, b) -> Tensor:
    """Engine convention: a with b transposed, (m, k) x (d, k) -> (m, d)."""
    return _wrap(tl.matmul(_unwrap(a), _unwrap(b)))


# ---------------------------------------------------------------------------
# layers, losses, optimizers


class Module:
    """Wraps one engine layer; inputs and outputs are tlnp Tensors."""

    def __init__(self, layer):
        self._layer = layer

    def __call__(self, x) -> Tensor:
        return _wrap(self._layer(_unwrap(x)))

    def parameters(self):
        return [_wrap(p) for p in self._layer.parameters()]

    def named_parameters(self):
        return [(n, _wrap(p)) for n, p in self._layer.named_parameters()]

    def train(self):
        self._layer.set_mode("train")
        return self

    def eval(self):
        self._layer.set_mode("eval")
        return self

    @property
    def mode(self):
        return self._layer.mode

    def __getattr__(self, name):
        v = getattr(self._layer, name)
        return _wrap(v) if isinstance(v, tl.Tensor) else v


class Dense(Module):
    def __init__(self, in_features, out_features, bias=True, rng=None):
        super().__init__(_nn.Dense(in_features, out_features, bias=bias, rng=rng))


class Conv2D(Module):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, bias=True, rng=None):
        super().__init__(_nn.Conv2D(in_channels, out_channels, kernel_size,
                                    stride=stride, padding=padding, bias=bias,
                                    rng=rng))


class BatchNorm(Module):
    def __init__(self, num_features, eps=1e-5, momentum=0.1):
        super().__init__(_nn.BatchNorm(num_features, eps=eps, momentum=momentum))


class Dropout(Module):
    def __init__(self, p, rng=None):
        super().__init__(_nn.Dropout(p, rng=rng))


class ReLU(Module):
    def __init__(self):
        super().__init__(_nn.ReLU())


class Sigmoid(Module):
    def __init__(self):
        super().__init__(_nn.Sigmoid())


class Tanh(Module):
    def __init__(self):
        super().__init__(_nn.Tanh())


class GELU(Module):
    def __init__(self):
        super().__init__(_nn.GELU())


class Sequential(Module):
    def __init__(self, *modules):
        layers = [m._layer if isinstance(m, Module) else m for m in modules]
        super().__init__(_nn.Sequential(*layers))


def mse(pred, target) -> Tensor:
    return _wrap(_nn.mse(_unwrap(pred), _unwrap(target)))


def cross_entropy(logits, labels) -> Tensor:
    if isinstance(labels, Tensor):
        labels = labels._t
    elif isinstance(labels, np.ndarray):
        labels = [int(v) for v in labels.ravel(order="C")]
    return _wrap(_nn.cross_entropy(_unwrap(logits), labels))


class _OptimBase:
    """Host-style optimizer: step() pulls grads from the last backward()."""

    def __init__(self, params, engine_opt):
        self._params = [p._t if isinstance(p, Tensor) else p for p in params]
        self._opt = engine_opt

    def step(self, store=None) -> int:
        st = store if store is not None else _last_store
        if st is None:
            raise GradError("no gradients available; call backward() first")
        return _optim.step_all(self._opt, self._params, st)

    def zero_grad(self):
        global _last_store
        _last_store = None


class SGD(_OptimBase):
    def __init__(self, params, lr=0.01, momentum=0.0, weight_decay=0.0):
        super().__init__(params, _optim.SGD(lr=lr, momentum=momentum,
                                            weight_decay=weight_decay))


class Adam(_OptimBase):
    def __init__(self, params, lr=0.001, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0):
        super().__init__(params, _optim.Adam(lr=lr, betas=betas, eps=eps,
                                             weight_decay=weight_decay))


class RMSprop(_OptimBase):
    def __init__(self, params, lr=0.01, rho=0.99, eps=1e-8, weight_decay=0.0):
        super().__init__(params, _optim.RMSprop(lr=lr, rho=rho, eps=eps,
                                                weight_decay=weight_decay))
