"""tensorlite: a small float32 tensor engine with a reverse-mode tape.

Dense strided tensors, NumPy-style broadcasting, a compact layer and
optimizer catalog, and a finite-difference gradient checker. Pure standard
library; see the nn / optim / gradcheck submodules and the `tensorlite` CLI.
"""

from . import gradcheck, nn, optim
from .autograd import (
    GradStore,
    backward,
    is_recording,
    no_grad,
    record,
    reset_tape,
    tape,
    zero_grad,
)
from .errors import BroadcastError, DeterminismError, GradError, ShapeError
from .parallel import max_workers, thread_limit
from .core import (
    Tensor,
    abs_,
    absolute,
    add,
    broadcast_shapes,
    broadcast_to,
    div,
    exp,
    from_buffer,
    from_flat,
    full,
    log,
    matmul,
    max,
    mean,
    mul,
    neg,
    ones,
    ones_like,
    reduce_to_shape,
    reshape,
    sqrt,
    sub,
    sum,
    tensor,
    transpose2d,
    uniform,
    zeros,
    zeros_like,
)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "tensor", "from_flat", "from_buffer", "zeros", "ones", "full",
    "uniform", "zeros_like", "ones_like",
    "add", "sub", "mul", "div", "neg", "exp", "log", "sqrt", "absolute", "abs_",
    "sum", "mean", "max", "matmul", "reshape", "transpose2d",
    "broadcast_to", "reduce_to_shape", "broadcast_shapes",
    "backward", "no_grad", "record", "reset_tape", "tape", "zero_grad",
    "is_recording", "GradStore",
    "ShapeError", "BroadcastError", "GradError", "DeterminismError",
    "thread_limit", "max_workers",
    "nn", "optim", "gradcheck",
]
