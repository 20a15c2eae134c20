"""Parameter-update rules with persistent per-parameter state.

Updates happen in place on the parameter tensors. Weight decay is coupled:
lambda*theta joins the gradient before any moment accumulation, not after
the step. Slot arithmetic runs in doubles; parameters round to float32 on
the write-back, like every other store in the engine.
"""

from __future__ import annotations

import math

from .errors import ShapeError


class Optimizer:
    """Holds hyperparameters plus per-parameter slots keyed by identity."""

    def __init__(self, lr: float, weight_decay: float = 0.0):
        self.lr = lr
        self.weight_decay = weight_decay
        self._state: dict[int, dict] = {}

    def _slots(self, n: int) -> dict:
        raise NotImplementedError

    def _update(self, theta, grad, slots) -> list:
        """Return the new parameter values; may mutate slots."""
        raise NotImplementedError

    def state_for(self, param) -> dict:
        st = self._state.get(id(param))
        if st is None:
            # keep a reference so the id cannot be recycled under us
            st = {"param": param, "slots": self._slots(param.size)}
            self._state[id(param)] = st
        return st

    def step(self, param, grad):
        if grad.shape != param.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match parameter {param.shape}"
            )
        st = self.state_for(param)
        theta = param.flat()
        g = grad.flat()
        if self.weight_decay:
            wd = self.weight_decay
            g = [gi + wd * ti for gi, ti in zip(g, theta)]
        param.write_flat(self._update(theta, g, st["slots"]))
        return param


class SGD(Optimizer):
    """v = mu*v + g + lambda*theta; theta -= lr*v."""

    def __init__(self, lr=0.01, momentum=0.0, weight_decay=0.0):
        super().__init__(lr, weight_decay)
        self.momentum = momentum

    def _slots(self, n):
        return {"v": [0.0] * n}

    def _update(self, theta, g, slots):
        v = slots["v"]
        mu, lr = self.momentum, self.lr
        out = [0.0] * len(theta)
        for i, gi in enumerate(g):
            vi = mu * v[i] + gi
            v[i] = vi
            out[i] = theta[i] - lr * vi
        return out


class Adam(Optimizer):
    """Debiased first/second moments; epsilon sits outside the square root."""

    def __init__(self, lr=0.001, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        super().__init__(lr, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps

    def _slots(self, n):
        return {"m": [0.0] * n, "v": [0.0] * n, "t": 0}

    def _update(self, theta, g, slots):
        slots["t"] += 1
        t = slots["t"]
        b1, b2, lr, eps = self.beta1, self.beta2, self.lr, self.eps
        bc1 = 1.0 - b1 ** t
        bc2 = 1.0 - b2 ** t
        m, v = slots["m"], slots["v"]
        out = [0.0] * len(theta)
        for i, gi in enumerate(g):
            mi = b1 * m[i] + (1.0 - b1) * gi
            vi = b2 * v[i] + (1.0 - b2) * gi * gi
            m[i] = mi
            v[i] = vi
            out[i] = theta[i] - lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)
        return out


class RMSprop(Optimizer):
    """v = rho*v + (1-rho)*g^2; theta -= lr*g/sqrt(v + eps)."""

    def __init__(self, lr=0.01, rho=0.99, eps=1e-8, weight_decay=0.0):
        super().__init__(lr, weight_decay)
        self.rho = rho
        self.eps = eps

    def _slots(self, n):
        return {"v": [0.0] * n}

    def _update(self, theta, g, slots):
        v = slots["v"]
        rho, lr, eps = self.rho, self.lr, self.eps
        out = [0.0] * len(theta)
        for i, gi in enumerate(g):
            vi = rho * v[i] + (1.0 - rho) * gi * gi
            v[i] = vi
            out[i] = theta[i] - lr * gi / math.sqrt(vi + eps)
        return out


def step_all(optimizer: Optimizer, parameters, grad_store):
    """Update every parameter that has a gradient entry; skip the rest.

    Returns the number of parameters updated.
    """
    n = 0
    for p in parameters:
        g = grad_store.get(p)
        if g is not None:
            optimizer.step(p, g)
            n += 1
    return n
