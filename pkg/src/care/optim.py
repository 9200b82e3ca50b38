"""Named trainable parameters and the Adam update."""

import numpy as np

from .tensor import DTYPE, Tensor


class MissingGradError(RuntimeError):
    """Raised when a parameter reaches the optimizer without a gradient."""


class Parameter:
    """A named requires-grad tensor with Adam moment buffers."""

    __slots__ = ("name", "tensor", "adam_m", "adam_v", "step_count")

    def __init__(self, name, values):
        self.name = name
        self.tensor = Tensor(values, requires_grad=True)
        self.adam_m = np.zeros_like(self.tensor.data)
        self.adam_v = np.zeros_like(self.tensor.data)
        self.step_count = 0

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self):
        self.tensor.grad = np.zeros_like(self.tensor.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


class ParamRegistry:
    """Ordered, uniquely named parameter collection for one model."""

    def __init__(self):
        self._params = {}

    def add(self, name, values):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(name, values)
        self._params[name] = p
        return p

    def all(self):
        return list(self._params.values())

    def get(self, name):
        return self._params[name]

    def names(self):
        return list(self._params)

    def __len__(self):
        return len(self._params)


def zero_grads(params):
    for p in params:
        p.zero_grad()


def adam_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update over `params`; zeroes grads afterwards."""
    for p in params:
        if p.tensor.grad is None:
            raise MissingGradError(
                f"adam_step: parameter {p.name!r} has no gradient; "
                "run backward() (or zero_grads) first"
            )
    for p in params:
        g = p.tensor.grad
        p.step_count += 1
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - beta1**p.step_count)
        v_hat = p.adam_v / (1.0 - beta2**p.step_count)
        p.tensor.data = p.tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.tensor.grad = np.zeros_like(p.tensor.data)


def parameter_count(params):
    return int(sum(p.tensor.data.size for p in params))


def uniform_init(rng, shape, fan_in):
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def normal_init(rng, shape, std=0.02):
    return (rng.standard_normal(shape) * std).astype(DTYPE)
