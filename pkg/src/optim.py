"""
Optimizers over a ParamSet: SGD with momentum and Adam
"""
from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigurationError, UsageError

OPTIMIZER_KINDS = ("sgd-momentum", "adam")


@dataclass
class OptimizerState:
    """Hyperparameters, moment buffers and the step counter"""

    kind: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    buffers: dict = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(f"unknown optimizer '{self.kind}', expected one of {OPTIMIZER_KINDS}")
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight decay must be >= 0, got {self.weight_decay}")


def step(optimizer, params):
    """Apply one update to every trainable parameter, then clear grads"""
    trainable = params.trainable_items()
    missing = [name for name, p in trainable if p.grad is None]
    if missing:
        raise UsageError(f"no gradient for trainable parameter(s): {', '.join(missing)}")

    optimizer.step_count += 1
    t = optimizer.step_count
    for name, p in trainable:
        grad = p.grad
        if optimizer.weight_decay:
            grad = grad + optimizer.weight_decay * p.data
        buffers = optimizer.buffers.setdefault(name, {})
        if optimizer.kind == "sgd-momentum":
            velocity = buffers.get("velocity")
            velocity = grad.copy() if velocity is None else optimizer.momentum * velocity + grad
            buffers["velocity"] = velocity
            p.data = p.data - optimizer.lr * velocity
        else:
            m = buffers.get("m", np.zeros(p.shape))
            v = buffers.get("v", np.zeros(p.shape))
            m = optimizer.beta1 * m + (1.0 - optimizer.beta1) * grad
            v = optimizer.beta2 * v + (1.0 - optimizer.beta2) * grad ** 2
            buffers["m"], buffers["v"] = m, v
            m_hat = m / (1.0 - optimizer.beta1 ** t)
            v_hat = v / (1.0 - optimizer.beta2 ** t)
            p.data = p.data - optimizer.lr * m_hat / (np.sqrt(v_hat) + optimizer.eps)

    # Frozen tensors keep their values but lose any stray gradient
    params.zero_grad()
    return params


def step_lr(base_lr, epoch, gamma=0.75, every=3):
    """Learning rate after `epoch` completed epochs of a step schedule"""
    if every <= 0:
        return base_lr
    return base_lr * gamma ** (epoch // every)


def state_dict(optimizer):
    """Copy of the optimizer buffers and counter"""
    return {
        "step_count": optimizer.step_count,
        "buffers": {
            name: {key: value.copy() for key, value in buffers.items()}
            for name, buffers in optimizer.buffers.items()
        },
    }
