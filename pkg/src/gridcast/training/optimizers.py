"""First-order optimizers as pure per-tensor step functions.

Each step function maps (param, grad, state, lr, config) to a new parameter
tensor and a new state dict without mutating its inputs, so single steps are
unit-testable against hand-computed values. The LAMB update scales each
tensor's step by the trust ratio ||w|| / ||u||, falling back to 1 when either
norm is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from ..errors import ConfigError, NumericError

KINDS = ("sgd", "adam", "adamw", "lamb")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    lr_peak: float = 0.01
    betas: tuple = (0.9, 0.999)
    epsilon: float = 1e-6
    weight_decay: Optional[float] = None   # None resolves to the kind's default
    momentum: float = 0.9

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown optimizer {self.kind!r}, choose from {KINDS}")
        if self.lr_peak <= 0:
            raise ConfigError("lr_peak must be positive")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f"betas must lie in [0, 1), got {self.betas}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.weight_decay is None:
            default = 0.01 if self.kind in ("adamw", "lamb") else 0.0
            object.__setattr__(self, "weight_decay", default)
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.kind in ("sgd", "adam") and self.weight_decay != 0.0:
            raise ConfigError(f"{self.kind} applies no weight decay; set it to 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lr_peak": self.lr_peak, "betas": list(self.betas),
                "epsilon": self.epsilon, "weight_decay": self.weight_decay,
                "momentum": self.momentum}

    @classmethod
    def from_dict(cls, doc: dict) -> "OptimizerConfig":
        kwargs = dict(doc)
        if "betas" in kwargs:
            kwargs["betas"] = tuple(kwargs["betas"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad optimizer config: {exc}") from exc


def _check_finite(grad: torch.Tensor) -> None:
    if not torch.isfinite(grad).all():
        raise NumericError("non-finite gradient")


def sgd_step(param, grad, state, lr, config: OptimizerConfig):
    _check_finite(grad)
    buf = state.get("momentum_buffer")
    buf = grad.clone() if buf is None else config.momentum * buf + grad
    return param - lr * buf, {"momentum_buffer": buf}


def _adam_moments(grad, state, config: OptimizerConfig):
    beta1, beta2 = config.betas
    step = state.get("step", 0) + 1
    m = beta1 * state.get("m", torch.zeros_like(grad)) + (1 - beta1) * grad
    v = beta2 * state.get("v", torch.zeros_like(grad)) + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** step)
    v_hat = v / (1 - beta2 ** step)
    return m_hat, v_hat, {"step": step, "m": m, "v": v}


def adam_step(param, grad, state, lr, config: OptimizerConfig):
    _check_finite(grad)
    m_hat, v_hat, new_state = _adam_moments(grad, state, config)
    return param - lr * m_hat / (torch.sqrt(v_hat) + config.epsilon), new_state


def adamw_step(param, grad, state, lr, config: OptimizerConfig):
    """Decoupled decay applied to the parameter before the moment update."""
    _check_finite(grad)
    m_hat, v_hat, new_state = _adam_moments(grad, state, config)
    decayed = param - lr * config.weight_decay * param
    return decayed - lr * m_hat / (torch.sqrt(v_hat) + config.epsilon), new_state


def lamb_step(param, grad, state, lr, config: OptimizerConfig):
    _check_finite(grad)
    m_hat, v_hat, new_state = _adam_moments(grad, state, config)
    update = m_hat / (torch.sqrt(v_hat) + config.epsilon) + config.weight_decay * param
    w_norm = torch.linalg.vector_norm(param)
    u_norm = torch.linalg.vector_norm(update)
    if w_norm == 0.0 or u_norm == 0.0:
        ratio = torch.ones_like(w_norm)
    else:
        ratio = w_norm / u_norm
    new_state["trust_ratio"] = float(ratio)
    return param - lr * ratio * update, new_state


STEP_FUNCTIONS = {"sgd": sgd_step, "adam": adam_step, "adamw": adamw_step, "lamb": lamb_step}


class Optimizer:
    """Applies a step function across a named parameter set, holding state."""

    def __init__(self, config: OptimizerConfig, params: dict):
        self.config = config
        self.step_fn = STEP_FUNCTIONS[config.kind]
        self.params = dict(params)
        self.state = {name: {} for name in self.params}

    def step(self, grads: dict, lr: float) -> None:
        for name, param in self.params.items():
            if name not in grads:
                raise ConfigError(f"no gradient supplied for parameter {name!r}")
            with torch.no_grad():
                new_param, new_state = self.step_fn(param.detach(), grads[name],
                                                    self.state[name], lr, self.config)
                param.copy_(new_param)
            self.state[name] = new_state
