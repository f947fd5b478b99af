"""
The optim module provides the cosine schedule, the AdamW update and the
parameter EMA used by training.
"""
import math
from dataclasses import dataclass, field

import torch

from .common import TrainingDiverged, require
from .config import (BASE_LR, BATCH_SIZE, EPOCHS, ADAM_BETAS, ADAM_EPS,
                     WEIGHT_DECAY, EMA_COEFFICIENT)
from .model import ModelParameters


def cosine_lr(step, total_steps, base_lr):
    """
    Return the cosine-annealed learning rate of a step.

        base_lr * 0.5 * (1 + cos(pi * step / total_steps))

    Steps past total_steps get the final value, 0.

    Arguments:
        step: the step number, from 0
        total_steps: the schedule horizon
        base_lr: the learning rate at step 0

    Returns: the learning rate
    """
    require(total_steps > 0, 'total_steps must be positive')
    require(step >= 0, 'step must be >= 0')
    step = min(step, total_steps)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class OptimizerState:
    """
    AdamW moments plus the schedule they run under.

    Arguments:
        first: first-moment accumulators by parameter name
        second: second-moment accumulators by parameter name
        step: the number of updates applied so far
        base_lr: the peak learning rate
        total_steps: the cosine schedule horizon
        batch_size: examples per update
        epochs: passes over the training manifest
        betas: the moment decay rates
        eps: the denominator floor
        weight_decay: the decoupled weight decay
    """
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)
    step: int = 0
    base_lr: float = BASE_LR
    total_steps: int = 1
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    betas: tuple = ADAM_BETAS
    eps: float = ADAM_EPS
    weight_decay: float = WEIGHT_DECAY

    def current_lr(self):
        return cosine_lr(self.step, self.total_steps, self.base_lr)


def new_optimizer_state(params, train_cfg, total_steps):
    """
    Create zeroed AdamW moments for a set of parameters.

    Arguments:
        params: ModelParameters
        train_cfg: a TrainConfig
        total_steps: the cosine schedule horizon

    Returns: an OptimizerState
    """
    return OptimizerState(
        first={n: torch.zeros_like(t) for n, t in params.items()},
        second={n: torch.zeros_like(t) for n, t in params.items()},
        base_lr=train_cfg.base_lr, total_steps=max(total_steps, 1),
        batch_size=train_cfg.batch_size, epochs=train_cfg.epochs,
        betas=train_cfg.betas, eps=train_cfg.adam_eps,
        weight_decay=train_cfg.weight_decay)


def adamw_step(params, grads, state, lr):
    """
    Apply one AdamW update in place.

    For each tensor with gradient g:

        m = b1 m + (1 - b1) g
        v = b2 v + (1 - b2) g^2
        theta = theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)

    where m_hat and v_hat are the bias-corrected moments.  A missing
    gradient counts as zero.

    Arguments:
        params: ModelParameters
        grads: a mapping from parameter names to gradients (or None)
        state: the OptimizerState
        lr: the learning rate of this step, >= 0

    Returns: (params, state)
    """
    require(lr >= 0, 'lr must be >= 0')
    for name, g in grads.items():
        if g is not None and not bool(torch.isfinite(g).all()):
            raise TrainingDiverged('gradient of %s is not finite' % (name,))

    b1, b2 = state.betas
    state.step += 1
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step

    with torch.no_grad():
        for name, theta in params.items():
            g = grads.get(name)
            if g is None:
                g = torch.zeros_like(theta)
            m = state.first[name]
            v = state.second[name]
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            denom = (v / bias2).sqrt_().add_(state.eps)
            theta.mul_(1.0 - lr * state.weight_decay)
            theta.addcdiv_(m / bias1, denom, value=-lr)
    return params, state


@dataclass
class EmaState:
    """
    A shadow copy of every learnable tensor.

    Arguments:
        shadow: EMA tensors by parameter name
        coefficient: the share of the old shadow kept on each update
    """
    shadow: dict
    coefficient: float = EMA_COEFFICIENT

    def as_parameters(self, config):
        return ModelParameters(config, [(n, t.clone())
                                        for n, t in self.shadow.items()])


def new_ema_state(params, coefficient=EMA_COEFFICIENT):
    return EmaState({n: t.detach().clone() for n, t in params.items()},
                    coefficient)


def ema_update(params, ema):
    """
    Move the shadow towards the live parameters:

        shadow = c * shadow + (1 - c) * params

    Arguments:
        params: ModelParameters
        ema: the EmaState, updated in place

    Returns: the EmaState
    """
    c = ema.coefficient
    with torch.no_grad():
        for name, theta in params.items():
            shadow = ema.shadow[name]
            assert shadow.shape == theta.shape, \
                   'shadow of %s has the wrong shape' % (name,)
            shadow.mul_(c).add_(theta.detach(), alpha=1.0 - c)
    return ema
