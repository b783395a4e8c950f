"""Moment machinery and the combined weight-decay term.

Two interchangeable moment updates share one state layout:

* ``pnm_update`` keeps two lagged first-moment buffers (odd and even steps)
  and combines them with weights (1 + beta0) and -beta0, tracks the running
  elementwise max of the second moment, and normalizes the update vector by
  sqrt((1 + beta0)^2 + beta0^2) so beta0 can change without retuning the
  learning rate.
* ``adam_update`` is the classic single-buffer estimate with plain bias
  correction and no second-moment max.

``combined_decay`` produces the decay displacement: plain decoupled decay,
optionally rescaled by the effective step size (1 / sqrt(mean(v_hat))) and
optionally redirected to pull the tensor norm toward 1 instead of toward 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import ParamTensor, frobenius_norm

# Floor for sqrt(mean(v_hat)) in stable decay; inert once any gradient has flowed.
STABLE_DECAY_FLOOR = 1e-8


@dataclass(frozen=True)
class MomentConfig:
    beta0: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("beta0", "beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class DecayConfig:
    """Weight-decay coefficient plus the two decay-shaping switches."""

    weight_decay: float = 1e-4
    norm_loss: bool = True
    stable: bool = True

    def __post_init__(self) -> None:
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class MomentState:
    """Per-tensor slots: first moments at t-1 and t-2, second moment, and its max.

    Buffers are flat float64 arrays matching the owning parameter's element
    count. Updates return a fresh state; the t-2 slot is rotated, not copied.
    """

    m_prev: np.ndarray
    m_prev2: np.ndarray
    v: np.ndarray
    v_max: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "MomentState":
        return cls(
            m_prev=np.zeros(size),
            m_prev2=np.zeros(size),
            v=np.zeros(size),
            v_max=np.zeros(size),
        )

    def check_matches(self, g: ParamTensor) -> None:
        if self.m_prev.size != g.size:
            raise ValueError(
                f"state buffers hold {self.m_prev.size} elements, "
                f"gradient {g.name} has {g.size}"
            )


def pnm_update(
    state: MomentState, g: ParamTensor, t: int, cfg: MomentConfig
) -> tuple[ParamTensor, ParamTensor, MomentState]:
    """Positive-negative momentum step with running second-moment max.

        m_t     = beta1^2 * m_{t-2} + (1 - beta1^2) * g
        m_hat   = ((1 + beta0) * m_t - beta0 * m_{t-1}) / (1 - beta1^t)
        v_t     = beta2 * v_{t-1} + (1 - beta2) * g^2
        v_max   = max(v_t, v_max)  elementwise
        v_hat   = v_max / (1 - beta2^t)
        u       = m_hat / (sqrt((1+beta0)^2 + beta0^2) * (sqrt(v_hat) + eps))

    Returns the update vector, the bias-corrected second moment (the stable
    decay needs it), and the advanced state with rotated moment buffers.
    """
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    state.check_matches(g)
    garr = g.values
    b0, b1, b2 = cfg.beta0, cfg.beta1, cfg.beta2

    m_t = b1 * b1 * state.m_prev2 + (1.0 - b1 * b1) * garr
    m_hat = ((1.0 + b0) * m_t - b0 * state.m_prev) / (1.0 - b1**t)
    v_t = b2 * state.v + (1.0 - b2) * garr * garr
    v_max = np.maximum(v_t, state.v_max)
    v_hat = v_max / (1.0 - b2**t)
    normalizer = math.sqrt((1.0 + b0) ** 2 + b0**2)
    u = m_hat / (normalizer * (np.sqrt(v_hat) + cfg.eps))

    new_state = MomentState(m_prev=m_t, m_prev2=state.m_prev, v=v_t, v_max=v_max)
    return g.with_values(u), g.with_values(v_hat), new_state


def adam_update(
    state: MomentState, g: ParamTensor, t: int, cfg: MomentConfig
) -> tuple[ParamTensor, ParamTensor, MomentState]:
    """Classic adaptive moment step (single buffer, no second-moment max).

        m_t   = beta1 * m_{t-1} + (1 - beta1) * g
        v_t   = beta2 * v_{t-1} + (1 - beta2) * g^2
        u     = (m_t / (1 - beta1^t)) / (sqrt(v_t / (1 - beta2^t)) + eps)

    Same return contract as ``pnm_update``; ``beta0`` and ``v_max`` are unused.
    """
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    state.check_matches(g)
    garr = g.values
    b1, b2 = cfg.beta1, cfg.beta2

    m_t = b1 * state.m_prev + (1.0 - b1) * garr
    m_hat = m_t / (1.0 - b1**t)
    v_t = b2 * state.v + (1.0 - b2) * garr * garr
    v_hat = v_t / (1.0 - b2**t)
    u = m_hat / (np.sqrt(v_hat) + cfg.eps)

    new_state = MomentState(m_prev=m_t, m_prev2=state.m_prev, v=v_t, v_max=state.v_max)
    return g.with_values(u), g.with_values(v_hat), new_state


def combined_decay(
    theta: ParamTensor, v_hat: ParamTensor, eta_t: float, cfg: DecayConfig
) -> ParamTensor:
    """Decay displacement d, already scaled by the scheduled learning rate:

        d = eta_t * [1 / sqrt(mean(v_hat))] * weight_decay * [1 - 1/|theta|] * theta

    The bracketed factors are dropped when ``stable`` / ``norm_loss`` are off;
    with both off this is the plain decoupled decay eta_t * weight_decay * theta.
    |theta| is the whole-tensor Frobenius norm, mean(v_hat) the whole-tensor
    mean. An exactly-zero tensor decays to d = 0.
    """
    if theta.shape != v_hat.shape:
        raise ValueError(
            f"shape mismatch: theta {theta.shape} vs v_hat {v_hat.shape}"
        )
    if eta_t < 0:
        raise ValueError(f"eta_t must be >= 0, got {eta_t}")
    scale = eta_t * cfg.weight_decay
    if cfg.stable:
        scale /= max(math.sqrt(float(np.mean(v_hat.values))), STABLE_DECAY_FLOOR)
    if cfg.norm_loss:
        norm = frobenius_norm(theta)
        if norm == 0.0:
            return theta.with_values(np.zeros(theta.size))
        scale *= 1.0 - 1.0 / norm
    return theta.with_values(scale * theta.values)
