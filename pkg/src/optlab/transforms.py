"""Gradient-to-gradient transforms applied before moment estimation.

All transforms are pure: they take tensors and return new tensors, so they
compose in any order and property tests stay trivial. The preset order is
unit-wise clipping first, centralization second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ParamTensor, frobenius_norm, row_norms


@dataclass(frozen=True)
class ClipConfig:
    """Unit-wise clipping threshold and the epsilon guarding zero parameters."""

    tau: float = 1e-2
    eps: float = 1e-3

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


def unit_scale_factors(g: ParamTensor, theta: ParamTensor, cfg: ClipConfig) -> np.ndarray:
    """Per-unit multipliers for adaptive clipping.

    Unit r gets tau * max(|theta_r|, eps) / |g_r| when its gradient-to-parameter
    norm ratio exceeds tau, and 1.0 otherwise. Written multiplicatively
    (|g_r| > tau * max(|theta_r|, eps)) so zero-gradient units never divide by 0.
    """
    if g.shape != theta.shape:
        raise ValueError(
            f"shape mismatch: gradient {g.shape} vs parameter {theta.shape}"
        )
    g_norms = row_norms(g)
    limits = cfg.tau * np.maximum(row_norms(theta), cfg.eps)
    factors = np.ones_like(g_norms)
    mask = g_norms > limits
    factors[mask] = limits[mask] / g_norms[mask]
    return factors


def scale_units(g: ParamTensor, factors: np.ndarray) -> ParamTensor:
    """Multiply each unit (dim-0 slice, or element for rank-1) by its factor."""
    if g.rank == 1:
        return g.with_values(g.values * factors)
    scaled = g.array.reshape(g.shape[0], -1) * factors[:, None]
    return g.with_values(scaled.ravel())


def adaptive_gradient_clip(
    g: ParamTensor, theta: ParamTensor, cfg: ClipConfig = ClipConfig()
) -> ParamTensor:
    """Rescale each unit whose gradient norm exceeds tau times its parameter norm.

    Clipped units keep their direction exactly; unclipped units pass through
    unchanged. Units are dim-0 slices (per element for rank-1 tensors).
    """
    return scale_units(g, unit_scale_factors(g, theta, cfg))


def global_threshold_clip(g: ParamTensor, tau: float) -> ParamTensor:
    """Whole-tensor Frobenius clip: rescale to norm tau when the norm exceeds tau.

    Test oracle for the unit-wise clip; not used by any preset.
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    norm = frobenius_norm(g)
    if norm <= tau:
        return g.with_values(g.values)
    return g.with_values(g.values * (tau / norm))


def gradient_centralize(g: ParamTensor) -> ParamTensor:
    """Subtract each dim-0 slice's mean (over all remaining axes).

    Applies only to tensors with more than one axis; rank-1 gradients
    (biases, norm scales) pass through unchanged.
    """
    if g.rank == 1:
        return g.with_values(g.values)
    mat = g.array.reshape(g.shape[0], -1)
    centered = mat - mat.mean(axis=1, keepdims=True)
    return g.with_values(centered.ravel())
