"""
Spectral normalization by power iteration

Each normalized weight keeps a persistent estimate ``u`` of its leading left
singular vector. Training-mode forward passes advance ``u`` by one step;
evaluation-mode passes reuse it untouched.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

logger = logging.getLogger(__name__)

EPS = 1e-12


@dataclass
class SpectralState:
    """Persistent power-iteration state of one weight tensor"""

    u: torch.Tensor
    iteration_count: int = 0
    degenerate: bool = False


def matrix_view(weight: torch.Tensor) -> torch.Tensor:
    """Reshape a weight to (out_channels, in_channels * kH * kW)"""
    return weight.reshape(weight.shape[0], -1)


def l2normalize(v: torch.Tensor, eps: float = EPS) -> torch.Tensor:
    return v / (v.norm() + eps)


def init_state(weight: torch.Tensor, generator: Optional[torch.Generator] = None) -> SpectralState:
    """Random unit-norm u matching the row count of the weight"""
    u = torch.randn(weight.shape[0], generator=generator, dtype=weight.dtype)
    return SpectralState(u=l2normalize(u).to(weight.device))


def _right_vector(mat: torch.Tensor, u: torch.Tensor) -> Tuple[torch.Tensor, float]:
    v = torch.mv(mat.t(), u)
    return v, float(v.norm())


def power_iterate(weight: torch.Tensor, state: SpectralState,
                  steps: int = 1) -> Tuple[float, SpectralState]:
    """
    Estimate the largest singular value of a weight

    Args:
        weight: Weight tensor; viewed as (out_channels, rest)
        state: Current state; not mutated
        steps: Number of power-iteration steps (>= 1)

    Returns:
        (sigma, new_state). A zero matrix yields sigma 0 and a degenerate state
        whose u is unchanged.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    with torch.no_grad():
        mat = matrix_view(weight.detach())
        u = state.u
        v = None
        for _ in range(steps):
            v, v_norm = _right_vector(mat, u)
            if v_norm <= EPS:
                return 0.0, replace(state, degenerate=True)
            v = v / v_norm
            u_new = torch.mv(mat, v)
            u_norm = float(u_new.norm())
            if u_norm <= EPS:
                return 0.0, replace(state, degenerate=True)
            u = u_new / u_norm
        sigma = float(torch.dot(u, torch.mv(mat, v)))
    return sigma, SpectralState(u=u, iteration_count=state.iteration_count + steps)


def _differentiable_sigma(weight: torch.Tensor, u: torch.Tensor) -> Optional[torch.Tensor]:
    """sigma = u^T W v with u, v held constant so gradients flow through W"""
    mat = matrix_view(weight)
    with torch.no_grad():
        v, v_norm = _right_vector(mat.detach(), u)
        if v_norm <= EPS:
            return None
        v = v / v_norm
    return torch.dot(u, torch.mv(mat, v))


def spectral_normalize(weight: torch.Tensor,
                       state: SpectralState) -> Tuple[torch.Tensor, SpectralState]:
    """
    Divide a weight by its spectral norm estimated with one power-iteration step

    The original weight stays the trainable parameter; the returned tensor is
    differentiable with respect to it, including through sigma.
    """
    _, new_state = power_iterate(weight, state, steps=1)
    if new_state.degenerate:
        logger.warning("Spectral normalization skipped for a zero weight tensor")
        return weight, new_state
    sigma = _differentiable_sigma(weight, new_state.u)
    return weight / sigma, new_state


class SpectralNormConv2d(nn.Conv2d):
    """Conv2d whose weight is spectrally normalized on every forward pass"""

    def __init__(self, *args, generator: Optional[torch.Generator] = None, **kwargs):
        super().__init__(*args, **kwargs)
        state = init_state(self.weight.detach(), generator)
        self.register_buffer('weight_u', state.u)
        self.register_buffer('weight_iterations', torch.zeros((), dtype=torch.long))

    @property
    def spectral_state(self) -> SpectralState:
        return SpectralState(u=self.weight_u.clone(), iteration_count=int(self.weight_iterations))

    def reset_state(self, generator: Optional[torch.Generator] = None) -> None:
        state = init_state(self.weight.detach(), generator)
        self.weight_u.copy_(state.u)
        self.weight_iterations.zero_()

    def normalized_weight(self) -> torch.Tensor:
        if self.training:
            w_norm, state = spectral_normalize(self.weight, self.spectral_state)
            if not state.degenerate:
                with torch.no_grad():
                    self.weight_u.copy_(state.u)
                    self.weight_iterations.fill_(state.iteration_count)
            return w_norm
        sigma = _differentiable_sigma(self.weight, self.weight_u)
        if sigma is None or float(sigma) <= EPS:
            return self.weight
        return self.weight / sigma

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(x, self.normalized_weight(), self.bias, self.stride,
                        self.padding, self.dilation, self.groups)


def spectral_states(module: nn.Module) -> dict:
    """{layer name: SpectralState} for every spectrally normalized layer of a module"""
    return {name: layer.spectral_state for name, layer in module.named_modules()
            if isinstance(layer, SpectralNormConv2d)}
