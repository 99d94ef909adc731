"""Least-squares adversarial losses, reconstruction losses and their aggregation"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Mapping

import torch

from .errors import ConfigError, NonFiniteLossError, ShapeError

# The forward-consistency term reconstructs a cartoon with F_r(G_r(c)); the only
# generator that maps back to the cartoon domain is G_c.
F_R_ALIAS = 'G_c'

REAL_LABEL = 1.0
FAKE_LABEL = 0.0
DEFAULT_LAMBDA_CYC = 10.0

COMPONENTS = ('g_r_adv', 'g_c_adv', 'd_r', 'd_c', 'forward_cyc', 'backward_cyc')


def lsgan_generator_loss(d_fake: torch.Tensor) -> torch.Tensor:
    """mean((1 - D(G(x)))^2) over batch and patches"""
    return torch.mean((REAL_LABEL - d_fake) ** 2)


def lsgan_discriminator_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """1/2 mean((D(x) - 1)^2) + 1/2 mean(D(G(x))^2)"""
    return 0.5 * torch.mean((d_real - REAL_LABEL) ** 2) + 0.5 * torch.mean((d_fake - FAKE_LABEL) ** 2)


def reconstruction_loss(x: torch.Tensor, x_rec: torch.Tensor) -> torch.Tensor:
    """Per-element mean absolute difference between an image batch and its reconstruction"""
    if x.shape != x_rec.shape:
        raise ShapeError(f"Reconstruction shape {tuple(x_rec.shape)} does not match input {tuple(x.shape)}")
    return torch.mean(torch.abs(x - x_rec))


@dataclass
class LossReport:
    """Scalar values of every objective for one training step"""

    g_r_adv: float = 0.0
    g_c_adv: float = 0.0
    d_r: float = 0.0
    d_c: float = 0.0
    forward_cyc: float = 0.0
    backward_cyc: float = 0.0
    total_g: float = 0.0
    total_d: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def check_finite(self) -> None:
        for name, value in self.to_dict().items():
            if not math.isfinite(value):
                raise NonFiniteLossError(name, self.to_dict())


def total_objective(components: Mapping[str, float], lambda_cyc: float = DEFAULT_LAMBDA_CYC) -> LossReport:
    """
    Fill the totals of a report from its components

    total_g = g_r_adv + g_c_adv + lambda_cyc * (forward_cyc + backward_cyc)
    total_d = d_r + d_c
    """
    if lambda_cyc < 0:
        raise ConfigError(f"lambda_cyc must be >= 0, got {lambda_cyc}")
    values = {name: float(components.get(name, 0.0)) for name in COMPONENTS}
    report = LossReport(**values)
    report.total_g = (report.g_r_adv + report.g_c_adv
                      + lambda_cyc * (report.forward_cyc + report.backward_cyc))
    report.total_d = report.d_r + report.d_c
    return report


def generator_objective(g_r_adv: torch.Tensor, g_c_adv: torch.Tensor,
                        forward_cyc: torch.Tensor, backward_cyc: torch.Tensor,
                        lambda_cyc: float) -> torch.Tensor:
    """Differentiable total_g used for the joint generator update"""
    return g_r_adv + g_c_adv + lambda_cyc * (forward_cyc + backward_cyc)
