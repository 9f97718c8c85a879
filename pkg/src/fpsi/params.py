"""Physical coefficients of the coupled problem."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicsParams:
    """Coefficient set; positivity follows the well-posedness hypotheses."""

    rho_b: float = 1.0  # porous-matrix density
    c0: float = 1.0  # storage coefficient
    alpha: float = 1.0  # pressure-coupling coefficient
    kappa: float = 1.0  # permeability
    mu_e: float = 1.0  # elastic shear modulus
    lambda_e: float = 1.0  # elastic bulk modulus
    mu_v: float = 0.0  # viscoelastic shear modulus
    lambda_v: float = 0.0  # viscoelastic bulk modulus
    rho_p: float = 1.0  # plate density
    nu: float = 1.0  # fluid kinematic viscosity
    beta: float = 0.0  # interface slip friction

    def validate(self) -> None:
        strict = {
            "rho_b": self.rho_b,
            "c0": self.c0,
            "alpha": self.alpha,
            "kappa": self.kappa,
            "mu_e": self.mu_e,
            "lambda_e": self.lambda_e,
            "rho_p": self.rho_p,
            "nu": self.nu,
        }
        for name, value in strict.items():
            if not value > 0:
                raise ConfigError(f"physics.{name} must be strictly positive, got {value}")
        for name, value in (
            ("mu_v", self.mu_v),
            ("lambda_v", self.lambda_v),
            ("beta", self.beta),
        ):
            if value < 0:
                raise ConfigError(f"physics.{name} must be nonnegative, got {value}")
