"""Validated market inputs and derived diffusion coefficients.

All types are frozen dataclasses: a validated model can be shared freely
across workers and re-validation of the same inputs is byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROB_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when one or more model invariants are violated.

    Carries the full list of violations so a config can be fixed in one
    pass instead of one failure at a time.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class InsuranceParams:
    """Insurance market: safety loadings and claim-size moments."""

    eta1: float   # insurer safety loading
    eta2: float   # reinsurer safety loading
    lambda1: float  # claim intensity (1/year)
    mu1: float    # first moment of claim size
    mu2: float    # second moment of claim size

    def violations(self):
        v = []
        if not self.lambda1 > 0:
            v.append(f"lambda1 must be > 0, got {self.lambda1}")
        if not self.mu1 > 0:
            v.append(f"mu1 must be > 0, got {self.mu1}")
        if not self.mu2 > 0:
            v.append(f"mu2 must be > 0, got {self.mu2}")
        if not self.eta1 >= 0:
            v.append(f"eta1 must be >= 0, got {self.eta1}")
        if not self.eta2 >= self.eta1:
            v.append(f"eta2 must be >= eta1 (no arbitrage), got eta2={self.eta2} < eta1={self.eta1}")
        if self.mu2 > 0 and self.mu1 > 0 and not self.mu2 >= self.mu1 ** 2:
            v.append(f"mu2 must be >= mu1^2, got mu2={self.mu2} < {self.mu1 ** 2}")
        return v


@dataclass(frozen=True)
class DiffusionCoefficients:
    """Diffusion approximation of the surplus: drift scale a, noise scale b,
    loading gap eta = eta1 - eta2 <= 0."""

    a: float
    b: float
    eta: float


@dataclass(frozen=True)
class HestonParams:
    """Risk-free rate plus stochastic-volatility dynamics of the risky asset."""

    r: float      # risk-free rate
    xi: float     # volatility premium
    kappa: float  # mean-reversion rate of variance
    theta: float  # long-run variance
    sigma: float  # vol of vol
    rho: float    # correlation between price and variance shocks
    v0: float     # initial variance

    def violations(self):
        v = []
        for name in ("r", "xi", "kappa", "theta", "sigma", "v0"):
            val = getattr(self, name)
            if not val > 0:
                v.append(f"{name} must be > 0, got {val}")
        if not -1.0 <= self.rho <= 1.0:
            v.append(f"rho must be in [-1, 1], got {self.rho}")
        if not 2.0 * self.kappa * self.theta > self.sigma ** 2:
            v.append(
                "Feller condition violated: 2*kappa*theta="
                f"{2.0 * self.kappa * self.theta} <= sigma^2={self.sigma ** 2}"
            )
        return v


@dataclass(frozen=True)
class AversionDistribution:
    """n-point distribution of the risk-aversion coefficient.

    Duplicate gamma atoms are kept distinct; probabilities must sum to one
    within PROB_SUM_TOL (no silent renormalization).
    """

    gammas: tuple
    probs: tuple

    @classmethod
    def from_lists(cls, gammas, probs):
        return cls(tuple(float(g) for g in gammas), tuple(float(p) for p in probs))

    @classmethod
    def single(cls, gamma):
        return cls((float(gamma),), (1.0,))

    @property
    def n(self):
        return len(self.gammas)

    @property
    def mean(self):
        return float(np.dot(self.gammas, self.probs))

    def violations(self):
        v = []
        if len(self.gammas) != len(self.probs):
            v.append(f"gammas and probs differ in length: {len(self.gammas)} vs {len(self.probs)}")
            return v
        if len(self.gammas) == 0:
            v.append("distribution must have at least one atom")
            return v
        for i, g in enumerate(self.gammas):
            if not g > 0:
                v.append(f"gamma[{i}] must be > 0, got {g}")
        for i, p in enumerate(self.probs):
            if not p > 0:
                v.append(f"prob[{i}] must be > 0, got {p}")
        s = math.fsum(self.probs)
        if abs(s - 1.0) > PROB_SUM_TOL:
            v.append(f"probabilities must sum to 1 within {PROB_SUM_TOL}, got {s!r}")
        return v


@dataclass(frozen=True)
class Horizon:
    """Time grid [0, T] with M uniform steps and the initial wealth x0."""

    T: float
    M: int
    x0: float = 1.0

    @property
    def l(self):
        return self.T / self.M

    def grid(self):
        """Grid points t_m = m*l with the final point pinned to T exactly."""
        t = self.l * np.arange(self.M + 1)
        t[-1] = self.T
        return t

    def violations(self):
        v = []
        if not self.T > 0:
            v.append(f"T must be > 0, got {self.T}")
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 1):
            v.append(f"M must be an integer >= 1, got {self.M!r}")
        return v


@dataclass(frozen=True)
class ValidatedModel:
    """Immutable bundle of validated inputs plus derived diffusion scales."""

    ins: InsuranceParams
    heston: HestonParams
    dist: AversionDistribution
    horizon: Horizon
    diffusion: DiffusionCoefficients

    @property
    def mean_gamma(self):
        return self.dist.mean


def derive_diffusion(ins: InsuranceParams) -> DiffusionCoefficients:
    """Diffusion scales of the surplus approximation: a = lambda1*mu1,
    b = sqrt(lambda1*mu2), eta = eta1 - eta2."""
    bad = ins.violations()
    if bad:
        raise ValidationError(bad)
    return DiffusionCoefficients(
        a=ins.lambda1 * ins.mu1,
        b=math.sqrt(ins.lambda1 * ins.mu2),
        eta=ins.eta1 - ins.eta2,
    )


def validate_config(ins, heston, dist, horizon) -> ValidatedModel:
    """Check every type invariant and return the immutable model bundle.

    Violations are aggregated: a single ValidationError lists all of them.
    """
    violations = []
    violations += ins.violations()
    violations += heston.violations()
    violations += dist.violations()
    violations += horizon.violations()
    if violations:
        raise ValidationError(violations)
    return ValidatedModel(
        ins=ins,
        heston=heston,
        dist=dist,
        horizon=horizon,
        diffusion=derive_diffusion(ins),
    )
