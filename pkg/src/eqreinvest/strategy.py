"""Equilibrium strategies, admissibility check and value function.

The retained proportion q_hat is fully analytic; the investment amount
pi_hat flows through the g2 solution. Both are deterministic and
state-independent: they depend on time and model parameters only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .model import ValidatedModel
from .odes import GSolution

REGIME_REINSURANCE = "Reinsurance"
REGIME_NEW_BUSINESS = "NewBusiness"
REGIME_BOUNDARY = "Boundary"

EXP_OVERFLOW_LIMIT = 700.0


class ValueRangeError(ArithmeticError):
    """Ansatz exponent out of floating-point range; the value is not
    representable rather than infinite."""

    def __init__(self, exponent):
        self.exponent = exponent
        super().__init__(
            f"ansatz exponent {exponent:.6g} exceeds {EXP_OVERFLOW_LIMIT:g}; value out of range"
        )


@dataclass
class StrategyPath:
    """Equilibrium (q_hat, pi_hat) on the grid plus per-point regime label."""

    grid: np.ndarray
    q_hat: np.ndarray
    pi_hat: np.ndarray
    regime: np.ndarray  # array of regime label strings


@dataclass
class AdmissibilityReport:
    """Pointwise evaluation of the moment-bound condition.

    lhs[i][m] = -8*gamma_i*xi*pi_bar(t_m) + 32*gamma_i^2*pi_bar(t_m)^2 must
    stay below rhs = kappa^2/(2 sigma^2), and every g2 must be nonpositive.
    Failure is data, not an error: the strategy stays evaluable, only the
    verification guarantee lapses.
    """

    grid: np.ndarray
    lhs: np.ndarray          # (n_atoms, M+1)
    rhs: float
    g2_nonpositive: np.ndarray
    passed: bool
    first_violation: Optional[Tuple[int, int]]  # (atom index, grid index)
    max_lhs: float

    @property
    def margin(self):
        """rhs - lhs; negative where the condition fails."""
        return self.rhs - self.lhs


def retention_ratio(model: ValidatedModel) -> float:
    """a*eta2 / (b^2 * E[gamma]) — the undiscounted retained proportion.

    a = lambda1*mu1 and b^2 = lambda1*mu2, so the claim intensity cancels;
    evaluating the reduced form keeps the ratio exactly intensity-free
    instead of merely up to rounding.
    """
    ins = model.ins
    return ins.mu1 * ins.eta2 / (ins.mu2 * model.mean_gamma)


def q_hat(model: ValidatedModel, t):
    """Analytic retained proportion q_hat(t); no ODE dependence."""
    t = np.asarray(t, dtype=float)
    return retention_ratio(model) * np.exp(-model.heston.r * (model.horizon.T - t))


def pi_bar_path(model: ValidatedModel, gsol: GSolution) -> np.ndarray:
    """Undiscounted investment kernel on the grid."""
    hs = model.heston
    probs = np.asarray(model.dist.probs)
    return (hs.xi + hs.rho * hs.sigma * (probs @ gsol.g2)) / model.mean_gamma


def _classify(q):
    regime = np.where(q < 1.0, REGIME_REINSURANCE, REGIME_NEW_BUSINESS)
    return np.where(q == 1.0, REGIME_BOUNDARY, regime)


def equilibrium_strategy(model: ValidatedModel, gsol: GSolution) -> StrategyPath:
    """Assemble the equilibrium strategy path from the G-solution."""
    grid = gsol.grid
    discount = np.exp(-model.heston.r * (model.horizon.T - grid))
    q = q_hat(model, grid)
    pi = pi_bar_path(model, gsol) * discount
    return StrategyPath(grid=grid, q_hat=q, pi_hat=pi, regime=_classify(q))


def check_admissibility(model: ValidatedModel, gsol: GSolution) -> AdmissibilityReport:
    """Evaluate the admissibility condition at every grid point and atom.

    Uses the undiscounted kernel pi_bar, not the discounted pi_hat.
    """
    hs = model.heston
    gammas = np.asarray(model.dist.gammas)[:, None]
    pb = pi_bar_path(model, gsol)[None, :]
    lhs = -8.0 * gammas * hs.xi * pb + 32.0 * gammas ** 2 * pb ** 2
    rhs = hs.kappa ** 2 / (2.0 * hs.sigma ** 2)
    g2_ok = np.all(gsol.g2 <= 0.0, axis=1)
    bad = (lhs > rhs) | (gsol.g2 > 0.0)
    passed = bool(np.all(lhs <= rhs) and np.all(g2_ok))
    first_violation = None
    if not passed:
        atoms, points = np.nonzero(bad)
        if atoms.size:
            # earliest grid point, then lowest atom index
            order = np.lexsort((atoms, points))
            first_violation = (int(atoms[order[0]]), int(points[order[0]]))
    return AdmissibilityReport(
        grid=gsol.grid,
        lhs=lhs,
        rhs=rhs,
        g2_nonpositive=g2_ok,
        passed=passed,
        first_violation=first_violation,
        max_lhs=float(np.max(lhs)),
    )


class ValueSurface:
    """Evaluators for the equilibrium value function and per-atom ansatz.

    Off-grid times are handled by linear interpolation of the g values.
    """

    def __init__(self, model: ValidatedModel, gsol: GSolution):
        self._model = model
        self._gsol = gsol

    def _g_at(self, t):
        g = self._gsol
        g1 = np.array([np.interp(t, g.grid, row) for row in g.g1])
        g2 = np.array([np.interp(t, g.grid, row) for row in g.g2])
        g3 = np.array([np.interp(t, g.grid, row) for row in g.g3])
        return g1, g2, g3

    def value(self, t, x, v) -> float:
        """Equilibrium value U(t, x, v): probability-weighted combination of
        the ansatz exponents, affine in x and v."""
        g1, g2, g3 = self._g_at(t)
        gammas = np.asarray(self._model.dist.gammas)
        probs = np.asarray(self._model.dist.probs)
        return float(-np.sum((g1 * x + g2 * v + g3) / gammas * probs))

    def atom_value(self, t, x, v, i) -> float:
        """Per-atom expectation function Y_i(t, x, v) = -(1/gamma_i) e^{exponent}."""
        g1, g2, g3 = self._g_at(t)
        gamma = self._model.dist.gammas[i]
        exponent = g1[i] * x + g2[i] * v + g3[i]
        if exponent > EXP_OVERFLOW_LIMIT:
            raise ValueRangeError(exponent)
        return -math.exp(exponent) / gamma


def value_function(model: ValidatedModel, gsol: GSolution) -> ValueSurface:
    if not (np.all(np.isfinite(gsol.g2)) and np.all(np.isfinite(gsol.g3))):
        raise ValueError("G-solution contains non-finite values")
    return ValueSurface(model, gsol)


@dataclass
class RegimeReport:
    """Reinsurance vs new-business classification over the horizon."""

    ratio: float                     # a*eta2 / (b^2 E[gamma])
    crossover_tau: Optional[float]   # time-to-maturity where q_hat crosses 1
    labels: np.ndarray               # per grid point
    reinsurance_throughout: bool


def regime_classification(model: ValidatedModel) -> RegimeReport:
    """Classify the horizon: if the retention ratio is below one the whole
    horizon is reinsurance; otherwise report the crossover time-to-maturity
    (1/r) ln(ratio) and label each grid point."""
    ratio = retention_ratio(model)
    grid = model.horizon.grid()
    labels = _classify(q_hat(model, grid))
    if model.heston.r == 0.0:
        crossover = None
    elif ratio >= 1.0:
        crossover = math.log(ratio) / model.heston.r
    else:
        crossover = None
    return RegimeReport(
        ratio=ratio,
        crossover_tau=crossover,
        labels=labels,
        reinsurance_throughout=bool(np.all(labels == REGIME_REINSURANCE)),
    )


_SENSITIVITY_PARAMS = ("r", "eta2", "lambda1", "mu1", "mu2")
_EXPECTED_SIGNS = {"r": -1, "eta2": 1, "lambda1": 0, "mu1": 1, "mu2": -1}


def _q_hat_with(model: ValidatedModel, t, **overrides):
    ins, hs = model.ins, model.heston
    eta2 = overrides.get("eta2", ins.eta2)
    mu1 = overrides.get("mu1", ins.mu1)
    mu2 = overrides.get("mu2", ins.mu2)
    r = overrides.get("r", hs.r)
    # the claim intensity cancels between a and b^2, so lambda1 overrides
    # leave the value bit-identical by construction
    return mu1 * eta2 / (mu2 * model.mean_gamma) * math.exp(-r * (model.horizon.T - t))


@dataclass
class SensitivityReport:
    """Central-difference sensitivities of q_hat with expected-sign checks."""

    t: float
    derivatives: dict       # param -> finite-difference value
    signs: dict             # param -> -1 | 0 | +1 (computed)
    expected_signs: dict
    agrees: bool


def sensitivity_signs(model: ValidatedModel, t, rel_step=1e-6) -> SensitivityReport:
    """Central finite differences of the analytic q_hat in each insurance and
    rate parameter, compared against the known closed-form signs."""
    derivs = {}
    signs = {}
    for name in _SENSITIVITY_PARAMS:
        base = getattr(model.ins, name) if name != "r" else model.heston.r
        step = abs(base) * rel_step
        up = _q_hat_with(model, t, **{name: base + step})
        dn = _q_hat_with(model, t, **{name: base - step})
        d = (up - dn) / (2.0 * step)
        derivs[name] = d
        # treat tiny finite-difference noise as an exact zero
        scale = _q_hat_with(model, t) / max(abs(base), 1.0)
        if abs(d) <= 1e-14 * max(1.0, abs(scale)):
            signs[name] = 0
        else:
            signs[name] = 1 if d > 0 else -1
    expected = dict(_EXPECTED_SIGNS)
    if t == model.horizon.T:
        expected["r"] = 0  # discount factor is 1 at maturity
    return SensitivityReport(
        t=t,
        derivatives=derivs,
        signs=signs,
        expected_signs=expected,
        agrees=signs == expected,
    )
