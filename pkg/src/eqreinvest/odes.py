"""Exponent functions of the value-function ansatz.

Per risk-aversion atom gamma_i the ansatz exponent splits into three
deterministic functions of time: g1 (closed form, exponential in the
time to maturity), g2 (a coupled Riccati-type system, solved numerically
by a one-predictor one-corrector modified Euler scheme on the
time-reversed ODE), and g3 (a pure quadrature once g1, g2 and the
retention path are known). A single-atom closed form for g2 is kept as
an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import HestonParams, ValidatedModel

BLOWUP_THRESHOLD = 1e8


class BlowUpError(RuntimeError):
    """The coupled g2 system left the trusted range (local existence only)."""

    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(
            f"g2 solver blow-up at step {step}: |h2| = {value:.3e} exceeds {BLOWUP_THRESHOLD:.0e}"
        )


@dataclass(frozen=True)
class RiccatiConstants:
    """Constants of the scalar Riccati equation satisfied by g2 when all
    atoms share one aversion: k1 = -xi^2, k2 = kappa + rho*sigma*xi,
    k3 = sigma^2(1-rho^2), k4 = sqrt(k2^2 - k1*k3)."""

    k1: float
    k2: float
    k3: float
    k4: float

    @classmethod
    def from_heston(cls, h: HestonParams):
        k1 = -h.xi ** 2
        k2 = h.kappa + h.rho * h.sigma * h.xi
        k3 = h.sigma ** 2 * (1.0 - h.rho ** 2)
        k4 = math.sqrt(k2 ** 2 - k1 * k3)
        return cls(k1=k1, k2=k2, k3=k3, k4=k4)


@dataclass
class GSolution:
    """Time-gridded ansatz exponents, one row per aversion atom.

    g1, g2, g3 have shape (n_atoms, M+1); nonpositive_g2[i] is True when
    g2 of atom i stays <= 0 on the whole grid (the sign hypothesis of the
    admissibility result).
    """

    grid: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    step: float
    nonpositive_g2: np.ndarray


def g1_closed(t, gamma, r, T):
    """g1(t) = -gamma * e^{r(T-t)}; accepts scalar or array t."""
    return -gamma * np.exp(r * (T - np.asarray(t, dtype=float)))


def g2_closed_single(t, heston: HestonParams, T):
    """Closed-form g2 for a single aversion atom; independent of gamma.

    The generic formula needs k3 > 0; at |rho| = 1 the quadratic term
    drops out and the linear-ODE limit is evaluated instead.
    """
    k = RiccatiConstants.from_heston(heston)
    tau = T - np.asarray(t, dtype=float)
    if k.k3 == 0.0:
        if k.k2 == 0.0:
            return 0.5 * k.k1 * tau
        return (k.k1 / (2.0 * k.k2)) * (1.0 - np.exp(-k.k2 * tau))
    e = np.expm1(k.k4 * tau)
    return k.k1 * e / (2.0 * k.k4 + (k.k2 + k.k4) * e)


def solve_g2_coupled(model: ValidatedModel) -> np.ndarray:
    """Integrate the coupled g2 system with the modified Euler scheme.

    The backward ODE is integrated forward in time-since-maturity s with
    h2(0) = 0; one predictor and one corrector step per grid interval, all
    atoms advanced simultaneously against the same previous-step vector.
    The result is reversed onto the t grid. Raises BlowUpError when any
    |h2| exceeds BLOWUP_THRESHOLD.
    """
    hs = model.heston
    hz = model.horizon
    M, l = hz.M, hz.l
    gammas = np.asarray(model.dist.gammas, dtype=float)
    probs = np.asarray(model.dist.probs, dtype=float)
    e_gamma = model.mean_gamma
    xi, kappa, sigma, rho, r = hs.xi, hs.kappa, hs.sigma, hs.rho, hs.r
    rs = rho * sigma
    s_grid = hz.grid()  # same spacing forward in s as the t grid

    def rhs(s, h):
        # investment kernel couples the atoms through the probability-weighted sum
        pi_hat = (xi + rs * float(h @ probs)) / e_gamma * math.exp(-r * s)
        g1s = -gammas * math.exp(r * s)  # g1 evaluated at time T - s
        pg = pi_hat * g1s
        return xi * pg + 0.5 * pg ** 2 - kappa * h + 0.5 * sigma ** 2 * h ** 2 + rs * pg * h

    h2 = np.zeros((model.dist.n, M + 1))
    h = np.zeros(model.dist.n)
    for m in range(M):
        f0 = rhs(s_grid[m], h)
        f1 = rhs(s_grid[m + 1], h + l * f0)
        h = h + 0.5 * l * (f0 + f1)
        if not np.all(np.isfinite(h)):
            raise BlowUpError(m + 1, float("inf"))
        worst = float(np.max(np.abs(h)))
        if worst > BLOWUP_THRESHOLD:
            raise BlowUpError(m + 1, worst)
        h2[:, m + 1] = h
    return np.ascontiguousarray(h2[:, ::-1])  # g2(t_m) = h2(T - t_m)


def _q_hat_grid(model: ValidatedModel, grid):
    ins, hs = model.ins, model.heston
    # reduced form of a*eta2/(b^2 E[gamma]): the claim intensity cancels
    ratio = ins.mu1 * ins.eta2 / (ins.mu2 * model.mean_gamma)
    return ratio * np.exp(-hs.r * (model.horizon.T - grid))


def solve_g3(model: ValidatedModel, g1, g2) -> np.ndarray:
    """g3 by composite trapezoid of its ODE right side from t to T.

    Requires g1 and g2 already on the grid; g3(T) = 0 exactly.
    """
    if not np.all(np.isfinite(g2)):
        raise BlowUpError(-1, float("inf"))
    d, hs = model.diffusion, model.heston
    grid = model.horizon.grid()
    q = _q_hat_grid(model, grid)
    integrand = (
        (d.a * d.eta + d.a * model.ins.eta2 * q) * g1
        + 0.5 * d.b ** 2 * q ** 2 * g1 ** 2
        + hs.kappa * hs.theta * g2
    )
    dt = np.diff(grid)
    seg = 0.5 * (integrand[:, 1:] + integrand[:, :-1]) * dt
    g3 = np.zeros_like(g1)
    g3[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    return g3


def solve_g(model: ValidatedModel) -> GSolution:
    """Full G-solution: closed-form g1, coupled g2, quadrature g3."""
    grid = model.horizon.grid()
    gammas = np.asarray(model.dist.gammas)
    g1 = -gammas[:, None] * np.exp(model.heston.r * (model.horizon.T - grid))[None, :]
    g2 = solve_g2_coupled(model)
    g2[:, -1] = 0.0  # terminal condition pinned exactly
    g3 = solve_g3(model, g1, g2)
    return GSolution(
        grid=grid,
        g1=g1,
        g2=g2,
        g3=g3,
        step=model.horizon.l,
        nonpositive_g2=np.all(g2 <= 0.0, axis=1),
    )


def residual_check(gsol: GSolution, model: ValidatedModel) -> np.ndarray:
    """Max absolute defect of the coupled g2 ODE at interior grid points.

    dg2/dt is approximated by centered differences; the returned array has
    one entry per atom.
    """
    hs = model.heston
    gammas = np.asarray(model.dist.gammas)[:, None]
    probs = np.asarray(model.dist.probs)
    grid, g1, g2 = gsol.grid, gsol.g1, gsol.g2
    pi_hat = (
        (hs.xi + hs.rho * hs.sigma * (probs @ g2))
        / model.mean_gamma
        * np.exp(-hs.r * (model.horizon.T - grid))
    )
    rhs = (
        hs.xi * pi_hat * g1
        + 0.5 * pi_hat ** 2 * g1 ** 2
        - hs.kappa * g2
        + 0.5 * hs.sigma ** 2 * g2 ** 2
        + hs.rho * pi_hat * hs.sigma * g1 * g2
    )
    dg2_dt = (g2[:, 2:] - g2[:, :-2]) / (grid[2:] - grid[:-2])
    defect = dg2_dt + rhs[:, 1:-1]  # the ODE reads -dg2/dt = rhs
    return np.max(np.abs(defect), axis=1)


def g3_closed_single(t, model: ValidatedModel):
    """Closed-form g3 for a single aversion atom (test oracle).

    Valid when k3 > 0; combines a linear term, the discounting term and a
    logarithmic integral of the closed-form g2.
    """
    if model.dist.n != 1:
        raise ValueError("closed-form g3 requires exactly one aversion atom")
    d, hs = model.diffusion, model.heston
    gamma = model.dist.gammas[0]
    k = RiccatiConstants.from_heston(hs)
    tau = model.horizon.T - np.asarray(t, dtype=float)
    e = np.expm1(k.k4 * tau)
    log_term = np.log(2.0 * k.k4 * np.exp(0.5 * (k.k2 + k.k4) * tau) / (2.0 * k.k4 + (k.k2 + k.k4) * e))
    return (
        -0.5 * (d.a ** 2 * model.ins.eta2 ** 2 / d.b ** 2) * tau
        + (d.a * d.eta * gamma / hs.r) * (1.0 - np.exp(hs.r * tau))
        + (2.0 * hs.kappa * hs.theta / k.k3) * log_term
    )
