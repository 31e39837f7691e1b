import math

import numpy as np
import pytest

from eqreinvest import BlowUpError, RiccatiConstants, solve_g
from eqreinvest.model import AversionDistribution, HestonParams, Horizon, validate_config
from eqreinvest.odes import (
    g1_closed,
    g2_closed_single,
    g3_closed_single,
    residual_check,
    solve_g2_coupled,
)
from eqreinvest.presets import BASE_HESTON, BASE_INSURANCE, CASE_I, baseline_model

# Frozen oracle: constants of the scalar Riccati equation for the baseline
# market (xi = 7/15, kappa = 5, sigma = 0.25, rho = -0.5), computed with
# 40-digit arithmetic and rounded to double precision.
K1_BASE = -0.21777777777777776
K2_BASE = 4.941666666666666
K3_BASE = 0.046875
K4_BASE = 4.942699442387507

# Frozen oracle: closed-form g2(0) for the baseline market at T = 10,
# same 40-digit computation.
G2_AT_0_T10 = -0.022032548711271555


def test_riccati_constants_baseline():
    k = RiccatiConstants.from_heston(BASE_HESTON)
    assert k.k1 == pytest.approx(K1_BASE, rel=1e-15)
    assert k.k2 == pytest.approx(K2_BASE, rel=1e-15)
    assert k.k3 == pytest.approx(K3_BASE, rel=1e-15)
    assert k.k4 == pytest.approx(K4_BASE, rel=1e-15)


@pytest.mark.parametrize("rho", [-0.9, -0.3, 0.4, 0.8])
def test_riccati_constants_rho_symmetry(rho):
    def at(r):
        return RiccatiConstants.from_heston(
            HestonParams(r=0.05, xi=0.4, kappa=5.0, theta=0.0225, sigma=0.25, rho=r, v0=0.0225)
        )

    kp, km = at(rho), at(-rho)
    assert kp.k1 == km.k1
    assert kp.k3 == km.k3
    assert kp.k2 + km.k2 == pytest.approx(2.0 * 5.0, rel=1e-15)


def test_g1_closed_terminal_and_discounting():
    assert g1_closed(10.0, gamma=4.0, r=0.05, T=10.0) == -4.0
    assert g1_closed(0.0, gamma=0.5, r=0.05, T=10.0) == pytest.approx(-0.5 * math.e ** 0.5, rel=1e-15)


def test_g2_closed_frozen_value():
    assert g2_closed_single(0.0, BASE_HESTON, T=10.0) == pytest.approx(G2_AT_0_T10, rel=1e-14)


def test_g2_closed_matches_fine_scalar_integration():
    """Cross-check the closed form against a brute-force fine-step integration
    of the scalar Riccati ODE (step 1e-5), an oracle independent of the
    production solver."""
    k = RiccatiConstants.from_heston(BASE_HESTON)
    l, n = 1e-5, 1_000_000  # integrate s in [0, 10]

    def f(h):
        return 0.5 * k.k1 - k.k2 * h + 0.5 * k.k3 * h ** 2

    h = 0.0
    for _ in range(n):
        f0 = f(h)
        h = h + 0.5 * l * (f0 + f(h + l * f0))
    # time reversal h(s) = g2(T - s), so h(10) = g2(0)
    assert h == pytest.approx(G2_AT_0_T10, abs=1e-10)
    assert g2_closed_single(0.0, BASE_HESTON, T=10.0) == pytest.approx(h, abs=1e-10)


def test_coupled_solver_matches_closed_form_single_atom(model_single, gsol_single):
    ref = g2_closed_single(gsol_single.grid, model_single.heston, model_single.horizon.T)
    assert np.max(np.abs(gsol_single.g2[0] - ref)) < 1e-6


def test_g2_independent_of_single_gamma_value():
    sols = []
    for gamma in (0.5, 4.0):
        m = validate_config(
            BASE_INSURANCE, BASE_HESTON, AversionDistribution.single(gamma), Horizon(T=10.0, M=2000)
        )
        sols.append(solve_g2_coupled(m))
    assert np.max(np.abs(sols[0] - sols[1])) < 1e-13


def test_atom_collapse_equivalence():
    """Splitting one atom into identical duplicates must not change g2."""
    whole = validate_config(
        BASE_INSURANCE, BASE_HESTON, AversionDistribution.single(2.0), Horizon(T=10.0, M=2000)
    )
    split = validate_config(
        BASE_INSURANCE,
        BASE_HESTON,
        AversionDistribution.from_lists([2.0, 2.0, 2.0], [0.2, 0.3, 0.5]),
        Horizon(T=10.0, M=2000),
    )
    g2w = solve_g2_coupled(whole)
    g2s = solve_g2_coupled(split)
    assert np.max(np.abs(g2s - g2w[0])) < 1e-12


def test_g2_terminal_condition_exact(gsol_case1):
    assert np.all(gsol_case1.g2[:, -1] == 0.0)
    assert np.all(gsol_case1.g3[:, -1] == 0.0)


def test_g2_nonpositive_baseline(gsol_case1):
    assert np.all(gsol_case1.g2 <= 0.0)
    assert np.all(gsol_case1.nonpositive_g2)


def test_g3_matches_closed_form_single_atom(model_single, gsol_single):
    ref = g3_closed_single(gsol_single.grid, model_single)
    assert np.max(np.abs(gsol_single.g3[0] - ref)) < 1e-6


def test_residual_small_on_baseline(model_case1, gsol_case1):
    assert np.max(residual_check(gsol_case1, model_case1)) < 1e-5


def test_second_order_convergence():
    """Error against the single-atom closed form contracts ~4x per halving."""
    errs = []
    for M in (250, 500, 1000):
        m = validate_config(
            BASE_INSURANCE, BASE_HESTON, AversionDistribution.single(1.0), Horizon(T=10.0, M=M)
        )
        g2 = solve_g2_coupled(m)
        ref = g2_closed_single(m.horizon.grid(), BASE_HESTON, 10.0)
        errs.append(np.max(np.abs(g2[0] - ref)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(o > 1.9 for o in orders)


def test_blow_up_detected():
    heston = HestonParams(r=0.05, xi=50.0, kappa=5.0, theta=1.0, sigma=1.0, rho=-0.9, v0=1.0)
    m = validate_config(BASE_INSURANCE, heston, CASE_I, Horizon(T=10.0, M=10000))
    with pytest.raises(BlowUpError) as exc:
        solve_g2_coupled(m)
    assert exc.value.step >= 1


def test_minimal_grid_runs():
    m = baseline_model("caseI", T=1.0, M=1)
    gsol = solve_g(m)
    assert gsol.g2.shape == (2, 2)
    assert np.all(gsol.g2[:, -1] == 0.0)
