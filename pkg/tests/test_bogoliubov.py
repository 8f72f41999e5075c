import numpy as np
import pytest
from conftest import five_lattices
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_search_min

from latbose import errors
from latbose.bogoliubov import (
    TrialStateConfig,
    c_from_s,
    energy_expression,
    finite_energy_from_c,
    fit_power_law,
    log_grid,
    mode_data,
    mode_minimum,
    minimizer_s,
    optimal_c_grid,
    remainder_diagnostics,
    trial_energy_finite,
    trial_energy_thermo,
    upper_bound_sweep,
)
from latbose.lattice import FiniteLattice, momentum_grid, simple_cubic
from latbose.scattering import scattering_data

# trial_energy_thermo for cubic NN, t=1, U=4, rho=1e-2, frozen after cross-checking
# the finite-box energies at L = 16, 32, 64 (relative gaps 0.51%, 0.14%, 0.075%).
E_PSI_CUBIC_U4_RHO_1EM2 = 1.3616209457e-4


# -- single mode -----------------------------------------------------------------
@pytest.mark.parametrize("A", [0.1, 1.0, 7.0])
def test_mode_minimum_symmetric_case(A):
    x0, f = mode_minimum(A, 0.3, 0.3)
    assert x0 == pytest.approx(0.0, abs=1e-15)
    assert f == pytest.approx(0.0, abs=1e-15)


def test_mode_minimum_example_against_grid_search():
    x0, f = mode_minimum(1.0, 1.0, 0.0)
    assert f == pytest.approx((np.sqrt(3) - 2) / 2, rel=1e-14)
    xg, fg = grid_search_min(lambda x: energy_expression(x, 1.0, 1.0, 0.0), -10.0, 0.5, 1e-6)
    assert f == pytest.approx(fg, abs=1e-9)
    assert x0 == pytest.approx(xg, abs=2e-6)


def test_mode_minimum_zero_case():
    assert mode_minimum(2.0, 1.0, 1.0)[1] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.0, 10.0),
    st.floats(1e-3, 10.0),
    st.floats(0.0, 10.0),
)
def test_mode_minimum_is_a_minimum(A, B, C):
    try:
        x0, f = mode_minimum(A, B, C)
    except errors.DomainError:
        den = A + 2 * C
        assert den <= 0 or not np.isfinite(2 * (B - C) / den) or 1 + 2 * (B - C) / den < 0
        return
    assert x0 < 0.5
    assert energy_expression(x0, A, B, C) == pytest.approx(f, rel=1e-9, abs=1e-12)
    xs = np.linspace(max(x0 - 5, -50), 0.5 - 1e-6, 2001)
    assert np.min(energy_expression(xs, A, B, C)) >= f - 1e-9 * (1 + abs(f))


def test_mode_minimum_far_minimizer():
    # tiny curvature: the minimizer is far out but still finite and F stays accurate
    x0, f = mode_minimum(0.0, 1.0, 1e-200)
    assert np.isfinite(x0) and x0 < -1e99
    assert energy_expression(x0, 0.0, 1.0, 1e-200) == pytest.approx(f, rel=1e-12)
    with pytest.raises(errors.DomainError):
        mode_minimum(0.0, 1.0, 5e-324)


def test_mode_minimum_domain_errors():
    with pytest.raises(errors.DomainError):
        mode_minimum(0.0, 1.0, 0.0)  # A + 2C = 0
    with pytest.raises(errors.DomainError):
        mode_minimum(1.0, -1.0, 0.0)  # 1 + 2(B-C)/(A+2C) < 0


def test_minimizer_s_examples():
    assert minimizer_s(1.0, 4.0, 0.0, 0.3) == 0.0
    assert minimizer_s(1.0, 4.0, 0.01, 1.0) == 0.0
    assert minimizer_s(1.0, 4.0, 0.01, 0.5) == pytest.approx(mode_minimum(1.0, 0.04, 0.02)[0], abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, 12.0), st.floats(0.01, 20.0), st.floats(0.0, 1.0), st.floats(0.0, 0.999))
def test_minimizer_s_properties(eps, U, rho, w0):
    s = minimizer_s(eps, U, rho, w0)
    assert s <= 0 and s < 0.5
    assert abs(c_from_s(s)) < 1
    if rho > 0:
        assert s == pytest.approx(mode_minimum(eps, U * rho, U * rho * w0)[0], rel=1e-9, abs=1e-14)


def test_minimizer_s_vanishes_with_rho():
    s = [abs(minimizer_s(0.5, 4.0, r, 0.3)) for r in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert np.all(np.diff(s) < 0) and s[-1] < 1e-7


def test_minimizer_s_small_eps_precision():
    # tiny shift: the stable form keeps full relative precision
    s = minimizer_s(1.0, 1.0, 1e-14, 0.5)
    assert s == pytest.approx(-0.5 * 1e-14 * 0.5, rel=1e-10)


def test_minimizer_s_errors():
    with pytest.raises(errors.DomainError):
        minimizer_s(-1.0, 1.0, 0.1, 0.5)
    with pytest.raises(errors.DomainError):
        minimizer_s(0.0, 1.0, 0.0, 0.5)


def test_mode_data_even_in_p(cubic):
    scat = scattering_data(cubic)
    p = np.array([0.3, -1.2, 2.0])
    a, b = mode_data(cubic, p, 0.01, scat), mode_data(cubic, -p, 0.01, scat)
    assert a.c == pytest.approx(b.c, rel=1e-14)
    assert -1 < a.c <= 0 and a.s < 0.5
    assert mode_data(cubic, p, 0.0, scat).c == 0.0


# -- finite box ---------------------------------------------------------------------
def test_finite_no_interaction(cubic):
    scat = scattering_data(cubic, U=0.0)
    c = optimal_c_grid(cubic, 8, 0.05, scat)
    assert np.all(c == 0)
    assert trial_energy_finite(cubic, TrialStateConfig(0.05, 8), scat).energy_density == 0.0


@pytest.mark.parametrize("U", [0.5, 4.0])
def test_finite_condensate_only(cubic, U):
    L, rho = 6, 0.02
    V = (L + 1) ** 3
    e = finite_energy_from_c(cubic, L, rho, U, np.zeros(V))
    assert e.N0 == pytest.approx(rho * V, rel=1e-15)
    assert e.energy_density * V == pytest.approx(U * e.N0**2 / (2 * V), rel=1e-14)


@pytest.mark.parametrize("model", five_lattices()[:3], ids=["cubic", "ortho", "nnn"])
def test_particle_number_constraint_exact(model):
    scat = scattering_data(model)
    L, rho = 10, 0.03
    e = trial_energy_finite(model, TrialStateConfig(rho, L), scat)
    V = (L + 1) ** 3
    assert e.N0 / V + e.depletion == pytest.approx(rho, rel=1e-14)
    assert e.N0 >= 0


def test_finite_energy_against_direct_expectation(cubic):
    """Independent evaluation of the box energy from n_p and alpha_p by loops."""
    L, rho, U = 4, 0.05, 4.0
    scat = scattering_data(cubic, U=U)
    c = optimal_c_grid(cubic, L, rho, scat)
    g = momentum_grid(FiniteLattice(cubic, L))
    eps = g.dispersion()
    V = eps.size
    n = [ci * ci / (1 - ci * ci) for i, ci in enumerate(c) if i != g.zero_index]
    al = [ci / (1 - ci * ci) for i, ci in enumerate(c) if i != g.zero_index]
    ek = [e for i, e in enumerate(eps) if i != g.zero_index]
    N0 = rho * V - sum(n)
    E = sum(e * x for e, x in zip(ek, n))
    E += U / (2 * V) * (sum(al) ** 2 + 2 * sum(n) ** 2)
    E += U * N0 / V * sum(a + 2 * x for a, x in zip(al, n)) + U * N0**2 / (2 * V)
    assert trial_energy_finite(cubic, TrialStateConfig(rho, L), scat).energy_density == pytest.approx(E / V, rel=1e-12)


def test_pair_correlations_lower_the_energy(cubic):
    L, rho = 8, 0.01
    scat = scattering_data(cubic)
    V = (L + 1) ** 3
    e_opt = trial_energy_finite(cubic, TrialStateConfig(rho, L), scat).energy_density
    e_zero = finite_energy_from_c(cubic, L, rho, 4.0, np.zeros(V)).energy_density
    assert e_opt < e_zero


def test_negative_condensate(cubic):
    L = 4
    with pytest.raises(errors.NegativeCondensate):
        finite_energy_from_c(cubic, L, 1e-3, 4.0, np.full((L + 1) ** 3, 0.5))


def test_c_out_of_range(cubic):
    with pytest.raises(errors.DomainError):
        finite_energy_from_c(cubic, 2, 0.1, 4.0, np.full(27, 1.0))


def test_finite_converges_to_thermo(cubic):
    scat = scattering_data(cubic)
    e = trial_energy_thermo(cubic, 4.0, 1e-2, scat).e_psi
    gaps = [abs(trial_energy_finite(cubic, TrialStateConfig(1e-2, L), scat).energy_density - e) for L in (8, 16, 32)]
    assert gaps[0] > gaps[1] > gaps[2]


# -- thermodynamic ------------------------------------------------------------------------
def test_thermo_frozen_value(cubic):
    t = trial_energy_thermo(cubic, 4.0, 1e-2)
    assert t.e_psi == pytest.approx(E_PSI_CUBIC_U4_RHO_1EM2, rel=1e-9)
    assert t.correction > 0 and t.ratio > 1
    assert abs(t.rho3_terms) < 1e-3 * t.e_psi


def test_thermo_small_rho(cubic):
    t = trial_energy_thermo(cubic, 4.0, 1e-8)
    assert t.ratio == pytest.approx(1.0, abs=1e-3)
    assert t.ratio >= 1.0


@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_thermo_homogeneity(lam):
    m = simple_cubic()
    base = trial_energy_thermo(m, 4.0, 1e-3).e_psi
    sc = trial_energy_thermo(m.scaled(lam), 4.0 * lam, 1e-3).e_psi
    assert sc == pytest.approx(lam * base, rel=1e-9)


def test_thermo_domain(cubic):
    with pytest.raises(errors.DomainError):
        trial_energy_thermo(cubic, 4.0, 0.0)


def test_remainder_at_zero_density(cubic):
    scat = scattering_data(cubic)
    assert remainder_diagnostics(cubic, 4.0, 0.0, scat) == {"depletion_density": 0.0, "sp_shift_density": 0.0}


def test_depletion_exponent(cubic):
    scat = scattering_data(cubic)
    rhos = np.geomspace(1e-6, 1e-3, 4)
    dep = [remainder_diagnostics(cubic, 4.0, r, scat)["depletion_density"] for r in rhos]
    k, _ = fit_power_law(rhos, dep)
    assert 1.4 <= k <= 1.6


def test_finite_depletion_converges(cubic):
    scat = scattering_data(cubic)
    thermo = remainder_diagnostics(cubic, 4.0, 1e-2, scat)["depletion_density"]
    gaps = [abs(trial_energy_finite(cubic, TrialStateConfig(1e-2, L), scat).depletion - thermo) for L in (8, 16, 32)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.1 * thermo


def test_fit_power_law_exact():
    x = np.geomspace(1e-4, 1, 7)
    k, C = fit_power_law(x, 3.0 * x**0.7)
    assert k == pytest.approx(0.7, rel=1e-12) and C == pytest.approx(3.0, rel=1e-12)


def test_log_grid():
    g = log_grid(1e-6, 1e-2, per_decade=2)
    assert len(g) == 9
    assert g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(1e-2)


def test_sweep_thread_independent(cubic):
    rhos = [1e-5, 3e-5, 1e-4]
    a = upper_bound_sweep(cubic, 4.0, rhos, threads=1)
    b = upper_bound_sweep(cubic, 4.0, rhos, threads=3)
    assert [r.e_psi for r in a.rows] == [r.e_psi for r in b.rows]
    assert a.fit_exponent == b.fit_exponent
