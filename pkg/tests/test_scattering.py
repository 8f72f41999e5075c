import numpy as np
import pytest
from conftest import bundled, five_lattices
from oracles import finite_volume_phi_linear_solve, richardson_gamma, watson_gamma_cubic

from latbose import errors
from latbose.lattice import FiniteLattice, LatticeModel, fourier, load_config, momentum_grid
from latbose.scattering import (
    compute_gamma,
    finite_volume_phi,
    gamma_with_error,
    scattering_data,
    scattering_from_gamma,
    scattering_solution,
)

# Frozen oracle values (see tests/oracles.py for how they were produced).
GAMMA_CUBIC = 0.12636550492933155  # Watson closed form / 12
GAMMA_NNN = 0.10381130134526793  # excised-ball midpoint sums, Richardson in h^3, h^5
A_CUBIC_U4 = 0.10571833829576063
PHI_100_CUBIC_U4 = 0.8856640  # sparse linear solves L=16..64, cubic fit in 1/(L+1)


def test_watson_oracle_frozen():
    assert watson_gamma_cubic() == pytest.approx(GAMMA_CUBIC, rel=1e-14)


def test_gamma_cubic(cubic):
    g, err = gamma_with_error(cubic)
    assert g == pytest.approx(GAMMA_CUBIC, rel=1e-11)
    assert 0 <= err < 1e-8


def test_gamma_nnn(nnn):
    assert compute_gamma(nnn) == pytest.approx(GAMMA_NNN, rel=1e-10)


@pytest.mark.slow
def test_gamma_nnn_oracle_reproduces():
    m = load_config("cubic_nnn")
    assert richardson_gamma(m.directions, m.weights) == pytest.approx(GAMMA_NNN, rel=1e-12)


def test_gamma_scales_inversely_with_t(cubic):
    twice = LatticeModel.from_hopping(np.eye(3), [(m, 2.0) for m, _ in cubic.hopping], 4.0)
    assert compute_gamma(twice) == pytest.approx(compute_gamma(cubic) / 2, rel=1e-10)


def test_gamma_positive():
    assert all(compute_gamma(m) > 0 for m in five_lattices())


@pytest.mark.parametrize("model", bundled(), ids=["cubic", "ortho", "nnn"])
@pytest.mark.parametrize("U", [0.1, 1.0, 4.0, 50.0])
def test_identity_chain(model, U):
    s = scattering_data(model, U=U)
    assert s.eight_pi_a == pytest.approx(U * s.phi0, rel=1e-12)
    assert s.eight_pi_a == pytest.approx(U / (1 + U * s.gamma), rel=1e-12)
    assert s.phi0 + s.w0 == pytest.approx(1.0, abs=1e-12)
    assert s.w0 == pytest.approx(U * s.gamma / (1 + U * s.gamma), rel=1e-12)
    assert 0 < s.phi0 < 1 and 0 < s.w0 < 1 and s.a > 0


def test_a_cubic_U4(cubic):
    assert scattering_data(cubic).a == pytest.approx(A_CUBIC_U4, rel=1e-10)
    assert scattering_from_gamma(4.0, GAMMA_CUBIC).a == pytest.approx(A_CUBIC_U4, rel=1e-14)


def test_small_U_limit(cubic):
    s = scattering_data(cubic, U=1e-6)
    assert s.a / 1e-6 == pytest.approx(1 / (8 * np.pi), rel=1e-4)


def test_large_U_limit(cubic):
    s = scattering_data(cubic, U=1e8)
    assert s.eight_pi_a == pytest.approx(1 / s.gamma, rel=1e-6)


def test_a_monotone_in_U(cubic):
    a = [scattering_data(cubic, U=u).a for u in np.geomspace(1e-3, 1e3, 25)]
    assert np.all(np.diff(a) > 0)


@pytest.mark.parametrize("lam", [0.3, 2.5])
def test_scale_covariance(lam):
    for m in five_lattices():
        base = scattering_data(m, U=3.0)
        sc = scattering_data(m.scaled(lam), U=3.0 * lam)
        assert sc.gamma == pytest.approx(base.gamma / lam, rel=1e-10)
        assert sc.a == pytest.approx(lam * base.a, rel=1e-10)


def test_negative_U_rejected():
    with pytest.raises(errors.DomainError):
        scattering_from_gamma(-1.0, 0.1)


def test_phi_at_origin(cubic):
    assert scattering_solution(cubic, 4.0, [0, 0, 0]) == pytest.approx(1 / (1 + 4 * GAMMA_CUBIC), rel=1e-11)


def test_phi_without_interaction(cubic):
    for x in ([0, 0, 0], [1, 0, 0], [3, -2, 1]):
        assert scattering_solution(cubic, 0.0, x) == 1.0


def test_phi_100_against_linear_solve_oracle(cubic):
    assert scattering_solution(cubic, 4.0, [1, 0, 0]) == pytest.approx(PHI_100_CUBIC_U4, abs=2e-6)


@pytest.mark.slow
def test_phi_100_oracle_extrapolation():
    Ls = np.array([16, 24, 32, 48, 64])
    vals = [finite_volume_phi_linear_solve(4.0, L, (1, 0, 0)) for L in Ls]
    fit = np.polyfit(1.0 / (Ls + 1.0), vals, 3)
    assert fit[-1] == pytest.approx(PHI_100_CUBIC_U4, abs=1e-6)


def test_finite_volume_phi_matches_linear_solve(cubic):
    fl = FiniteLattice(cubic, 16)
    phi = finite_volume_phi(cubic, 4.0, 16)
    for x in ([1, 0, 0], [2, 1, 0], [-3, 4, 2]):
        assert phi[fl.index(x)] == pytest.approx(finite_volume_phi_linear_solve(4.0, 16, x), abs=1e-10)


def test_scattering_equation_residual(nnn):
    U = 4.0
    tol = 1e-7
    pts = {}

    def phi(x):
        key = tuple(int(v) for v in x)
        if key not in pts:
            pts[key] = scattering_solution(nnn, U, key)
        return pts[key]

    for x in ([0, 0, 0], [1, 0, 0], [1, 1, 0], [2, 0, 1]):
        x = np.array(x)
        lap = 0.0
        for m, t in nnn.hopping:
            for sgn in (1, -1):
                lap += t * (phi(x) - phi(x + sgn * np.array(m)))
        res = lap + (0.5 * U * phi(x) if not x.any() else 0.0)
        assert abs(res) < tol


def test_phi_approaches_one(cubic):
    vals = [scattering_solution(cubic, 4.0, [r, 0, 0]) for r in (1, 2, 4, 8)]
    assert np.all(np.diff(vals) > 0)
    assert all(v < 1 for v in vals)
    assert 1 - vals[-1] < 0.2 * (1 - vals[0])


def test_w_transform(cubic):
    L, U = 8, 4.0
    fl = FiniteLattice(cubic, L)
    g = momentum_grid(fl)
    w = 1.0 - finite_volume_phi(cubic, U, L)
    phi0 = 1.0 - w[fl.index([0, 0, 0])]
    wh = fourier(fl, w) / np.sqrt(fl.n_sites)
    eps = g.dispersion()
    nz = np.arange(eps.size) != g.zero_index
    np.testing.assert_allclose(wh[nz].real, U * phi0 / (2 * eps[nz]) / fl.n_sites, rtol=1e-10)
    assert np.max(np.abs(wh.imag)) < 1e-13


def test_finite_volume_phi_converges(cubic):
    ref = scattering_solution(cubic, 4.0, [1, 0, 0])
    errs = [abs(finite_volume_phi(cubic, 4.0, L)[FiniteLattice(cubic, L).index([1, 0, 0])] - ref) for L in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]


def test_finite_volume_phi_rejects_odd_box(cubic):
    with pytest.raises(errors.GridTooCoarse):
        finite_volume_phi(cubic, 4.0, 5)
