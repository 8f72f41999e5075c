"""Bogoliubov trial-state energy: per-mode minimization, finite boxes, and the
thermodynamic integral.

Densities are particles per lattice site and energies are in units of the
hopping weights.

The trial state is a coherent condensate with ``N0`` particles plus
independent pair correlations ``c_p`` for every pair ``(p, -p)``.  With
``n_p = c_p^2/(1-c_p^2)`` and ``alpha_p = c_p/(1-c_p^2)`` the exact energy in
a periodic box with ``V = |Lambda_L|`` sites is::

    E = sum eps n + U/(2V) [(sum alpha)^2 + 2 (sum n)^2]
        + (U N0 / V) sum (alpha + 2 n) + U N0^2 / (2V)

(sums over ``p != 0``).  The per-mode optimum comes from minimizing
``F(x) = A x^2/(1-2x) + B x/(1-2x) - C x`` in the variable ``s = c/(1+c)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IntegrandNegative, NegativeCondensate
from .lattice import FiniteLattice, LatticeModel, dispersion_frac, momentum_grid
from .quadrature import DEFAULT_PARAMS, QuadratureParams, integrate_frac
from .scattering import ScatteringData, scattering_data

FOUR_PI = 4.0 * np.pi


# -- single mode -------------------------------------------------------------
def energy_expression(x, A, B, C):
    """``F(x) = A x^2/(1-2x) + B x/(1-2x) - C x`` for ``x < 1/2``."""
    x = np.asarray(x, dtype=float)
    # x/(1-2x) stays bounded for x -> -inf, so very distant minimizers do not overflow
    return (A * x + B) * (x / (1.0 - 2.0 * x)) - C * x


def mode_minimum(A: float, B: float, C: float) -> tuple[float, float]:
    """Minimizer and minimum of :func:`energy_expression` on ``x < 1/2``."""
    den = A + 2.0 * C
    if den <= 0:
        raise DomainError("mode_minimum needs A + 2C > 0")
    arg = 1.0 + 2.0 * (B - C) / den
    if arg < 0:
        raise DomainError(f"no interior minimum: 1 + 2(B-C)/(A+2C) = {arg:g} < 0")
    x0 = 0.5 - 0.5 * np.sqrt(arg)
    if not np.isfinite(x0):
        raise DomainError("minimizer overflows: A + 2C is negligible compared with B")
    fmin = 0.5 * (np.sqrt((A + 2.0 * B) * den) - (A + B + C))
    return float(x0), float(fmin)


def _x_ratio(eps, U, rho, w0):
    # (eps + 2U rho)/(eps + 2U rho w0) - 1, computed without cancellation
    return 2.0 * U * rho * (1.0 - w0) / (eps + 2.0 * U * rho * w0)


def minimizer_s(eps, U: float, rho: float, w0: float):
    """Optimal ``s_p = 1/2 - 1/2 sqrt((eps + 2U rho)/(eps + 2U rho w0))``.

    Evaluated as ``-x / (2 (sqrt(1+x) + 1))`` so that small shifts keep their
    relative precision.  Works elementwise on arrays.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise DomainError("dispersion values must be nonnegative")
    if rho * w0 * U <= 0 and np.any(eps == 0):
        raise DomainError("s is undefined at eps = 0 unless U rho w0 > 0")
    x = _x_ratio(eps, U, rho, w0)
    s = -0.5 * x / (np.sqrt(1.0 + x) + 1.0)
    return float(s) if s.ndim == 0 else s


def c_from_s(s):
    return s / (1.0 - s)


@dataclass(frozen=True)
class BogoliubovModeData:
    p: np.ndarray
    eps: float
    s: float
    c: float
    mode_energy: float


def mode_data(model: LatticeModel, p, rho: float, scat: ScatteringData) -> BogoliubovModeData:
    """All per-mode quantities at a Cartesian momentum ``p``."""
    p = np.asarray(p, dtype=float)
    e = float(dispersion_frac(model, p @ model.primitive_vectors / (2 * np.pi)))
    U = scat.U
    s = minimizer_s(e, U, rho, scat.w0)
    _, f = mode_minimum(e, U * rho, U * rho * scat.w0)
    return BogoliubovModeData(p, e, s, c_from_s(s), f)


# -- finite box ----------------------------------------------------------------
@dataclass(frozen=True)
class TrialStateConfig:
    rho: float
    L: int
    N0: float | None = None  # filled in by trial_energy_finite


@dataclass(frozen=True)
class FiniteEnergy:
    energy_density: float
    N0: float
    depletion: float  # sum_p n_p / V
    L: int
    rho: float


def finite_energy_from_c(model: LatticeModel, L: int, rho: float, U: float, c) -> FiniteEnergy:
    """Exact box energy density for given pair coefficients ``c`` on the grid.

    ``c`` must be an array over the momentum grid (the zero momentum entry is
    ignored).  The mean particle number is fixed to ``rho * V``.
    """
    fl = FiniteLattice(model, L)
    fl.require_hopping_fits()
    grid = momentum_grid(fl)
    V = fl.n_sites
    eps = grid.dispersion()
    keep = np.arange(V) != grid.zero_index
    c = np.asarray(c, dtype=float)[keep]
    eps = eps[keep]
    if np.any(np.abs(c) >= 1):
        raise DomainError("pair coefficients must lie in (-1, 1)")
    one_m = 1.0 - c * c
    n = c * c / one_m
    alpha = c / one_m
    sn = n.sum()
    sa = alpha.sum()
    N0 = rho * V - sn
    if N0 < 0:
        raise NegativeCondensate(
            f"depletion {sn:.6g} exceeds rho*V = {rho * V:.6g} at L={L}; increase rho or L"
        )
    E = (
        np.dot(eps, n)
        + U / (2.0 * V) * (sa * sa + 2.0 * sn * sn)
        + U * N0 / V * (sa + 2.0 * sn)
        + U * N0 * N0 / (2.0 * V)
    )
    return FiniteEnergy(float(E / V), float(N0), float(sn / V), L, rho)


def optimal_c_grid(model: LatticeModel, L: int, rho: float, scat: ScatteringData) -> np.ndarray:
    """Optimal ``c_p`` over the grid (zero at ``p = 0``)."""
    fl = FiniteLattice(model, L)
    grid = momentum_grid(fl)
    eps = grid.dispersion()
    c = np.zeros_like(eps)
    keep = np.arange(eps.size) != grid.zero_index
    c[keep] = c_from_s(minimizer_s(eps[keep], scat.U, rho, scat.w0))
    return c


def trial_energy_finite(model: LatticeModel, config: TrialStateConfig, scat: ScatteringData) -> FiniteEnergy:
    """Energy density of the optimized trial state in the periodic box ``L``."""
    c = optimal_c_grid(model, config.L, config.rho, scat)
    return finite_energy_from_c(model, config.L, config.rho, scat.U, c)


# -- thermodynamic limit ----------------------------------------------------------
def _thermo_integrand(eps, U, rho, w0):
    """Positive form of the correction integrand.

    Algebraically equal to
    ``1/2 (sqrt((e+2Ur)(e+2Urw0)) - e - Ur(1+w0) + U^2 (1-w0)^2 r^2 / (2e))``
    but written as a product of positive factors, so it keeps full relative
    precision where the terms of the raw form cancel.
    """
    ur = U * rho
    S = np.sqrt((eps + 2 * ur) * (eps + 2 * ur * w0))
    D = (2 * ur * (1 + w0) * eps + 4 * ur * ur * w0) / (S + eps)  # S - eps
    k = ur * (1 + w0)
    return (ur * ur * (1 - w0) ** 2 / (4 * eps)) * (D + k) / (S + eps + k)


def _depletion_integrand(eps, U, rho, w0):
    x = _x_ratio(eps, U, rho, w0)
    s = -0.5 * x / (np.sqrt(1.0 + x) + 1.0)
    # c^2/(1-c^2) with c = s/(1-s) equals s^2/(1-2s) = s^2/sqrt(1+x)
    return s * s / np.sqrt(1.0 + x)


def _shift_integrand(eps, U, rho, w0):
    # s_p + U rho (1-w0)/(2 eps); its zone average is the average of s_p + rho w0
    x = _x_ratio(eps, U, rho, w0)
    y = U * rho * (1 - w0) / (2 * eps)
    return y * 2 * U * rho * w0 / (eps + 2 * U * rho * w0) + x * x / (4 * (np.sqrt(1 + x) + 1) ** 2)


@dataclass(frozen=True)
class ThermoEnergy:
    rho: float
    e_psi: float
    leading_term: float  # 4 pi a rho^2
    correction: float  # the positive zone integral
    rho3_terms: float  # separately reported O(rho^3) bookkeeping
    rel_error: float

    @property
    def ratio(self) -> float:
        return self.e_psi / self.leading_term


def _checked(fn, model, U, rho, w0):
    def f(s):
        v = fn(dispersion_frac(model, s), U, rho, w0)
        if np.any(v < 0):
            raise IntegrandNegative(f"integrand negative (min {v.min():g}) at rho={rho:g}")
        return v

    return f


def remainder_diagnostics(
    model: LatticeModel,
    U: float,
    rho: float,
    scat: ScatteringData,
    params: QuadratureParams = DEFAULT_PARAMS,
) -> dict:
    """Zone averages of the depletion ``c^2/(1-c^2)`` and of ``|s_p + rho w0|``."""
    if rho < 0:
        raise DomainError("rho must be nonnegative")
    if rho == 0 or U == 0:
        return {"depletion_density": 0.0, "sp_shift_density": 0.0}
    G = model.hessian_frac()
    w0 = scat.w0
    dep, _ = integrate_frac(_checked(_depletion_integrand, model, U, rho, w0), G, "none", params)
    sh, _ = integrate_frac(
        _checked(_shift_integrand, model, U, rho, w0), G, "inverse_quadratic", params
    )
    return {"depletion_density": dep, "sp_shift_density": abs(sh)}


def trial_energy_thermo(
    model: LatticeModel,
    U: float,
    rho: float,
    scat: ScatteringData | None = None,
    params: QuadratureParams = DEFAULT_PARAMS,
) -> ThermoEnergy:
    """Thermodynamic trial energy density ``e_psi = 4 pi a rho^2 + I(rho)``.

    ``I`` is the zone average of a pointwise nonnegative integrand.  The two
    ``O(rho^3)`` terms ``U/2 <s + rho w0>^2 - 3U/2 <n>^2`` are not part of
    ``e_psi``; they are returned in ``rho3_terms``.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    if scat is None:
        scat = scattering_data(model, params, U)
    w0 = scat.w0
    lead = FOUR_PI * scat.a * rho * rho
    corr, err = integrate_frac(
        _checked(_thermo_integrand, model, U, rho, w0),
        model.hessian_frac(),
        "inverse_quadratic",
        params,
    )
    rem = remainder_diagnostics(model, U, rho, scat, params)
    rho3 = 0.5 * U * rem["sp_shift_density"] ** 2 - 1.5 * U * rem["depletion_density"] ** 2
    return ThermoEnergy(rho, lead + corr, lead, corr, rho3, err)


# -- sweeps -----------------------------------------------------------------------
def log_grid(rho_min: float, rho_max: float, per_decade: int = 8) -> np.ndarray:
    n = int(round(per_decade * np.log10(rho_max / rho_min))) + 1
    return np.geomspace(rho_min, rho_max, max(n, 2))


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares ``y = C x^k`` on log-log axes; returns ``(k, C)``."""
    k, logc = np.polyfit(np.log(x), np.log(y), 1)
    return float(k), float(np.exp(logc))


@dataclass(frozen=True)
class UpperBoundSweep:
    rows: list  # ThermoEnergy per rho
    fit_exponent: float
    fit_prefactor: float


def upper_bound_sweep(
    model: LatticeModel,
    U: float,
    rhos,
    params: QuadratureParams = DEFAULT_PARAMS,
    threads: int = 1,
) -> UpperBoundSweep:
    """``e_psi`` over ``rhos`` and a power-law fit of ``ratio - 1``.

    The fit uses the points within the lowest decade of the sweep.
    """
    rhos = np.sort(np.asarray(rhos, dtype=float))
    scat = scattering_data(model, params, U)
    work = lambda r: trial_energy_thermo(model, U, float(r), scat, params)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(work, rhos))
    else:
        rows = [work(r) for r in rhos]
    sel = rhos <= rhos[0] * 10.0 * (1 + 1e-9)
    if sel.sum() < 2:
        sel[:2] = True
    k, C = fit_power_law(rhos[sel], [r.correction / r.leading_term for r in np.array(rows)[sel]])
    return UpperBoundSweep(rows, k, C)
