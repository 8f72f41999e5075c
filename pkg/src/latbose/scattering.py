"""Zero-energy scattering for the on-site potential on a lattice.

For the on-site interaction the scattering equation
``-Delta phi + (U/2) delta_0 phi = 0`` with ``phi -> 1`` at infinity is solved
in closed form by the lattice Green function at the origin::

    gamma  = 1/2 <1/eps>_BZ
    phi(0) = 1 / (1 + U gamma),      w(0) = 1 - phi(0)
    8 pi a = U phi(0) = U / (1 + U gamma)
    phi(x) = 1 - (U/2) phi(0) <exp(i p.x) / eps(p)>_BZ

where ``<.>_BZ`` is the normalized zone average.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .lattice import FiniteLattice, LatticeModel, dispersion_frac, inverse_fourier, momentum_grid
from .quadrature import DEFAULT_PARAMS, QuadratureParams, integrate_frac

EIGHT_PI = 8.0 * np.pi


@dataclass(frozen=True)
class ScatteringData:
    gamma: float
    a: float
    phi0: float
    w0: float
    rel_error_estimate: float
    U: float

    @property
    def eight_pi_a(self) -> float:
        return EIGHT_PI * self.a

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "a": self.a,
            "phi0": self.phi0,
            "w0": self.w0,
            "rel_error_estimate": self.rel_error_estimate,
        }


@lru_cache(maxsize=128)
def _inverse_dispersion_average(hopping: tuple, params: QuadratureParams) -> tuple[float, float]:
    # gamma only depends on the hopping table, not on A or U
    dummy = LatticeModel.from_hopping(np.eye(3), hopping, 0.0)
    return integrate_frac(
        lambda s: 1.0 / dispersion_frac(dummy, s),
        dummy.hessian_frac(),
        "inverse_quadratic",
        params,
    )


def gamma_with_error(model: LatticeModel, params: QuadratureParams = DEFAULT_PARAMS):
    """``(gamma, rel_error)`` with ``gamma = 1/2 <1/eps>``."""
    val, err = _inverse_dispersion_average(model.hopping, params)
    return 0.5 * val, err


def compute_gamma(model: LatticeModel, params: QuadratureParams = DEFAULT_PARAMS) -> float:
    return gamma_with_error(model, params)[0]


def scattering_from_gamma(U: float, gamma: float, rel_error: float = 0.0) -> ScatteringData:
    """Apply the closed-form relations for a given ``gamma``."""
    if U < 0 or not np.isfinite(U):
        raise DomainError(f"U must be finite and nonnegative, got {U}")
    ug = U * gamma
    phi0 = 1.0 / (1.0 + ug)
    w0 = ug / (1.0 + ug)
    eight_pi_a = U / (1.0 + ug)
    return ScatteringData(gamma, eight_pi_a / EIGHT_PI, phi0, w0, rel_error, U)


def scattering_data(
    model: LatticeModel, params: QuadratureParams = DEFAULT_PARAMS, U: float | None = None
) -> ScatteringData:
    """Scattering data for the model's ``U`` (or an explicit override)."""
    U = model.U if U is None else float(U)
    g, err = gamma_with_error(model, params)
    return scattering_from_gamma(U, g, err)


def scattering_solution(
    model: LatticeModel, U: float, x, params: QuadratureParams = DEFAULT_PARAMS
) -> float:
    """``phi(x)`` at the lattice point with integer coordinates ``x``.

    The plane-wave factor is resolved by subdividing the quadrature blocks;
    for very distant points this becomes expensive and raises
    :class:`~latbose.errors.OscillatoryNoConvergence`.
    """
    x = np.asarray(x, dtype=float)
    if U == 0:
        return 1.0
    scat = scattering_data(model, params, U)
    if not np.any(x):
        return scat.phi0
    freq = float(np.max(np.abs(x)))
    val, _ = integrate_frac(
        lambda s: np.cos(2.0 * np.pi * (s @ x)) / dispersion_frac(model, s),
        model.hessian_frac(),
        "inverse_quadratic",
        params,
        frequency=freq,
    )
    return 1.0 - 0.5 * U * scat.phi0 * val


def finite_volume_phi(model: LatticeModel, U: float, L: int) -> np.ndarray:
    """Scattering solution on the periodic box of size ``L``, in site order.

    The box version of the Green function drops the zero mode:
    ``g(x) = |Lambda|^{-1} sum_{p != 0} exp(i p.x)/eps(p)``, and
    ``phi_L(x) = 1 - (U/2) phi_L(0) g(x)`` with ``phi_L(0) = 1/(1 + U g(0)/2)``.
    It converges to :func:`scattering_solution` as ``L`` grows.
    """
    fl = FiniteLattice(model, L)
    fl.require_hopping_fits()
    grid = momentum_grid(fl)
    eps = grid.dispersion()
    ghat = np.zeros_like(eps)
    nz = np.arange(eps.size) != grid.zero_index
    ghat[nz] = 1.0 / eps[nz]
    # inverse_fourier is unitary; rescale to the |Lambda|^{-1} convention
    g = inverse_fourier(fl, ghat).real / np.sqrt(fl.n_sites)
    g0 = g[fl.index(np.zeros(3, dtype=np.int64))]
    phi0 = 1.0 / (1.0 + 0.5 * U * g0)
    return 1.0 - 0.5 * U * phi0 * g
