"""Finite-volume lower-bound certificate for the Neumann box energy.

For ``n`` bosons in the Neumann box of size ``l`` (``V = (l+1)^3`` sites) and
a parameter ``mu`` in the window::

    16 pi a n / V  <  mu  <  gap/2 - 8 pi a n / V

the Bogoliubov operator bound gives::

    E0_Neu(n, l) >= -S(mu) + min_{m = 0..n} [ mu m + U (2 phi0 - phi0^2)/(2V) (n-m)(n-m-1) ]
    S(mu) = 1/2 sum_{k != 0} [ lam_k - mu - sqrt((lam_k - mu)^2 - (n U phi0 / V)^2) ]

with ``lam_k`` the exact Neumann eigenvalues.  Everything here is evaluated
exactly from the spectrum; no asymptotic estimates are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, InvalidMu, NegativeDiscriminant, SuperadditivityViolation, ValidationError
from .lattice import LatticeModel
from .scattering import ScatteringData, scattering_data
from .spectra import SpectrumResult, spectrum

EIGHT_PI = 8.0 * np.pi


@dataclass(frozen=True)
class CertificateInput:
    model: LatticeModel
    U: float
    n: int
    l: int
    mu: float | None = None  # None: geometric midpoint of the window


@dataclass(frozen=True)
class CertificateResult:
    lb_energy: float
    bogoliubov_sum: float
    window: tuple
    mu: float
    valid: bool
    n: int
    l: int


def box_threshold(model: LatticeModel, l: int, scat: ScatteringData) -> float:
    """Largest admissible particle number ``c_gap (l+1) / (48 pi a)`` (strict)."""
    return model.c_gap * (l + 1) / (6.0 * EIGHT_PI * scat.a)


def mu_window(
    model: LatticeModel,
    U: float,
    n: int,
    l: int,
    scat: ScatteringData | None = None,
    spec: SpectrumResult | None = None,
) -> tuple[float, float]:
    """Open window for ``mu``.

    Raises :class:`EmptyWindow` when the particle number violates
    ``n/(l+1) < c_gap/(48 pi a)`` or when the window computed from the exact
    gap is empty.
    """
    if n < 0 or int(n) != n:
        raise ValidationError("n must be a nonnegative integer")
    scat = scattering_data(model, U=U) if scat is None else scat
    spec = spectrum(model, l, "neumann", n_lowest=None if (l + 1) ** 3 <= 3375 else 4) if spec is None else spec
    V = (l + 1) ** 3
    gap = spec.gap
    lo = 2.0 * scat.eight_pi_a * n / V
    hi = 0.5 * gap - scat.eight_pi_a * n / V
    if n > 0 and not n < box_threshold(model, l, scat):
        raise EmptyWindow(
            f"n/(l+1) = {n / (l + 1):.4g} violates the bound c_gap/(48 pi a) = "
            f"{model.c_gap / (6 * scat.eight_pi_a):.4g}"
        )
    if not lo < hi:
        raise EmptyWindow(f"empty mu window ({lo:.4g}, {hi:.4g})")
    return lo, hi


def default_mu(window) -> float:
    lo, hi = window
    return float(np.sqrt(lo * hi)) if lo > 0 else 0.5 * hi


def bogoliubov_sum(eigs, mu: float, n: int, U: float, phi0: float) -> float:
    lam = np.asarray(eigs)[1:]
    V = np.asarray(eigs).size
    d = lam - mu
    off = n * U * phi0 / V
    disc = d * d - off * off
    if np.any(disc < 0) or np.any(d <= 0):
        raise NegativeDiscriminant("square-root argument negative; mu outside the window?")
    # lam - mu - sqrt(d^2 - off^2) written as off^2 / (d + sqrt(...)) to avoid cancellation
    return float(0.5 * np.sum(off * off / (d + np.sqrt(disc))))


def certificate(inp: CertificateInput, spec: SpectrumResult | None = None, scat: ScatteringData | None = None) -> CertificateResult:
    """Evaluate the lower bound at ``inp.mu`` (or at the default midpoint)."""
    model, U, n, l = inp.model, inp.U, int(inp.n), int(inp.l)
    scat = scattering_data(model, U=U) if scat is None else scat
    spec = spectrum(model, l, "neumann") if spec is None else spec
    if not spec.complete or spec.kind not in ("neumann", "neumann_special"):
        raise ValidationError("certificate needs the complete Neumann spectrum")
    if spec.kind == "neumann_special" and any(sum(map(abs, m)) != 1 for m, _ in model.hopping):
        raise ValidationError("special spectrum only equals the Neumann one for primitive hopping")
    V = spec.eigenvalues.size
    if n == 0:
        win = (0.0, 0.5 * spec.gap)
        return CertificateResult(0.0, 0.0, win, 0.0, True, n, l)
    win = mu_window(model, U, n, l, scat, spec)
    mu = default_mu(win) if inp.mu is None else float(inp.mu)
    if not win[0] < mu < win[1]:
        raise InvalidMu(f"mu={mu:g} outside window {win}")
    S = bogoliubov_sum(spec.eigenvalues, mu, n, U, scat.phi0)
    m = np.arange(n + 1)
    coef = U * (2.0 * scat.phi0 - scat.phi0**2) / (2.0 * V)
    lb = -S + float(np.min(mu * m + coef * (n - m) * (n - m - 1)))
    return CertificateResult(lb, S, win, mu, True, n, l)


def best_certificate(inp: CertificateInput, points: int = 16, **kw) -> CertificateResult:
    """Scan ``points`` geometrically spaced ``mu`` inside the window and keep the best bound."""
    base = certificate(inp, **kw)
    lo, hi = base.window
    if inp.n == 0:
        return base
    grid = np.geomspace(lo, hi, points + 2)[1:-1]
    best = base
    for mu in grid:
        r = certificate(CertificateInput(inp.model, inp.U, inp.n, inp.l, float(mu)), **kw)
        if r.lb_energy > best.lb_energy:
            best = r
    return best


def gp_length(rho: float, a: float, c_gap: float, R0: int = 2) -> dict:
    """Box size ``l = ceil((192 pi a rho / c_gap)^(-1/2)) - 1``, made even and ``>= R0``.

    Odd values are rounded down (a smaller box only helps the particle-number
    bound) unless that would fall below ``R0``.
    """
    if not rho > 0 or not a > 0:
        raise ValidationError("rho and a must be positive")
    raw = int(np.ceil((24.0 * EIGHT_PI * a * rho / c_gap) ** -0.5)) - 1
    l = raw - (raw % 2)
    if l < max(R0, 2):
        l = max(R0, 2) + (max(R0, 2) % 2)
    return {"l": l, "raw": raw, "adjustment": l - raw}


def superadditivity_check(energies: dict, tol: float = 1e-9) -> dict:
    """Check ``E(n1 + n2) >= E(n1) + E(n2)`` for all available pairs."""
    keys = sorted(energies)
    checked = []
    worst = np.inf
    for i, a in enumerate(keys):
        for b in keys[i:]:
            if a + b not in energies:
                continue
            slack = energies[a + b] - energies[a] - energies[b]
            checked.append((a, b, slack))
            worst = min(worst, slack)
            if slack < -tol:
                raise SuperadditivityViolation(f"E({a}+{b}) < E({a}) + E({b}) by {-slack:g}")
    return {"pairs": checked, "min_slack": float(worst) if checked else None}
