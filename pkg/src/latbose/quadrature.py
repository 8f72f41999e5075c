"""Brillouin-zone quadrature with a geometrically graded mesh.

Integrals are computed in fractional coordinates ``s`` on the unit cube
``[-1/2, 1/2]^3``.  With ``p = B s`` the Jacobian is ``|det B|``, which cancels
against the normalization ``|BZ|^{-1}``, so the normalized zone average is
simply the integral over the unit cube.

The cube is cut into nested cubes ``C_j = 2^{-j} C_0``.  Each shell
``C_j \\ C_{j+1}`` is split into the 56 outer sub-cubes of a ``4x4x4``
partition and a tensor Gauss-Legendre rule is applied on each sub-cube.
Since every sub-cube sits at a distance comparable to its own size from the
origin, integrands with an ``|p|^{-2}`` singularity (or with structure on a
small momentum scale, like the Bogoliubov integrands at low density) are
smooth on every block, and the shells converge geometrically.  The innermost
cube left after ``depth`` shells is replaced by the exact integral of
``c / q(s)``, where ``q`` is the Hessian quadratic form of the dispersion at
the origin and ``c`` the local coefficient of the singularity.

The error estimate compares two Gauss-Legendre orders on the same mesh.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NoConvergence, NonFiniteIntegrand, OscillatoryNoConvergence, ValidationError

SINGULAR_ORDERS = ("none", "inverse_quadratic")


@dataclass(frozen=True)
class QuadratureParams:
    """Controls for :func:`integrate_frac`.

    order, check_order
        Gauss-Legendre points per axis on each block for the returned value
        and for the comparison value used in the error estimate.
    depth
        Number of graded shells around the origin.  The innermost cube has
        side ``2**-depth``.
    target_rel_error
        Raise :class:`NoConvergence` when the estimate exceeds this.
    max_split
        Largest per-axis subdivision of a block used to resolve plane-wave
        factors; beyond it :class:`OscillatoryNoConvergence` is raised.
    """

    order: int = 8
    check_order: int = 12
    depth: int = 40
    target_rel_error: float = 1e-6
    max_split: int = 12

    def __post_init__(self):
        if self.order < 2 or self.check_order <= self.order:
            raise ValidationError("need 2 <= order < check_order")
        if not 4 <= self.depth <= 60:
            raise ValidationError("depth must lie in [4, 60]")
        if not self.target_rel_error > 0:
            raise ValidationError("target_rel_error must be positive")
        if self.max_split < 1:
            raise ValidationError("max_split must be >= 1")


DEFAULT_PARAMS = QuadratureParams()


@lru_cache(maxsize=64)
def _shell_rule(order: int, split: int):
    """Nodes and weights of one shell of the unit cube (before scaling).

    Returns ``(nodes, weights)`` with nodes of shape ``(n, 3)``; the weights
    sum to ``1 - 1/8``, the volume of the shell.
    """
    x, w = leggauss(order)
    # blocks of side 1/(4*split) tiling each of the 56 outer sub-cubes
    k = 4 * split
    x = (x + 1.0) / (2.0 * k)
    w = w / (2.0 * k)
    idx = np.arange(k)
    I, J, K = np.meshgrid(idx, idx, idx, indexing="ij")
    inner = lambda a: (a >= k // 4) & (a < 3 * k // 4)  # noqa: E731
    keep = ~(inner(I) & inner(J) & inner(K))
    offs = np.stack([I[keep], J[keep], K[keep]], axis=-1) / k - 0.5
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    loc = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    nodes = (offs[:, None, :] + loc[None, :, :]).reshape(-1, 3)
    weights = np.tile(W, len(offs))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def cube_inverse_quadratic(G, order: int = 48) -> float:
    """``int_{[-1/2,1/2]^3} ds / (s^T G s)`` for a positive definite ``G``.

    In cone coordinates over each face the radial integral is elementary,
    leaving ``sum_faces 1/2 int_face dA / (v^T G v)``, which is smooth.
    """
    G = np.asarray(G, dtype=float)
    x, w = leggauss(order)
    x = x / 2.0
    w = w / 2.0
    Y, Z = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    total = 0.0
    for ax in range(3):
        o1, o2 = [i for i in range(3) if i != ax]
        for sgn in (0.5, -0.5):
            v = np.zeros(Y.shape + (3,))
            v[..., ax] = sgn
            v[..., o1] = Y
            v[..., o2] = Z
            total += 0.5 * np.sum(W / np.einsum("...i,ij,...j->...", v, G, v))
    return float(total)


def _split_for_level(frequency: float, side: float, max_split: int) -> int:
    # block width is side/4; aim for at most one period per block and axis
    if frequency <= 0:
        return 1
    k = int(np.ceil(frequency * side / 4.0))
    if k > max_split:
        raise OscillatoryNoConvergence(
            f"plane-wave frequency {frequency:g} needs {k} subdivisions per block "
            f"(cap {max_split}); use the finite-volume solver instead"
        )
    return max(k, 1)


def _graded_sum(f, G, singular: bool, order: int, depth: int, frequency: float, max_split: int):
    levels = []
    l1 = []
    c_est = 0.0
    for j in range(depth):
        side = 2.0**-j
        nodes, weights = _shell_rule(order, _split_for_level(frequency, side, max_split))
        pts = nodes * side
        vals = np.asarray(f(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand(f"integrand not finite on shell {j}")
        vol = side**3
        levels.append(vol * np.dot(weights, vals))
        l1.append(vol * np.dot(weights, np.abs(vals)))
        if singular and j == depth - 1:
            q = np.einsum("ni,ij,nj->n", pts, G, pts)
            c_est = float(np.dot(weights, vals * q) / weights.sum())
    side = 2.0**-depth
    if singular:
        tail = c_est * side * cube_inverse_quadratic(G)
    else:
        tail = side**3 * float(np.asarray(f(np.zeros((1, 3))), dtype=float)[0])
    value = float(np.sum(levels[::-1])) + tail
    return value, float(np.sum(l1)) + abs(tail)


def integrate_frac(
    f: Callable[[np.ndarray], np.ndarray],
    G,
    singular_order: str = "none",
    params: QuadratureParams = DEFAULT_PARAMS,
    frequency: float = 0.0,
) -> tuple[float, float]:
    """Average of ``f`` over the fractional unit cube.

    ``f`` maps an ``(n, 3)`` array of fractional momenta to ``n`` real values.
    ``G`` is the fractional Hessian of the dispersion (only used for the
    singular tail).  ``frequency`` bounds the number of plane-wave periods per
    unit length along any axis.

    Returns ``(value, rel_error)``.  The error is measured against the
    integral of ``|f|`` so that integrals that vanish by symmetry still get a
    meaningful estimate.
    """
    if singular_order not in SINGULAR_ORDERS:
        raise ValidationError(f"singular_order must be one of {SINGULAR_ORDERS}")
    singular = singular_order == "inverse_quadratic"
    depth = params.depth
    lo, _ = _graded_sum(f, G, singular, params.order, depth, frequency, params.max_split)
    hi, scale = _graded_sum(f, G, singular, params.check_order, depth, frequency, params.max_split)
    denom = max(abs(hi), scale, np.finfo(float).tiny)
    rel = abs(hi - lo) / denom
    if rel > params.target_rel_error:
        raise NoConvergence(
            f"quadrature error estimate {rel:.3g} exceeds target {params.target_rel_error:.3g}"
        )
    return hi, rel


def bz_integrate(
    model,
    integrand: Callable[[np.ndarray], np.ndarray],
    singular_order: str = "none",
    params: QuadratureParams = DEFAULT_PARAMS,
    frequency: float = 0.0,
) -> tuple[float, float]:
    """Normalized Brillouin-zone average ``|BZ|^{-1} int integrand(p) dp``.

    ``integrand`` takes Cartesian momenta of shape ``(n, 3)``.  Use
    ``singular_order="inverse_quadratic"`` when the integrand behaves like
    ``c/|p|^2`` at the origin.
    """
    B = model.reciprocal
    return integrate_frac(
        lambda s: integrand(s @ B.T), model.hessian_frac(), singular_order, params, frequency
    )
