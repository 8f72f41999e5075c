"""Bravais lattices with finite-range hopping.

A :class:`LatticeModel` holds the primitive vectors (as the columns of a 3x3
matrix ``A``), a table of hopping weights indexed by integer lattice
directions ``m`` and the on-site repulsion ``U``.  The physical hopping vector
of a table entry is ``v = A @ m``.

Momenta are handled in two coordinate systems.  Cartesian momenta ``p`` are
used in the public API.  Internally the Brillouin zone is parameterized by
fractional coordinates ``s`` in ``[-1/2, 1/2)^3`` with ``p = B @ s``, where
``B`` is the reciprocal basis.  Since ``A.T @ B = 2*pi*I`` one has
``v . p = 2*pi * m . s``, so the dispersion in fractional coordinates does not
depend on ``A`` at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DirectionNotPositive,
    DuplicateDirection,
    GridTooCoarse,
    MissingPrimitiveHopping,
    NonPositiveWeight,
    SingularBasis,
)

TWO_PI = 2.0 * np.pi
_CONFIG_KEYS = {"primitive_vectors", "hopping", "U"}
_HOP_KEYS = {"m", "t"}
BUNDLED_CONFIGS = ("cubic", "orthorhombic", "cubic_nnn")


def reciprocal_basis(A) -> np.ndarray:
    """Reciprocal basis ``B`` with ``A.T @ B = 2*pi*I``.

    Raises :class:`SingularBasis` when ``|det A|`` is below ``1e-12`` times
    the product of the column norms.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3) or not np.all(np.isfinite(A)):
        raise SingularBasis("primitive vectors must form a finite 3x3 matrix")
    scale = np.prod(np.linalg.norm(A, axis=0))
    det = np.linalg.det(A)
    if scale == 0.0 or abs(det) <= 1e-12 * scale:
        raise SingularBasis(f"primitive vectors are (nearly) linearly dependent, det={det:g}")
    return TWO_PI * np.linalg.inv(A).T


def _is_positive_direction(m: Sequence[int]) -> bool:
    for c in m:
        if c != 0:
            return c > 0
    return False


@dataclass(frozen=True)
class LatticeModel:
    """Validated lattice instance.

    Use :func:`build_lattice` or :meth:`from_hopping` rather than calling the
    constructor directly; those run the validation.
    """

    primitive_vectors: np.ndarray
    hopping: tuple  # tuple of (m: tuple[int, int, int], t: float)
    U: float
    reciprocal: np.ndarray = field(repr=False)

    @classmethod
    def from_hopping(cls, A, hopping: Iterable, U: float) -> "LatticeModel":
        """Validate and build.  ``hopping`` is an iterable of ``(m, t)`` pairs."""
        A = np.array(A, dtype=float)
        B = reciprocal_basis(A)
        table = []
        seen = set()
        for m, t in hopping:
            m_arr = np.asarray(m)
            if m_arr.shape != (3,) or not np.all(m_arr == np.round(m_arr)):
                raise ConfigError(f"hopping direction {m!r} is not an integer 3-vector")
            mm = tuple(int(c) for c in m_arr)
            t = float(t)
            if not np.isfinite(t) or t <= 0.0:
                raise NonPositiveWeight(f"hopping weight for {mm} must be positive, got {t}")
            if not _is_positive_direction(mm):
                raise DirectionNotPositive(
                    f"direction {mm} is not in the positive set (first nonzero entry must be > 0)"
                )
            if mm in seen:
                raise DuplicateDirection(f"direction {mm} listed twice")
            seen.add(mm)
            table.append((mm, t))
        for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
            if e not in seen:
                raise MissingPrimitiveHopping(f"no hopping along primitive direction {e}")
        U = float(U)
        if not np.isfinite(U) or U < 0.0:
            raise ConfigError(f"U must be a finite nonnegative number, got {U}")
        A.setflags(write=False)
        B.setflags(write=False)
        return cls(A, tuple(table), U, B)

    # -- derived quantities ------------------------------------------------
    @property
    def directions(self) -> np.ndarray:
        """Integer directions as an ``(n_hop, 3)`` array."""
        return np.array([m for m, _ in self.hopping], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([t for _, t in self.hopping], dtype=float)

    @property
    def hopping_length(self) -> int:
        """Smallest even ``L`` with every ``+-m`` inside ``{-L/2..L/2}^3``."""
        mmax = int(np.abs(self.directions).max())
        return 2 * mmax

    @property
    def c_gap(self) -> float:
        """Smallest weight among the three primitive directions."""
        d = dict(self.hopping)
        return min(d[(1, 0, 0)], d[(0, 1, 0)], d[(0, 0, 1)])

    @property
    def bz_volume(self) -> float:
        """``|det B|``; the sign of ``det B`` is ignored for any handedness of ``A``."""
        return float(abs(np.linalg.det(self.reciprocal)))

    def hessian(self) -> np.ndarray:
        """Cartesian matrix ``M`` with ``eps(p) = p.T M p + O(|p|^4)``."""
        V = self.primitive_vectors @ self.directions.T.astype(float)
        return (V * self.weights) @ V.T

    def hessian_frac(self) -> np.ndarray:
        """Same quadratic form in fractional coordinates, ``B.T M B``."""
        D = self.directions.astype(float)
        return TWO_PI**2 * (D.T * self.weights) @ D

    def with_U(self, U: float) -> "LatticeModel":
        return LatticeModel.from_hopping(self.primitive_vectors, self.hopping, U)

    def scaled(self, lam: float) -> "LatticeModel":
        """All hopping weights and ``U`` multiplied by ``lam``."""
        return LatticeModel.from_hopping(
            self.primitive_vectors, [(m, lam * t) for m, t in self.hopping], lam * self.U
        )

    def primitive_only(self) -> "LatticeModel":
        """Model restricted to the three primitive hopping directions."""
        keep = [(m, t) for m, t in self.hopping if sum(map(abs, m)) == 1]
        return LatticeModel.from_hopping(self.primitive_vectors, keep, self.U)

    def to_config(self) -> dict:
        return {
            "primitive_vectors": self.primitive_vectors.tolist(),
            "hopping": [{"m": list(m), "t": t} for m, t in self.hopping],
            "U": self.U,
        }


def build_lattice(config: Mapping) -> LatticeModel:
    """Validate a configuration document and return a :class:`LatticeModel`.

    The document has exactly the keys ``primitive_vectors`` (three rows; row
    ``i`` is the primitive vector ``a_i``), ``hopping`` (list of
    ``{"m": [..], "t": ..}``) and ``U``.  Unknown keys are rejected.
    """
    if not isinstance(config, Mapping):
        raise ConfigError("lattice configuration must be a JSON object")
    keys = set(config)
    if keys != _CONFIG_KEYS:
        extra = sorted(keys - _CONFIG_KEYS)
        missing = sorted(_CONFIG_KEYS - keys)
        raise ConfigError(f"bad config keys: unknown={extra} missing={missing}")
    rows = config["primitive_vectors"]
    try:
        A = np.array(rows, dtype=float).T
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"primitive_vectors not numeric: {exc}") from None
    if A.shape != (3, 3):
        raise ConfigError("primitive_vectors must be three rows of three numbers")
    hops = config["hopping"]
    if not isinstance(hops, list) or not hops:
        raise ConfigError("hopping must be a nonempty list")
    pairs = []
    for h in hops:
        if not isinstance(h, Mapping) or set(h) != _HOP_KEYS:
            raise ConfigError(f"hopping entries need exactly the keys 'm' and 't': {h!r}")
        pairs.append((h["m"], h["t"]))
    try:
        U = float(config["U"])
    except (TypeError, ValueError):
        raise ConfigError("U must be a number") from None
    return LatticeModel.from_hopping(A, pairs, U)


def load_config(source) -> LatticeModel:
    """Build a model from a JSON file path or a bundled config name."""
    name = str(source)
    if name in BUNDLED_CONFIGS:
        text = resources.files("latbose.configs").joinpath(f"{name}.json").read_text()
    else:
        path = Path(name)
        if not path.is_file():
            raise ConfigError(f"config file not found: {name}")
        text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return build_lattice(doc)


def simple_cubic(t: float = 1.0, U: float = 4.0) -> LatticeModel:
    return LatticeModel.from_hopping(
        np.eye(3), [((1, 0, 0), t), ((0, 1, 0), t), ((0, 0, 1), t)], U
    )


# -- dispersion ------------------------------------------------------------
def dispersion_frac(model: LatticeModel, s) -> np.ndarray:
    """Dispersion at fractional momenta ``s`` (shape ``(..., 3)``).

    Uses ``2t(1 - cos x) = 4t sin^2(x/2)``, which keeps full relative
    precision for tiny momenta where ``1 - cos`` would cancel.
    """
    s = np.asarray(s, dtype=float)
    phase = np.pi * (s @ model.directions.T.astype(float))
    return (4.0 * np.sin(phase) ** 2) @ model.weights


def to_fractional(model: LatticeModel, p) -> np.ndarray:
    """Fractional coordinates ``s`` of Cartesian momenta, ``p = B s``."""
    p = np.asarray(p, dtype=float)
    return p @ model.primitive_vectors / TWO_PI


def dispersion(model: LatticeModel, p) -> np.ndarray:
    """Lattice dispersion ``eps(p) = sum_v 2 t(v) (1 - cos(v.p))``.

    ``p`` is a Cartesian momentum or an array of them (last axis of size 3).
    Returns a float for a single momentum.
    """
    val = dispersion_frac(model, to_fractional(model, p))
    return float(val) if np.ndim(val) == 0 else val


def quadratic_bound_radius(model: LatticeModel, samples: int = 2000, seed: int = 0) -> float:
    """Diagnostic radius ``p0`` below which ``eps(p) >= c_gap |p|^2 / 2`` held on a sample.

    Scans radii downward from the inradius of the zone and returns the first
    radius at which every sampled direction satisfies the bound.  Not used by
    any algorithm.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(samples, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    B = model.reciprocal
    inradius = 0.5 * min(
        abs(np.linalg.det(B)) / np.linalg.norm(np.cross(B[:, (i + 1) % 3], B[:, (i + 2) % 3]))
        for i in range(3)
    )
    for r in inradius * np.geomspace(1.0, 1e-3, 60):
        p = r * u
        if np.all(dispersion(model, p) >= 0.5 * model.c_gap * r * r * (1 - 1e-12)):
            return float(r)
    return 0.0


# -- finite lattices ---------------------------------------------------------
def _check_even(L) -> int:
    if int(L) != L or L <= 0 or int(L) % 2:
        raise GridTooCoarse(f"box size must be a positive even integer, got {L}")
    return int(L)


@dataclass(frozen=True)
class FiniteLattice:
    """Periodic box ``{-L/2..L/2}^3`` with arithmetic mod ``L+1``.

    Sites are indexed row-major over the shifted coordinates ``x + L/2``.
    """

    model: LatticeModel
    L: int

    def __post_init__(self):
        _check_even(self.L)

    @property
    def side(self) -> int:
        return self.L + 1

    @property
    def n_sites(self) -> int:
        return self.side**3

    def coords(self) -> np.ndarray:
        """Integer coordinates of all sites in index order, shape ``(n_sites, 3)``."""
        h = self.L // 2
        r = np.arange(-h, h + 1)
        g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def index(self, x) -> np.ndarray:
        """Site index of integer coordinates (reduced mod ``L+1`` first)."""
        x = np.asarray(x, dtype=np.int64)
        n, h = self.side, self.L // 2
        y = np.mod(x + h, n)
        return (y[..., 0] * n + y[..., 1]) * n + y[..., 2]

    def require_hopping_fits(self):
        if self.L < self.model.hopping_length:
            raise GridTooCoarse(
                f"L={self.L} is below the hopping length {self.model.hopping_length}"
            )


@dataclass(frozen=True)
class MomentumGrid:
    """The ``(L+1)^3`` allowed momenta ``p = sum_j m_j b_j / (L+1)``."""

    lattice: FiniteLattice
    frac: np.ndarray  # fractional coordinates m/(L+1), same ordering as sites
    points: np.ndarray  # Cartesian momenta
    zero_index: int

    def dispersion(self) -> np.ndarray:
        return dispersion_frac(self.lattice.model, self.frac)


def momentum_grid(fl: FiniteLattice) -> MomentumGrid:
    m = fl.coords()
    frac = m / fl.side
    pts = frac @ fl.model.reciprocal.T
    zero = int(fl.index(np.zeros(3, dtype=np.int64)))
    return MomentumGrid(fl, frac, pts, zero)


def fourier(fl: FiniteLattice, f) -> np.ndarray:
    """Unitary transform ``f^(p) = |Lambda|^(-1/2) sum_x exp(-i p.x) f(x)``.

    Input and output are flat arrays in site / grid order.  Because
    ``p.x = 2 pi m.x/(L+1)`` the sum is an ordinary 3D DFT after moving the
    origin to index 0.
    """
    n = fl.side
    cube = np.asarray(f).reshape(n, n, n)
    out = np.fft.fftn(np.fft.ifftshift(cube), norm="ortho")
    return np.fft.fftshift(out).reshape(-1)


def inverse_fourier(fl: FiniteLattice, fhat) -> np.ndarray:
    n = fl.side
    cube = np.asarray(fhat).reshape(n, n, n)
    out = np.fft.ifftn(np.fft.ifftshift(cube), norm="ortho")
    return np.fft.fftshift(out).reshape(-1)
