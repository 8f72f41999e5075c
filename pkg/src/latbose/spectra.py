"""Lattice Laplacians on finite boxes and their spectra.

Three operators act on functions on the box ``{-l/2..l/2}^3``:

``periodic``
    hopping wraps around modulo ``l+1``;
``neumann``
    only edges with both endpoints inside the box are kept (graph Laplacian
    of the induced subgraph);
``neumann_special``
    like ``neumann`` but with the three primitive directions only.  It is a
    sum of three path-graph Laplacians, so its spectrum is known in closed
    form.

All act as ``(-Delta u)(x) = sum_{y ~ x} t(x - y) (u(x) - u(y))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GapBoundViolation, GridTooCoarse, OrderingViolation, ValidationError
from .lattice import FiniteLattice, LatticeModel, momentum_grid

KINDS = ("periodic", "neumann", "neumann_special")
DENSE_LIMIT = 3375  # (14 + 1)^3 sites
ORDER_TOL = 1e-10


@dataclass(frozen=True)
class LaplacianMatrix:
    kind: str
    l: int
    matrix: sp.csr_matrix
    model: LatticeModel

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray  # ascending; possibly only the lowest part
    kind: str
    l: int
    complete: bool = True

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def min_nonzero(self) -> float:
        ev = self.eigenvalues
        return float(ev[ev > ORDER_TOL][0])

    def trace_inverse(self) -> float:
        """``|Lambda|^{-1} sum_{k != 0} 1/lambda_k`` (zero mode dropped)."""
        self._need_complete()
        return float(np.sum(1.0 / self.eigenvalues[1:]) / self.eigenvalues.size)

    def trace_power(self, nu: float) -> float:
        self._need_complete()
        return float(np.sum(self.eigenvalues[1:] ** (-nu)) / self.eigenvalues.size)

    def _need_complete(self):
        if not self.complete:
            raise ValidationError("operation needs the full spectrum")


def _edges(model: LatticeModel, l: int, kind: str):
    """Directed edge list ``(i, j, t)`` with both orientations present."""
    fl = FiniteLattice(model, l)
    x = fl.coords()
    h = l // 2
    rows, cols, vals = [], [], []
    for m, t in model.hopping:
        if kind == "neumann_special" and sum(map(abs, m)) != 1:
            continue
        y = x + np.asarray(m)
        if kind == "periodic":
            mask = np.ones(len(x), dtype=bool)
        else:
            mask = np.all(np.abs(y) <= h, axis=1)
        i = fl.index(x[mask])
        j = fl.index(y[mask])
        rows += [i, j]
        cols += [j, i]
        vals += [np.full(i.size, t), np.full(i.size, t)]
    return fl, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _check_box(model: LatticeModel, l, kind: str) -> int:
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}")
    if int(l) != l or l < 2 or int(l) % 2:
        raise GridTooCoarse(f"box size must be an even integer >= 2, got {l}")
    if kind == "periodic" and l < model.hopping_length:
        raise GridTooCoarse(f"periodic box needs l >= {model.hopping_length}")
    return int(l)


def build_laplacian(model: LatticeModel, l: int, kind: str) -> LaplacianMatrix:
    """Sparse Laplacian of the requested kind on the box of size ``l``."""
    l = _check_box(model, l, kind)
    fl, i, j, t = _edges(model, l, kind)
    n = fl.n_sites
    W = sp.coo_matrix((t, (i, j)), shape=(n, n)).tocsr()
    W.sum_duplicates()
    deg = np.asarray(W.sum(axis=1)).ravel()
    M = (sp.diags(deg) - W).tocsr()
    M.sort_indices()
    return LaplacianMatrix(kind, l, M, model)


def neumann_form(model: LatticeModel, l: int, u, special: bool = False) -> float:
    """``1/2 sum_{(x,y) in E} t |u(x) - u(y)|^2`` over ordered interior edges."""
    _, i, j, t = _edges(model, l, "neumann_special" if special else "neumann")
    u = np.asarray(u)
    return float(0.5 * np.sum(t * np.abs(u[i] - u[j]) ** 2))


def one_dim_factors(t: float, l: int) -> np.ndarray:
    """``4 t sin^2(k pi / (2(l+1)))`` for ``k = 0..l`` (path-graph spectrum)."""
    k = np.arange(l + 1)
    return 4.0 * t * np.sin(k * np.pi / (2.0 * (l + 1))) ** 2


def special_neumann_values(model: LatticeModel, l: int) -> np.ndarray:
    """Closed-form special Neumann eigenvalues indexed by ``k`` in ``{0..l}^3``."""
    d = dict(model.hopping)
    f = [one_dim_factors(d[e], l) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    return (f[0][:, None, None] + f[1][None, :, None] + f[2][None, None, :]).ravel()


def special_neumann_eigs(model: LatticeModel, l: int) -> SpectrumResult:
    return SpectrumResult(np.sort(special_neumann_values(model, l), kind="stable"), "neumann_special", l)


def _is_primitive_only(model: LatticeModel) -> bool:
    return all(sum(map(abs, m)) == 1 for m, _ in model.hopping)


def periodic_values(model: LatticeModel, l: int) -> np.ndarray:
    """Periodic eigenvalues: the dispersion on the momentum grid."""
    fl = FiniteLattice(model, l)
    fl.require_hopping_fits()
    return momentum_grid(fl).dispersion()


def spectrum(model: LatticeModel, l: int, kind: str, n_lowest: int | None = None) -> SpectrumResult:
    """Sorted spectrum.

    Closed forms are used where they are exact (``neumann_special``, and
    ``neumann`` when only primitive hopping is present; ``periodic`` via the
    momentum grid).  Otherwise the matrix is diagonalized densely up to
    :data:`DENSE_LIMIT` sites, and above that only the ``n_lowest``
    eigenvalues are computed with shift-invert Lanczos.
    """
    if kind == "neumann_special" or (kind == "neumann" and _is_primitive_only(model)):
        _check_box(model, l, kind)
        ev = np.sort(special_neumann_values(model, l), kind="stable")
        return SpectrumResult(ev, kind, l)
    if kind == "periodic":
        _check_box(model, l, kind)
        return SpectrumResult(np.sort(periodic_values(model, l), kind="stable"), kind, l)
    lap = build_laplacian(model, l, kind)
    if lap.size <= DENSE_LIMIT and n_lowest is None:
        return SpectrumResult(dense_eigenvalues(lap), kind, l)
    return SpectrumResult(lowest_eigenvalues(lap, n_lowest or 4), kind, l, complete=False)


def dense_eigenvalues(lap: LaplacianMatrix) -> np.ndarray:
    if lap.size > DENSE_LIMIT:
        raise ValidationError(f"dense diagonalization limited to {DENSE_LIMIT} sites")
    ev = scipy.linalg.eigvalsh(lap.matrix.toarray())
    return np.sort(ev, kind="stable")


def lowest_eigenvalues(lap: LaplacianMatrix, k: int = 4) -> np.ndarray:
    """Lowest ``k`` eigenvalues by shift-invert around a small negative shift."""
    model = lap.model
    sigma = -0.25 * model.c_gap / (lap.l + 1) ** 2
    # fixed-seed start vector; the constant vector would be an exact eigenvector
    v0 = np.random.default_rng(12345).standard_normal(lap.size)
    ev = spla.eigsh(lap.matrix.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, return_eigenvectors=False)
    return np.sort(ev, kind="stable")


# -- comparison checks -------------------------------------------------------
def comparison_check(model: LatticeModel, l: int, tol: float = ORDER_TOL) -> dict:
    """Eigenvalue-wise ordering special <= neumann <= periodic."""
    spec = special_neumann_eigs(model, l).eigenvalues
    neu = spectrum(model, l, "neumann").eigenvalues
    per = spectrum(model, l, "periodic").eigenvalues
    s1 = float(np.min(neu - spec))
    s2 = float(np.min(per - neu))
    if s1 < -tol or s2 < -tol:
        raise OrderingViolation(f"spectral ordering violated at l={l}: slacks {s1:g}, {s2:g}")
    return {
        "l": l,
        "special": spec,
        "neumann": neu,
        "periodic": per,
        "slack_special_neumann": s1,
        "slack_neumann_periodic": s2,
    }


def neumann_gap(model: LatticeModel, l: int) -> float:
    sr = spectrum(model, l, "neumann", n_lowest=None if (l + 1) ** 3 <= DENSE_LIMIT else 4)
    return sr.gap


def gap_check(model: LatticeModel, l_list) -> dict:
    """Neumann gap against ``c_gap/(l+1)^2`` for each box size."""
    rows = []
    for l in l_list:
        g = neumann_gap(model, l)
        lb = model.c_gap / (l + 1) ** 2
        if g < lb - ORDER_TOL:
            raise GapBoundViolation(f"gap {g:g} below {lb:g} at l={l}")
        rows.append({"l": l, "gap": g, "lower_bound": lb, "scaled_gap": g * (l + 1) ** 2})
    C = max(r["scaled_gap"] for r in rows)
    return {"rows": rows, "C_gap": C, "c_gap": model.c_gap}


def trace_inverse_comparison(model: LatticeModel, l_list) -> dict:
    """``d(l) = |Lambda|^{-1} |Tr (-Delta_Neu)^-1 - Tr (-Delta_Per)^-1|`` on the nonzero modes."""
    rows = []
    for l in l_list:
        neu = spectrum(model, l, "neumann")
        per = periodic_values(model, l)
        per = np.sort(per)[1:]
        n = neu.eigenvalues.size
        tn = neu.trace_inverse()
        tp = float(np.sum(1.0 / per) / n)
        rows.append({"l": l, "trace_neumann": tn, "trace_periodic": tp, "d": abs(tn - tp)})
    C = max(r["d"] * (r["l"] + 1) ** (1.0 / 3.0) for r in rows)
    return {"rows": rows, "C_fit": C}


def trace_power(model: LatticeModel, l: int, nu: float) -> float:
    """``|Lambda|^{-1} sum_{k != 0} lambda_k^{-nu}`` for the Neumann Laplacian."""
    if not nu > 1.5:
        raise ValidationError("nu must exceed 3/2")
    return spectrum(model, l, "neumann").trace_power(nu)
