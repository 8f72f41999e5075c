"""Exact diagonalization of the Bose-Hubbard Hamiltonian on small boxes.

The Hamiltonian on the box ``{-l/2..l/2}^3`` is::

    H = sum_{x,y} (-Delta)_{xy} b_x^+ b_y + U/2 sum_x n_x (n_x - 1)

with ``-Delta`` the periodic or Neumann Laplacian of :mod:`latbose.spectra`.

Basis states are multisets of ``n`` sites, stored as sorted site-index rows.
A multiset ``x_0 <= ... <= x_{n-1}`` maps to the strictly increasing
``c_i = x_i + i`` and is ranked with the combinatorial number system,
``rank = sum_i C(c_i, i+1)``.  This enumerates states in colexicographic
order and makes rank/unrank a few vectorized array operations.

Larger problems are reduced with the point-group symmetry of the box.  All
off-diagonal elements of ``H`` are nonpositive and the basis graph is
connected, so the ground state is unique with positive amplitudes and
therefore invariant under every symmetry.  It lives in the span of the orbit
states ``|O> = |O|^{-1/2} sum_{s in O} |s>``, where
``<O|H|O'> = sqrt(|O|/|O'|) sum_{s' in O'} <r|H|s'>`` for any ``r`` in ``O``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionCap, GridTooCoarse, NoConvergence, PoorFit, ValidationError
from .lattice import FiniteLattice, LatticeModel

BCS = ("periodic", "neumann")
DEFAULT_NNZ_CAP = 2_000_000
ENUMERATION_CAP = 20_000_000  # states enumerated for orbit construction
_CHUNK = 1 << 19


# -- basis -------------------------------------------------------------------
def _binom_table(nmax: int, kmax: int) -> np.ndarray:
    T = np.zeros((nmax + 1, kmax + 1), dtype=np.int64)
    for a in range(nmax + 1):
        for b in range(min(a, kmax) + 1):
            T[a, b] = comb(a, b)
    return T


def _colex_subsets(k: int, N: int) -> np.ndarray:
    """All ``k``-subsets of ``range(N)`` as increasing rows, in colex order."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int32)
    prev = _colex_subsets(k - 1, N)  # colex prefix property: first C(j, k-1) rows are subsets of range(j)
    blocks = []
    for j in range(k - 1, N):
        head = prev[: comb(j, k - 1)]
        blocks.append(np.hstack([head, np.full((head.shape[0], 1), j, dtype=np.int32)]))
    return np.vstack(blocks)


@dataclass
class FockBasis:
    """Symmetric ``n``-boson states on ``n_sites`` sites."""

    n_sites: int
    n: int
    _table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 0 or self.n_sites < 1:
            raise ValidationError("need n >= 0 and at least one site")
        self._table = _binom_table(self.n_sites + self.n, max(self.n, 1))

    @property
    def dim(self) -> int:
        return comb(self.n + self.n_sites - 1, self.n)

    def states(self) -> np.ndarray:
        """All states as sorted site rows, ordered by rank."""
        if self.dim > ENUMERATION_CAP:
            raise DimensionCap(f"basis dimension {self.dim} too large to enumerate")
        c = _colex_subsets(self.n, self.n_sites + self.n - 1)
        return c - np.arange(self.n, dtype=np.int32)

    def rank(self, states) -> np.ndarray:
        """Ranks of sorted site rows (shape ``(m, n)``)."""
        s = np.asarray(states, dtype=np.int64)
        if self.n == 0:
            return np.zeros(s.shape[0], dtype=np.int64)
        i = np.arange(self.n)
        return self._table[s + i, i + 1].sum(axis=1)

    def unrank(self, r) -> np.ndarray:
        """Inverse of :meth:`rank` for an array of ranks."""
        r = np.array(r, dtype=np.int64, copy=True)
        out = np.zeros((r.size, self.n), dtype=np.int64)
        T = self._table
        for i in range(self.n - 1, -1, -1):
            # largest c with C(c, i+1) <= r
            col = T[:, i + 1]
            c = np.searchsorted(col, r, side="right") - 1
            out[:, i] = c - i
            r -= col[c]
        return out

    def occupations(self, states) -> np.ndarray:
        s = np.asarray(states)
        occ = np.zeros((s.shape[0], self.n_sites), dtype=np.int64)
        for i in range(self.n):
            np.add.at(occ, (np.arange(s.shape[0]), s[:, i]), 1)
        return occ


# -- one-body data -------------------------------------------------------------
def _box(model: LatticeModel, l: int, bc: str) -> FiniteLattice:
    if bc not in BCS:
        raise ValidationError(f"bc must be one of {BCS}")
    if int(l) != l or l < 2 or int(l) % 2:
        raise GridTooCoarse(f"box size must be an even integer >= 2, got {l}")
    fl = FiniteLattice(model, int(l))
    if bc == "periodic":
        fl.require_hopping_fits()
    return fl


def neighbor_table(model: LatticeModel, l: int, bc: str):
    """``(nbr, weight)``: ``nbr[x, d]`` is the site reached from ``x`` along
    direction ``d`` (``-1`` if it leaves a Neumann box)."""
    fl = _box(model, l, bc)
    x = fl.coords()
    h = l // 2
    nbrs, ws = [], []
    for m, t in model.hopping:
        for sgn in (1, -1):
            y = x + sgn * np.asarray(m)
            j = fl.index(y)
            if bc == "neumann":
                j = np.where(np.all(np.abs(y) <= h, axis=1), j, -1)
            nbrs.append(j)
            ws.append(t)
    return np.stack(nbrs, axis=1).astype(np.int64), np.array(ws)


def symmetry_group(model: LatticeModel) -> list:
    """Signed permutation matrices mapping the weighted hopping set to itself."""
    table = dict(model.hopping)
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            g = np.zeros((3, 3), dtype=np.int64)
            for r, (c, sg) in enumerate(zip(perm, signs)):
                g[r, c] = sg
            ok = True
            for m, t in model.hopping:
                gm = tuple(int(v) for v in g @ np.array(m))
                key = gm if gm in table else tuple(-v for v in gm)
                if table.get(key) != t:
                    ok = False
                    break
            if ok:
                out.append(g)
    return out


def site_permutations(model: LatticeModel, l: int, bc: str) -> np.ndarray:
    fl = _box(model, l, bc)
    x = fl.coords()
    return np.stack([fl.index(x @ g.T) for g in symmetry_group(model)])


# -- Hamiltonian ---------------------------------------------------------------
def _counts(states: np.ndarray, sites: np.ndarray) -> np.ndarray:
    return (states == sites[:, None]).sum(axis=1)


def _diagonal(states, nbr, w, U):
    deg = np.where(nbr >= 0, w[None, :], 0.0).sum(axis=1)
    kin = deg[states].sum(axis=1)
    n = states.shape[1]
    pairs = np.zeros(states.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            pairs += states[:, i] == states[:, j]
    return kin + U * pairs


def _hops(states, nbr, w):
    """Yield ``(row_positions, new_states, amplitude)`` for every one-particle move."""
    n = states.shape[1]
    for i in range(n):
        xi = states[:, i]
        distinct = np.ones(xi.size, dtype=bool) if i == 0 else xi != states[:, i - 1]
        nx = _counts(states, xi)
        for d in range(nbr.shape[1]):
            y = nbr[xi, d]
            ok = distinct & (y >= 0)
            if not ok.any():
                continue
            rows = np.nonzero(ok)[0]
            yy = y[rows]
            ny = _counts(states[rows], yy)
            new = states[rows].copy()
            new[:, i] = yy
            new.sort(axis=1)
            amp = -w[d] * np.sqrt(nx[rows] * (ny + 1.0))
            yield rows, new, amp


@dataclass
class BoseHubbardOperator:
    """Sparse Hamiltonian plus the bookkeeping needed to interpret it."""

    matrix: sp.csr_matrix
    bc: str
    l: int
    n: int
    U: float
    full_dim: int
    reduced: bool
    basis: FockBasis = field(repr=False)
    orbit_ranks: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _estimate_nnz(dim: int, n: int, ndir: int) -> int:
    return dim * (1 + n * ndir)


def build_hamiltonian(
    model: LatticeModel,
    l: int,
    n: int,
    bc: str,
    U: float | None = None,
    symmetry: str = "auto",
    nnz_cap: int = DEFAULT_NNZ_CAP,
) -> BoseHubbardOperator:
    """Bose-Hubbard Hamiltonian in the occupation basis.

    ``symmetry`` is ``"none"`` (full basis), ``"full"`` (orbit basis of the
    box point group, trivial representation only) or ``"auto"`` (orbit basis
    only when the full matrix would exceed ``nnz_cap`` nonzeros).
    """
    U = model.U if U is None else float(U)
    if symmetry not in ("auto", "none", "full"):
        raise ValidationError("symmetry must be 'auto', 'none' or 'full'")
    nbr, w = neighbor_table(model, l, bc)
    fl = FiniteLattice(model, int(l))
    basis = FockBasis(fl.n_sites, int(n))
    full_nnz = _estimate_nnz(basis.dim, n, nbr.shape[1])
    if symmetry == "none" or (symmetry == "auto" and full_nnz <= nnz_cap):
        if full_nnz > nnz_cap:
            raise DimensionCap(f"estimated {full_nnz} nonzeros exceeds cap {nnz_cap}")
        return _build_full(basis, nbr, w, U, bc, int(l))
    return _build_reduced(model, basis, nbr, w, U, bc, int(l), nnz_cap)


def _build_full(basis, nbr, w, U, bc, l):
    states = basis.states()
    dim = states.shape[0]
    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [_diagonal(states, nbr, w, U)]
    for r, new, amp in _hops(states, nbr, w):
        rows.append(r)
        cols.append(basis.rank(new))
        vals.append(amp)
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    H.sum_duplicates()
    H.sort_indices()
    return BoseHubbardOperator(H, bc, l, basis.n, U, dim, False, basis)


def _canonical_ranks(basis: FockBasis, states: np.ndarray, perms: np.ndarray) -> np.ndarray:
    out = np.empty(states.shape[0], dtype=np.int64)
    for a in range(0, states.shape[0], _CHUNK):
        blk = states[a : a + _CHUNK]
        best = None
        for p in perms:
            img = p[blk]
            img.sort(axis=1)
            r = basis.rank(img)
            best = r if best is None else np.minimum(best, r)
        out[a : a + _CHUNK] = best
    return out


def _build_reduced(model, basis, nbr, w, U, bc, l, nnz_cap):
    perms = site_permutations(model, l, bc)
    states = basis.states()
    canon = _canonical_ranks(basis, states, perms)
    is_rep = canon == np.arange(states.shape[0])
    sizes_all = np.bincount(canon, minlength=states.shape[0])
    rep_ranks = np.nonzero(is_rep)[0]
    reps = states[rep_ranks]
    sizes = sizes_all[rep_ranks].astype(float)
    del states, canon, sizes_all, is_rep
    dim = rep_ranks.size
    est = _estimate_nnz(dim, basis.n, nbr.shape[1])
    if est > 4 * nnz_cap:
        raise DimensionCap(f"reduced problem still has ~{est} nonzeros (cap {4 * nnz_cap})")
    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [_diagonal(reps, nbr, w, U)]
    for r, new, amp in _hops(reps, nbr, w):
        target = np.searchsorted(rep_ranks, _canonical_ranks(basis, new, perms))
        rows.append(r)
        cols.append(target)
        vals.append(amp * np.sqrt(sizes[r] / sizes[target]))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    H.sum_duplicates()
    H = ((H + H.T) * 0.5).tocsr()
    H.sort_indices()
    return BoseHubbardOperator(H, bc, l, basis.n, U, basis.dim, True, basis, rep_ranks)


# -- Lanczos -----------------------------------------------------------------------
@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-10
    seed: int = 0
    max_krylov: int = 160
    max_restarts: int = 60
    dense_below: int = 0  # optional shortcut: dense eigensolver for tiny matrices


@dataclass
class EDResult:
    e0: float
    residual: float
    iterations: int
    bc: str
    basis_dim: int
    full_dim: int | None = None
    vector: np.ndarray | None = field(default=None, repr=False)


def lanczos_ground(H, params: SolverParams = SolverParams()):
    """Lowest eigenpair of a real symmetric matrix by restarted Lanczos.

    Full reorthogonalization; restarts from the current Ritz vector.  Returns
    ``(e0, vector, residual, matvecs)`` where ``residual = ||H v - e0 v||``.
    """
    dim = H.shape[0]
    if dim == 0:
        raise ValidationError("empty operator")
    if dim <= max(params.dense_below, 1):
        M = H.toarray() if sp.issparse(H) else np.asarray(H)
        vals, vecs = scipy.linalg.eigh(M)
        v = vecs[:, 0]
        return float(vals[0]), v, float(np.linalg.norm(M @ v - vals[0] * v)), 0
    rng = np.random.default_rng(params.seed)
    v = rng.standard_normal(dim)
    kmax = min(params.max_krylov, dim)
    Q = np.empty((kmax, dim))
    matvecs = 0
    theta, res = np.nan, np.inf
    for _ in range(params.max_restarts):
        v = v / np.linalg.norm(v)
        alpha, beta = [], []
        Q[0] = v
        k = 0
        for k in range(kmax):
            wv = H @ Q[k]
            matvecs += 1
            a = float(Q[k] @ wv)
            alpha.append(a)
            for _ in range(2):  # full reorthogonalization, twice is enough
                wv -= Q[: k + 1].T @ (Q[: k + 1] @ wv)
            b = float(np.linalg.norm(wv))
            if k % 5 == 4 or b < 1e-14 or k == kmax - 1:
                ev, evec = scipy.linalg.eigh_tridiagonal(
                    np.array(alpha), np.array(beta), select="i", select_range=(0, 0)
                )
                est = abs(b * evec[-1, 0])
                if est < 0.1 * params.tol or b < 1e-14 or k == kmax - 1:
                    break
            if k + 1 < kmax:
                beta.append(b)
                Q[k + 1] = wv / b
        ev, evec = scipy.linalg.eigh_tridiagonal(
            np.array(alpha), np.array(beta[: len(alpha) - 1]), select="i", select_range=(0, 0)
        )
        theta = float(ev[0])
        v = Q[: len(alpha)].T @ evec[:, 0]
        v /= np.linalg.norm(v)
        r = H @ v - theta * v
        matvecs += 1
        res = float(np.linalg.norm(r))
        if res <= params.tol:
            return theta, v, res, matvecs
    raise NoConvergence(f"Lanczos residual {res:.3g} above {params.tol:g} after restarts")


def ground_state_energy(op, params: SolverParams = SolverParams(), keep_vector: bool = False) -> EDResult:
    """Ground-state energy of a :class:`BoseHubbardOperator` (or a bare matrix)."""
    if isinstance(op, BoseHubbardOperator):
        H, bc, full = op.matrix, op.bc, op.full_dim
    else:
        H, bc, full = op, "", None
    e0, v, res, it = lanczos_ground(H, params)
    return EDResult(e0, res, it, bc, H.shape[0], full, v if keep_vector else None)


def ed_ground_energy(
    model: LatticeModel,
    l: int,
    n: int,
    bc: str,
    U: float | None = None,
    params: SolverParams = SolverParams(),
    symmetry: str = "auto",
) -> EDResult:
    """Convenience wrapper: build and solve."""
    if n == 0:
        return EDResult(0.0, 0.0, 0, bc, 1, 1)
    op = build_hamiltonian(model, l, n, bc, U, symmetry)
    return ground_state_energy(op, params)


def site_occupations(op: BoseHubbardOperator, vector) -> np.ndarray:
    """Mean occupation of every site in a full-basis state vector."""
    if op.reduced:
        raise ValidationError("site occupations need the full basis")
    occ = op.basis.occupations(op.basis.states())
    return (np.abs(vector) ** 2) @ occ


# -- two-body problem ----------------------------------------------------------------
def relative_hamiltonian(model: LatticeModel, L: int, U: float) -> sp.csr_matrix:
    """Zero total momentum two-body Hamiltonian in the relative coordinate.

    For ``psi(x1, x2) = f(x2 - x1)`` both kinetic terms act on ``f`` as the
    periodic Laplacian, so ``H_rel = 2 (-Delta_per) + U |0><0|``.
    """
    from .spectra import build_laplacian

    fl = _box(model, L, "periodic")
    H = 2.0 * build_laplacian(model, L, "periodic").matrix.tolil()
    o = int(fl.index(np.zeros(3, dtype=np.int64)))
    H[o, o] += U
    return H.tocsr()


def two_body_energy(
    model: LatticeModel, L: int, U: float, method: str = "relative", params: SolverParams = SolverParams()
) -> float:
    if method == "relative":
        return lanczos_ground(relative_hamiltonian(model, L, U), params)[0]
    if method == "full":
        return ed_ground_energy(model, L, 2, "periodic", U, params, symmetry="none").e0
    raise ValidationError("method must be 'relative' or 'full'")


def _aic_fit(h, e):
    fits = []
    n = len(h)
    for deg in (1, 2):
        if n <= deg + 1:
            continue
        coef = np.polyfit(h, e, deg)
        rss = float(np.sum((np.polyval(coef, h) - e) ** 2))
        aic = n * np.log(max(rss / n, 1e-300)) + 2 * (deg + 1)
        fits.append((aic, deg, coef, rss))
    if not fits:
        raise PoorFit("need at least three box sizes for the extrapolation")
    fits.sort(key=lambda f: (f[0], f[1]))
    return fits[0]


def two_body_scattering_extraction(
    model: LatticeModel,
    U: float,
    L_list,
    method: str = "relative",
    params: SolverParams = SolverParams(),
    max_rel_residual: float = 1e-2,
) -> dict:
    """Extrapolate ``e(L) = E0(2, L) |Lambda_L|`` to ``L -> infinity``.

    Fits ``e(L) = e_inf + b/L (+ c/L^2)`` and keeps the fit with the lower
    AIC.  Raises :class:`PoorFit` when the rms residual of the chosen fit
    exceeds ``max_rel_residual`` relative to ``|e_inf|``.
    """
    Ls = sorted(int(L) for L in L_list)
    e = np.array([two_body_energy(model, L, U, method, params) * (L + 1) ** 3 for L in Ls])
    if U == 0:
        return {"L": Ls, "e": e.tolist(), "e_inf": 0.0, "degree": 1, "rms_residual": 0.0}
    h = 1.0 / np.array(Ls, dtype=float)
    aic, deg, coef, rss = _aic_fit(h, e)
    e_inf = float(coef[-1])
    rms = float(np.sqrt(rss / len(Ls)))
    if rms > max_rel_residual * abs(e_inf):
        raise PoorFit(f"extrapolation residual {rms:g} too large")
    return {"L": Ls, "e": e.tolist(), "e_inf": e_inf, "degree": deg, "rms_residual": rms}


# -- ensembles -------------------------------------------------------------------------
def lower_convex_envelope(values) -> np.ndarray:
    """Lower convex envelope of ``values`` sampled at ``0, 1, 2, ...``."""
    y = np.asarray(values, dtype=float)
    env = y.copy()
    n = len(y)
    for m in range(n):
        for a in range(m + 1):
            for b in range(m, n):
                if a == b:
                    continue
                lam = (m - a) / (b - a)
                env[m] = min(env[m], (1 - lam) * y[a] + lam * y[b])
    return env


def ensemble_inequality_check(
    model: LatticeModel,
    U: float,
    l: int,
    n: int,
    bc: str = "neumann",
    n_max: int | None = None,
    params: SolverParams = SolverParams(),
) -> dict:
    """Grand-canonical estimate (sector minimization) against the canonical ``E0(n)``.

    The grand-canonical energy at mean particle number ``n`` is estimated by the
    lower convex envelope of the sector energies ``E0(m)``, ``m = 0..n_max``.
    """
    n_max = n + 1 if n_max is None else n_max
    if n_max < n:
        raise ValidationError("n_max must be >= n")
    E = [ed_ground_energy(model, l, m, bc, U, params).e0 for m in range(n_max + 1)]
    env = lower_convex_envelope(E)
    mus = np.diff(env)
    return {
        "sector_energies": E,
        "grand_canonical": float(env[n]),
        "canonical": E[n],
        "mu_range": (float(mus[n - 1]) if n > 0 else None, float(mus[n]) if n < len(mus) else None),
        "holds": bool(env[n] <= E[n] + 1e-12),
    }
