"""Periodic lattice geometry, displacement fields, and finite differences.

A simple lattice ``A Z^d`` is represented through its integer coordinates:
sites are elements of ``Z^d`` and the deformation matrix ``A`` only enters
through bond lengths ``|A rho|`` inside the site potentials.  All fields live
on a periodic supercell ``{0, ..., N-1}^d`` and are extended periodically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "LatticeSpec",
    "StencilSet",
    "DisplacementField",
    "as_direction",
    "finite_difference",
    "stencil",
    "all_stencils",
    "stencil_sup_norm",
    "grad_norm",
    "cell_corner_values",
    "gauss_rule_01",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the periodic supercell.

    Parameters
    ----------
    d : int
        Space dimension, 1 <= d <= 3.
    A : (d, d) array
        Nondegenerate deformation matrix of the reference lattice; bonds in
        direction ``rho`` have reference length ``|A rho|``.
    N : int
        Supercell period per axis (N >= 4 so that second-neighbour stencils
        do not wrap onto themselves).
    """

    d: int
    A: np.ndarray
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        A = np.asarray(self.A, dtype=float)
        if A.shape != (self.d, self.d):
            raise ValueError(f"A must have shape ({self.d}, {self.d}), got {A.shape}")
        if abs(np.linalg.det(A)) < 1e-14:
            raise ValueError("lattice matrix A is singular")
        if self.N < 4:
            raise ValueError(f"supercell period N must be >= 4, got {self.N}")
        object.__setattr__(self, "A", A)

    @property
    def n_sites(self) -> int:
        return self.N**self.d

    def site_coords(self) -> np.ndarray:
        """All supercell sites as an (N^d, d) integer array, row-major order."""
        axes = [np.arange(self.N)] * self.d
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)


def as_direction(rho, d: int) -> np.ndarray:
    """Validate an interaction direction: a nonzero integer d-vector."""
    r = np.asarray(rho)
    if r.shape != (d,):
        raise ValueError(f"direction must be a length-{d} vector, got shape {r.shape}")
    if not np.issubdtype(r.dtype, np.integer):
        ri = np.rint(r).astype(int)
        if not np.allclose(r, ri):
            raise ValueError(f"direction must have integer entries, got {rho}")
        r = ri
    if not r.any():
        raise ValueError("direction must be nonzero")
    return r.astype(int)


@dataclass(frozen=True)
class StencilSet:
    """Finite interaction range: all nonzero ``rho`` with ``|rho| <= r_cut``.

    The direction list is closed under negation, contains the nearest
    neighbours, and is sorted lexicographically so that every array indexed
    by stencil slot has a reproducible layout.
    """

    r_cut: float
    directions: np.ndarray = field(compare=False)

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=int)
        if dirs.ndim != 2 or dirs.shape[0] == 0:
            raise ValueError("directions must be a nonempty (n, d) integer array")
        if self.r_cut < 1.0:
            raise ValueError("r_cut must be >= 1 so nearest neighbours interact")
        as_set = {tuple(r) for r in dirs}
        for r in dirs:
            if not r.any():
                raise ValueError("the zero vector is not a valid direction")
            if tuple(-r) not in as_set:
                raise ValueError(f"stencil not closed under negation: missing {tuple(-r)}")
        d = dirs.shape[1]
        for axis in range(d):
            e = tuple(1 if a == axis else 0 for a in range(d))
            if e not in as_set:
                raise ValueError(f"stencil must contain nearest neighbour {e}")
        order = np.lexsort(dirs.T[::-1])
        object.__setattr__(self, "directions", dirs[order])

    @classmethod
    def ball(cls, d: int, r_cut: float) -> "StencilSet":
        """All nonzero integer vectors with Euclidean norm <= r_cut."""
        m = int(np.floor(r_cut))
        rng = range(-m, m + 1)
        dirs = [r for r in product(rng, repeat=d) if any(r) and np.linalg.norm(r) <= r_cut]
        return cls(r_cut=float(r_cut), directions=np.array(dirs, dtype=int))

    @property
    def n(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def norms(self) -> np.ndarray:
        """Euclidean lengths |rho| of all directions, shape (n,)."""
        return np.linalg.norm(self.directions, axis=1)

    def index_of(self, rho) -> int:
        """Slot of direction ``rho`` in the stencil ordering."""
        r = as_direction(rho, self.d)
        hit = np.nonzero((self.directions == r).all(axis=1))[0]
        if hit.size == 0:
            raise KeyError(f"direction {tuple(r)} not in stencil (r_cut={self.r_cut})")
        return int(hit[0])

    @property
    def negation_perm(self) -> np.ndarray:
        """Permutation p with directions[p[i]] == -directions[i]."""
        return np.array([self.index_of(-r) for r in self.directions], dtype=int)


@dataclass
class DisplacementField:
    """Periodic vector-valued lattice function u : Z^d -> R^d.

    ``values`` has shape ``(N,)*d + (d,)``; entry ``values[xi]`` is the
    displacement of site ``xi`` of the supercell.
    """

    lattice: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        want = (self.lattice.N,) * self.lattice.d + (self.lattice.d,)
        v = np.asarray(self.values, dtype=float)
        if v.shape != want:
            raise ValueError(f"values must have shape {want}, got {v.shape}")
        self.values = v

    @classmethod
    def zeros(cls, lattice: LatticeSpec) -> "DisplacementField":
        return cls(lattice, np.zeros((lattice.N,) * lattice.d + (lattice.d,)))

    @classmethod
    def from_function(cls, lattice: LatticeSpec, fn) -> "DisplacementField":
        """Sample ``fn`` (mapping (M, d) site coords to (M, d) values) on the supercell."""
        coords = lattice.site_coords()
        vals = np.asarray(fn(coords), dtype=float).reshape(coords.shape[0], lattice.d)
        return cls(lattice, vals.reshape((lattice.N,) * lattice.d + (lattice.d,)))

    def site_values(self, xi: np.ndarray) -> np.ndarray:
        """Periodic lookup u(xi) for an integer site batch of shape (..., d)."""
        xi = np.asarray(xi, dtype=int)
        idx = np.mod(xi, self.lattice.N)
        return self.values[tuple(np.moveaxis(idx, -1, 0))]

    def copy(self) -> "DisplacementField":
        return DisplacementField(self.lattice, self.values.copy())


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def finite_difference(u: DisplacementField, xi, rho) -> np.ndarray:
    """Long finite difference D_rho u(xi) = u(xi + rho) - u(xi).

    ``xi`` may be a single site or a batch of shape (..., d); the result has
    the matching shape with a trailing component axis.
    """
    rho = as_direction(rho, u.lattice.d)
    xi = np.asarray(xi, dtype=int)
    return u.site_values(xi + rho) - u.site_values(xi)


def stencil(u: DisplacementField, xi, S: StencilSet) -> np.ndarray:
    """Full difference stencil Du(xi) = (D_rho u(xi))_rho, shape (..., n, d)."""
    xi = np.asarray(xi, dtype=int)
    shifted = xi[..., None, :] + S.directions
    return u.site_values(shifted) - u.site_values(xi)[..., None, :]


def all_stencils(values: np.ndarray, S: StencilSet) -> np.ndarray:
    """Difference stencils at every site at once.

    Parameters
    ----------
    values : array, shape (N,)*d + (d,)
        Periodic displacement values.
    S : StencilSet

    Returns
    -------
    array, shape (N,)*d + (n, d)
        ``out[xi, i] = u(xi + rho_i) - u(xi)``.
    """
    d = values.ndim - 1
    out = np.empty(values.shape[:-1] + (S.n, d))
    axes = tuple(range(d))
    for i, rho in enumerate(S.directions):
        out[..., i, :] = np.roll(values, shift=tuple(-rho), axis=axes) - values
    return out


def stencil_sup_norm(g: np.ndarray, S: StencilSet) -> float:
    """Scaled stencil sup norm max_rho |g_rho| / |rho| over a stencil batch.

    ``g`` has shape (..., n, d); the norm is taken over all leading axes.
    """
    g = np.asarray(g, dtype=float)
    mags = np.sqrt(np.sum(g * g, axis=-1))
    return float(np.max(mags / S.norms))


# ---------------------------------------------------------------------------
# norms of the piecewise multilinear interpolant
# ---------------------------------------------------------------------------

def gauss_rule_01(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def cell_corner_values(values: np.ndarray) -> np.ndarray:
    """Corner values of every lattice cell.

    Returns an array of shape ``(N,)*d + (2,)*d + (d,)`` whose entry
    ``[cell, sigma]`` is ``u(cell + sigma)`` with periodic wrap.
    """
    d = values.ndim - 1
    N = values.shape[0]
    out = np.empty((N,) * d + (2,) * d + (d,))
    axes = tuple(range(d))
    for sigma in product((0, 1), repeat=d):
        out[(slice(None),) * d + sigma] = np.roll(values, shift=tuple(-s for s in sigma), axis=axes)
    return out


def _cell_gradients(corners: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradients of the multilinear interpolant at local points.

    Parameters
    ----------
    corners : shape (C,) + (2,)*d + (m,)
        Corner values per cell (C cells, m components).
    y : shape (Q, d)
        Local coordinates in [0, 1]^d.

    Returns
    -------
    shape (C, Q, m, d) array of gradients d(u_j)/d(x_alpha).
    """
    d = y.shape[1]
    C = corners.shape[0]
    m = corners.shape[-1]
    Q = y.shape[0]
    grads = np.zeros((C, Q, m, d))
    for sigma in product((0, 1), repeat=d):
        c = corners[(slice(None),) + sigma]  # (C, m)
        # weight factors per axis: y or (1 - y); derivative flips one factor
        fac = np.where(np.array(sigma, bool), y, 1.0 - y)  # (Q, d)
        sign = np.where(np.array(sigma, bool), 1.0, -1.0)  # (d,)
        for alpha in range(d):
            others = [b for b in range(d) if b != alpha]
            wgt = sign[alpha] * (np.prod(fac[:, others], axis=1) if others else np.ones(Q))
            grads[:, :, :, alpha] += c[:, None, :] * wgt[None, :, None]
    return grads


def grad_norm(u: DisplacementField, p: float = 2) -> float:
    """Norm of the gradient of the piecewise multilinear interpolant.

    For ``p = 2`` the per-cell quadrature (2-point Gauss per axis) is exact
    because |grad v|^2 has degree <= 2 in each coordinate.  For ``p = inf``
    the maximum over cell corners is exact since |grad v|^2 is convex in
    each coordinate separately.  ``p = 1`` uses the same quadrature and is
    accurate to quadrature order (|grad v| is not polynomial).

    Examples
    --------
    A single hat profile (0, 1, 0, 0) on a 1D supercell of period 4 has
    squared L2 gradient norm 2: slope +1 on one cell, -1 on the next.
    """
    d = u.lattice.d
    corners = cell_corner_values(u.values).reshape((u.lattice.n_sites,) + (2,) * d + (d,))
    if p == np.inf or p == "inf":
        y = np.array(list(product((0.0, 1.0), repeat=d)))
        g = _cell_gradients(corners, y)
        return float(np.sqrt(np.max(np.sum(g * g, axis=(2, 3)))))
    if p not in (1, 2):
        raise ValueError(f"grad_norm supports p in {{1, 2, inf}}, got {p}")
    x1, w1 = gauss_rule_01(2)
    pts = np.array(list(product(x1, repeat=d)))
    wts = np.prod(np.array(list(product(w1, repeat=d))), axis=1)
    g = _cell_gradients(corners, pts)  # (C, Q, d, d)
    mag2 = np.sum(g * g, axis=(2, 3))  # (C, Q)
    if p == 2:
        return float(np.sqrt(np.sum(mag2 @ wts)))
    return float(np.sum(np.sqrt(mag2) @ wts))
