"""Lattice stability analysis via the dynamical symbol.

For a plane wave ``v(xi) = a exp(i k . xi)`` the energy Hessian at the
reference state acts through the Hermitian symbol

    H(k) = sum_{rho, sigma} V_{rho sigma}(0) (e^{ik.rho} - 1)(e^{-ik.sigma} - 1),

evaluated here in the cancellation-free factored form
``4 sin(k.rho/2) sin(k.sigma/2) e^{i(k.rho - k.sigma)/2}``.  The stability
constant is the infimum of the smallest symbol eigenvalue normalized by the
first-difference symbol ``sum_alpha 4 sin^2(k_alpha / 2)``; it bounds
Rayleigh quotients of the real-space Hessian with respect to the discrete
gradient norm, and its positivity is the sharp condition separating stable
lattices from ones with short-wavelength (typically zone-boundary)
instabilities.  In one dimension with nearest/next-nearest coupling all of
these objects have closed forms that the tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import optimize

from .lattice import DisplacementField, LatticeSpec
from .potentials import Potential, hessian_operator
from .stress import CBModel

__all__ = [
    "DispersionSpectrum",
    "dynamical_symbol",
    "difference_symbol",
    "dispersion_spectrum",
    "stability_constant",
    "max_frequency",
    "legendre_hadamard_min",
    "instability_eigenprobe",
    "nn_difference_gram",
]

_GOLDEN_FRAC = 0.6180339887498949  # fractional grid offset avoiding symmetry points


def _symbol_blocks(P: Potential) -> np.ndarray:
    """Hessian blocks V_{rho sigma}(0), shape (n, d, n, d)."""
    g0 = np.zeros((P.S.n, P.d))
    return P.site_hessian(g0)


def dynamical_symbol(P: Potential, k) -> np.ndarray:
    """Hermitian symbol H(k) of the reference Hessian, shape (..., d, d).

    ``k`` is a wave-vector batch of shape (..., d) (components in
    [-pi, pi] per axis, though any values are accepted by periodicity).
    H(0) = 0, H(-k) = conj(H(k)).
    """
    k = np.asarray(k, dtype=float)
    single = k.ndim == 1
    pts = k.reshape(-1, k.shape[-1])
    blocks = _symbol_blocks(P)
    theta = 0.5 * (pts @ P.S.directions.T.astype(float))  # (K, n)
    s = np.sin(theta)
    phase = np.exp(1j * theta)
    # factor_ab = 4 sin(theta_a) sin(theta_b) e^{i (theta_a - theta_b)}
    fa = 2.0 * s * phase  # (K, n)
    out = np.einsum("Ka,aibj,Kb->Kij", fa, blocks.astype(complex), np.conj(fa))
    return out[0] if single else out.reshape(k.shape[:-1] + out.shape[-2:])


def difference_symbol(k) -> np.ndarray:
    """Normalizer g(k) = sum_alpha 4 sin^2(k_alpha / 2) (first-difference symbol)."""
    k = np.asarray(k, dtype=float)
    return np.sum(4.0 * np.sin(0.5 * k) ** 2, axis=-1)


@dataclass
class DispersionSpectrum:
    """Symbol eigenvalues along a wave-vector sample.

    ``eigs`` are sorted ascending per row; ``ratios`` divide them by the
    first-difference normalizer (the stability-constant integrand).
    """

    k: np.ndarray
    eigs: np.ndarray
    normalizer: np.ndarray
    ratios: np.ndarray

    def to_rows(self) -> np.ndarray:
        return np.concatenate(
            [self.k, self.eigs, self.normalizer[:, None], self.ratios], axis=1
        )


def dispersion_spectrum(P: Potential, k_grid) -> DispersionSpectrum:
    """Eigen-decomposition of the dynamical symbol along a k sample."""
    k = np.atleast_2d(np.asarray(k_grid, dtype=float))
    H = dynamical_symbol(P, k)
    eigs = np.linalg.eigvalsh(H)
    g = difference_symbol(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(g[:, None] > 1e-300, eigs / g[:, None], np.nan)
    return DispersionSpectrum(k=k, eigs=eigs, normalizer=g, ratios=ratios)


def _min_ratio(P: Potential, k: np.ndarray) -> np.ndarray:
    """Smallest symbol eigenvalue over the normalizer, +inf where k ~ 0."""
    k = np.atleast_2d(k)
    H = dynamical_symbol(P, k)
    lam = np.linalg.eigvalsh(H)[..., 0]
    g = difference_symbol(k)
    out = np.full(lam.shape, np.inf)
    ok = g > 1e-13
    out[ok] = lam[ok] / g[ok]
    return out


def _tail_directions(d: int) -> np.ndarray:
    """Unit directions probing the k -> 0 limit (axes, diagonals, fans)."""
    if d == 1:
        return np.array([[1.0]])
    dirs = []
    if d == 2:
        for ang in np.linspace(0.0, np.pi, 33)[:-1]:
            dirs.append([np.cos(ang), np.sin(ang)])
    else:
        for v in product((-1.0, 0.0, 1.0), repeat=d):
            if any(v):
                dirs.append(np.array(v) / np.linalg.norm(v))
    return np.array(dirs)


def stability_constant(P: Potential, n_grid: int = 256) -> float:
    """Stability constant: inf over k != 0 of lambda_min(H(k)) / g(k).

    Sampling uses ``n_grid`` points per axis with a golden-ratio offset
    (no symmetry point of the zone is hit exactly), followed by a local
    smooth refinement around the grid minimizer and a logarithmic probe of
    the k -> 0 limit along a direction fan, where the ratio tends to the
    Legendre-Hadamard quotient.  Accuracy is well below 1e-6 for the
    closed-form chain examples.
    """
    d = P.d
    h = 2.0 * np.pi / n_grid
    axis = -np.pi + (np.arange(n_grid) + _GOLDEN_FRAC) * h
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    vals = _min_ratio(P, pts)
    best_idx = int(np.argmin(vals))
    best_k = pts[best_idx]
    best = float(vals[best_idx])

    # local refinement around the grid minimizer
    if d == 1:
        lo, hi = best_k[0] - h, best_k[0] + h
        res = optimize.minimize_scalar(
            lambda t: float(_min_ratio(P, np.array([[t]]))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = min(best, float(res.fun))
    else:
        res = optimize.minimize(
            lambda t: float(_min_ratio(P, t[None, :])[0]),
            best_k,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12},
        )
        best = min(best, float(res.fun))

    # k -> 0 probe: the ratio extends continuously with the LH limit
    dirs = _tail_directions(d)
    for t in np.logspace(-1, -6, 11):
        tail = _min_ratio(P, dirs * (2.0 * np.pi * t))
        best = min(best, float(np.min(tail)))
    return best


def max_frequency(P: Potential, n_grid: int = 512) -> float:
    """Spectral radius sqrt(max_k |lambda|(H(k))) (sets stable step sizes).

    For unstable potentials this also dominates the exponential growth
    rate sqrt(-lambda_min), so a CFL fraction of it is safe either way.
    """
    d = P.d
    axis = -np.pi + (np.arange(n_grid) + 0.5) * (2.0 * np.pi / n_grid)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    H = dynamical_symbol(P, pts)
    lam = np.linalg.eigvalsh(H)
    return float(np.sqrt(np.max(np.abs(lam))))


# ---------------------------------------------------------------------------
# Legendre-Hadamard constant of the continuum model
# ---------------------------------------------------------------------------

def _lh_value(C: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.einsum("ipjq,i,p,j,q->", C, a, b, a, b))


def legendre_hadamard_min(M: CBModel, F=None) -> float:
    """Minimum of (a x b) : C(F) : (a x b) over unit vectors a, b.

    In one dimension this is just the scalar modulus C(F).  In higher
    dimensions the rank-one cone is scanned with an angular grid and
    polished with a local search.
    """
    d = M.P.d
    if F is None:
        F = np.zeros((d, d))
    C = M.moduli(np.asarray(F, dtype=float))
    if d == 1:
        return float(C[0, 0, 0, 0])

    def unit(ang):
        if d == 2:
            return np.array([np.cos(ang[0]), np.sin(ang[0])])
        t, p = ang
        return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])

    n_ang = 1 if d == 2 else 2
    grid = np.linspace(0.0, np.pi, 48 if d == 2 else 12)
    best, best_ang = np.inf, None
    for ang_a in product(grid, repeat=n_ang):
        a = unit(ang_a)
        for ang_b in product(grid, repeat=n_ang):
            v = _lh_value(C, a, unit(ang_b))
            if v < best:
                best, best_ang = v, np.array(list(ang_a) + list(ang_b))

    res = optimize.minimize(
        lambda t: _lh_value(C, unit(t[:n_ang]), unit(t[n_ang:])),
        best_ang,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-13},
    )
    return min(float(best), float(res.fun))


# ---------------------------------------------------------------------------
# real-space probes
# ---------------------------------------------------------------------------

def nn_difference_gram(N: int) -> np.ndarray:
    """Gram matrix of the 1D first-difference form sum_xi (v(xi+1) - v(xi))^2."""
    B = 2.0 * np.eye(N)
    idx = np.arange(N)
    B[idx, (idx + 1) % N] -= 1.0
    B[idx, (idx - 1) % N] -= 1.0
    return B


def instability_eigenprobe(P: Potential, N: int) -> tuple[float, DisplacementField]:
    """Rayleigh quotient of the alternating-strain probe.

    The probe ``v(xi) = (-1)^xi / 2`` has unit alternating strain; its
    quotient <H v, v> / ||D v||^2 with respect to the first-difference norm
    equals the zone-boundary symbol ratio (= a1 for the harmonic chain) and
    is negative exactly when the chain supports the short-wavelength
    instability.  Requires an even supercell (the pattern must close up).
    """
    if P.d != 1:
        raise ValueError("the alternating probe is one-dimensional")
    if N % 2:
        raise ValueError("N must be even for the alternating pattern to be periodic")
    lattice = LatticeSpec(d=1, A=P.A, N=N)
    vals = (0.5 * (-1.0) ** np.arange(N)).reshape(N, 1)
    v = DisplacementField(lattice, vals)
    Hv = hessian_operator(P, np.zeros_like(vals))(vals)
    num = float(np.sum(vals * Hv))
    diff = np.roll(vals, -1, axis=0) - vals
    den = float(np.sum(diff * diff))
    return num / den, v
