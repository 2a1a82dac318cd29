"""Band-limited periodic fields on the unit torus and their scaled views.

Continuum data (macroscopic displacements, forces, wave snapshots) are
represented as finite trigonometric sums

    U(X) = Re sum_k a_k exp(2 pi i m_k . X),

which gives exact derivatives of any order and exact Sobolev norms, so the
convergence experiments are not polluted by an extra discretization layer.
``ScaledDisplacement`` exposes the microscopic view
``u(x) = eps^-1 U(eps x)`` consumed by the lattice-side machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TrigField", "ScaledDisplacement"]

_TWO_PI = 2.0 * np.pi


def _canonical(modes: np.ndarray, amps: np.ndarray):
    """Fold modes into a half-space and merge duplicates.

    With the Re convention, a term at ``-m`` equals a term at ``m`` with
    conjugated amplitude; canonicalizing makes norms and evaluations
    unambiguous.
    """
    folded: dict[tuple, np.ndarray] = {}
    for m, a in zip(modes, amps):
        m = tuple(int(v) for v in m)
        a = np.asarray(a, dtype=complex)
        nz = next((v for v in m if v != 0), 0)
        if nz < 0:
            m = tuple(-v for v in m)
            a = np.conj(a)
        if m in folded:
            folded[m] = folded[m] + a
        else:
            folded[m] = a
    m_list = sorted(folded)
    M = np.array(m_list, dtype=int).reshape(len(m_list), -1)
    A = np.array([folded[m] for m in m_list], dtype=complex)
    zero = ~M.any(axis=1)
    if zero.any():
        A[zero] = A[zero].real  # the constant term must be real
    return M, A


@dataclass
class TrigField:
    """Real trigonometric polynomial on the unit torus.

    Attributes
    ----------
    d : torus dimension.
    modes : (K, d) integer array (one representative per +-m pair).
    amps : (K, m) complex amplitudes; the field value is
        ``Re sum_k amps[k] exp(2 pi i modes[k] . X)``.
    """

    d: int
    modes: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=int).reshape(-1, self.d)
        self.amps = np.atleast_2d(np.asarray(self.amps, dtype=complex))
        if self.amps.shape[0] != self.modes.shape[0]:
            raise ValueError("modes and amps must align")
        self.modes, self.amps = _canonical(self.modes, self.amps)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_terms(cls, d: int, n_components: int, terms) -> "TrigField":
        """Build from (mode, component, 'sin'|'cos', amplitude) tuples."""
        modes, amps = [], []
        for mode, comp, kind, amp in terms:
            a = np.zeros(n_components, dtype=complex)
            a[comp] = {"cos": amp, "sin": -1j * amp}[kind]
            modes.append(tuple(mode) if np.ndim(mode) else (mode,))
            amps.append(a)
        return cls(d=d, modes=np.array(modes), amps=np.array(amps))

    @classmethod
    def from_grid_1d(cls, values: np.ndarray) -> "TrigField":
        """Exact trigonometric interpolant of equispaced 1D samples.

        ``values`` has shape (M,) or (M, m); sample j sits at X = j / M.
        """
        v = np.atleast_2d(values.T).T  # (M, m)
        M = v.shape[0]
        spec = np.fft.rfft(v, axis=0) / M
        modes = np.arange(spec.shape[0])
        amps = spec.copy()
        amps[1:] *= 2.0
        if M % 2 == 0:
            amps[-1] *= 0.5  # Nyquist mode is its own reflection
        return cls(d=1, modes=modes.reshape(-1, 1), amps=amps)

    @property
    def n_components(self) -> int:
        return self.amps.shape[1]

    # -- evaluation ---------------------------------------------------------

    def eval(self, X, deriv: tuple | None = None) -> np.ndarray:
        """Evaluate a mixed partial derivative at points of shape (..., d).

        ``deriv`` gives the derivative order per axis (default: none).
        Returns an array of shape (..., n_components).
        """
        X = np.asarray(X, dtype=float)
        squeeze = X.ndim == 1
        pts = np.atleast_2d(X)
        phase = pts @ self.modes.T  # (..., K)
        E = np.exp(_TWO_PI * 1j * phase)
        coeff = self.amps
        if deriv is not None:
            fac = np.ones(self.modes.shape[0], dtype=complex)
            for axis, order in enumerate(deriv):
                if order:
                    fac = fac * (_TWO_PI * 1j * self.modes[:, axis]) ** order
            coeff = coeff * fac[:, None]
        out = np.real(E @ coeff)
        return out[0] if squeeze else out.reshape(X.shape[:-1] + (self.n_components,))

    def value(self, X) -> np.ndarray:
        return self.eval(X)

    def grad(self, X) -> np.ndarray:
        """Gradient, shape (..., m, d)."""
        X = np.asarray(X, dtype=float)
        cols = []
        for axis in range(self.d):
            order = tuple(1 if a == axis else 0 for a in range(self.d))
            cols.append(self.eval(X, deriv=order))
        return np.stack(cols, axis=-1)

    def hess(self, X) -> np.ndarray:
        """Second derivatives, shape (..., m, d, d)."""
        X = np.asarray(X, dtype=float)
        m = self.n_components
        out = np.empty(np.shape(X)[:-1] + (m, self.d, self.d))
        for a in range(self.d):
            for b in range(a, self.d):
                order = tuple((1 if c == a else 0) + (1 if c == b else 0) for c in range(self.d))
                val = self.eval(X, deriv=order)
                out[..., :, a, b] = val
                out[..., :, b, a] = val
        return out

    # -- norms --------------------------------------------------------------

    def sobolev_norm(self, s: float) -> float:
        """Homogeneous Sobolev norm (sum over components).

        ||U||_{H^s}^2 = sum_k' |a_k|^2 (2 pi |m_k|)^{2s} / 2 with the
        constant mode contributing only for s = 0.  Negative ``s`` requires
        a mean-zero field.
        """
        nz = self.modes.any(axis=1)
        mags = np.sum(np.abs(self.amps) ** 2, axis=1)
        knorm = _TWO_PI * np.linalg.norm(self.modes, axis=1)
        total = 0.5 * np.sum(mags[nz] * knorm[nz] ** (2.0 * s))
        if (~nz).any():
            a0 = np.sum(np.real(self.amps[~nz]) ** 2)
            if s == 0:
                total += a0
            elif a0 > 1e-300 and s < 0:
                raise ValueError("negative-order norm of a field with nonzero mean")
        return float(np.sqrt(total))

    def mean(self) -> np.ndarray:
        nz = self.modes.any(axis=1)
        if (~nz).any():
            return np.real(self.amps[~nz][0])
        return np.zeros(self.n_components)

    def scale(self, c: float) -> "TrigField":
        return TrigField(self.d, self.modes.copy(), self.amps * c)


@dataclass
class ScaledDisplacement:
    """Microscopic view u(x) = eps^-1 U(eps x) of a macroscopic field.

    The view is periodic over the micro supercell of period 1/eps and
    provides values and derivatives in micro coordinates:
    grad u(x) = (grad U)(eps x), hess u(x) = eps (hess U)(eps x).
    """

    U: TrigField
    eps: float

    def __post_init__(self):
        N = 1.0 / self.eps
        if abs(N - round(N)) > 1e-9:
            raise ValueError("1/eps must be an integer supercell period")

    @property
    def N(self) -> int:
        return int(round(1.0 / self.eps))

    def value(self, x) -> np.ndarray:
        return self.U.value(np.asarray(x, float) * self.eps) / self.eps

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def grad(self, x) -> np.ndarray:
        return self.U.grad(np.asarray(x, float) * self.eps)

    def hess(self, x) -> np.ndarray:
        return self.U.hess(np.asarray(x, float) * self.eps) * self.eps

    def lattice_restriction(self, lattice_N: int | None = None) -> np.ndarray:
        """Values at integer sites, shape (N,)*d + (m,)."""
        N = lattice_N if lattice_N is not None else self.N
        axes = [np.arange(N, dtype=float)] * self.U.d
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=-1)
        vals = self.value(pts)
        return vals.reshape((N,) * self.U.d + (self.U.n_components,))
