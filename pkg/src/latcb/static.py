"""Static equilibria: continuum and atomistic solvers plus the error sweep.

The experiment follows the two-scale setup: a smooth macroscopic dead load
``F`` on the unit torus is scaled to the lattice as ``f(x) = eps F(eps x)``
and transferred to sites by convolution with the hat basis, which preserves
the discrete/continuum duality pairing.  The Cauchy-Born equilibrium is
solved once per load (it is scale-free); the atomistic equilibrium is
solved per lattice spacing with a Newton-Krylov iteration preconditioned by
the reference dynamical symbol.  The reported error is the scaled L2 norm
of the gradient gap between the continuum solution and the smoothed
interpolant of the atomistic one, the quantity that converges at second
order in the spacing for stable potentials and small loads.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .fields import ScaledDisplacement, TrigField
from .interpolation import quasi_grad, quasi_interp, smooth_nodal_interp, zeta_convolve
from .lattice import DisplacementField, LatticeSpec, gauss_rule_01
from .potentials import (
    AdmissibilityError,
    Potential,
    gradient_array,
    hessian_operator,
    total_energy,
)
from .stability import dynamical_symbol
from .stress import CBModel

__all__ = [
    "SolverError",
    "MacroForce",
    "ScaledForce",
    "StaticSolution",
    "make_forces",
    "solve_cb_static",
    "solve_atomistic_static",
    "interp_gradient_gap",
    "interp_value_gap",
    "static_error",
    "static_converge_sweep",
]


class SolverError(RuntimeError):
    """Raised when an iteration fails to reach its tolerance or leaves
    the admissible region."""


# ---------------------------------------------------------------------------
# loads
# ---------------------------------------------------------------------------

@dataclass
class MacroForce:
    """Macroscopic dead load on the unit torus with its size functional.

    ``delta = ||F||_{W^{-1,2}} + ||grad F||_{L^2}`` controls solvability of
    the nonlinear problems; loads must have zero mean per component for the
    negative-order norm (and the equilibria) to exist.
    """

    field: TrigField

    def __post_init__(self):
        if float(np.max(np.abs(self.field.mean()))) > 1e-12:
            raise ValueError("macroscopic loads must have zero mean per component")

    @property
    def delta(self) -> float:
        return self.field.sobolev_norm(-1.0) + self.field.sobolev_norm(1.0)

    @classmethod
    def single_mode(cls, delta: float, mode: int = 1, d: int = 1,
                    component: int = 0, kind: str = "sin") -> "MacroForce":
        """Load c * sin(2 pi m X) (or cos) with amplitude tuned to the target delta."""
        if d != 1:
            raise NotImplementedError("single-mode loads are one-dimensional")
        km = 2.0 * math.pi * mode
        c = delta * math.sqrt(2.0) / (1.0 / km + km)
        f = TrigField.from_terms(d, 1, [((mode,), component, kind, c)])
        return cls(field=f)

    def scaled(self, factor: float) -> "MacroForce":
        return MacroForce(field=self.field.scale(factor))


@dataclass
class ScaledForce:
    """Microscopic view f(x) = eps F(eps x) of a macroscopic load."""

    F: TrigField
    eps: float

    def value(self, x) -> np.ndarray:
        return self.F.value(np.asarray(x, float) * self.eps) * self.eps

    def __call__(self, x) -> np.ndarray:
        return self.value(x)


def make_forces(F: MacroForce, eps: float, q: int = 8):
    """Scale a macroscopic load to the lattice.

    Returns the microscopic continuum force ``f(x) = eps F(eps x)`` and its
    site transfer ``f_a(xi) = (zeta * f)(xi)`` as a DisplacementField on the
    matching supercell.  The convolution reproduces constants exactly
    (the hat kernel integrates to one).
    """
    f_c = ScaledForce(F.field, eps)
    N = int(round(1.0 / eps))
    if abs(N * eps - 1.0) > 1e-9:
        raise ValueError("1/eps must be an integer number of lattice cells")
    d = F.field.d
    lattice = LatticeSpec(d=d, A=np.eye(d), N=N)
    sites = lattice.site_coords().astype(float)
    vals = zeta_convolve(f_c.value, sites, n_components=d, q=q)
    f_a = DisplacementField(lattice, vals.reshape((N,) * d + (d,)))
    return f_c, f_a


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------

@dataclass
class StaticSolution:
    """Equilibrium with solver provenance.

    ``field`` is a TrigField (continuum) or DisplacementField (lattice);
    ``residual`` is the final gradient norm re-evaluated from scratch.
    """

    kind: str
    field: object
    residual: float
    energy: float
    iterations: int
    merit_history: list = dc_field(default_factory=list)
    diagnostics: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# Cauchy-Born solver (1D, spectral grid + dense Newton)
# ---------------------------------------------------------------------------

def _spectral_derivative_matrix(M: int) -> np.ndarray:
    """Dense differentiation matrix of the trigonometric interpolant on M points."""
    k = 2.0 * np.pi * np.fft.rfftfreq(M, d=1.0 / M)
    eye = np.eye(M)
    spec = np.fft.rfft(eye, axis=0)
    return np.fft.irfft(1j * k[:, None] * spec, n=M, axis=0)


def solve_cb_static(
    M: CBModel,
    F: MacroForce,
    n_grid: int = 256,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> StaticSolution:
    """Cauchy-Born equilibrium on the unit torus (one dimension).

    Minimizes ``int W(U') - F U`` over zero-mean ``U`` on a trigonometric
    collocation grid: damped Newton with an exact dense Jacobian, rank-one
    gauge for the constant mode, and an Armijo line search on the energy.
    The solution is returned as a trigonometric polynomial; the residual
    ``-d/dX S(U') - F`` is measured in the grid L2 norm.
    """
    if M.P.d != 1:
        raise NotImplementedError("the continuum solver is one-dimensional")
    Mg = n_grid
    X = np.arange(Mg) / Mg
    Fv = F.field.value(X[:, None])[:, 0]
    D = _spectral_derivative_matrix(Mg)
    kappa = M.P.kappa

    def stress_of(up):
        return M.stress(up[:, None, None])[:, 0, 0]

    def modulus_of(up):
        return M.moduli(up[:, None, None])[:, 0, 0, 0, 0]

    def merit(U):
        up = D @ U
        return float(np.mean(M.energy_density(up[:, None, None]) - Fv * U))

    def residual(U):
        up = D @ U
        return -(D @ stress_of(up)) - Fv

    # linearized start: C0 U'' = -F in Fourier space
    C0 = float(M.moduli(np.zeros((1, 1, 1)))[0, 0, 0, 0, 0])
    k = 2.0 * np.pi * np.fft.rfftfreq(Mg, d=1.0 / Mg)
    Fh = np.fft.rfft(Fv)
    Uh = np.zeros_like(Fh)
    Uh[1:] = Fh[1:] / (C0 * k[1:] ** 2)
    U = np.fft.irfft(Uh, n=Mg)

    history = [merit(U)]
    res_hist = []
    it = 0
    # the spectral derivative annihilates the mean and (for even grids) the
    # Nyquist mode, so both are gauged out of the Newton system and stripped
    # from iterates; otherwise the linear solves leave junk in those modes
    gauge = np.full((Mg, Mg), 1.0 / Mg)
    if Mg % 2 == 0:
        alt = (-1.0) ** np.arange(Mg)
        gauge = gauge + np.outer(alt, alt) / Mg

    def strip_null(v):
        vh = np.fft.rfft(v)
        vh[0] = 0.0
        if Mg % 2 == 0:
            vh[-1] = 0.0
        return np.fft.irfft(vh, n=Mg)

    U = strip_null(U)
    for it in range(1, max_iter + 1):
        R = residual(U)
        rnorm = float(np.sqrt(np.mean(R * R)))
        res_hist.append(rnorm)
        if rnorm <= tol:
            break
        up = D @ U
        if float(np.max(np.abs(up))) >= kappa:
            raise SolverError(f"continuum gradient left the admissible region (iter {it})")
        J = -D @ (modulus_of(up)[:, None] * D) + gauge
        try:
            delta = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SolverError(f"Newton system singular at iteration {it}: {exc}")
        base = history[-1]
        slope = float(np.mean(R * delta))  # directional derivative of the merit
        # energy differences cancel in floating point once the true decrease
        # drops below the roundoff of the per-point densities; the floor keeps
        # the Armijo test meaningful, and a plain residual decrease accepts
        # steps in the quadratic phase
        floor = 64.0 * np.finfo(float).eps * (1.0 + abs(base))
        t = 1.0
        for _ in range(40):
            trial = U + t * delta
            try:
                mt = merit(trial)
                Rt = residual(trial)
                rt = float(np.sqrt(np.mean(Rt * Rt)))
            except AdmissibilityError:
                mt, rt = math.inf, math.inf
            if mt <= base + 1e-4 * t * slope + floor or rt <= (1.0 - 1e-4 * t) * rnorm:
                break
            t *= 0.5
        else:
            raise SolverError("line search failed in the continuum solver")
        U = strip_null(trial)
        history.append(merit(U))
    else:
        raise SolverError(
            f"continuum Newton did not reach tol={tol:g} in {max_iter} iterations "
            f"(last residual {res_hist[-1]:.3e})"
        )

    R = residual(U)
    rnorm = float(np.sqrt(np.mean(R * R)))
    up = D @ U
    field = TrigField.from_grid_1d(U[:, None])
    return StaticSolution(
        kind="cb",
        field=field,
        residual=rnorm,
        energy=float(np.mean(M.energy_density(up[:, None, None]))),
        iterations=it,
        merit_history=history,
        diagnostics={
            "residual_history": res_hist,
            "grad_inf": float(np.max(np.abs(up))),
            "n_grid": Mg,
        },
    )


# ---------------------------------------------------------------------------
# atomistic solver (Newton-Krylov with symbol preconditioner)
# ---------------------------------------------------------------------------

def _symbol_preconditioner(P: Potential, N: int):
    """FFT inverse of the reference dynamical symbol (gauge mode -> identity)."""
    if P.d != 1:
        raise NotImplementedError
    k = 2.0 * np.pi * np.arange(N) / N
    sym = np.real(dynamical_symbol(P, k[:, None])[:, 0, 0])
    sym[0] = 1.0
    sym = np.maximum(sym, 1e-8)

    def apply(v_flat: np.ndarray) -> np.ndarray:
        vh = np.fft.fft(v_flat)
        return np.real(np.fft.ifft(vh / sym))

    return apply


def solve_atomistic_static(
    P: Potential,
    f_a: DisplacementField,
    u0: DisplacementField | None = None,
    tol: float = 1e-10,
    max_iter: int = 40,
    cg_rtol: float = 1e-12,
) -> StaticSolution:
    """Atomistic equilibrium under dead site loads (one dimension).

    Newton-Krylov on zero-mean displacements: the Hessian action is
    matrix-free, inner systems are solved by conjugate gradients with an
    FFT preconditioner built from the reference symbol, and steps are
    damped by an Armijo search on ``E(u) - <f, u>``.  Convergence is
    declared on the sup norm of the assembled gradient.
    """
    lattice = f_a.lattice
    if lattice.d != 1:
        raise NotImplementedError("the lattice solver is one-dimensional")
    N = lattice.N
    fv = f_a.values
    if abs(float(np.sum(fv))) > 1e-8 * max(1.0, float(np.max(np.abs(fv)))):
        raise ValueError("site loads must sum to zero for a periodic equilibrium")
    u = (u0.values.copy() if u0 is not None else np.zeros_like(fv))
    u -= np.mean(u)
    precond = _symbol_preconditioner(P, N)

    def merit(vals):
        return total_energy(P, DisplacementField(lattice, vals)) - float(np.sum(fv * vals))

    def safe_merit(vals):
        # inadmissible trial steps are treated as infinitely bad and backtracked
        try:
            return merit(vals)
        except AdmissibilityError:
            return math.inf

    def grad(vals):
        return gradient_array(P, vals) - fv

    history = [merit(u)]
    res_hist = []
    cg_iters = []
    it = 0
    for it in range(1, max_iter + 1):
        G = grad(u)
        gnorm = float(np.max(np.abs(G)))
        res_hist.append(gnorm)
        if gnorm <= tol:
            break
        H = hessian_operator(P, u)

        def matvec(v_flat):
            v = v_flat.reshape(fv.shape)
            return (H(v) + np.mean(v_flat)).ravel()

        count = {"n": 0}

        def tick(_):
            count["n"] += 1

        A = LinearOperator((N, N), matvec=matvec)
        Mpre = LinearOperator((N, N), matvec=precond)
        delta_flat, info = cg(
            A, -G.ravel(), rtol=cg_rtol, atol=0.0, maxiter=8 * N, M=Mpre, callback=tick
        )
        cg_iters.append(count["n"])
        if info != 0:
            raise SolverError(f"inner CG failed (info={info}) at Newton iteration {it}")
        delta = delta_flat.reshape(fv.shape)
        slope = float(np.sum(G * delta))
        base = history[-1]
        # same noise-aware acceptance as the continuum solver: the energy
        # merit saturates at roundoff for small loads, so a decrease of the
        # force residual also accepts the step
        floor = 64.0 * N * np.finfo(float).eps * (1.0 + abs(base))
        t = 1.0
        for _ in range(40):
            trial = u + t * delta
            try:
                gt = float(np.max(np.abs(grad(trial))))
            except AdmissibilityError:
                gt = math.inf
            if safe_merit(trial) <= base + 1e-4 * t * slope + floor or gt <= (
                1.0 - 1e-4 * t
            ) * gnorm:
                break
            t *= 0.5
        else:
            raise SolverError("line search failed in the lattice solver")
        u = trial - np.mean(trial)
        history.append(merit(u))
    else:
        raise SolverError(
            f"lattice Newton did not reach tol={tol:g} in {max_iter} iterations "
            f"(last gradient norm {res_hist[-1]:.3e})"
        )

    field = DisplacementField(lattice, u)
    final = float(np.max(np.abs(grad(u))))
    return StaticSolution(
        kind="atomistic",
        field=field,
        residual=final,
        energy=total_energy(P, field),
        iterations=it,
        merit_history=history,
        diagnostics={"residual_history": res_hist, "cg_iterations": cg_iters},
    )


# ---------------------------------------------------------------------------
# error metric
# ---------------------------------------------------------------------------

def _cell_gauss_points(N: int, d: int, q: int):
    x1, w1 = gauss_rule_01(q)
    from itertools import product as iproduct

    offs = np.array(list(iproduct(x1, repeat=d)))
    wts = np.prod(np.array(list(iproduct(w1, repeat=d))), axis=1)
    cells = np.array(list(iproduct(range(N), repeat=d)), dtype=float)
    pts = cells[:, None, :] + offs[None, :, :]
    return pts.reshape(-1, d), np.tile(wts, cells.shape[0])


def interp_gradient_gap(U: TrigField, u_a: DisplacementField, eps: float, q: int = 6) -> float:
    """Scaled L2 gap eps^{d/2} || grad u_c - grad I u_a ||_{L2(micro torus)}.

    ``I`` is the smoothed interpolant: the C^2 quasi-interpolant of the
    deconvolved lattice values, which matches ``u_a`` at every site.  The
    per-cell Gauss rule integrates the spline factors exactly; equals the
    macroscopic norm || grad U - (grad I u_a)(. / eps) ||_{L2(unit torus)}.
    """
    su = ScaledDisplacement(U, eps)
    w = smooth_nodal_interp(u_a)
    N, d = u_a.lattice.N, u_a.lattice.d
    pts, wts = _cell_gauss_points(N, d, q)
    diff = su.grad(pts) - quasi_grad(w, pts)
    val = float(np.sum(wts * np.sum(diff * diff, axis=(-2, -1))))
    return eps ** (d / 2.0) * math.sqrt(val)


def interp_value_gap(V: TrigField, v_a: DisplacementField, eps: float, q: int = 6) -> float:
    """Scaled L2 gap eps^{d/2} || v_c - I v_a ||_{L2(micro torus)}.

    ``v_c(x) = V(eps x)`` (order-one fields such as velocities).
    """
    w = smooth_nodal_interp(v_a)
    N, d = v_a.lattice.N, v_a.lattice.d
    pts, wts = _cell_gauss_points(N, d, q)
    diff = V.value(pts * eps) - quasi_interp(w, pts)
    val = float(np.sum(wts * np.sum(diff * diff, axis=-1)))
    return eps ** (d / 2.0) * math.sqrt(val)


def static_error(U_c: TrigField, u_a: DisplacementField, eps: float, q: int = 6) -> float:
    """Static convergence metric: the scaled gradient gap of the equilibria."""
    return interp_gradient_gap(U_c, u_a, eps, q=q)


# ---------------------------------------------------------------------------
# convergence sweep
# ---------------------------------------------------------------------------

def _quasi_sample(su: ScaledDisplacement, lattice: LatticeSpec, q: int = 8) -> DisplacementField:
    """Initial guess: lattice samples of zeta * u_c (the quasi-interpolant)."""
    sites = lattice.site_coords().astype(float)
    vals = zeta_convolve(su.value, sites, n_components=lattice.d, q=q)
    return DisplacementField(lattice, vals.reshape((lattice.N,) * lattice.d + (lattice.d,)))


def _static_member(payload) -> dict:
    """One sweep member (module-level so process pools can pickle it)."""
    P, U_c, F, eps, tol, q = payload
    f_c, f_a = make_forces(F, eps)
    su = ScaledDisplacement(U_c, eps)
    u0 = _quasi_sample(su, f_a.lattice)
    sol = solve_atomistic_static(P, f_a, u0=u0, tol=tol)
    err = static_error(U_c, sol.field, eps, q=q)
    return {
        "eps": float(eps),
        "error": float(err),
        "residual": sol.residual,
        "newton_iterations": sol.iterations,
    }


def static_converge_sweep(
    P: Potential,
    F: MacroForce,
    eps_list,
    n_grid: int = 256,
    tol: float = 1e-10,
    q: int = 6,
    halved: bool = True,
    workers: int = 1,
) -> dict:
    """Measure the static convergence rate over a spacing sweep.

    Solves the Cauchy-Born problem once per load, then for every spacing
    builds the transferred site load, solves the lattice equilibrium from
    the quasi-interpolated continuum start, and evaluates the scaled
    gradient gap.  With ``halved=True`` the whole sweep is repeated for the
    load scaled by one half, giving the linear-response check
    (errors should scale by about 0.5).
    """
    M = CBModel(P)
    runs = {}
    loads = {"full": F} if not halved else {"full": F, "half": F.scaled(0.5)}
    for tag, load in loads.items():
        cb = solve_cb_static(M, load, n_grid=n_grid, tol=min(tol, 1e-10))
        payloads = [(P, cb.field, load, eps, tol, q) for eps in eps_list]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                members = list(pool.map(_static_member, payloads))
        else:
            members = [_static_member(p) for p in payloads]
        runs[tag] = {"cb_residual": cb.residual, "members": members}

    out = {
        "eps": [float(e) for e in eps_list],
        "errors": [m["error"] for m in runs["full"]["members"]],
        "delta": F.delta,
        "details": runs,
    }
    if halved:
        out["errors_half"] = [m["error"] for m in runs["half"]["members"]]
        out["half_ratios"] = [
            h / f for h, f in zip(out["errors_half"], out["errors"])
        ]
    return out
