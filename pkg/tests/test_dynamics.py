"""Lattice dynamics, the Cauchy-Born wave solver, and their shadowing error.

Harmonic chains make every oracle exact: plane waves oscillate at the
symbol frequency, arbitrary data evolves by FFT, and the continuum wave is
d'Alembert.  The nonlinear pieces are covered through abort behaviour and
the sweep anchors.
"""

from __future__ import annotations

import numpy as np
import pytest

from latcb.dynamics import (
    InitialData,
    dynamic_error_sweep,
    instability_demo,
    integrate_atomistic,
    make_initial_data,
    solve_cb_wave,
)
from latcb.fields import TrigField
from latcb.interpolation import zeta_convolve
from latcb.lattice import DisplacementField, LatticeSpec
from latcb.potentials import HarmonicChain
from latcb.stability import dynamical_symbol
from latcb.static import SolverError
from latcb.stress import CBModel

from conftest import lj_chain

AMP = 0.05 / (2.0 * np.pi)  # unit-torus sin amplitude with gradient sup 0.05

# harmonic sweep anchors: T=0.5, eps {1/16, 1/32, 1/64}, n_snap=9, n_grid=64
HARMONIC_SWEEP_ERRORS = [1.848009080e-03, 4.674223186e-04, 1.159165649e-04]


def _chain():
    return HarmonicChain.build(a1=2.0, a2=-0.25)


def _sin_field(amp=AMP):
    return TrigField.from_terms(1, 1, [((1,), 0, "sin", amp)])


def _zero_field():
    return TrigField.from_terms(1, 1, [((1,), 0, "sin", 0.0)])


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def test_make_initial_data_scaling():
    data = InitialData(_sin_field(), TrigField.from_terms(1, 1, [((1,), 0, "cos", 0.03)]))
    assert data.grad_sup() == pytest.approx(0.05, rel=1e-6)
    eps = 1.0 / 8.0
    u0, v0 = make_initial_data(data, eps)
    assert u0.values.shape == (8, 1) and v0.values.shape == (8, 1)
    lattice = LatticeSpec(d=1, A=np.eye(1), N=8)
    sites = lattice.site_coords().astype(float)
    # velocities are order one: smeared samples of U1(eps x), no eps factor
    expect_v = zeta_convolve(lambda x: data.U1.value(np.asarray(x) * eps), sites,
                             n_components=1)
    np.testing.assert_allclose(v0.values, expect_v.reshape(8, 1), atol=1e-14)
    expect_u = zeta_convolve(lambda x: data.U0.value(np.asarray(x) * eps) / eps, sites,
                             n_components=1)
    np.testing.assert_allclose(u0.values, expect_u.reshape(8, 1), atol=1e-12)


def test_initial_data_shape_mismatch():
    with pytest.raises(ValueError):
        InitialData(_sin_field(), TrigField.from_terms(2, 2, [((1, 0), 0, "sin", 0.1)]))


# ---------------------------------------------------------------------------
# atomistic integrator against exact harmonic evolution
# ---------------------------------------------------------------------------

def test_plane_wave_oscillates_at_symbol_frequency():
    P = _chain()
    N, j, A = 16, 3, 0.01
    lattice = LatticeSpec(d=1, A=np.eye(1), N=N)
    xi = np.arange(N)
    mode = np.cos(2.0 * np.pi * j * xi / N).reshape(N, 1)
    u0 = DisplacementField(lattice, A * mode)
    k = 2.0 * np.pi * j / N
    omega = float(np.sqrt(np.real(dynamical_symbol(P, np.array([k]))[0, 0])))
    snap = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    traj = integrate_atomistic(P, u0, DisplacementField.zeros(lattice), snap,
                               dt_target=1e-3)
    for t, uj, vj in zip(traj.times[1:], traj.u[1:], traj.v[1:]):
        np.testing.assert_allclose(uj, A * np.cos(omega * t) * mode, atol=5e-8)
        np.testing.assert_allclose(vj, -A * omega * np.sin(omega * t) * mode, atol=1e-7)
    assert traj.displacement(0).values == pytest.approx(u0.values)
    assert np.max(np.abs(np.diff(traj.energies))) < 1e-7


def test_verlet_is_second_order_against_fft_oracle(rng):
    P = _chain()
    N, T = 16, 1.0
    lattice = LatticeSpec(d=1, A=np.eye(1), N=N)
    u0 = rng.normal(0.0, 0.01, (N, 1))
    u0 -= u0.mean()
    k = 2.0 * np.pi * np.arange(N) / N
    omega = np.sqrt(np.maximum(np.real(dynamical_symbol(P, k[:, None])[:, 0, 0]), 0.0))
    u_exact = np.real(np.fft.ifft(np.cos(omega * T) * np.fft.fft(u0[:, 0])))
    errs = {}
    for dt in (1.0 / 100.0, 1.0 / 200.0):
        traj = integrate_atomistic(P, DisplacementField(lattice, u0),
                                   DisplacementField.zeros(lattice), [T], dt_target=dt)
        errs[dt] = float(np.max(np.abs(traj.u[-1][:, 0] - u_exact)))
    assert errs[1.0 / 100.0] / errs[1.0 / 200.0] == pytest.approx(4.0, rel=0.1)


def test_energy_drift_is_second_order(rng):
    P = _chain()
    N = 16
    lattice = LatticeSpec(d=1, A=np.eye(1), N=N)
    u0 = rng.normal(0.0, 0.01, (N, 1))
    u0 -= u0.mean()
    snap = np.linspace(0.1, 1.0, 10)
    drift = {}
    for dt in (1.0 / 100.0, 1.0 / 200.0):
        traj = integrate_atomistic(P, DisplacementField(lattice, u0),
                                   DisplacementField.zeros(lattice), snap, dt_target=dt)
        drift[dt] = float(np.max(np.abs(traj.energies - traj.energies[0])))
    assert drift[1.0 / 100.0] / drift[1.0 / 200.0] == pytest.approx(4.0, rel=0.15)


def test_verlet_time_reversibility(rng):
    P = lj_chain()
    N = 8
    lattice = LatticeSpec(d=1, A=np.eye(1), N=N)
    u0 = rng.normal(0.0, 0.01, (N, 1))
    v0 = rng.normal(0.0, 0.01, (N, 1))
    fwd = integrate_atomistic(P, DisplacementField(lattice, u0),
                              DisplacementField(lattice, v0), [1.0], dt_target=0.01)
    back = integrate_atomistic(P, DisplacementField(lattice, fwd.u[-1]),
                               DisplacementField(lattice, -fwd.v[-1]), [1.0],
                               dt_target=0.01)
    np.testing.assert_allclose(back.u[-1], u0, atol=1e-10)
    np.testing.assert_allclose(-back.v[-1], v0, atol=1e-10)


def test_integrator_validation_and_abort():
    lattice = LatticeSpec(d=1, A=np.eye(1), N=8)
    zero = DisplacementField.zeros(lattice)
    with pytest.raises(ValueError):
        integrate_atomistic(lj_chain(), zero, zero, [1.0, 0.5])
    kick = DisplacementField(lattice, 5.0 * (-1.0) ** np.arange(8).reshape(8, 1))
    with pytest.raises(SolverError, match=r"admissible region at t="):
        integrate_atomistic(lj_chain(), zero, kick, [1.0])


# ---------------------------------------------------------------------------
# continuum wave solver
# ---------------------------------------------------------------------------

def test_cb_wave_dalembert_standing_wave():
    # gamma = 1: U_tt = U_XX, so sin data stands and returns after one period
    M = CBModel(_chain())
    data = InitialData(_sin_field(), _zero_field())
    snap = np.array([0.0, 0.25, 0.5, 1.0])
    cb = solve_cb_wave(M, data, snap)
    assert cb.diagnostics["initial_speed"] == pytest.approx(1.0, rel=1e-12)
    X = (np.arange(64) / 64.0)[:, None]
    for t, Uj, Vj in zip(cb.times, cb.U, cb.V):
        expect = AMP * np.sin(2.0 * np.pi * X[:, 0]) * np.cos(2.0 * np.pi * t)
        np.testing.assert_allclose(Uj.value(X)[:, 0], expect, atol=1e-6)
        expect_v = -AMP * 2.0 * np.pi * np.sin(2.0 * np.pi * X[:, 0]) * np.sin(2.0 * np.pi * t)
        np.testing.assert_allclose(Vj.value(X)[:, 0], expect_v, atol=5e-6)
    assert np.max(np.abs(cb.energies - cb.energies[0])) < 1e-7


def test_cb_wave_aborts():
    M = CBModel(lj_chain())
    # gradient 0.12 sits beyond the hyperbolicity threshold (about 0.105)
    steep = TrigField.from_terms(1, 1, [((1,), 0, "sin", 0.12 / (2.0 * np.pi))])
    with pytest.raises(SolverError, match=r"hyperbolicity .* at T="):
        solve_cb_wave(M, InitialData(steep, _zero_field()), [0.5])
    # a tight admissibility radius trips before the modulus does
    M2 = CBModel(lj_chain(kappa=0.05))
    mid = TrigField.from_terms(1, 1, [((1,), 0, "sin", 0.07 / (2.0 * np.pi))])
    with pytest.raises(SolverError, match=r"admissible region at T="):
        solve_cb_wave(M2, InitialData(mid, _zero_field()), [0.5])


# ---------------------------------------------------------------------------
# shadowing sweep (harmonic anchors)
# ---------------------------------------------------------------------------

def test_dynamic_sweep_harmonic():
    sweep = dynamic_error_sweep(
        _chain(),
        InitialData(_sin_field(), _zero_field()),
        T=0.5,
        eps_list=[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        n_snap=9,
        n_grid=64,
        hessian_diagnostic=True,
    )
    np.testing.assert_allclose(sweep["errors"], HARMONIC_SWEEP_ERRORS, rtol=1e-6)
    slope = np.polyfit(np.log(sweep["eps"]), np.log(sweep["errors"]), 1)[0]
    assert 1.7 <= slope <= 2.3
    assert sweep["half_dt"]["rel_change"] < 0.1
    assert sweep["cb_energy_drift"] < 1e-6
    for m in sweep["details"]:
        assert len(m["per_snapshot"]) == 9
        assert m["error"] == pytest.approx(max(m["per_snapshot"]))
        assert len(m["hessian_energy"]) == 9
        assert all(h >= 0.0 for h in m["hessian_energy"])
        assert m["energy_drift"] < 1e-5


# ---------------------------------------------------------------------------
# instability demonstration
# ---------------------------------------------------------------------------

def test_instability_demo_quick():
    demo = instability_demo(1.0 / 16.0)
    eps2 = (1.0 / 16.0) ** 2
    assert demo["window"][0] == 1.0
    assert demo["window"][1] == pytest.approx(3.0 * np.log(16.0), rel=1e-12)
    assert demo["min_growth_ratio"] > 1.0
    # stable chain and long-wave probe conserve the kick size exactly
    assert demo["stable_max_norm"] <= demo["stable_bound"] == 2.0 * eps2
    assert demo["stable_max_norm"] == pytest.approx(eps2, rel=1e-10)
    assert demo["smooth_max_norm"] <= 2.0 * eps2
    assert demo["cb_max_amplitude"] == 0.0
    assert len(demo["times"]) == len(demo["velocity_norms"])


def test_instability_demo_requires_even_reciprocal():
    with pytest.raises(ValueError):
        instability_demo(1.0 / 15.0)
