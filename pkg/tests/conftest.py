"""Shared factories for the test suite.

Every helper builds small, desk-scale objects; heavyweight sweeps live in
the module tests that need them and reuse session-scoped fixtures there.
"""

from __future__ import annotations

import numpy as np
import pytest

from latcb.potentials import (
    EAMPotential,
    ExpProfile,
    HarmonicChain,
    MorseProfile,
    PairPotential,
    PolynomialEmbedding,
    lennard_jones,
)
from latcb.lattice import DisplacementField, LatticeSpec, StencilSet


def lj_chain(r_cut: float = 3.0, kappa: float = 0.25) -> PairPotential:
    """The 1D Lennard-Jones chain used throughout the experiments."""
    return PairPotential(
        d=1, A=np.eye(1), S=StencilSet.ball(1, r_cut), kappa=kappa, phi=lennard_jones()
    )


def lj_square(r_cut: float = 2.0, kappa: float = 0.25) -> PairPotential:
    """A 2D square-lattice Lennard-Jones crystal (second-neighbour range)."""
    return PairPotential(
        d=2, A=np.eye(2), S=StencilSet.ball(2, r_cut), kappa=kappa, phi=lennard_jones()
    )


def morse_chain(kappa: float = 0.25) -> PairPotential:
    return PairPotential(
        d=1, A=np.eye(1), S=StencilSet.ball(1, 2.0), kappa=kappa, phi=MorseProfile()
    )


def eam_chain(kappa: float = 0.25) -> EAMPotential:
    """EAM chain with a genuinely nonlinear embedding (rank-one cross blocks)."""
    return EAMPotential(
        d=1,
        A=np.eye(1),
        S=StencilSet.ball(1, 2.0),
        kappa=kappa,
        phi=MorseProfile(),
        psi=ExpProfile(),
        embed=PolynomialEmbedding((0.0, 1.0, 0.3, -0.05)),
    )


def eam_square(kappa: float = 0.25) -> EAMPotential:
    return EAMPotential(
        d=2,
        A=np.eye(2),
        S=StencilSet.ball(2, 1.5),
        kappa=kappa,
        phi=MorseProfile(),
        psi=ExpProfile(),
        embed=PolynomialEmbedding((0.0, 1.0, 0.2)),
    )


def random_displacement(
    lattice: LatticeSpec, rng: np.random.Generator, scale: float = 0.02
) -> DisplacementField:
    """Small random periodic displacement (safely admissible for kappa=0.25)."""
    vals = scale * rng.standard_normal((lattice.N,) * lattice.d + (lattice.d,))
    return DisplacementField(lattice, vals)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)
