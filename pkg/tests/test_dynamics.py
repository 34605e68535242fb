"""Spinor dynamics: exact SU(2) stepping, fidelity tracking, charge.

The stepper applies exp(-i u.sigma dt) exactly per step, so the only
error is the midpoint sampling of the drive (second order).  Frozen
fidelity and charge values were measured on the default Rice-Mele
cycle at the stated step counts and rechecked at doubled resolution.
"""

import numpy as np
import pytest

from cdpump.bloch import BlochField, pauli_contract, transitionless_bloch_field
from cdpump.dynamics import (
    EvolutionResult,
    PropagationError,
    dynamical_pumped_charge,
    evolve_spinor,
    instantaneous_ground_state,
    su2_step,
)
from cdpump.protocols import rm_bloch_field


def test_ground_state_eigen_equation():
    rng = np.random.default_rng(31)
    for _ in range(25):
        R = rng.normal(scale=1.5, size=3)
        if np.linalg.norm(R) < 0.1:
            continue
        psi = instantaneous_ground_state(R)
        assert abs(np.vdot(psi, psi) - 1.0) < 1e-13
        H = pauli_contract(R)
        r = np.linalg.norm(R)
        assert np.max(np.abs(H @ psi + r * psi)) < 1e-12
    with pytest.raises(ValueError):
        instantaneous_ground_state(np.zeros(3))


def test_su2_step_unitary_and_exact():
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.normal(scale=2.0, size=3)
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        dt = 0.23
        out = su2_step(psi, u, dt)
        assert abs(np.vdot(out, out) - 1.0) < 1e-13
        # compare against the eigendecomposition of u.sigma
        H = pauli_contract(u)
        evals, vecs = np.linalg.eigh(H)
        expm = (vecs * np.exp(-1j * evals * dt)) @ vecs.conj().T
        assert np.max(np.abs(out - expm @ psi)) < 1e-13


def test_evolve_spinor_tracks_ground_state():
    # frozen: max infidelity 5.6e-12 at k = 1, 2000 steps under the
    # transitionless drive of the default cycle
    rm = rm_bloch_field()
    k = 1.0
    psi0 = instantaneous_ground_state(np.asarray(rm(k, 0.0), dtype=float))
    res = evolve_spinor(transitionless_bloch_field(rm), k, psi0, 2000, rfield=rm)
    assert isinstance(res, EvolutionResult)
    assert res.max_infidelity < 1e-10
    assert abs(np.vdot(res.psi[-1], res.psi[-1]) - 1.0) < 1e-12
    assert res.times[0] == 0.0
    assert res.times[-1] == pytest.approx(rm.T)


def test_evolve_spinor_record_stride():
    rm = rm_bloch_field()
    psi0 = instantaneous_ground_state(np.asarray(rm(0.5, 0.0), dtype=float))
    res = evolve_spinor(transitionless_bloch_field(rm), 0.5, psi0, 100, rfield=rm, record_stride=10)
    assert res.times.size == 11
    assert res.psi.shape == (11, 2)


def test_dynamical_charge_with_and_without_cd():
    # frozen at nk = 16, 800 steps: Q = 0.999887 with the transitionless
    # drive and Q = 1.377663 without it (bare drive is far from adiabatic
    # at omega = 0.5)
    rm = rm_bloch_field()
    with_cd = dynamical_pumped_charge(rm, nk=16, steps=800, with_cd=True)
    assert with_cd.charge[-1] == pytest.approx(1.0, abs=5e-3)
    assert with_cd.max_infidelity < 1e-6
    bare = dynamical_pumped_charge(rm, nk=16, steps=800, with_cd=False)
    assert abs(bare.charge[-1] - 1.0) > 0.05
    assert bare.max_infidelity > 1e-3


def test_dynamical_charge_converges_quadratically():
    rm = rm_bloch_field()
    q1 = dynamical_pumped_charge(rm, nk=12, steps=400).charge[-1]
    q2 = dynamical_pumped_charge(rm, nk=12, steps=800).charge[-1]
    # both already at the quantized value within discretization error
    assert abs(q1 - 1.0) < 2e-2
    assert abs(q2 - 1.0) < 1e-2


def test_propagation_error_on_nonfinite_drive():
    def bad(k, t):
        sh = np.broadcast(np.asarray(k, dtype=float), np.asarray(t, dtype=float)).shape
        return np.full(sh + (3,), np.nan)

    f = BlochField(bad, a=1.0, T=1.0, name="nan")
    with pytest.raises(PropagationError):
        evolve_spinor(f, 1.0, np.array([1.0, 0.0], dtype=complex), 5)


def test_evolve_requires_positive_steps():
    rm = rm_bloch_field()
    with pytest.raises(ValueError):
        evolve_spinor(rm, 1.0, np.array([1.0, 0.0], dtype=complex), 0)
