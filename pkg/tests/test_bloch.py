"""Two-band Bloch layer: Pauli algebra, drive construction, field wrappers.

Checks the algebraic identities the rest of the package leans on: the
counter-diabatic drive u = R + (R x dR/dt)/|R|^2 satisfies u.Rhat = |R|,
the transitionless drive carries half the geometric term, and the
finite-difference time derivative of a BlochField matches a registered
analytic derivative without ever sampling outside [0, T].
"""

import numpy as np
import pytest

from cdpump.bloch import (
    GAP_EPS,
    PAULI,
    BlochField,
    GapClosureError,
    cd_bloch_field,
    cd_field,
    ground_projector,
    pauli_contract,
    transitionless_bloch_field,
    transitionless_drive,
)


def random_vectors(seed, n, scale=2.0, floor=0.2):
    """Seeded batch of 3-vectors bounded away from the origin."""
    rng = np.random.default_rng(seed)
    v = rng.normal(scale=scale, size=(n, 3))
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v * np.maximum(norm, floor) / norm


def test_pauli_algebra():
    # sigma_i sigma_j = delta_ij I + i eps_ijk sigma_k
    eye = np.eye(2)
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    for i in range(3):
        for j in range(3):
            prod = PAULI[i] @ PAULI[j]
            want = (i == j) * eye + 1j * sum(eps[i, j, k] * PAULI[k] for k in range(3))
            assert np.allclose(prod, want, atol=1e-15)


def test_pauli_contract_spectrum():
    vs = random_vectors(11, 40)
    mats = pauli_contract(vs)
    assert mats.shape == (40, 2, 2)
    for v, m in zip(vs, mats):
        assert np.allclose(m, m.conj().T, atol=1e-14)
        assert abs(np.trace(m)) < 1e-14
        evals = np.sort(np.linalg.eigvalsh(m))
        r = np.linalg.norm(v)
        assert np.allclose(evals, [-r, r], atol=1e-12)


def test_cd_field_alignment_and_orthogonality():
    rng = np.random.default_rng(3)
    R = random_vectors(5, 60)
    dR = rng.normal(size=(60, 3))
    u = cd_field(R, dR)
    geom = u - R
    # geometric term is orthogonal to both R and dR/dt
    assert np.max(np.abs(np.sum(geom * R, axis=-1))) < 1e-12
    assert np.max(np.abs(np.sum(geom * dR, axis=-1))) < 1e-12
    # u.Rhat = |R|: the drive never tilts the instantaneous axis
    rn = np.linalg.norm(R, axis=-1)
    assert np.max(np.abs(np.sum(u * R, axis=-1) / rn - rn)) < 1e-12


def test_transitionless_drive_half_geometric_term():
    rng = np.random.default_rng(9)
    R = random_vectors(7, 30)
    dR = rng.normal(size=(30, 3))
    u = cd_field(R, dR)
    h = transitionless_drive(R, dR)
    assert np.allclose(h - R, 0.5 * (u - R), atol=1e-14)


def test_gap_guard_raises():
    tiny = np.array([0.0, 0.0, 0.1 * GAP_EPS])
    with pytest.raises(GapClosureError):
        cd_field(tiny, np.ones(3))
    with pytest.raises(GapClosureError):
        transitionless_drive(tiny, np.ones(3))
    with pytest.raises(GapClosureError):
        ground_projector(tiny)


def test_ground_projector_properties():
    R = random_vectors(21, 25)
    P = ground_projector(R)
    H = pauli_contract(R)
    for r, p, h in zip(R, P, H):
        assert np.allclose(p @ p, p, atol=1e-13)
        assert abs(np.trace(p) - 1.0) < 1e-13
        # projects onto the E = -|R| eigenspace
        assert np.allclose(h @ p, -np.linalg.norm(r) * p, atol=1e-12)


def _smooth_field(a=1.0, T=3.0):
    def func(k, t):
        k = np.asarray(k, dtype=float)
        t = np.asarray(t, dtype=float)
        sh = np.broadcast(k, t).shape
        out = np.empty(sh + (3,))
        out[..., 0] = 1.0 + 0.3 * np.cos(k * a) * np.sin(2.0 * np.pi * t / T)
        out[..., 1] = 0.4 * np.sin(k * a) * np.cos(2.0 * np.pi * t / T)
        out[..., 2] = 1.5 + 0.2 * np.sin(2.0 * np.pi * t / T)
        return out

    def dfunc(k, t):
        k = np.asarray(k, dtype=float)
        t = np.asarray(t, dtype=float)
        sh = np.broadcast(k, t).shape
        w = 2.0 * np.pi / T
        out = np.empty(sh + (3,))
        out[..., 0] = 0.3 * np.cos(k * a) * w * np.cos(w * t)
        out[..., 1] = -0.4 * np.sin(k * a) * w * np.sin(w * t)
        out[..., 2] = 0.2 * w * np.cos(w * t)
        return out

    return func, dfunc, a, T


def test_time_derivative_stencil_matches_analytic():
    func, dfunc, a, T = _smooth_field()
    numeric = BlochField(func, a=a, T=T)
    analytic = BlochField(func, a=a, T=T, dfunc=dfunc)
    ks = np.linspace(-np.pi, np.pi, 7, endpoint=False)
    for t in (0.0, 1e-6, 0.37 * T, 0.5 * T, T - 1e-6, T):
        d_num = numeric.time_derivative(ks, t)
        d_ana = analytic.time_derivative(ks, t)
        assert np.max(np.abs(d_num - d_ana)) < 2e-5


def test_time_derivative_never_leaves_interval():
    func, _, a, T = _smooth_field()

    def guarded(k, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        assert np.all(ts >= -1e-15) and np.all(ts <= T + 1e-15)
        return func(k, t)

    f = BlochField(guarded, a=a, T=T)
    for t in (0.0, 0.5 * T, T):
        f.time_derivative(0.7, t)
    # interior point close to the boundary still clamps the stencil
    f.time_derivative(0.7, 1e-9)
    f.time_derivative(0.7, T - 1e-9)


def test_field_constructor_validation():
    func, _, _, _ = _smooth_field()
    with pytest.raises(ValueError):
        BlochField(func, a=0.0, T=1.0)
    with pytest.raises(ValueError):
        BlochField(func, a=1.0, T=-2.0)


def test_wrapped_fields_apply_expected_generators():
    func, dfunc, a, T = _smooth_field()
    base = BlochField(func, a=a, T=T, dfunc=dfunc, name="smooth")
    cd = cd_bloch_field(base)
    tl = transitionless_bloch_field(base)
    assert cd.name.endswith("+cd")
    assert tl.name.endswith("+tl")
    ks = np.linspace(-np.pi, np.pi, 5, endpoint=False)
    t = 0.29 * T
    R = func(ks, t)
    dR = dfunc(ks, t)
    assert np.allclose(cd(ks, t), cd_field(R, dR), atol=1e-12)
    assert np.allclose(tl(ks, t), transitionless_drive(R, dR), atol=1e-12)
