"""Concrete driving protocols.

Two drives are built in.  The Rice-Mele schedule modulates the
staggered hoppings and on-site offset of a two-site-per-cell chain
through one pump cycle,

    J1 = J0 + delta0 cos(phi(t) + phi_shift)      intracell hopping
    J2 = J0 - delta0 cos(phi(t) + phi_shift)      intercell hopping
    Delta = Delta0 sin(phi(t) + phi_shift)        staggered offset

    R(k, t) = (-J1 - J2 cos ka, J2 sin ka, Delta)

with the smooth ramp phi(t) = pi (1 - cos(omega t / 2)) whose rate
vanishes at both endpoints, so the drive switches on and off with a
continuous derivative.  The "control freak" protocol activates only
one bond type at a time and admits closed-form bond charges at any
driving speed; it is the analytic benchmark for the bond-resolved
transport machinery.  A hedgehog map (degree +-1 covering of the
sphere) is included as a Chern-number test fixture.

Fields are clamped constant outside [0, T].
"""

from dataclasses import dataclass

import numpy as np

from .bloch import BlochField, GapClosureError, GAP_EPS

__all__ = [
    "ramp_phase",
    "ramp_phase_deriv",
    "RMParams",
    "rm_coefficients",
    "rm_coefficients_deriv",
    "rm_bloch_field",
    "ControlFreakParams",
    "default_theta",
    "default_theta_deriv",
    "control_freak_r",
    "control_freak_u",
    "control_freak_bond_charges",
    "hedgehog_field",
]


def ramp_phase(t, omega):
    """Pump phase phi(t) = pi (1 - cos(omega t / 2)).

    phi(0) = 0, phi(T/2) = pi, phi(T) = 2 pi for T = 2 pi / omega, and
    the derivative vanishes at t = 0 and t = T.
    """
    return np.pi * (1.0 - np.cos(0.5 * omega * t))


def ramp_phase_deriv(t, omega):
    """d(phi)/dt for the ramp phase."""
    return 0.5 * np.pi * omega * np.sin(0.5 * omega * t)


def _stack3(x, y, z):
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


@dataclass(frozen=True)
class RMParams:
    """Rice-Mele drive parameters.

    T = 2 pi / omega.  Construction verifies the drive keeps the gap
    open on a 100 x 100 (k, t) grid.
    """

    J0: float = 1.1
    delta0: float = 0.9
    Delta0: float = 1.0
    a: float = 1.0
    omega: float = 0.5
    phi_shift: float = 0.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("lattice constant must be positive")
        if self.omega <= 0:
            raise ValueError("driving frequency must be positive")
        ks = np.linspace(-np.pi / self.a, np.pi / self.a, 100, endpoint=False)
        ts = np.linspace(0.0, self.T, 100)
        gap = min(
            float(np.min(np.linalg.norm(_rm_vector(self, ks, t), axis=-1)))
            for t in ts
        )
        if gap <= GAP_EPS:
            raise GapClosureError(
                "Rice-Mele drive closes the gap (min |R| = %.3e)" % gap
            )

    @property
    def T(self):
        return 2.0 * np.pi / self.omega


def rm_coefficients(t, p=None):
    """Hopping and offset schedule (J1, J2, Delta) at time t (clamped)."""
    if p is None:
        p = RMParams()
    ph = ramp_phase(np.clip(t, 0.0, p.T), p.omega) + p.phi_shift
    c = p.delta0 * np.cos(ph)
    return p.J0 + c, p.J0 - c, p.Delta0 * np.sin(ph)


def rm_coefficients_deriv(t, p):
    """Time derivative (J1dot, J2dot, Deltadot); zero outside [0, T]."""
    inside = (t >= 0.0) & (t <= p.T)
    ph = ramp_phase(np.clip(t, 0.0, p.T), p.omega) + p.phi_shift
    pd = ramp_phase_deriv(np.clip(t, 0.0, p.T), p.omega) * inside
    s = p.delta0 * np.sin(ph) * pd
    return -s, s, p.Delta0 * np.cos(ph) * pd


def _rm_vector(p, k, t):
    J1, J2, D = rm_coefficients(t, p)
    ka = np.asarray(k) * p.a
    return _stack3(-J1 - J2 * np.cos(ka), J2 * np.sin(ka), D)


def _rm_vector_dt(p, k, t):
    J1d, J2d, Dd = rm_coefficients_deriv(t, p)
    ka = np.asarray(k) * p.a
    return _stack3(-J1d - J2d * np.cos(ka), J2d * np.sin(ka), Dd)


def rm_bloch_field(p=None):
    """Bloch vector field R(k, t) of the Rice-Mele drive.

    The analytic time derivative is registered, so downstream consumers
    never pay finite-difference noise inside the 1/|R|^2 geometric term.
    """
    if p is None:
        p = RMParams()
    return BlochField(
        lambda k, t: _rm_vector(p, k, t),
        p.a,
        p.T,
        dfunc=lambda k, t: _rm_vector_dt(p, k, t),
        name="rice-mele",
    )


def default_theta(t, T):
    """Polar-angle profile: half a turn per half cycle, flat at the joints.

    theta(0) = 0, theta(T/2) = pi, theta(T) = 2 pi, with d(theta)/dt = 0
    at t in {0, T/2, T} so the drive is continuous across the branch
    switch of the control-freak protocol.
    """
    t = np.clip(t, 0.0, T)
    first = 0.5 * np.pi * (1.0 - np.cos(2.0 * np.pi * t / T))
    second = np.pi + 0.5 * np.pi * (1.0 - np.cos(2.0 * np.pi * (t - T / 2) / T))
    return np.where(t < T / 2, first, second)


def default_theta_deriv(t, T):
    """d(theta)/dt of the default profile; zero outside [0, T]."""
    inside = (np.asarray(t) >= 0.0) & (np.asarray(t) <= T)
    t = np.clip(t, 0.0, T)
    rate = (np.pi**2 / T) * np.sin(
        2.0 * np.pi * np.where(t < T / 2, t, t - T / 2) / T
    )
    return rate * inside


@dataclass(frozen=True)
class ControlFreakParams:
    """Control-freak protocol parameters.

    lam is the log-magnitude of R (|R| = e^lam, default unit gap).
    theta / theta_deriv override the default polar profile; overrides
    must satisfy theta(0) = 0, theta(T/2) = pi, theta(T) = 2 pi with a
    vanishing rate at all three points, which construction verifies.
    """

    T: float = 4.0 * np.pi
    lam: float = 0.0
    a: float = 1.0
    theta: object = None
    theta_deriv: object = None

    def __post_init__(self):
        if self.T <= 0 or self.a <= 0:
            raise ValueError("period and lattice constant must be positive")
        th, thd = self.theta_fn, self.theta_deriv_fn
        targets = [(0.0, 0.0), (self.T / 2, np.pi), (self.T, 2 * np.pi)]
        for tt, want in targets:
            if abs(float(th(tt)) - want) > 1e-9:
                raise ValueError("theta profile misses its endpoint at t=%g" % tt)
            if abs(float(thd(tt))) > 1e-9:
                raise ValueError("theta rate must vanish at t=%g" % tt)

    @property
    def theta_fn(self):
        if self.theta is not None:
            return self.theta
        return lambda t: default_theta(t, self.T)

    @property
    def theta_deriv_fn(self):
        if self.theta_deriv is not None:
            return self.theta_deriv
        return lambda t: default_theta_deriv(t, self.T)


def _cf_vectors(p, k, t):
    """(R, u) of the control-freak protocol at scalar time t."""
    t = float(np.clip(t, 0.0, p.T))
    th = float(p.theta_fn(t))
    thd = float(p.theta_deriv_fn(t))
    r_par = np.exp(p.lam) * np.cos(th)
    r_perp = np.exp(p.lam) * np.sin(th)
    ka = np.asarray(k) * p.a
    if t < p.T / 2:
        # only the intracell bond is active: R is k-independent
        R = _stack3(r_perp, 0.0 * ka, r_par)
        u = R + thd * _stack3(0.0 * ka, np.ones_like(ka), 0.0 * ka)
    else:
        R = _stack3(r_perp * np.cos(ka), r_perp * np.sin(ka), r_par)
        u = R + thd * _stack3(-np.sin(ka), np.cos(ka), 0.0 * ka)
    return R, u


def _cf_r_dt(p, k, t):
    t = float(np.clip(t, 0.0, p.T))
    th = float(p.theta_fn(t))
    thd = float(p.theta_deriv_fn(t))
    e = np.exp(p.lam)
    ka = np.asarray(k) * p.a
    if t < p.T / 2:
        return _stack3(e * thd * np.cos(th), 0.0 * ka, -e * thd * np.sin(th))
    return _stack3(
        e * thd * np.cos(th) * np.cos(ka),
        e * thd * np.cos(th) * np.sin(ka),
        -e * thd * np.sin(th),
    )


def control_freak_r(p=None):
    """R(k, t) of the control-freak protocol (continuous at t = T/2)."""
    if p is None:
        p = ControlFreakParams()
    return BlochField(
        lambda k, t: _cf_vectors(p, k, t)[0],
        p.a,
        p.T,
        dfunc=lambda k, t: _cf_r_dt(p, k, t),
        name="control-freak",
    )


def control_freak_u(p=None):
    """Closed-form total drive u(k, t) of the control-freak protocol.

    Equals cd_field(R, dR/dt) of :func:`control_freak_r` identically;
    the closed form exists because |R| is constant and theta carries
    all of the motion.
    """
    if p is None:
        p = ControlFreakParams()
    return BlochField(
        lambda k, t: _cf_vectors(p, k, t)[1],
        p.a,
        p.T,
        name="control-freak-u",
    )


def control_freak_bond_charges(theta, half):
    """Closed-form pumped charge (Q_d, Q_s) at polar angle theta.

    First half (theta in [0, pi]):   Q_d = 0,                Q_s = (1 - cos theta)/2.
    Second half (theta in [pi, 2pi]): Q_d = (1 + cos theta)/2, Q_s = 1.

    Both reach exactly 1 at theta = 2 pi.
    """
    theta = np.asarray(theta, dtype=float)
    if half == "first":
        return np.zeros_like(theta), 0.5 * (1.0 - np.cos(theta))
    if half == "second":
        return 0.5 * (1.0 + np.cos(theta)), np.ones_like(theta)
    raise ValueError("half must be 'first' or 'second'")


def hedgehog_field(T=2.0 * np.pi, a=1.0, chirality=1):
    """Degree +-chirality covering of the sphere over the (k, t) torus.

    Rhat = (sin t' cos ka, -chirality sin t' sin ka, cos t') with
    t' = pi t / T.  chirality=+1 pumps +1 under this package's
    orientation convention; chirality=-1 is the mirror covering and
    pumps -1.
    """
    if chirality not in (1, -1):
        raise ValueError("chirality must be +1 or -1")

    def func(k, t):
        tp = np.pi * np.clip(t, 0.0, T) / T
        ka = np.asarray(k) * a
        return _stack3(
            np.sin(tp) * np.cos(ka),
            -chirality * np.sin(tp) * np.sin(ka),
            np.cos(tp) * np.ones_like(ka),
        )

    def dfunc(k, t):
        inside = (t >= 0.0) & (t <= T)
        tp = np.pi * np.clip(t, 0.0, T) / T
        ka = np.asarray(k) * a
        rate = (np.pi / T) * inside
        return _stack3(
            rate * np.cos(tp) * np.cos(ka),
            -chirality * rate * np.cos(tp) * np.sin(ka),
            -rate * np.sin(tp) * np.ones_like(ka),
        )

    return BlochField(func, a, T, dfunc=dfunc, name="hedgehog")
