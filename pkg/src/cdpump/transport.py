"""Momentum-space transport diagnostics.

The pumped charge of a filled lower band is computed three independent
ways and they are required to agree:

  * the Chern integral of the unit Bloch vector over the (k, t) torus,
        Q_pump(t) = (1/4 pi) int_0^t dtau int dk  Rhat . (d_k Rhat x d_tau Rhat),
  * the time integral of the cell current divided by the sites per cell,
        j_cell(t) = int dk/2pi  d_k u . Rhat,    Q = int j_cell dt / N_CELL,
  * (in :mod:`cdpump.dynamics`) the same current evaluated on the
    dynamically evolved state.

An independent plaquette Berry-flux evaluation (solid angles of the
spherical quadrilaterals spanned by neighboring grid points, summed
over the torus) guards the Chern integral against sign and orientation
bugs; it returns an exact integer for any continuous gapped field and
is deliberately kept as a separate code path.

Site-resolved charges and the bond-resolved pumped charges built from
them complete the picture:

    Q(0, t) = int dk (a/2pi) (1 - Rhat_z)/2        (A sublattice)
    Q(a, t) = int dk (a/2pi) (1 + Rhat_z)/2        (B sublattice)
    Q_pump,d(t) = Q_pump(t)
    Q_pump,s(t) = Q_pump(t) + [Q(0, t) - Q(0, 0)]

k-derivatives are spectral (FFT over the periodic k-grid), time
derivatives use the analytic derivative registered with the field (or
a tight stencil, never the grid spacing), k-integrals use the periodic
composite rule, and the cumulative time integral uses Simpson's rule.
The full-cycle charge closes the torus and uses the periodic rule in
both directions, which is spectrally accurate.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .bloch import GAP_EPS, GapClosureError, cd_bloch_field

__all__ = [
    "N_CELL",
    "ORIENTATION_NOTE",
    "QuantizationError",
    "k_grid",
    "t_grid",
    "sample_field",
    "sample_rhat",
    "sample_rhat_dt",
    "spectral_k_derivative",
    "cell_current",
    "cell_current_trace",
    "pumped_charge_trace",
    "pumped_charge",
    "pumped_charge_from_current",
    "berry_flux_chern",
    "plaquette_chern",
    "chern_number",
    "site_charge",
    "site_charge_trace",
    "bond_pumped_charge",
    "PumpTrace",
    "pump_trace_from_rhat",
]

# Two sites per unit cell; divides the integrated cell current.
N_CELL = 2

ORIENTATION_NOTE = (
    "Q_pump = (1/4pi) int dt int dk Rhat.(d_k Rhat x d_t Rhat); "
    "default Rice-Mele cycle pumps +1"
)


class QuantizationError(RuntimeError):
    """Chern integral too far from any integer (broken periodicity or gap)."""


def k_grid(field, nk=100):
    """Uniform periodic k-grid on [-pi/a, pi/a), endpoint excluded."""
    return np.linspace(-np.pi / field.a, np.pi / field.a, nk, endpoint=False)


def t_grid(field, nt=100):
    """Uniform time grid on [0, T], endpoints included."""
    return np.linspace(0.0, field.T, nt)


def sample_field(field, ks, ts):
    """Sample a Bloch field on the grid; returns shape (nt, nk, 3)."""
    return np.stack([np.asarray(field(ks, t), dtype=float) for t in ts])


def _gap_check(R, ks, ts):
    n = np.linalg.norm(R, axis=-1)
    if np.min(n) < GAP_EPS:
        it, ik = np.unravel_index(np.argmin(n), n.shape)
        raise GapClosureError(
            "gap closure at (k=%.6g, t=%.6g): |R| = %.3e"
            % (ks[ik], ts[it], n[it, ik])
        )
    return n


def sample_rhat(field, ks, ts):
    """Unit vector Rhat on the grid, shape (nt, nk, 3); checks the gap."""
    R = sample_field(field, ks, ts)
    n = _gap_check(R, ks, ts)
    return R / n[..., None]


def sample_rhat_dt(field, ks, ts):
    """d(Rhat)/dt on the grid from the field's time derivative.

    Uses Rhatdot = (Rdot - (Rdot . Rhat) Rhat) / |R| so unit-norm error
    never accumulates.
    """
    R = sample_field(field, ks, ts)
    n = _gap_check(R, ks, ts)[..., None]
    rhat = R / n
    rdot = np.stack(
        [np.asarray(field.time_derivative(ks, t), dtype=float) for t in ts]
    )
    return (rdot - np.sum(rdot * rhat, axis=-1, keepdims=True) * rhat) / n


def spectral_k_derivative(values, ks):
    """d/dk along axis -2 of (..., nk, 3) samples on a periodic k-grid."""
    nk = values.shape[-2]
    dk = ks[1] - ks[0]
    freq = 2.0j * np.pi * np.fft.fftfreq(nk, d=dk)
    return np.real(
        np.fft.ifft(freq[:, None] * np.fft.fft(values, axis=-2), axis=-2)
    )


def _k_mean(integrand):
    """int dk/2pi f = mean_k(f) * (2pi/a) / 2pi; the 1/a lands on the caller."""
    return np.mean(integrand, axis=-1)


def cell_current(ufield, rfield, t, nk=100):
    """Cell-averaged current j_cell(t) = int dk/2pi d_k u . Rhat."""
    ks = k_grid(rfield, nk)
    u = np.asarray(ufield(ks, t), dtype=float)[None]
    rhat = sample_rhat(rfield, ks, np.atleast_1d(float(t)))
    du = spectral_k_derivative(u, ks)
    return float(_k_mean(np.sum(du * rhat, axis=-1))[0] / rfield.a)


def cell_current_trace(ufield, rfield, nk=100, nt=100):
    """(ts, j_cell(ts)) on the default grids."""
    ts = t_grid(rfield, nt)
    ks = k_grid(rfield, nk)
    rhat = sample_rhat(rfield, ks, ts)
    u = sample_field(ufield, ks, ts)
    du = spectral_k_derivative(u, ks)
    j = _k_mean(np.sum(du * rhat, axis=-1)) / rfield.a
    return ts, j


def _flux_density(rfield, ks, ts):
    """g(t) = (1/4pi) int dk Rhat . (d_k Rhat x d_t Rhat) at each node."""
    rhat = sample_rhat(rfield, ks, ts)
    drdk = spectral_k_derivative(rhat, ks)
    drdt = sample_rhat_dt(rfield, ks, ts)
    triple = np.sum(rhat * np.cross(drdk, drdt), axis=-1)
    dk = ks[1] - ks[0]
    return np.sum(triple, axis=-1) * dk / (4.0 * np.pi)


def pumped_charge_trace(rfield, nk=100, nt=100):
    """(ts, Q_pump(ts)) by cumulative Simpson integration of the flux."""
    ts = t_grid(rfield, nt)
    ks = k_grid(rfield, nk)
    g = _flux_density(rfield, ks, ts)
    q = cumulative_simpson(g, x=ts, initial=0.0)
    return ts, q


def pumped_charge(rfield, t=None, nk=100, nt=100):
    """Pumped charge Q_pump(t); t=None gives the full cycle.

    The full-cycle value integrates over the closed torus with the
    periodic composite rule in both k and t (spectrally accurate for a
    smooth gapped field); interior times integrate the cumulative trace
    up to the requested time.
    """
    if t is None or abs(t - rfield.T) < 1e-12 * rfield.T:
        ks = k_grid(rfield, nk)
        ts = np.linspace(0.0, rfield.T, nt, endpoint=False)
        g = _flux_density(rfield, ks, ts)
        return float(np.mean(g) * rfield.T)
    if t == 0.0:
        return 0.0
    ts = np.linspace(0.0, float(t), nt)
    ks = k_grid(rfield, nk)
    g = _flux_density(rfield, ks, ts)
    return float(cumulative_simpson(g, x=ts, initial=0.0)[-1])


def pumped_charge_from_current(ufield, rfield, nk=100, nt=100):
    """(ts, Q(ts)) from the time-integrated cell current / N_CELL."""
    ts, j = cell_current_trace(ufield, rfield, nk=nk, nt=nt)
    return ts, cumulative_simpson(j, x=ts, initial=0.0) / N_CELL


def berry_flux_chern(rfield, nk=100, nt=100):
    """Plaquette Berry-flux Chern number (solid-angle sum / 4 pi).

    Each (k, t) plaquette is split into two spherical triangles whose
    solid angles are evaluated with the half-angle triple-product
    formula; the sum over the closed surface is an exact multiple of
    4 pi for any continuous gapped field, so the return value is an
    integer up to rounding noise.  Kept independent of the
    triple-product integral on purpose: the two routes fail
    differently.

    The time axis uses an inclusive grid and is not wrapped: for a
    t-periodic field the last row repeats the first, which reproduces
    the torus sum, while fields whose boundary circles degenerate to
    points (pole-to-pole sweeps) are already closed without wrapping.
    """
    ks = k_grid(rfield, nk)
    ts = np.linspace(0.0, rfield.T, nt + 1)
    return plaquette_chern(sample_rhat(rfield, ks, ts))


def _row_solid_angles(rhat):
    """Solid angle swept between consecutive time rows, one value per row gap.

    Each (k, t) plaquette splits into two spherical triangles evaluated
    with the half-angle triple-product formula; the k axis is periodic
    without its endpoint, the time axis is inclusive.
    """
    n = np.asarray(rhat, dtype=float)

    def solid_angles(p1, p2, p3):
        num = np.sum(p1 * np.cross(p2, p3), axis=-1)
        den = (
            1.0
            + np.sum(p1 * p2, axis=-1)
            + np.sum(p2 * p3, axis=-1)
            + np.sum(p3 * p1, axis=-1)
        )
        return 2.0 * np.arctan2(num, den)

    a = n[:-1]
    b = np.roll(n, -1, axis=1)[:-1]   # k + dk
    c = np.roll(n, -1, axis=1)[1:]    # k + dk, t + dt
    d = n[1:]                         # t + dt
    return np.sum(solid_angles(a, b, c) + solid_angles(a, c, d), axis=-1)


def plaquette_chern(rhat):
    """Solid-angle sum / 4 pi over a sampled unit-vector grid.

    ``rhat`` has shape (nt + 1, nk, 3) with the time axis inclusive
    (first and last rows coincide for a periodic sweep, or sit at the
    poles for a pole-to-pole one) and the k axis periodic without its
    endpoint.
    """
    return float(np.sum(_row_solid_angles(rhat)) / (4.0 * np.pi))


def chern_number(rfield, nk=100, nt=100, tol=0.01):
    """Integer Chern number with a two-route consistency gate.

    Computes the triple-product integral and the plaquette Berry flux,
    requires them to agree within ``tol``, and requires the integral to
    sit within 0.1 of an integer before rounding.
    """
    raw = pumped_charge(rfield, None, nk=nk, nt=nt)
    plaq = berry_flux_chern(rfield, nk=nk, nt=nt)
    if abs(raw - plaq) > tol:
        raise QuantizationError(
            "Chern routes disagree: integral %.6f vs plaquette %.6f" % (raw, plaq)
        )
    nearest = round(raw)
    if abs(raw - nearest) > 0.1:
        raise QuantizationError(
            "Chern integral %.6f is not near an integer; "
            "broken periodicity or gap closure" % raw
        )
    return int(nearest)


def _site_sign(x, a):
    if abs(x) < 1e-12:
        return 1.0
    if abs(x - a) < 1e-12:
        return -1.0
    raise ValueError("site position must be 0 (A) or a (B), got %r" % (x,))


def site_charge(rfield, x, t, nk=100):
    """Charge on sublattice site x in {0, a} at time t.

    Q(x, t) = int dk (a/2pi) (1 - s Rhat_z)/2 with s = +1 for the A
    site (x = 0) and s = -1 for the B site (x = a); the two sum to the
    one particle per cell of the filled band.
    """
    s = _site_sign(x, rfield.a)
    ks = k_grid(rfield, nk)
    rhat = sample_rhat(rfield, ks, np.atleast_1d(float(t)))
    return float(_k_mean(0.5 * (1.0 - s * rhat[0, :, 2])))


def site_charge_trace(rfield, x, nk=100, nt=100):
    """(ts, Q(x, ts)) on the default grids."""
    s = _site_sign(x, rfield.a)
    ts = t_grid(rfield, nt)
    ks = k_grid(rfield, nk)
    rhat = sample_rhat(rfield, ks, ts)
    return ts, _k_mean(0.5 * (1.0 - s * rhat[:, :, 2]))


def bond_pumped_charge(q_pump, q_site_0, bond):
    """Bond-resolved pumped charge from the Q_pump and Q(0, t) traces.

    The weights Phi(x, x_b) = Theta(x - x_b) - x/a evaluated at the
    bond positions x_b(d) = +a/2, x_b(s) = -a/2 leave a single nonzero
    weight, Phi(0, -a/2) = 1:

        Q_pump,d(t) = Q_pump(t)
        Q_pump,s(t) = Q_pump(t) + [Q(0, t) - Q(0, 0)]
    """
    q_pump = np.asarray(q_pump, dtype=float)
    q0 = np.asarray(q_site_0, dtype=float)
    if bond == "d":
        return q_pump.copy()
    if bond == "s":
        return q_pump + (q0 - q0[..., 0])
    raise ValueError("bond must be 'd' (intracell) or 's' (intercell)")


@dataclass
class PumpTrace:
    """Time series of every transport diagnostic for one protocol."""

    t: np.ndarray
    j_cell: np.ndarray
    q_pump: np.ndarray
    q_site_0: np.ndarray
    q_site_a: np.ndarray
    q_pump_d: np.ndarray
    q_pump_s: np.ndarray

    @classmethod
    def compute(cls, rfield, ufield=None, nk=100, nt=100):
        """Assemble the full trace from an R-protocol and its drive u.

        ``ufield`` defaults to the counter-diabatic drive of the
        protocol, for which the integrated cell current reproduces
        Q_pump.
        """
        if ufield is None:
            ufield = cd_bloch_field(rfield)
        ts, j = cell_current_trace(ufield, rfield, nk=nk, nt=nt)
        _, q = pumped_charge_trace(rfield, nk=nk, nt=nt)
        _, q0 = site_charge_trace(rfield, 0.0, nk=nk, nt=nt)
        _, qa = site_charge_trace(rfield, rfield.a, nk=nk, nt=nt)
        return cls(
            t=ts,
            j_cell=j,
            q_pump=q,
            q_site_0=q0,
            q_site_a=qa,
            q_pump_d=bond_pumped_charge(q, q0, "d"),
            q_pump_s=bond_pumped_charge(q, q0, "s"),
        )

    def check(self, tol=1e-3):
        """Return a list of violated trace invariants (empty when clean)."""
        bad = []
        if abs(self.q_pump[0]) > 1e-12:
            bad.append("Q_pump(0) != 0")
        if abs(self.q_pump_d[0]) > 1e-12 or abs(self.q_pump_s[0]) > 1e-12:
            bad.append("bond charges nonzero at t=0")
        if np.max(np.abs(self.q_site_0 + self.q_site_a - 1.0)) > 1e-10:
            bad.append("site charges do not sum to one per cell")
        end = self.q_pump[-1]
        if abs(self.q_pump_d[-1] - end) > tol or abs(self.q_pump_s[-1] - end) > tol:
            bad.append("bond charges do not rejoin Q_pump at t=T")
        return bad

    def write_csv(self, path, comment=""):
        """Write the trace as CSV; a leading # line carries the comment."""
        cols = (
            self.t,
            self.j_cell,
            self.q_pump,
            self.q_site_0,
            self.q_site_a,
            self.q_pump_d,
            self.q_pump_s,
        )
        names = "t,j_cell,Q_pump,Q_site_0,Q_site_a,Q_pump_d,Q_pump_s"
        with open(path, "w") as fh:
            if comment:
                fh.write("# %s\n" % comment)
            fh.write(names + "\n")
            for row in zip(*cols):
                fh.write(",".join("%.12g" % v for v in row) + "\n")


def pump_trace_from_rhat(ufield, times, rhat):
    """PumpTrace assembled from a stored spin-flow grid.

    ``rhat`` has shape (len(times), nk, 3), sampled on the standard
    periodic k-grid of ``ufield`` at the inclusive node times.  Used
    for protocols that exist only as a drive u plus the flow it
    generates (inverse designs), where no registered R-field supplies
    the instantaneous ground state.  The cell current uses the evolved
    rhat in place of the ground-state one; Q_pump accumulates the
    plaquette Berry flux row by row (the geometric route, independent
    of the current integral); site and bond charges read rhat_z.
    """
    rhat = np.asarray(rhat, dtype=float)
    times = np.asarray(times, dtype=float)
    ks = k_grid(ufield, rhat.shape[1])
    u = sample_field(ufield, ks, times)
    du = spectral_k_derivative(u, ks)
    j = _k_mean(np.sum(du * rhat, axis=-1)) / ufield.a
    q = np.concatenate(
        ([0.0], np.cumsum(_row_solid_angles(rhat)) / (4.0 * np.pi))
    )
    q0 = _k_mean(0.5 * (1.0 - rhat[:, :, 2]))
    return PumpTrace(
        t=times,
        j_cell=j,
        q_pump=q,
        q_site_0=q0,
        q_site_a=1.0 - q0,
        q_pump_d=bond_pumped_charge(q, q0, "d"),
        q_pump_s=bond_pumped_charge(q, q0, "s"),
    )
