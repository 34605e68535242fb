"""Two-band Bloch algebra.

A two-band lattice Hamiltonian in momentum space is a real 3-vector
contracted with the Pauli matrices, H0(k, t) = R(k, t) . sigma.  This
module holds the vector algebra everything else is built on: Pauli
contraction, the lower-band projector, and two auxiliary drive vectors
derived from R and its time derivative,

    cd_field:             u = R + (R x dR/dt) / |R|^2
    transitionless_drive: h = R + (R x dR/dt) / (2 |R|^2)

The full-strength vector u is the bookkeeping field of the pump: its
cross product with the unit vector Rhat generates the single-rate flow
d(Rhat)/dt = u x Rhat used by the inverse-design machinery, and its
k-derivative is the current operator that, together with the per-cell
normalization, yields the quantized pumped charge.  The half-strength
vector h is the generator of the actual Schroedinger evolution that
holds the spinor in the instantaneous ground state of R . sigma: the
spin expectation of a two-level system precesses at twice the applied
field, so exact following requires the geometric term at half weight.
Both conventions describe the same pump and are kept as separate
functions; mixing them up is the classic factor-of-two trap.

All functions accept numpy arrays whose last axis has length 3 and
broadcast over any leading axes.
"""

import numpy as np

__all__ = [
    "GAP_EPS",
    "GapClosureError",
    "PAULI",
    "pauli_contract",
    "cd_field",
    "transitionless_drive",
    "ground_projector",
    "BlochField",
    "time_derivative",
    "cd_bloch_field",
    "transitionless_bloch_field",
]

# Below this |R| the gap is treated as closed and the CD term as singular.
GAP_EPS = 1e-9

PAULI = np.array(
    [
        [[0.0 + 0.0j, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ]
)


class GapClosureError(ValueError):
    """Raised when |R| falls below GAP_EPS and 1/|R|^2 would blow up."""


def pauli_contract(v):
    """Contract a real 3-vector with the Pauli matrices.

    Parameters
    ----------
    v : array_like, shape (..., 3)
        Vector(s) to contract.

    Returns
    -------
    ndarray, shape (..., 2, 2)
        Hermitian traceless matrix v . sigma with eigenvalues +-|v|.
    """
    v = np.asarray(v, dtype=float)
    return np.einsum("...i,ijk->...jk", v, PAULI)


def _norm2(v):
    return np.sum(v * v, axis=-1, keepdims=True)


def cd_field(R, dRdt):
    """Full-strength counter-diabatic drive vector u = R + (R x Rdot)/|R|^2.

    The geometric term is orthogonal to R, so u . Rhat = |R| always.
    This is the field whose flow d(Rhat)/dt = u x Rhat reproduces the
    band geometry and whose k-derivative enters the cell current; for
    the Schroedinger generator that actually follows the ground state
    use :func:`transitionless_drive`.

    Raises
    ------
    GapClosureError
        If any |R| < GAP_EPS.
    """
    R = np.asarray(R, dtype=float)
    dRdt = np.asarray(dRdt, dtype=float)
    n2 = _norm2(R)
    if np.any(n2 < GAP_EPS**2):
        raise GapClosureError("gap closure: |R| below %.1e" % GAP_EPS)
    return R + np.cross(R, dRdt) / n2

def transitionless_drive(R, dRdt):
    """Half-strength drive h = R + (R x Rdot)/(2 |R|^2).

    Evolving a spinor under h . sigma keeps the instantaneous ground
    state of R . sigma exactly stationary at any driving speed: the
    Bloch vector of the state obeys d<sigma>/dt = 2 h x <sigma>, and
    the factor 2 is absorbed here rather than in the stepper.
    """
    R = np.asarray(R, dtype=float)
    dRdt = np.asarray(dRdt, dtype=float)
    n2 = _norm2(R)
    if np.any(n2 < GAP_EPS**2):
        raise GapClosureError("gap closure: |R| below %.1e" % GAP_EPS)
    return R + 0.5 * np.cross(R, dRdt) / n2


def ground_projector(R):
    """Projector onto the lower band, P = (1 - Rhat . sigma) / 2.

    Satisfies (R . sigma) P = -|R| P, P^2 = P, tr P = 1.

    Raises
    ------
    GapClosureError
        If any |R| < GAP_EPS (the band direction is undefined).
    """
    R = np.asarray(R, dtype=float)
    n = np.sqrt(_norm2(R))
    if np.any(n < GAP_EPS):
        raise GapClosureError("gap closure: |R| below %.1e" % GAP_EPS)
    rhat = R / n
    eye = np.broadcast_to(np.eye(2), rhat.shape[:-1] + (2, 2))
    return 0.5 * (eye - pauli_contract(rhat))


class BlochField:
    """Evaluatable map (k, t) -> real 3-vector, with lattice data attached.

    Parameters
    ----------
    func : callable
        ``func(k, t) -> array (..., 3)``; k may be a scalar or array,
        t is a scalar time.
    a : float
        Lattice constant; k lives on [-pi/a, pi/a].
    T : float
        Drive period; the field is constant outside [0, T] for the
        protocols built in :mod:`cdpump.protocols`.
    dfunc : callable, optional
        Analytic time derivative with the same signature.  When given,
        :meth:`time_derivative` returns it exactly instead of using a
        finite-difference stencil.
    name : str, optional
        Label used in error messages and CLI output.
    """

    def __init__(self, func, a, T, dfunc=None, name=""):
        if a <= 0 or T <= 0:
            raise ValueError("lattice constant and period must be positive")
        self.func = func
        self.a = float(a)
        self.T = float(T)
        self.dfunc = dfunc
        self.name = name

    def __call__(self, k, t):
        return self.func(k, t)

    def time_derivative(self, k, t, h=None):
        """d/dt of the field at (k, t).

        Uses the registered analytic derivative when present; otherwise
        a second-order central difference with step h (default T*1e-5),
        switching to one-sided stencils within h of the time endpoints
        so the clamped-constant extension outside [0, T] is never
        sampled.
        """
        if self.dfunc is not None:
            return self.dfunc(k, t)
        if h is None:
            h = self.T * 1e-5
        if h <= 0:
            raise ValueError("finite-difference step must be positive")
        f = self.func
        if t < h:
            return (-3.0 * f(k, t) + 4.0 * f(k, t + h) - f(k, t + 2 * h)) / (2 * h)
        if t > self.T - h:
            return (3.0 * f(k, t) - 4.0 * f(k, t - h) + f(k, t - 2 * h)) / (2 * h)
        return (f(k, t + h) - f(k, t - h)) / (2 * h)


def time_derivative(field, k, t, h=None):
    """Time derivative of a :class:`BlochField` at (k, t); see the method."""
    return field.time_derivative(k, t, h=h)


def cd_bloch_field(rfield, name=None):
    """Wrap an R-protocol into its full-strength drive field u(k, t)."""
    if name is None:
        name = (rfield.name + "+cd") if rfield.name else "cd"
    return BlochField(
        lambda k, t: cd_field(rfield(k, t), rfield.time_derivative(k, t)),
        rfield.a,
        rfield.T,
        name=name,
    )


def transitionless_bloch_field(rfield, name=None):
    """Wrap an R-protocol into its evolution generator h(k, t)."""
    if name is None:
        name = (rfield.name + "+tl") if rfield.name else "tl"
    return BlochField(
        lambda k, t: transitionless_drive(rfield(k, t), rfield.time_derivative(k, t)),
        rfield.a,
        rfield.T,
        name=name,
    )
