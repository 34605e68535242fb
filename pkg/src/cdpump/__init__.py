"""Fast counter-diabatic Thouless pumping in two-band lattice models.

Layers, bottom up:

  bloch       two-band Bloch fields, counter-diabatic construction
  protocols   Rice-Mele schedule, control-freak protocol, test maps
  transport   pumped charge, Chern routes, site and bond charges
  dynamics    exact SU(2) evolution, infidelity, dynamical charge
  inverse     nearest-neighbor harmonic ansatz, boundary-value optimizer
  realspace   finite chain: locality, current operators, continuity
  svgplot     dependency-free deterministic SVG line plots
  cli         forward / controlfreak / inverse / realspace commands
"""

from .bloch import (
    GAP_EPS,
    BlochField,
    GapClosureError,
    cd_bloch_field,
    cd_field,
    ground_projector,
    pauli_contract,
    transitionless_bloch_field,
    transitionless_drive,
)
from .protocols import (
    ControlFreakParams,
    RMParams,
    control_freak_bond_charges,
    control_freak_r,
    control_freak_u,
    hedgehog_field,
    ramp_phase,
    rm_bloch_field,
    rm_coefficients,
)
from .transport import (
    N_CELL,
    ORIENTATION_NOTE,
    PumpTrace,
    QuantizationError,
    berry_flux_chern,
    cell_current,
    chern_number,
    plaquette_chern,
    pump_trace_from_rhat,
    pumped_charge,
    pumped_charge_from_current,
    pumped_charge_trace,
    site_charge,
)
from .dynamics import (
    EvolutionResult,
    PropagationError,
    dynamical_pumped_charge,
    evolve_spinor,
    instantaneous_ground_state,
    su2_step,
)
from .inverse import (
    InverseSolution,
    NNCoefficients,
    VerificationReport,
    boundary_error,
    integrate_sphere_ode,
    load_solution,
    nn_field,
    optimize,
    reconstruct_r,
    save_solution,
    verify_solution,
)
from .realspace import (
    Chain,
    ContinuityReport,
    bloch_to_realspace,
    continuity_residual,
    current_density_operator,
    cut_charge_trace,
    decay_length,
    hopping_decay,
    lower_band_wannier,
    total_current_operator,
)

__version__ = "0.1.0"

__all__ = [
    "GAP_EPS",
    "BlochField",
    "GapClosureError",
    "cd_bloch_field",
    "cd_field",
    "ground_projector",
    "pauli_contract",
    "transitionless_bloch_field",
    "transitionless_drive",
    "ControlFreakParams",
    "RMParams",
    "control_freak_bond_charges",
    "control_freak_r",
    "control_freak_u",
    "hedgehog_field",
    "ramp_phase",
    "rm_bloch_field",
    "rm_coefficients",
    "N_CELL",
    "ORIENTATION_NOTE",
    "PumpTrace",
    "QuantizationError",
    "berry_flux_chern",
    "cell_current",
    "chern_number",
    "plaquette_chern",
    "pump_trace_from_rhat",
    "pumped_charge",
    "pumped_charge_from_current",
    "pumped_charge_trace",
    "site_charge",
    "EvolutionResult",
    "PropagationError",
    "dynamical_pumped_charge",
    "evolve_spinor",
    "instantaneous_ground_state",
    "su2_step",
    "InverseSolution",
    "NNCoefficients",
    "VerificationReport",
    "boundary_error",
    "integrate_sphere_ode",
    "load_solution",
    "nn_field",
    "optimize",
    "reconstruct_r",
    "save_solution",
    "verify_solution",
    "Chain",
    "ContinuityReport",
    "bloch_to_realspace",
    "continuity_residual",
    "current_density_operator",
    "cut_charge_trace",
    "decay_length",
    "hopping_decay",
    "lower_band_wannier",
    "total_current_operator",
    "__version__",
]
