"""Command-line front end: config parsing, runs, CSV and SVG artifacts.

Four subcommands drive the library end to end:

  forward      Rice-Mele protocol with the counter-diabatic drive:
               transport trace, dynamical evolution, quantization gates.
  controlfreak Analytic bond-charge protocol vs its closed forms.
  inverse      Harmonic-ansatz boundary-value optimization, verification
               pass, and the reconstructed protocol's transport trace.
  realspace    Finite-chain continuity residual and hopping locality.

Configuration is a flat key=value text file with an explicit schema
version; unknown keys are errors (reproducibility over convenience).
Flags override file values.  Exit codes: 0 success, 2 invariant or
threshold failure, 3 config error.  Every CSV carries a header row and
a leading comment line recording the config hash and the orientation
convention; identical configs produce byte-identical CSVs.  SVG plots
are optional (--format csv+svg) and never gate exit codes.
"""

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import dynamics, inverse, realspace, transport
from .bloch import GapClosureError, cd_bloch_field, transitionless_bloch_field
from .protocols import (
    ControlFreakParams,
    RMParams,
    control_freak_bond_charges,
    control_freak_r,
    control_freak_u,
    rm_bloch_field,
)
from .svgplot import LinePlot
from .transport import ORIENTATION_NOTE, PumpTrace, QuantizationError

__all__ = ["CONFIG_SCHEMA", "ConfigError", "RunConfig", "main", "entry"]

CONFIG_SCHEMA = "cdpump/1"


class ConfigError(Exception):
    """Invalid configuration file, key, value, or invariant."""


@dataclass
class RunConfig:
    """One fully resolved run: subcommand plus every tunable.

    Defaults reproduce the reference protocol (a=1, J0=1.1, delta0=0.9,
    Delta0=1, omega=0.5) on 100x100 grids.  Grid sizes must be >= 8 and
    thresholds positive.
    """

    subcommand: str = ""
    # protocol
    omega: float = 0.5
    j0: float = 1.1
    delta0: float = 0.9
    big_delta0: float = 1.0
    lattice_a: float = 1.0
    phi_shift: float = 0.0
    cf_lambda: float = 0.0
    cd: bool = True
    # grids
    k_points: int = 100
    t_points: int = 100
    ode_steps: int = 10000
    # optimizer
    harmonics: int = 3
    e_threshold: float = 1e-4
    gap_min: float = 0.05
    max_iter: int = 500
    k_slice: float = 1.1
    # chain
    n_cells: int = 32
    decay_cells: int = 64
    chain_steps: int = 100000
    check_stride: int = 25
    decay_range: int = 16
    residual_threshold: float = 1e-8
    locality_threshold: float = 1e-8
    # output
    format: str = "csv"

    def validate(self):
        grids = ("k_points", "t_points", "ode_steps", "n_cells",
                 "decay_cells", "chain_steps")
        for name in grids:
            if getattr(self, name) < 8:
                raise ConfigError("grid size %s must be >= 8" % name)
        thresholds = ("e_threshold", "gap_min", "residual_threshold",
                      "locality_threshold")
        for name in thresholds:
            if getattr(self, name) <= 0:
                raise ConfigError("threshold %s must be > 0" % name)
        if self.omega <= 0:
            raise ConfigError("omega must be > 0")
        if self.lattice_a <= 0:
            raise ConfigError("lattice_a must be > 0")
        if self.harmonics < 0:
            raise ConfigError("harmonics must be >= 0")
        if self.max_iter < 1 or self.check_stride < 1:
            raise ConfigError("iteration counts must be >= 1")
        if not 2 <= self.decay_range <= self.decay_cells // 2:
            raise ConfigError("decay_range must lie in [2, decay_cells/2]")
        if self.format not in ("csv", "csv+svg"):
            raise ConfigError("format must be 'csv' or 'csv+svg'")
        return self

    def rm_params(self):
        return RMParams(
            J0=self.j0,
            delta0=self.delta0,
            Delta0=self.big_delta0,
            a=self.lattice_a,
            omega=self.omega,
            phi_shift=self.phi_shift,
        )

    def hash(self):
        """Short digest of every field; identical configs share it."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if isinstance(v, float):
                lines.append("%s=%.17g" % (f.name, v))
            else:
                lines.append("%s=%s" % (f.name, v))
        return hashlib.sha1("\n".join(lines).encode()).hexdigest()[:12]

    def comment(self):
        return "config %s | %s" % (self.hash(), ORIENTATION_NOTE)


def _parse_value(name, text, default):
    if isinstance(default, bool):
        if text == "true":
            return True
        if text == "false":
            return False
        raise ConfigError("key %s wants true/false, got %r" % (name, text))
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError("key %s: cannot parse %r" % (name, text))
    return text


def load_config_file(path, cfg):
    """Apply a flat key=value file over cfg; returns the new config."""
    known = {f.name: getattr(cfg, f.name) for f in fields(cfg)
             if f.name != "subcommand"}
    updates = {}
    seen_schema = False
    try:
        with open(path) as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    for lineno, raw in enumerate(raw_lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key = value" % (path, lineno))
        key, text = (part.strip() for part in line.split("=", 1))
        if key == "schema":
            if text != CONFIG_SCHEMA:
                raise ConfigError(
                    "%s:%d: schema %r not supported (expected %s)"
                    % (path, lineno, text, CONFIG_SCHEMA)
                )
            seen_schema = True
            continue
        if key not in known:
            raise ConfigError("%s:%d: unknown key %r" % (path, lineno, key))
        if key in updates:
            raise ConfigError("%s:%d: duplicate key %r" % (path, lineno, key))
        updates[key] = _parse_value(key, text, known[key])
    if not seen_schema:
        raise ConfigError("%s: missing 'schema = %s' line" % (path, CONFIG_SCHEMA))
    return replace(cfg, **updates)


def write_csv(path, names, columns, comment):
    """Deterministic CSV: comment line, header row, %.12g everywhere."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write("# %s\n" % comment)
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(",".join("%.12g" % v for v in row) + "\n")


class _Check:
    """Collects named pass/fail gates and prints one line each."""

    def __init__(self, tag):
        self.tag = tag
        self.failed = []

    def gate(self, name, ok, detail=""):
        line = "[%s] %-44s %s" % (self.tag, name, "PASS" if ok else "FAIL")
        if detail:
            line += "  (%s)" % detail
        print(line)
        if not ok:
            self.failed.append(name)

    def info(self, text):
        print("[%s] %s" % (self.tag, text))

    def exit_code(self):
        return 0 if not self.failed else 2


def run_forward(cfg, out):
    check = _Check("forward")
    rfield = rm_bloch_field(cfg.rm_params())
    trace = PumpTrace.compute(rfield, nk=cfg.k_points, nt=cfg.t_points)
    trace.write_csv(os.path.join(out, "pump_trace.csv"), comment=cfg.comment())

    try:
        chern = transport.chern_number(rfield, nk=cfg.k_points, nt=cfg.t_points)
        check.gate("Chern dual-route agreement", True, "C = %+d" % chern)
    except QuantizationError as exc:
        chern = int(round(trace.q_pump[-1]))
        check.gate("Chern dual-route agreement", False, str(exc))

    bad = trace.check(1e-3)
    check.gate("transport trace invariants", not bad, "; ".join(bad))
    check.gate(
        "Q_pump(T) quantized",
        abs(trace.q_pump[-1] - chern) <= 0.01,
        "Q_pump(T) = %.6f" % trace.q_pump[-1],
    )

    res = dynamics.dynamical_pumped_charge(
        rfield, nk=cfg.k_points, steps=cfg.ode_steps, with_cd=cfg.cd
    )
    write_csv(
        os.path.join(out, "dynamics.csv"),
        ("t", "Q_dyn"),
        (res.times, res.charge),
        cfg.comment(),
    )
    q_dyn = float(res.charge[-1])
    if cfg.cd:
        check.gate(
            "dynamical charge quantized",
            abs(q_dyn - chern) <= 0.01,
            "Q_dyn(T) = %.6f" % q_dyn,
        )
        check.gate(
            "route agreement |Q_dyn - Q_pump|",
            abs(q_dyn - trace.q_pump[-1]) <= 1e-2,
            "%.3e" % abs(q_dyn - trace.q_pump[-1]),
        )
        check.info("max infidelity vs ground state = %.3e" % res.max_infidelity)
    else:
        check.info(
            "counter-diabatic term disabled: Q_dyn(T) = %.6f "
            "(deviation from %d: %.3e; not gated)" % (q_dyn, chern, abs(q_dyn - chern))
        )

    if cfg.format == "csv+svg":
        plot = LinePlot(title="pumped charge", xlabel="t", ylabel="Q")
        plot.add(trace.t, trace.q_pump, "Q_pump")
        plot.add(trace.t, trace.q_pump_d, "Q_pump,d", dash="6,3")
        plot.add(trace.t, trace.q_pump_s, "Q_pump,s", dash="2,3")
        plot.add(res.times, res.charge, "Q_dyn")
        plot.write(os.path.join(out, "pump_trace.svg"))
    return check.exit_code()


def run_controlfreak(cfg, out):
    check = _Check("controlfreak")
    p = ControlFreakParams(lam=cfg.cf_lambda, a=cfg.lattice_a)
    rfield = control_freak_r(p)
    trace = PumpTrace.compute(
        rfield, ufield=control_freak_u(p), nk=cfg.k_points, nt=cfg.t_points
    )
    theta = np.array([float(p.theta_fn(t)) for t in trace.t])
    first = trace.t < p.T / 2
    q_d_ref = np.empty_like(theta)
    q_s_ref = np.empty_like(theta)
    q_d_ref[first], q_s_ref[first] = control_freak_bond_charges(
        theta[first], "first"
    )
    q_d_ref[~first], q_s_ref[~first] = control_freak_bond_charges(
        theta[~first], "second"
    )
    write_csv(
        os.path.join(out, "controlfreak_bonds.csv"),
        ("t", "theta", "Q_d_closed", "Q_s_closed", "Q_d_numeric", "Q_s_numeric"),
        (trace.t, theta, q_d_ref, q_s_ref, trace.q_pump_d, trace.q_pump_s),
        cfg.comment(),
    )
    err = max(
        float(np.max(np.abs(trace.q_pump_d - q_d_ref))),
        float(np.max(np.abs(trace.q_pump_s - q_s_ref))),
    )
    check.info("max |closed form - numeric| = %.3e" % err)
    check.gate("bond charges match closed forms", err < 1e-3)
    check.gate(
        "both bonds reach 1 at t=T",
        abs(trace.q_pump_d[-1] - 1.0) <= 1e-3
        and abs(trace.q_pump_s[-1] - 1.0) <= 1e-3,
        "Q_d(T) = %.6f, Q_s(T) = %.6f" % (trace.q_pump_d[-1], trace.q_pump_s[-1]),
    )
    if cfg.format == "csv+svg":
        plot = LinePlot(title="bond-resolved pumped charge", xlabel="t", ylabel="Q")
        plot.add(trace.t, q_d_ref, "Q_d closed")
        plot.add(trace.t, q_s_ref, "Q_s closed")
        plot.add(trace.t, trace.q_pump_d, "Q_d numeric", dash="6,3")
        plot.add(trace.t, trace.q_pump_s, "Q_s numeric", dash="6,3")
        plot.write(os.path.join(out, "controlfreak_bonds.svg"))
    return check.exit_code()


def run_inverse(cfg, out):
    check = _Check("inverse")
    c0 = inverse.NNCoefficients.from_rm(cfg.rm_params(), n_harmonics=cfg.harmonics)
    sol = inverse.optimize(
        c0,
        nk=cfg.k_points,
        ode_steps=cfg.ode_steps,
        e_threshold=cfg.e_threshold,
        gap_min=cfg.gap_min,
        max_iter=cfg.max_iter,
    )
    check.info(
        "optimizer: %s (E/N_k = %.3e, margin = %.3f, %d iterations, %.1f s)"
        % (sol.message, sol.e_per_k, sol.margin, sol.nit, sol.elapsed)
    )

    # verification pass at node resolution compatible with t_points rows
    stride = max(1, cfg.ode_steps // cfg.t_points)
    ver = inverse.verify_solution(
        sol.coefficients, nk=cfg.k_points, steps=stride * cfg.t_points, stride=stride
    )
    ufield = inverse.nn_field(sol.coefficients)
    trace = transport.pump_trace_from_rhat(ufield, ver.times, ver.rhat)
    ks = transport.k_grid(ufield, cfg.k_points)
    u_nodes = transport.sample_field(ufield, ks, ver.times)
    min_r = np.min(np.sum(u_nodes * ver.rhat, axis=-1), axis=1)

    inverse.save_solution(
        os.path.join(out, "solution.json"),
        sol.coefficients,
        diagnostics={
            "converged": sol.converged,
            "e_per_k": sol.e_per_k,
            "margin": sol.margin,
            "nit": sol.nit,
            "nfev": sol.nfev,
            "message": sol.message,
            "verify_e_per_k": ver.e_per_k,
            "verify_margin": ver.margin,
            "chern_flux": ver.chern_flux,
            "config": cfg.hash(),
        },
    )
    write_csv(
        os.path.join(out, "e_history.csv"),
        ("iteration", "e_per_k"),
        (np.arange(sol.e_history.size), sol.e_history / cfg.k_points),
        cfg.comment(),
    )
    write_csv(
        os.path.join(out, "minr_trace.csv"),
        ("t", "min_k_R"),
        (ver.times, min_r),
        cfg.comment(),
    )
    trace.write_csv(os.path.join(out, "pump_trace.csv"), comment=cfg.comment())

    if cfg.format == "csv+svg":
        ik = int(np.argmin(np.abs(ks - cfg.k_slice)))
        plot = LinePlot(
            title="drive and spin at k = %.3f" % ks[ik], xlabel="t", ylabel="components"
        )
        for i, name in enumerate("xyz"):
            plot.add(ver.times, u_nodes[:, ik, i], "u_%s" % name)
        for i, name in enumerate("xyz"):
            plot.add(ver.times, ver.rhat[:, ik, i], "rhat_%s" % name, dash="4,3")
        plot.write(os.path.join(out, "components.svg"))
        hist = LinePlot(title="optimizer progress", xlabel="iteration",
                        ylabel="log10(E/N_k)")
        hist.add(
            np.arange(sol.e_history.size),
            np.log10(np.maximum(sol.e_history / cfg.k_points, 1e-300)),
            "best so far",
        )
        hist.write(os.path.join(out, "e_history.svg"))
        pump = LinePlot(title="reconstructed pumped charge", xlabel="t", ylabel="Q")
        pump.add(trace.t, trace.q_pump, "Q_pump")
        pump.add(ver.times, min_r, "min_k R", dash="4,3")
        pump.write(os.path.join(out, "pump_trace.svg"))

    check.gate(
        "boundary error below threshold",
        sol.e_per_k < cfg.e_threshold,
        "E/N_k = %.3e" % sol.e_per_k,
    )
    check.gate(
        "gap margin above floor",
        ver.margin > cfg.gap_min,
        "min_k,t R = %.4f" % ver.margin,
    )
    check.gate(
        "reconstructed charge quantized",
        abs(trace.q_pump[-1] - 1.0) <= 0.01,
        "Q_pump(T) = %.6f" % trace.q_pump[-1],
    )
    return check.exit_code()


def run_realspace(cfg, out):
    check = _Check("realspace")
    rfield = rm_bloch_field(cfg.rm_params())
    drive = transitionless_bloch_field(rfield)

    rep = realspace.continuity_residual(
        drive,
        realspace.Chain(cfg.n_cells, cfg.lattice_a),
        steps=cfg.chain_steps,
        check_stride=cfg.check_stride,
    )
    write_csv(
        os.path.join(out, "residual_trace.csv"),
        ("t", "residual"),
        (rep.times, rep.residuals),
        cfg.comment(),
    )
    check.gate(
        "continuity residual below threshold",
        rep.max_residual < cfg.residual_threshold,
        "max %.3e on N=%d, dt=T/%d" % (rep.max_residual, cfg.n_cells, cfg.chain_steps),
    )
    check.info("filled-band charge drift = %.3e" % rep.charge_drift)

    cd_drive = cd_bloch_field(rfield)
    ranges, amps = realspace.hopping_decay(cd_drive, n_cells=cfg.decay_cells)
    write_csv(
        os.path.join(out, "decay_profile.csv"),
        ("range_cells", "max_amplitude"),
        (ranges, amps),
        cfg.comment(),
    )
    xi = realspace.decay_length(ranges, amps)
    check.info("hopping decay length = %.3f cells" % xi)
    ratio = amps[cfg.decay_range] / amps[1]
    check.gate(
        "hopping amplitude ratio below threshold",
        ratio < cfg.locality_threshold,
        "amp(%d)/amp(1) = %.3e" % (cfg.decay_range, ratio),
    )

    nn = inverse.nn_field(inverse.NNCoefficients.from_rm(cfg.rm_params()))
    nn_ranges, nn_amps = realspace.hopping_decay(nn, n_cells=cfg.decay_cells)
    write_csv(
        os.path.join(out, "nn_decay_profile.csv"),
        ("range_cells", "max_amplitude"),
        (nn_ranges, nn_amps),
        cfg.comment(),
    )
    beyond = float(np.max(nn_amps[2:]))
    check.gate(
        "NN-constrained drive has no long-range terms",
        beyond < 1e-12,
        "max beyond-NN amplitude = %.3e" % beyond,
    )

    if cfg.format == "csv+svg":
        prof = LinePlot(title="hopping decay", xlabel="range (cells)",
                        ylabel="log10 amplitude")
        prof.add(ranges[1:], np.log10(np.maximum(amps[1:], 1e-300)), "CD drive")
        prof.add(nn_ranges[1:], np.log10(np.maximum(nn_amps[1:], 1e-300)),
                 "NN ansatz", dash="4,3")
        prof.write(os.path.join(out, "decay_profile.svg"))
        res = LinePlot(title="continuity residual", xlabel="t",
                       ylabel="log10 residual")
        res.add(rep.times, np.log10(np.maximum(rep.residuals, 1e-300)), "residual")
        res.write(os.path.join(out, "residual_trace.svg"))
    return check.exit_code()


_RUNNERS = {
    "forward": run_forward,
    "controlfreak": run_controlfreak,
    "inverse": run_inverse,
    "realspace": run_realspace,
}


class _Parser(argparse.ArgumentParser):
    """argparse with config-error exit semantics (3, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, "%s: error: %s\n" % (self.prog, message))


def build_parser():
    parser = _Parser(prog="cdpump", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name, help_text in (
        ("forward", "pump the reference protocol with the CD drive"),
        ("controlfreak", "analytic bond-charge protocol vs closed forms"),
        ("inverse", "optimize the NN harmonic ansatz and verify it"),
        ("realspace", "chain continuity residual and hopping locality"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="flat key=value config file")
        p.add_argument("--out", metavar="DIR", help="artifact directory")
        p.add_argument("--no-cd", action="store_true",
                       help="disable the counter-diabatic term (forward)")
        p.add_argument("--omega", type=float, help="driving rate")
        p.add_argument("--k-points", type=int, help="k-grid size")
        p.add_argument("--t-points", type=int, help="time-grid size")
        p.add_argument("--harmonics", type=int, help="ansatz harmonics (inverse)")
        p.add_argument("--format", choices=("csv", "csv+svg"), help="artifact formats")
    return parser


def build_config(args):
    cfg = RunConfig(subcommand=args.subcommand)
    if args.config:
        cfg = load_config_file(args.config, cfg)
    overrides = {}
    if args.no_cd:
        overrides["cd"] = False
    for flag, key in (
        ("omega", "omega"),
        ("k_points", "k_points"),
        ("t_points", "t_points"),
        ("harmonics", "harmonics"),
        ("format", "format"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    return replace(cfg, **overrides).validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return 3
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 3
    out = args.out or ("out-%s" % cfg.subcommand)
    os.makedirs(out, exist_ok=True)
    try:
        return _RUNNERS[cfg.subcommand](cfg, out)
    except GapClosureError as exc:
        print("[%s] gap closure: %s" % (cfg.subcommand, exc), file=sys.stderr)
        return 2
    except QuantizationError as exc:
        print("[%s] quantization failure: %s" % (cfg.subcommand, exc), file=sys.stderr)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
