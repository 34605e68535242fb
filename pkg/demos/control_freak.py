#!/usr/bin/env python3
"""Fully controlled pump: one bond at a time, closed-form bond charges.

The drive freezes the intercell bond in the first half cycle and the
intracell bond in the second, so each bond charge has a closed form in
the sweep angle theta.  This script checks the numerical traces against
those closed forms for two values of the squeeze parameter lambda and
confirms the transported charge does not depend on it.

Usage: python3 demos/control_freak.py [--out DIR]
"""

import argparse
import os

import numpy as np

from cdpump.protocols import ControlFreakParams, control_freak_r, control_freak_u
from cdpump.svgplot import LinePlot
from cdpump.transport import PumpTrace, chern_number


def closed_forms(p, ts):
    th = np.array([p.theta_fn(t) for t in ts])
    first = ts < 0.5 * p.T
    qd = np.where(first, 0.0, 0.5 * (1.0 + np.cos(th)))
    qs = np.where(first, 0.5 * (1.0 - np.cos(th)), 1.0)
    return th, qd, qs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo-out", help="output directory")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    print("=" * 64)
    print("fully controlled bond-by-bond pump")
    print("=" * 64)
    traces = {}
    for lam in (0.0, 0.8):
        p = ControlFreakParams(lam=lam)
        tr = PumpTrace.compute(control_freak_r(p), ufield=control_freak_u(p), nk=100, nt=100)
        _, qd, qs = closed_forms(p, tr.t)
        disc = max(np.max(np.abs(tr.q_pump_d - qd)), np.max(np.abs(tr.q_pump_s - qs)))
        c = chern_number(control_freak_r(p), nk=60, nt=60)
        print("lambda = %.1f : Chern %+d, Q_pump(T) = %.6f, closed-form gap = %.1e"
              % (lam, c, tr.q_pump[-1], disc))
        traces[lam] = tr

    tr = traces[0.0]
    _, qd, qs = closed_forms(ControlFreakParams(), tr.t)
    plot = LinePlot(title="bond charges, fully controlled pump", xlabel="t", ylabel="charge")
    plot.add(tr.t, tr.q_pump_d, label="Q_d numeric")
    plot.add(tr.t, qd, label="Q_d closed form", dash="5,3")
    plot.add(tr.t, tr.q_pump_s, label="Q_s numeric")
    plot.add(tr.t, qs, label="Q_s closed form", dash="5,3")
    svg = os.path.join(args.out, "control_freak_bonds.svg")
    plot.write(svg)
    print("wrote %s" % svg)


if __name__ == "__main__":
    main()
