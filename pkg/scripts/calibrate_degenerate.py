"""Pick the power-law exponent of the log-periodic example model.

Scans ``a`` upward and reports the first value whose classification over the
standard probe set is Degenerate with an inter-sequence gap of at least
5 * tau_deg.  The remaining parameters are fixed below; the chosen value is
what ``configs/classify_degenerate.yaml`` carries.

    python scripts/calibrate_degenerate.py [--threads N]
"""

import argparse
import time

import numpy as np

from scalinglab import scalinglimit as sl
from scalinglab._parallel import threads
from scalinglab.rgflow import PowerLaw, ScalingOrbit
from scalinglab.spectral import log_periodic_gff
from scalinglab.testfn import TestFunction, translate

D, EPS, TAU, M_REF, SUPPORT, NODES = 4, 0.5, 4.0, 1.0, (1e-3, 1e7), 256
SHIFTS = ([0, 0, 0, 0], [1.0, 0, 0, 0], [0.5, 0.5, 0, 0])
GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    th = sl.Thresholds()
    f0 = TestFunction.gaussian(np.zeros(D), np.ones(D))
    seqs = [sl.LambdaSequence(1.0, 1 / TAU, 6, phase) for phase in (0.0, 0.5)]
    with threads(args.threads):
        for a in GRID:
            t = time.time()
            model = log_periodic_gff(D, a, EPS, TAU, M_REF, SUPPORT, nodes=NODES)
            renorm = PowerLaw(1.0, -(D + 1 - 2 * a) / 2)
            probes = [(ScalingOrbit(f0, renorm), ScalingOrbit(translate(f0, s), renorm)) for s in SHIFTS]
            v = sl.classify(model, probes, seqs, th)
            print(f"a={a:<5} class={v.cls:<12} gap={v.inter_sequence_gap:.4g} ({time.time() - t:.0f}s)", flush=True)
            if v.cls == "Degenerate" and v.inter_sequence_gap >= 5 * th.deg:
                print(f"chosen a = {a}")
                return


if __name__ == "__main__":
    main()
