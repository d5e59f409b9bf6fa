"""Command-line driver: ``scalinglab limit|classify|emt|stability --config run.yaml``.

Exit codes: 0 success (converged / locally stable), 2 inconclusive or
failed check, 1 computation error, 64 invalid configuration.  Output files
land in ``--out``, else ``$SCALINGLAB_OUT_DIR``, else the config's
``output.dir``.  Every file records the schema version, tool version and
config digest; floats are written with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, curved, rgflow, scalinglimit
from ._parallel import threads
from .errors import ConfigError, DomainError, NumericalError

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 64
OUT_DIR_ENV = "SCALINGLAB_OUT_DIR"
SIG_DIGITS = 12


def _round(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [_round(x.real), _round(x.imag)]
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_round(v) for v in x]
    return x


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), f".{SIG_DIGITS}g")
    return str(x)


class Writer:
    def __init__(self, out_dir, cfg, command):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.meta = {
            "schema_version": cfgmod.SCHEMA_VERSION,
            "tool": "scalinglab",
            "tool_version": __version__,
            "config_sha256": cfg.digest(),
            "command": command,
        }
        self.written = []

    def csv(self, name, header, rows):
        path = self.dir / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in self.meta.items()) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        self.written.append(path)

    def json(self, name, payload):
        path = self.dir / name
        body = dict(self.meta)
        body.update(_round(payload))
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.written.append(path)


def _common(cfg):
    model = cfgmod.build_model(cfg)
    functions = cfgmod.build_functions(cfg, model.dim)
    renorm = cfgmod.build_renorm(cfg, functions)
    return model, functions, renorm, cfgmod.build_options(cfg)


def cmd_limit(cfg, writer):
    model, functions, renorm, options = _common(cfg)
    probes = cfgmod.build_probes(cfg, functions, renorm)
    seq = cfgmod.build_sequences(cfg)[0]
    est = scalinglimit.limit_correlator(model, *probes[0], seq, cfg.tolerances.conv, options=options)
    writer.csv("limit.csv", ("lambda", "re", "im", "err"),
               [(lam, v.real, v.imag, e) for lam, v, e in zip(est.lambdas, est.values, est.errors)])
    writer.json("limit.json", {"probe": list(cfg.probes[0]), "sequence": seq.to_dict(), "estimate": est.to_dict()})
    return EXIT_OK if est.converged else EXIT_INCONCLUSIVE


def cmd_classify(cfg, writer):
    model, functions, renorm, options = _common(cfg)
    probes = cfgmod.build_probes(cfg, functions, renorm)
    seqs = cfgmod.build_sequences(cfg)
    verdict = scalinglimit.classify(model, probes, seqs, cfgmod.build_thresholds(cfg), options)
    for w in verdict.warnings:
        print(f"warning: {w}", file=sys.stderr)
    writer.csv("evidence.csv", scalinglimit.EVIDENCE_COLUMNS, scalinglimit.evidence_rows(verdict.evidence))
    payload = verdict.to_dict()
    payload["probes"] = [list(p) for p in cfg.probes]
    payload["sequences"] = [s.to_dict() for s in seqs]
    writer.json("verdict.json", payload)
    return EXIT_OK


def cmd_emt(cfg, writer):
    if cfg.emt is None:
        raise ConfigError("emt: this command needs an 'emt' section", "emt")
    model, functions, renorm, options = _common(cfg)
    orbit = rgflow.ScalingOrbit(functions[cfg.emt.function], renorm)
    axes = cfg.emt.axes if cfg.emt.axes is not None else list(range(model.dim))
    ident = []
    for lam in cfg.emt.lambdas:
        for nu in axes:
            lhs, rhs = rgflow.emt_identity(model, orbit, lam, nu, options)
            rel = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs - rhs)
            ident.append((lam, nu, lhs, rhs, rel))
    radius_orbit = rgflow.ScalingOrbit(functions[cfg.emt.radius_function or cfg.emt.function], renorm)
    radius = []
    for lam in cfg.emt.radius_lambdas:
        r = rgflow.emt_radius(model, radius_orbit, lam, cfg.emt.quantile, options)
        radius.append((lam, r, lam * r))
    writer.csv("emt_identity.csv", ("lambda", "nu", "lhs", "rhs", "rel_diff"), ident)
    writer.csv("emt_radius.csv", ("lambda", "radius", "lambda_radius"), radius)
    flat = [x[2] for x in radius]
    writer.json("emt.json", {
        "max_rel_diff": max((x[4] for x in ident), default=0.0),
        "quantile": cfg.emt.quantile,
        "lambda_radius_variation": (max(flat) - min(flat)) / min(flat) if flat else 0.0,
    })
    return EXIT_OK


def cmd_stability(cfg, writer):
    state, charts, probes, seq = cfgmod.build_stability(cfg)
    report = curved.local_stability_report(state, charts, probes, seq, cfg.stability.tol, cfg.tolerances.conv)
    report["spacetime"] = state.to_dict()
    writer.json("stability.json", report)
    return EXIT_OK if report["verdict"] == "locally-stable" else EXIT_INCONCLUSIVE


COMMANDS = {"limit": cmd_limit, "classify": cmd_classify, "emt": cmd_emt, "stability": cmd_stability}
HELP = {
    "limit": "extrapolate one scaled two-point function along a lambda sequence",
    "classify": "classify the scaling limit over probe pairs and sequences",
    "emt": "energy-momentum-transfer identity and radius scaling",
    "stability": "local-stability report for a curved-spacetime state",
}


def build_parser():
    ap = argparse.ArgumentParser(prog="scalinglab", description="Scaling limits of free and generalized free field correlators.")
    ap.add_argument("--version", action="version", version=f"scalinglab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_DIR_ENV} and output.dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.environ.get(OUT_DIR_ENV) or cfg.output.dir
    try:
        writer = Writer(out, cfg, args.command)
        with threads(max(1, args.threads)):
            return COMMANDS[args.command](cfg, writer)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NumericalError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
