"""Limits of scaled correlators along explicit lambda-sequences and their classification.

Limits are taken along geometric sequences ``lambda_k = lambda0 * q**(k + phase)``
and extrapolated with Aitken's Delta^2 process.  Subsequence dependence of
the limit is probed by running sequences with different phases.  A
classification compares limit two-point and commutator data over a finite
probe set, so a verdict is an approximation relative to that set.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _momentum, wightman
from ._momentum import DEFAULT_OPTIONS
from ._parallel import pmap
from ._validation import check_positive
from .errors import DomainError, NumericalError
from .estimators import AitkenExtrapolator
from .rgflow import ScalingOrbit, scaled_w2
from .spectral import free_field
from .testfn import is_real

CLASSES = ("Classical", "Quantum", "Degenerate", "Inconclusive")
APPROXIMATION_NOTE = (
    "classes compare limit two-point and commutator data over the supplied probe set; "
    "equality of those data stands in for isomorphy of limit theories"
)


@dataclass(frozen=True)
class LambdaSequence:
    """``lambda_k = lambda0 * ratio**(k + phase)`` for ``k = 0 .. length-1``."""

    lambda0: float = 1.0
    ratio: float = 0.5
    length: int = 10
    phase: float = 0.0

    def __post_init__(self):
        check_positive(self.lambda0, "lambda0")
        if not 0 < self.ratio < 1:
            raise DomainError("sequence ratio must lie in (0, 1)")
        if int(self.length) != self.length or self.length < 6:
            raise DomainError("sequence length must be an integer >= 6")
        if not 0 <= self.phase < 1:
            raise DomainError("sequence phase must lie in [0, 1)")

    @property
    def lambdas(self):
        k = np.arange(self.length)
        return self.lambda0 * self.ratio ** (k + self.phase)

    def to_dict(self):
        return {"lambda0": self.lambda0, "ratio": self.ratio, "length": self.length, "phase": self.phase}


@dataclass(frozen=True)
class Thresholds:
    conv: float = 1e-4
    triv: float = 1e-3
    deg: float = 1e-2

    def __post_init__(self):
        for name in ("conv", "triv", "deg"):
            check_positive(getattr(self, name), f"threshold {name}")

    def scaled(self, factor):
        return Thresholds(self.conv * factor, self.triv * factor, self.deg * factor)

    def to_dict(self):
        return {"conv": self.conv, "triv": self.triv, "deg": self.deg}


@dataclass(frozen=True)
class LimitEstimate:
    lambdas: tuple
    values: tuple
    errors: tuple
    limit: complex
    error: float
    converged: bool
    accelerated: tuple = ()
    reference: float = 0.0

    def to_dict(self):
        return {
            "limit": [self.limit.real, self.limit.imag],
            "error": self.error,
            "converged": self.converged,
            "reference_scale": self.reference,
            "lambdas": list(self.lambdas),
            "values": [[v.real, v.imag] for v in self.values],
            "errors": list(self.errors),
        }


def sequence_limit(lambdas, values, errors=None, tol=1e-4, reference=None):
    """Aitken-extrapolated limit of sampled values (failed samples as ``nan``)."""
    values = np.asarray(values, dtype=complex)
    errors = np.zeros(len(values)) if errors is None else np.asarray(errors, dtype=float)
    if not np.any(np.isfinite(values)):
        raise NumericalError("every sequence point failed", lambdas=list(map(float, lambdas)))
    est = AitkenExtrapolator(tol=tol, reference=reference).fit(lambdas, values, errors)
    limit = est.limit_ if np.isfinite(est.limit_) else complex("nan")
    return LimitEstimate(
        lambdas=tuple(float(x) for x in lambdas),
        values=tuple(complex(v) for v in values),
        errors=tuple(float(e) for e in errors),
        limit=limit,
        error=est.error_,
        converged=est.converged_,
        accelerated=tuple(complex(a) for a in est.accelerated_),
        reference=float(reference or 0.0),
    )


def probe_scale(model, orbit_f, orbit_g, options=DEFAULT_OPTIONS):
    """Cauchy-Schwarz magnitude ``N_f N_g sqrt(W(f,f) W(g,g))`` at ``lambda = 1``."""
    ff = scaled_w2(model, orbit_f, orbit_f, 1.0, options).value.real
    gg = scaled_w2(model, orbit_g, orbit_g, 1.0, options).value.real
    return math.sqrt(max(ff, 0.0) * max(gg, 0.0))


def _safe(fn):
    try:
        return fn()
    except NumericalError:
        return None


def _unpack(tv):
    return (complex("nan"), math.inf) if tv is None else (tv.value, tv.abs_error)


def limit_correlator(model, orbit_f, orbit_g, seq, tol=1e-4, reference=None, options=DEFAULT_OPTIONS):
    """Limit of ``N^F N^G w2(f_lambda, g_lambda)`` along ``seq``."""
    lambdas = seq.lambdas
    if reference is None:
        reference = probe_scale(model, orbit_f, orbit_g, options)
    points = pmap(lambda lam: _safe(lambda: scaled_w2(model, orbit_f, orbit_g, lam, options)), lambdas)
    vals, errs = zip(*map(_unpack, points))
    return sequence_limit(lambdas, vals, errs, tol, reference)


@dataclass(frozen=True)
class EvidenceRow:
    """Raw scaled values of one probe along one sequence for one quantity."""

    probe: int
    sequence: int
    quantity: str
    lambdas: tuple
    values: tuple
    errors: tuple
    reference: float

    def estimate(self, tol):
        return sequence_limit(self.lambdas, self.values, self.errors, tol, self.reference)


@dataclass(frozen=True)
class Verdict:
    cls: str
    evidence: tuple
    thresholds: Thresholds
    n_sequences: int
    limits: tuple = ()
    inter_sequence_gap: float = 0.0
    failing: tuple = ()
    warnings: tuple = ()
    note: str = APPROXIMATION_NOTE

    def recompute(self, thresholds=None):
        return decide(self.evidence, thresholds or self.thresholds, self.n_sequences)

    def to_dict(self):
        return {
            "class": self.cls,
            "thresholds": self.thresholds.to_dict(),
            "n_sequences": self.n_sequences,
            "inter_sequence_gap": self.inter_sequence_gap,
            "limits": [dict(row) for row in self.limits],
            "failing": [list(x) for x in self.failing],
            "warnings": list(self.warnings),
            "note": self.note,
        }


def decide(evidence, thresholds, n_sequences):
    """The classification rule, a pure function of the raw evidence.

    Every row is extrapolated at tolerance ``thresholds.conv``; any
    non-converged row makes the verdict Inconclusive.  Degenerate when some
    probe's limits across sequences differ by more than ``thresholds.deg``
    relative to the largest of them (or to the probe's reference scale when
    all are trivially small).  Classical when every limit is at most
    ``thresholds.triv`` times the reference scale.  Quantum otherwise.
    """
    limits = []
    failing = []
    for row in evidence:
        est = row.estimate(thresholds.conv)
        limits.append({
            "probe": row.probe,
            "sequence": row.sequence,
            "quantity": row.quantity,
            "limit_re": est.limit.real,
            "limit_im": est.limit.imag,
            "error": est.error,
            "converged": est.converged,
            "reference_scale": row.reference,
        })
        if not est.converged:
            failing.append((row.probe, row.sequence, row.quantity))
    warnings = []
    if n_sequences < 2:
        warnings.append("single sequence: subsequence dependence (Degenerate) cannot be detected")
    if failing:
        return Verdict("Inconclusive", tuple(evidence), thresholds, n_sequences, tuple(limits), math.nan, tuple(failing), tuple(warnings))

    groups = {}
    for row in limits:
        groups.setdefault((row["probe"], row["quantity"]), []).append(row)
    gap = 0.0
    trivial = True
    for rows in groups.values():
        ref = rows[0]["reference_scale"]
        mags = [abs(complex(r["limit_re"], r["limit_im"])) for r in rows]
        trivial = trivial and all(m <= thresholds.triv * ref for m in mags)
        scale = max(mags)
        if scale <= thresholds.triv * ref:
            scale = ref
        for a, b in itertools.combinations(rows, 2):
            diff = abs(complex(a["limit_re"], a["limit_im"]) - complex(b["limit_re"], b["limit_im"]))
            gap = max(gap, diff / scale if scale > 0 else 0.0)
    if n_sequences >= 2 and gap > thresholds.deg:
        cls = "Degenerate"
    elif trivial:
        cls = "Classical"
    else:
        cls = "Quantum"
    return Verdict(cls, tuple(evidence), thresholds, n_sequences, tuple(limits), gap, (), tuple(warnings))


def collect_evidence(model, probes, sequences, options=DEFAULT_OPTIONS):
    """Scaled ``W(f,g)`` and ``sigma(f,g)`` rows for every probe and sequence.

    For real ``f``, ``g`` hermiticity gives ``W(g, f) = conj W(f, g)``, so
    ``sigma(f, g) = 2 Im W(f, g)`` comes from the same samples.
    """
    for f, g in probes:
        if not (is_real(f.base) and is_real(g.base)):
            raise DomainError("classification probes need real base functions")
    refs = pmap(lambda pr: probe_scale(model, pr[0], pr[1], options), probes)
    jobs = [(i, j, lam) for i in range(len(probes)) for j in range(len(sequences)) for lam in sequences[j].lambdas]
    points = pmap(lambda job: _unpack(_safe(lambda: scaled_w2(model, *probes[job[0]], job[2], options))), jobs)
    rows = []
    for i in range(len(probes)):
        for j, seq in enumerate(sequences):
            pts = [pt for job, pt in zip(jobs, points) if job[:2] == (i, j)]
            lambdas = tuple(float(x) for x in seq.lambdas)
            vals = tuple(v for v, _ in pts)
            errs = tuple(e for _, e in pts)
            rows.append(EvidenceRow(i, j, "w2", lambdas, vals, errs, refs[i]))
            sig = tuple(complex(2 * v.imag) if np.isfinite(v) else complex("nan") for v in vals)
            rows.append(EvidenceRow(i, j, "sigma", lambdas, sig, tuple(2 * e for e in errs), refs[i]))
    return rows


def classify(model, probes, sequences, thresholds=Thresholds(), options=DEFAULT_OPTIONS):
    """Classify the scaling limit over ``probes`` (pairs of orbits) and ``sequences``."""
    if not probes:
        raise DomainError("classification needs at least one probe pair")
    if not sequences:
        raise DomainError("classification needs at least one lambda sequence")
    phases = [s.phase for s in sequences]
    if len(set(phases)) != len(phases):
        raise DomainError("sequence phases must be distinct")
    evidence = collect_evidence(model, probes, sequences, options)
    return decide(evidence, thresholds, len(sequences))


@dataclass(frozen=True)
class MasslessComparison:
    Z: float
    residual: float
    per_probe: tuple

    def to_dict(self):
        return {"Z": self.Z, "residual": self.residual, "per_probe": list(self.per_probe)}


def compare_to_massless(limits, pairs, options=DEFAULT_OPTIONS):
    """Fit ``L(f, g) ~ Z W_0(f, g)`` with one ``Z > 0`` over probe pairs of base functions.

    Returns the fitted ``Z`` and the largest relative residual
    ``|L - Z W_0| / |Z W_0|``.
    """
    if len(limits) != len(pairs) or not pairs:
        raise DomainError("need one limit per probe pair and at least one pair")
    pairs = [(f.base, g.base) if isinstance(f, ScalingOrbit) else (f, g) for f, g in pairs]
    massless = free_field(pairs[0][0].dim, 0.0)
    w0 = np.array(pmap(lambda fg: wightman.w2(massless, fg[0], fg[1], options).value, pairs))
    L = np.asarray(limits, dtype=complex)
    norm = float(np.sum(np.abs(w0) ** 2))
    if norm <= 1e-300 * max(1.0, float(np.sum(np.abs(L) ** 2))):
        raise NumericalError("massless values vanish on every probe; Z is undetermined")
    Z = float(np.real(np.sum(np.conj(w0) * L)) / norm)
    if not Z > 0:
        raise NumericalError("fitted massless normalization is not positive", Z=Z)
    rel = np.abs(L - Z * w0) / np.maximum(np.abs(Z * w0), 1e-300)
    return MasslessComparison(Z, float(rel.max()), tuple(float(r) for r in rel))


def dilation_check(model, orbit_f, orbit_g, seq, mus=(0.5, 2.0), tol=1e-2, conv=1e-4, options=DEFAULT_OPTIONS):
    """Compare limits of dilated orbit pairs with the ``mu**(d + 2)`` law.

    The dilation acts on the base functions; each orbit keeps its
    renormalization model.
    """
    d = model.dim
    base = limit_correlator(model, orbit_f, orbit_g, seq, conv, options=options)
    rows = []
    status = "pass"
    for mu in mus:
        mu = check_positive(mu, "dilation")
        est = limit_correlator(model, orbit_f.rescaled(mu), orbit_g.rescaled(mu), seq, conv, options=options)
        predicted = mu ** (d + 2) * base.limit
        dev = abs(est.limit - predicted) / max(abs(predicted), 1e-300)
        ok = dev <= tol
        if not (est.converged and base.converged):
            status = "Inconclusive"
        elif not ok and status == "pass":
            status = "fail"
        rows.append({"mu": mu, "limit_re": est.limit.real, "limit_im": est.limit.imag,
                     "predicted_re": predicted.real, "predicted_im": predicted.imag,
                     "rel_deviation": dev, "converged": est.converged, "passed": bool(ok)})
    return {"status": status, "tol": tol, "exponent": d + 2,
            "base_limit": [base.limit.real, base.limit.imag], "rows": rows}


def _band_basis(f, g, times, bands, options, nodes=64):
    """Positive- and negative-energy basis functions on energy bands of the massless shell.

    Column ``j`` (``j < bands``) is ``integral over band j of conj(f^) g^ exp(+i E t)``
    with the invariant measure; column ``bands + j`` has ``exp(-i E t)``.
    """
    d = f.dim
    R, angular, radial = _momentum.envelope([f, g], options)
    nr, nth, nph = _momentum._counts(d, options, angular, radial, 1)
    dirs, wdir = _momentum._directions(d, nth, nph)
    norm = (2 * np.pi) ** (-(d - 1))

    def radial_density(p):
        pvec = (p[:, None, None] * dirs[None, :, :]).reshape(-1, d - 1)
        omega = np.repeat(p, len(wdir))
        q = _momentum.shell_momenta(omega, pvec)
        vals = (np.conj(f.fourier_euclid(q)) * g.fourier_euclid(q)).reshape(len(p), len(wdir))
        return norm * 0.5 * p ** (d - 3) * (vals @ wdir)

    p, wp = _momentum._gl(nr, 0.0, R)
    h = radial_density(p)
    cum = np.cumsum(np.abs(h) * wp)
    cum /= cum[-1]
    top = p[min(np.searchsorted(cum, 1 - 1e-13), len(p) - 1)]
    edges = np.linspace(0.0, top, bands + 1)
    edges[-1] = R
    t = np.asarray(times, dtype=float)
    cols = []
    for sign in (1, -1):
        for a, b in zip(edges[:-1], edges[1:]):
            e, we = _momentum._gl(nodes, a, b)
            he = radial_density(e) * we
            cols.append(np.exp(sign * 1j * np.outer(t, e)) @ he)
    return np.stack(cols, axis=1), edges


def spectral_fit(times, values, f, g, bands=4, tol=1e-2, max_condition=1e10, options=DEFAULT_OPTIONS):
    """Fit ``values(t)`` with real weights on positive/negative-energy massless band modes.

    Passes when the relative residual is at most ``tol``, positive-energy
    weights are nonnegative and negative-energy weights vanish.  Both sign
    tests are made on each band's contribution to the data (weight times
    column norm) relative to the largest contribution, up to ``tol``; bands
    that carry almost no spectral mass then cannot fail on noise.
    """
    times = np.asarray(times, dtype=float)
    L = np.asarray(values, dtype=complex)
    B, edges = _band_basis(f, g, times, bands, options)
    A = np.concatenate([B.real, B.imag])
    y = np.concatenate([L.real, L.imag])
    norms = np.linalg.norm(A, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    cond = float(np.linalg.cond(A / norms))
    if not np.isfinite(cond) or cond > max_condition:
        return {"status": "Inconclusive", "condition_number": cond, "reason": "ill-conditioned band fit"}
    contrib, *_ = np.linalg.lstsq(A / norms, y, rcond=None)
    rho = contrib / norms
    fit = B @ rho
    residual = float(np.max(np.abs(fit - L)) / max(np.max(np.abs(L)), 1e-300))
    pos, neg = rho[:bands], rho[bands:]
    cmax = max(float(np.max(np.abs(contrib))), 1e-300)
    positive = bool(np.all(contrib[:bands] >= -tol * cmax) and np.all(np.abs(contrib[bands:]) <= tol * cmax))
    ok = positive and residual <= tol
    return {
        "status": "pass" if ok else "fail",
        "residual": residual,
        "positive_weight": positive,
        "weights_positive_energy": pos.tolist(),
        "weights_negative_energy": neg.tolist(),
        "contributions": contrib.tolist(),
        "band_edges": edges.tolist(),
        "condition_number": cond,
        "tol": tol,
    }


def time_reflected(values):
    """The dataset ``t -> L(-t)`` on a symmetric time grid (a negative-energy counterexample)."""
    return np.asarray(values, dtype=complex)[::-1].copy()


def spectrum_condition_check(model, orbit_f, orbit_g, seq, times, bands=4, tol=1e-2, conv=1e-4, options=DEFAULT_OPTIONS):
    """Limits of ``(f, translate(g, t e_0))`` over a symmetric time grid, fitted to positive-energy modes."""
    times = np.asarray(times, dtype=float)
    if not np.allclose(times, -times[::-1]):
        raise DomainError("time grid must be symmetric about 0")
    e0 = np.zeros(model.dim)
    e0[0] = 1.0
    ests = [limit_correlator(model, orbit_f, orbit_g.translated(t * e0), seq, conv, options=options) for t in times]
    if not all(e.converged for e in ests):
        return {"status": "Inconclusive", "reason": "limit did not converge",
                "failing_times": [float(t) for t, e in zip(times, ests) if not e.converged]}
    values = np.array([e.limit for e in ests])
    report = spectral_fit(times, values, orbit_f.base, orbit_g.base, bands, tol, options=options)
    report["times"] = times.tolist()
    report["limits"] = [[v.real, v.imag] for v in values]
    return report


EVIDENCE_COLUMNS = ("probe_id", "sequence_id", "quantity", "lambda", "re", "im", "err")


def evidence_rows(evidence):
    for row in evidence:
        for lam, v, e in zip(row.lambdas, row.values, row.errors):
            yield (row.probe, row.sequence, row.quantity, lam, complex(v).real, complex(v).imag, e)


def evidence_csv(evidence, fmt=".12g"):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVIDENCE_COLUMNS)
    for r in evidence_rows(evidence):
        w.writerow([r[0], r[1], r[2]] + [format(x, fmt) for x in r[3:]])
    return buf.getvalue()


def with_thresholds(verdict, factor):
    """Re-run the decision rule with every threshold multiplied by ``factor``."""
    return verdict.recompute(replace(verdict.thresholds).scaled(factor))
