"""Mass-shell quadrature for integrals of the form

    integral d^{d-1}p / (2 omega_p) F(omega_p, p),   omega_p = sqrt(|p|^2 + m^2).

Radial variable: rapidity ``chi`` with ``|p| = m sinh chi`` when ``m > 0``
(the measure becomes ``1/2 m^{d-2} sinh^{d-2} chi d chi d Omega`` and stays
smooth however small ``m`` is), plain ``|p|`` when ``m = 0``.  Angular
variable: uniform azimuth (d = 3) or Gauss–Legendre in ``cos theta`` times
uniform azimuth (d = 4).  Node counts adapt to the packets' momentum spread
and phase oscillation; the error estimate compares against the rule with
half the nodes in every direction.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError


@dataclass(frozen=True)
class QuadratureOptions:
    radial_nodes: int = 256
    theta_nodes: int = 4
    phi_nodes: int = 8
    rtol: float = 1e-10
    atol: float = 1e-300
    max_refinements: int = 3
    tail_efolds: float = 45.0


DEFAULT_OPTIONS = QuadratureOptions()

# bound on nodes evaluated at once (memory: a few hundred bytes per node)
MAX_BLOCK_NODES = 2**20


@functools.lru_cache(maxsize=64)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _gl(n, a, b):
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1), half * w


def _directions(d, nth, nph):
    """Unit vectors and weights integrating over the (d-2)-sphere."""
    if d == 2:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    phi = 2 * np.pi * (np.arange(nph) + 0.5) / nph
    wphi = np.full(nph, 2 * np.pi / nph)
    if d == 3:
        return np.stack([np.cos(phi), np.sin(phi)], -1), wphi
    ct, wct = _gl(nth, -1.0, 1.0)
    st = np.sqrt(1 - ct**2)
    n = np.stack(
        [
            (st[:, None] * np.cos(phi)[None, :]).ravel(),
            (st[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(ct, nph),
        ],
        -1,
    )
    return n, (wct[:, None] * wphi[None, :]).ravel()


def _radial_rule(d, m, R, nr):
    """Radial nodes ``(omega, |p|, weight)`` including the shell measure factor."""
    if m > 0:
        X = math.asinh(R / m)
        if d == 2:
            chi, wchi = _gl(nr, -X, X)
            return m * np.cosh(chi), m * np.sinh(chi), 0.5 * wchi
        chi, wchi = _gl(nr, 0.0, X)
        return m * np.cosh(chi), m * np.sinh(chi), 0.5 * m ** (d - 2) * np.sinh(chi) ** (d - 2) * wchi
    p, wp = _gl(nr, 0.0, R)
    return p, p, 0.5 * p ** (d - 3) * wp


def mode_blocks(d, m, R, nr, nth, nph, max_nodes=MAX_BLOCK_NODES):
    """Nodes ``(omega, pvec)`` and weights for the invariant measure on ``|p| <= R``,
    yielded in radial blocks of at most ``max_nodes`` points."""
    omega_r, p, radial_w = _radial_rule(d, m, R, nr)
    if d == 2:
        yield omega_r, p[:, None], radial_w
        return
    dirs, wdir = _directions(d, nth, nph)
    step = max(1, max_nodes // len(wdir))
    for lo in range(0, nr, step):
        sl = slice(lo, lo + step)
        pvec = (p[sl, None, None] * dirs[None, :, :]).reshape(-1, d - 1)
        omega = np.repeat(omega_r[sl], len(wdir))
        yield omega, pvec, (radial_w[sl, None] * wdir[None, :]).ravel()


def mode_rule(d, m, R, nr, nth, nph):
    """All nodes of :func:`mode_blocks` at once."""
    blocks = list(mode_blocks(d, m, R, nr, nth, nph, max_nodes=2**62))
    return blocks[0]


def shell_momenta(omega, pvec):
    """Euclidean frequency ``q = eta p`` on the shell, as used by ``fourier_euclid``."""
    return np.concatenate([omega[:, None], -pvec], axis=1)


# The anisotropy bound in ``envelope`` is worst-case; Gaussian weighting
# makes the integrand resolvable with about a third of it (the half-rule
# check still guards every result).
ANISO_FACTOR = 0.35


def envelope(fs, options=DEFAULT_OPTIONS):
    """Momentum cutoff ``R`` and angular/radial bandwidths for a set of test functions.

    ``fs`` lists the functions whose Fourier transforms are multiplied in the
    integrand.
    """
    packets = [p for f in fs for p in f.terms]
    deg = sum(f.degree for f in fs)
    kmax = max(np.linalg.norm(p.k0) for p in packets)
    lam_min = min(np.linalg.eigvalsh(p.Sigma)[0] for p in packets)
    # product decays at least as fast as the slowest single-packet Gaussian
    R = kmax + math.sqrt(2 * (options.tail_efolds + 2 * deg) / lam_min)
    centers = np.array([p.x0 for p in packets])
    span = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1).max()
    spatial_span = np.linalg.norm(centers[:, None, 1:] - centers[None, :, 1:], axis=-1).max()

    def packet_bandwidth(p):
        S = p.Sigma
        ev = np.linalg.eigvalsh(S[1:, 1:]) if p.dim > 2 else np.zeros(1)
        # exp(-A cos^2) carries harmonics up to ~sqrt(A * efolds); weighting by
        # the radial Gaussian caps the useful A, giving efolds * sqrt(spread ratio)
        ratio = (ev[-1] - ev[0] + 2 * np.linalg.norm(S[0, 1:])) / np.linalg.eigvalsh(S)[0]
        return options.tail_efolds * math.sqrt(ratio) + R * np.linalg.norm(S @ p.k0)

    # the integrand multiplies the transforms of fs; each is a sum over its packets
    aniso = sum(max(packet_bandwidth(p) for p in f.terms) for f in fs if f.terms)
    angular = R * spatial_span + ANISO_FACTOR * aniso + deg
    radial = R * span + deg
    return R, angular, radial


def _counts(d, opts, angular, radial, level):
    nr = max(opts.radial_nodes, 2 * int(math.ceil(radial)) + 64) * 2**level
    pad = 8 if angular > 0 else 0
    nth = max(opts.theta_nodes, int(math.ceil(0.6 * angular)) + pad) * 2**level if d == 4 else 1
    nph = max(opts.phi_nodes, 2 * int(math.ceil(angular / 2)) + 2 * pad) * 2**level if d >= 3 else 1
    return nr, nth, nph


def _half(n):
    return max(n // 2, 1)


def _apply(integrand, blocks):
    total, l1 = 0j, 0.0
    for omega, pvec, w in blocks:
        wv = w * integrand(omega, pvec)
        total += complex(np.sum(wv))
        l1 += float(np.sum(np.abs(wv)))
    return total, l1


def shell_integral(d, m, integrand, R, angular, radial, options=DEFAULT_OPTIONS, what="shell integral"):
    """Integrate ``integrand(omega, pvec)`` over the mass shell with error control.

    Returns ``(value, abs_error, l1)`` where ``l1`` is the integral of the
    absolute integrand (the scale for the relative tolerance).
    """
    coarse = None
    for level in range(options.max_refinements + 1):
        nr, nth, nph = _counts(d, options, angular, radial, level)
        fine, l1 = _apply(integrand, mode_blocks(d, m, R, nr, nth, nph))
        if coarse is None:
            coarse, _ = _apply(integrand, mode_blocks(d, m, R, _half(nr), _half(nth) if d == 4 else 1, _half(nph) if d >= 3 else 1))
        err = abs(fine - coarse)
        if err <= options.rtol * l1 + options.atol:
            return fine, err, l1
        coarse = fine
    raise QuadratureError(
        f"{what} did not converge after {options.max_refinements} refinements",
        mass=m,
        error=err,
        scale=l1,
        nodes=(nr, nth, nph),
    )
