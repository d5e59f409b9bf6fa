"""Vacuum correlation functions of free and generalized free scalar fields.

Conventions: ``W(f, g) = <phi(f) Omega, phi(g) Omega>`` is antilinear in ``f``
and linear in ``g``; in momentum space (Fourier convention of
:mod:`scalinglab.testfn`)

    W_m(f, g) = (2 pi)^{-(d-1)} integral d^{d-1}p / (2 omega_p) conj(f^(omega_p, p)) g^(omega_p, p).

For real test functions ``W = mu + (i/2) sigma`` with the symmetric part
``mu`` and the commutator pairing ``sigma(f, g) = -i (W(f, g) - W(g, f))``,
so that ``[phi(f), phi(g)] = i sigma(f, g)`` and the Weyl operators
``W(f) = exp(i phi(f))`` obey ``W(f) W(g) = exp(-i sigma(f, g) / 2) W(f + g)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _momentum
from ._momentum import DEFAULT_OPTIONS
from .errors import DomainError, NumericalError
from .spectral import integrate_mass
from .testfn import TestFunction, is_real


@dataclass(frozen=True)
class TwoPointValue:
    value: complex
    abs_error: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and np.isfinite(self.abs_error)):
            raise NumericalError("two-point value is not finite", value=self.value, abs_error=self.abs_error)

    def scaled(self, c):
        return TwoPointValue(self.value * c, self.abs_error * abs(c))


@dataclass(frozen=True)
class WeylWord:
    """Ordered arguments of a product of Weyl operators; all must be real."""

    args: tuple = ()

    def __post_init__(self):
        for g in self.args:
            if not isinstance(g, TestFunction) or not is_real(g):
                raise DomainError("Weyl word arguments must be real-valued test functions")

    def __len__(self):
        return len(self.args)


def _check_pair(d, f, g):
    if f.dim != d or g.dim != d:
        raise DomainError(f"test functions must live in dimension {d}")


def _shell_pair(d, m, f, g, options):
    R, angular, radial = _momentum.envelope([f, g], options)
    if m > R:
        # the whole shell lies beyond the Gaussian tails of both transforms
        return 0j, 0.0

    def integrand(omega, pvec):
        q = _momentum.shell_momenta(omega, pvec)
        return np.conj(f.fourier_euclid(q)) * g.fourier_euclid(q)

    val, err, _ = _momentum.shell_integral(d, m, integrand, R, angular, radial, options, what=f"W_m (m={m:g})")
    norm = (2 * np.pi) ** (-(d - 1))
    return val * norm, err * norm


def w2_mass(d, m, f, g, options=DEFAULT_OPTIONS):
    """Free-field two-point value ``W_m(f, g)`` with quadrature error."""
    if m < 0 or (d == 2 and m == 0):
        raise DomainError("need m >= 0, and m > 0 in d = 2")
    _check_pair(d, f, g)
    if not f.terms or not g.terms:
        return TwoPointValue(0j, 0.0)
    cf, f1 = _factor_amplitude(f)
    cg, g1 = _factor_amplitude(g)
    tv = TwoPointValue(*_shell_pair(d, float(m), f1, g1, options))
    return tv if cf == 1 and cg == 1 else tv.scaled(cf.conjugate() * cg)


@functools.lru_cache(maxsize=8192)
def _w2_cached(model, f, g, options):
    d = model.dim
    mom_err = {}

    def kernel(ms):
        out = np.empty(len(ms), dtype=complex)
        for i, m in enumerate(ms):
            out[i], mom_err[i] = _shell_pair(d, float(m), f, g, options)
        return out

    value, mass_err = integrate_mass(model.measure, kernel)
    _, fine, _ = model.measure.nodes()
    err = mass_err + float(sum(abs(fine[i]) * e for i, e in mom_err.items()))
    return TwoPointValue(value, err)


def _factor_amplitude(f):
    # f = c * f' with the first packet of f' at unit amplitude, so rescaled
    # copies of one function share a cache entry
    c = f.terms[0].amplitude
    if c == 0 or c == 1:
        return 1 + 0j, f
    rest = tuple(replace(p, amplitude=p.amplitude / c) for p in f.terms[1:])
    return c, TestFunction(f.dim, (replace(f.terms[0], amplitude=1 + 0j),) + rest)


def w2(model, f, g, options=DEFAULT_OPTIONS):
    """Two-point value integrated against the model's spectral measure."""
    _check_pair(model.dim, f, g)
    if not f.terms or not g.terms:
        return TwoPointValue(0j, 0.0)
    cf, f1 = _factor_amplitude(f)
    cg, g1 = _factor_amplitude(g)
    tv = _w2_cached(model, f1, g1, options)
    return tv if cf == 1 and cg == 1 else tv.scaled(cf.conjugate() * cg)


def _require_real(*fs):
    for f in fs:
        if not is_real(f):
            raise DomainError("commutator/symmetric parts are defined for real test functions only")


def _residue_check(residue, scale, err, what):
    if abs(residue) > 10 * err + 1e-10 * scale + 1e-300:
        raise NumericalError(f"{what} has an imaginary residue beyond tolerance", residue=residue, scale=scale)


def sigma_mu(model, f, g, options=DEFAULT_OPTIONS):
    """``(sigma(f, g), mu(f, g), error)`` for real ``f``, ``g``."""
    _require_real(f, g)
    a = w2(model, f, g, options)
    b = w2(model, g, f, options)
    err = a.abs_error + b.abs_error
    sigma = -1j * (a.value - b.value)
    mu = 0.5 * (a.value + b.value)
    scale = abs(a.value) + abs(b.value)
    _residue_check(sigma.imag, scale, err, "sigma")
    _residue_check(mu.imag, scale, err, "mu")
    return float(sigma.real), float(mu.real), err


def commutator_sigma(model, f, g, options=DEFAULT_OPTIONS):
    """Commutator pairing ``sigma(f, g) = -i (W(f, g) - W(g, f))``."""
    return sigma_mu(model, f, g, options)[0]


def symmetric_mu(model, f, g, options=DEFAULT_OPTIONS):
    """Symmetric part ``mu(f, g) = (W(f, g) + W(g, f)) / 2``."""
    return sigma_mu(model, f, g, options)[1]


def _pairings(idx):
    if not idx:
        yield []
        return
    first, rest = idx[0], idx[1:]
    for k, j in enumerate(rest):
        for tail in _pairings(rest[:k] + rest[k + 1 :]):
            yield [(first, j)] + tail


def npoint_wick(model, fs, max_n=12, options=DEFAULT_OPTIONS):
    """Quasi-free n-point function: sum over ordered pairings ``i < j`` of products of ``W(f_i, f_j)``."""
    n = len(fs)
    if n > max_n:
        raise DomainError(f"n = {n} exceeds max_n = {max_n} ((n-1)!! pairings)")
    if n == 0:
        return 1 + 0j
    if n % 2:
        return 0j
    cache = {}
    total = 0j
    for pairing in _pairings(list(range(n))):
        term = 1 + 0j
        for i, j in pairing:
            if (i, j) not in cache:
                cache[i, j] = w2(model, fs[i], fs[j], options).value
            term *= cache[i, j]
        total += term
    return total


def weyl_correlator(model, word, options=DEFAULT_OPTIONS):
    """Vacuum expectation of ``W(g_1) ... W(g_n)`` in the quasi-free state."""
    if not isinstance(word, WeylWord):
        word = WeylWord(tuple(word))
    args = word.args
    if not args:
        return 1 + 0j
    phase = 0.0
    for j in range(len(args)):
        for k in range(j + 1, len(args)):
            phase += commutator_sigma(model, args[j], args[k], options)
    G = args[0]
    for g in args[1:]:
        G = G + g
    mu_GG = symmetric_mu(model, G, G, options)
    return complex(np.exp(-0.5j * phase - 0.5 * mu_GG))


def weyl_vacuum_distance(model, g, h, options=DEFAULT_OPTIONS):
    """``||(W(h) - W(g)) Omega||`` from two-point data.

    ``||(W(h) - W(g)) Omega||^2 = 2 - 2 Re omega(W(-g) W(h))
    = 2 (1 - cos(sigma(g, h) / 2) exp(-mu(h - g, h - g) / 2))``,
    evaluated in a cancellation-free form.
    """
    theta = 0.5 * commutator_sigma(model, g, h, options)
    diff = h - g
    x = 0.5 * symmetric_mu(model, diff, diff, options) if diff.terms else 0.0
    sq = 2.0 * (2.0 * math.sin(0.5 * theta) ** 2 - math.cos(theta) * math.expm1(-x))
    return math.sqrt(max(sq, 0.0))
