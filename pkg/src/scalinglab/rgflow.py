"""Scaling orbits ``lambda -> N_lambda * phi(f_lambda)`` and their diagnostics.

An orbit couples a base test function with a field-strength model ``N_lambda``
and a localization region.  Scaled correlators multiply the model's
correlators of ``scale(f, lam)`` by the matching ``N_lambda`` factors.  The
energy-momentum-transfer helpers work on the one-particle density
``|f^_lambda(omega_p, p)|^2 / (2 omega_p)`` of the free field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _momentum, wightman
from ._momentum import DEFAULT_OPTIONS
from ._parallel import pmap
from ._validation import check_axis, check_decreasing, check_positive
from .errors import DomainError
from .estimators import RenormExponentEstimator
from .testfn import EPS_SUPPORT, Ellipsoid, TestFunction, derivative, effective_support, enclosing_region, is_real, scale, translate


@dataclass(frozen=True)
class PowerLaw:
    """``N_lambda = c * lambda**delta``."""

    c: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        check_positive(self.c, "power-law prefactor c")
        if not math.isfinite(self.delta):
            raise DomainError("power-law exponent must be finite")

    def factor(self, lam, model=None, options=DEFAULT_OPTIONS):
        return self.c * check_positive(lam, "lambda") ** self.delta


@dataclass(frozen=True)
class AutoNormalized:
    """``N_lambda = w2(f0_lambda, f0_lambda)**-1/2`` for a reference function ``f0``."""

    reference: TestFunction

    def factor(self, lam, model, options=DEFAULT_OPTIONS):
        f0 = scale(self.reference, check_positive(lam, "lambda"))
        w = wightman.w2(model, f0, f0, options).value.real
        if not w > 0:
            raise DomainError("reference function has vanishing two-point norm; cannot auto-normalize")
        return w**-0.5


@dataclass(frozen=True)
class Tabulated:
    """Log-log interpolation of tabulated ``(lambda_i, N_i)``; ``lambda_i`` strictly decreasing."""

    lambdas: tuple
    values: tuple

    def __post_init__(self):
        lam = check_decreasing(self.lambdas, "tabulated lambdas")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != lam.shape or lam.size < 2:
            raise DomainError("need at least two (lambda, N) pairs of matching length")
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise DomainError("tabulated N values must be positive")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in lam))
        object.__setattr__(self, "values", tuple(float(x) for x in vals))

    def factor(self, lam, model=None, options=DEFAULT_OPTIONS):
        lam = check_positive(lam, "lambda")
        lo, hi = self.lambdas[-1], self.lambdas[0]
        if not lo * (1 - 1e-12) <= lam <= hi * (1 + 1e-12):
            raise DomainError(f"lambda = {lam:g} outside the tabulated range [{lo:g}, {hi:g}]")
        x = np.log(self.lambdas[::-1])
        y = np.log(self.values[::-1])
        return float(np.exp(np.interp(math.log(lam), x, y)))


RENORM_KINDS = (PowerLaw, AutoNormalized, Tabulated)


@dataclass(frozen=True)
class ScalingOrbit:
    """Base function, renormalization model and localization region of one orbit.

    ``renorm`` defaults to auto-normalization against ``base`` itself and
    ``region`` to a ball enclosing the effective support of ``base``.
    """

    base: TestFunction
    renorm: object = None
    region: Ellipsoid = None
    eps_support: float = field(default=EPS_SUPPORT, compare=False)

    def __post_init__(self):
        if not isinstance(self.base, TestFunction) or not self.base.terms:
            raise DomainError("orbit base must be a non-zero TestFunction")
        if self.renorm is None:
            object.__setattr__(self, "renorm", AutoNormalized(self.base))
        if not isinstance(self.renorm, RENORM_KINDS):
            raise DomainError(f"unknown renormalization model {type(self.renorm).__name__}")
        if self.region is None:
            object.__setattr__(self, "region", enclosing_region(self.base, self.eps_support))
        if not all(self.region.contains(e) for e in effective_support(self.base, self.eps_support)):
            raise DomainError("effective support of the orbit base is not contained in its region")

    @property
    def dim(self):
        return self.base.dim

    def at(self, lam):
        return scale(self.base, lam)

    def factor(self, lam, model, options=DEFAULT_OPTIONS):
        return self.renorm.factor(lam, model, options)

    def translated(self, a):
        """The orbit of ``translate(base, a)`` with the same renormalization model."""
        base = translate(self.base, a)
        return ScalingOrbit(base, self.renorm, enclosing_region(base, self.eps_support), self.eps_support)

    def rescaled(self, mu):
        """The orbit of ``scale(base, mu)`` with the same renormalization model."""
        base = scale(self.base, mu)
        return ScalingOrbit(base, self.renorm, self.region.scaled(mu), self.eps_support)


def _check_orbits(model, orbits):
    for o in orbits:
        if not isinstance(o, ScalingOrbit):
            raise DomainError("expected ScalingOrbit arguments")
        if o.dim != model.dim:
            raise DomainError("orbit and model dimensions differ")


def scaled_w2(model, orbit_f, orbit_g, lam, options=DEFAULT_OPTIONS):
    """``N^F_lambda N^G_lambda w2(f_lambda, g_lambda)``."""
    _check_orbits(model, (orbit_f, orbit_g))
    lam = check_positive(lam, "lambda")
    c = orbit_f.factor(lam, model, options) * orbit_g.factor(lam, model, options)
    return wightman.w2(model, orbit_f.at(lam), orbit_g.at(lam), options).scaled(c)


def scaled_sigma(model, orbit_f, orbit_g, lam, options=DEFAULT_OPTIONS):
    """``(N^F N^G sigma(f_lambda, g_lambda), error)`` for real base functions."""
    _check_orbits(model, (orbit_f, orbit_g))
    lam = check_positive(lam, "lambda")
    c = orbit_f.factor(lam, model, options) * orbit_g.factor(lam, model, options)
    sigma, _, err = wightman.sigma_mu(model, orbit_f.at(lam), orbit_g.at(lam), options)
    return c * sigma, c * err


def scaled_npoint(model, orbits, lam, options=DEFAULT_OPTIONS):
    """Scaled n-point function of the quasi-free state."""
    _check_orbits(model, orbits)
    lam = check_positive(lam, "lambda")
    if len(orbits) % 2:
        return 0j
    c = math.prod(o.factor(lam, model, options) for o in orbits)
    return c * wightman.npoint_wick(model, [o.at(lam) for o in orbits], options=options)


def scaled_weyl(model, orbits, lam, options=DEFAULT_OPTIONS):
    """Vacuum expectation of ``W(N_lambda f_1,lambda) ... W(N_lambda f_n,lambda)``."""
    _check_orbits(model, orbits)
    lam = check_positive(lam, "lambda")
    args = tuple(o.at(lam) * o.factor(lam, model, options) for o in orbits)
    return wightman.weyl_correlator(model, wightman.WeylWord(args), options)


def fit_renorm_exponent(model, f, lambdas, options=DEFAULT_OPTIONS):
    """Power-law fit ``(c, delta, max log-residual)`` of the auto-normalization of ``f``."""
    lambdas = np.asarray(lambdas, dtype=float)
    check_decreasing(lambdas, "lambda grid")
    renorm = AutoNormalized(f)
    factors = pmap(lambda lam: renorm.factor(lam, model, options), lambdas)
    est = RenormExponentEstimator(model=model, test_function=f, options=options).fit(lambdas, factors)
    return est.c_, est.delta_, est.residual_


def _single_mass(model):
    m = model.measure.single_mass
    if m is None:
        raise DomainError("energy-momentum insertions need a single-mass (free-field) model")
    return m


def _lower(omega, pvec, nu):
    return omega if nu == 0 else -pvec[:, nu - 1]


def emt_identity(model, orbit, lam, nu, options=DEFAULT_OPTIONS):
    """``(lhs, rhs)`` of the energy-momentum-transfer identity along axis ``nu``.

    ``lhs = N^2 |<phi(f_lambda) Omega, P_nu phi(f_lambda) Omega>|`` from the
    mode integral with a ``p_nu`` insertion; ``rhs = N^2 / lambda
    |W(f_lambda, (d_nu f)_lambda)|`` through the closed-form derivative packet.
    """
    d = model.dim
    m = _single_mass(model)
    nu = check_axis(nu, d)
    if not is_real(orbit.base):
        raise DomainError("emt_identity needs a real orbit base")
    lam = check_positive(lam, "lambda")
    N2 = orbit.factor(lam, model, options) ** 2
    f_lam = orbit.at(lam)

    def integrand(omega, pvec):
        q = _momentum.shell_momenta(omega, pvec)
        return _lower(omega, pvec, nu) * np.abs(f_lam.fourier_euclid(q)) ** 2

    R, angular, radial = _momentum.envelope([f_lam, f_lam], options)
    val, _, _ = _momentum.shell_integral(d, m, integrand, R, angular, radial, options, what="P_nu insertion")
    lhs = N2 * abs(val) * (2 * np.pi) ** (-(d - 1))
    df_lam = scale(derivative(orbit.base, nu), lam)
    rhs = N2 / lam * abs(wightman.w2(model, f_lam, df_lam, options).value)
    return float(lhs), float(rhs)


def _energy_cdf(model, f_lam, options):
    d = model.dim
    masses, weights, _ = model.measure.nodes()
    R, angular, radial = _momentum.envelope([f_lam, f_lam], options)
    keep = [(m, w) for m, w in zip(masses, weights) if w != 0 and m <= R]

    def integrand(omega, pvec):
        return np.abs(f_lam.fourier_euclid(_momentum.shell_momenta(omega, pvec))) ** 2

    def mass_within(r):
        total = 0.0
        for m, w in keep:
            if r > 0:
                total += w * _momentum.shell_integral(d, m, integrand, r, angular, radial, options, what="energy density")[0].real
        return total

    return mass_within, R


def emt_radius(model, orbit, lam, q, options=DEFAULT_OPTIONS):
    """Radius of the ball in momentum space holding fraction ``q`` of the one-particle density."""
    if not 0 < q < 1:
        raise DomainError("quantile q must lie in (0, 1)")
    if not is_real(orbit.base):
        raise DomainError("emt_radius needs a real orbit base")
    if model.measure.density is None and len(model.measure.atoms) != 1:
        raise DomainError("emt_radius needs a single-mass or density measure")
    f_lam = orbit.at(check_positive(lam, "lambda"))
    mass_within, R = _energy_cdf(model, f_lam, options)
    total = mass_within(R)
    if not total > 0:
        raise DomainError("one-particle density vanishes; radius undefined")
    return float(optimize.brentq(lambda r: mass_within(r) / total - q, 0.0, R, xtol=1e-14 * R, rtol=1e-13))


@dataclass(frozen=True)
class OrbitReport:
    """Surrogate checks of the three orbit conditions on a lambda grid.

    ``gamma`` uses the vacuum-vector norm proxy ``||(W(g_a) - W(g)) Omega||``,
    which is weaker than the operator norm, and ``beta`` uses effective
    supports at tolerance ``eps_support`` in place of compact supports.
    """

    lambdas: tuple
    alpha_sup_norm: float
    alpha_ok: bool
    beta_ok: bool
    beta_failures: tuple
    gamma_displacements: tuple
    gamma_proxy: tuple
    gamma_ok: bool
    eps_support: float
    notes: tuple = (
        "alpha: GNS norm of the Weyl orbit vector (unitary, so 1)",
        "beta: effective support at tolerance eps_support replaces compact support",
        "gamma: vacuum-norm proxy, not the operator norm; translations only",
    )

    @property
    def ok(self):
        return self.alpha_ok and self.beta_ok and self.gamma_ok

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()} | {"ok": self.ok}


def orbit_condition_report(model, orbit, lambdas, displacements, options=DEFAULT_OPTIONS, min_ratio=1.0):
    """Check the boundedness, localization and continuity surrogates of an orbit.

    ``displacements`` are translation vectors ``a``; for each, the proxy
    ``s(a) = sup_lambda ||(W(g_lambda translated by lambda a) - W(g_lambda)) Omega||``
    is reported with ``g_lambda = N_lambda f_lambda``.  Continuity passes when
    ``s`` decreases strictly (by at least ``min_ratio``) along the given
    displacements ordered by decreasing length and vanishes at ``a = 0``.
    """
    _check_orbits(model, (orbit,))
    if not is_real(orbit.base):
        raise DomainError("orbit conditions are checked on Weyl orbits of real functions")
    lambdas = check_decreasing(lambdas, "lambda grid")
    displacements = [np.asarray(a, dtype=float) for a in displacements]

    # a Weyl operator is unitary: ||W(g) Omega|| = 1 on every orbit point
    alpha_sup = 1.0
    failures = []
    for lam in lambdas:
        region = orbit.region.scaled(lam)
        if not all(region.contains(e) for e in effective_support(orbit.at(lam), orbit.eps_support)):
            failures.append(float(lam))

    def proxy(a):
        def at(lam):
            g = orbit.at(lam) * orbit.factor(lam, model, options)
            if not np.any(a):
                return 0.0
            return wightman.weyl_vacuum_distance(model, g, translate(g, lam * a), options)

        return max(pmap(at, lambdas))

    order = sorted(range(len(displacements)), key=lambda i: -np.linalg.norm(displacements[i]))
    s = [0.0] * len(displacements)
    for i in order:
        s[i] = proxy(displacements[i])
    seq = [s[i] for i in order]
    gamma_ok = all(b == 0 or a >= min_ratio * b and a > b for a, b in zip(seq, seq[1:]))
    gamma_ok = gamma_ok and all(v == 0 for v, a in zip(s, displacements) if not np.any(a))
    return OrbitReport(
        lambdas=tuple(float(x) for x in lambdas),
        alpha_sup_norm=alpha_sup,
        alpha_ok=math.isfinite(alpha_sup),
        beta_ok=not failures,
        beta_failures=tuple(failures),
        gamma_displacements=tuple(tuple(float(x) for x in a) for a in displacements),
        gamma_proxy=tuple(float(x) for x in s),
        gamma_ok=bool(gamma_ok),
        eps_support=orbit.eps_support,
    )
