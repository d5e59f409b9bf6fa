"""Closed-form test functions on d-dimensional Minkowski space.

A test function is a finite sum of Gaussian packets

    amplitude * P(x - x0) * exp(-1/2 (x - x0)^T A (x - x0)) * exp(i k0.x)

with ``P`` a polynomial, ``A`` symmetric positive definite and ``k0.x`` the
Euclidean dot product of components.  The family is closed under scaling,
translation, Lorentz boosts, partial derivatives, complex conjugation and
linear combination, and its Fourier transform is available in closed form.

Fourier convention (used by every momentum-space formula in the package)::

    f^(p) = integral exp(i (p^0 x^0 - p.x)) f(x) d^d x

i.e. the Euclidean transform evaluated at ``q = eta p`` with
``eta = diag(1, -1, ..., -1)``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from ._validation import check_axis, check_dim, check_positive, check_vector, minkowski_metric
from .errors import DomainError

#: Default cap on the total degree of packet polynomials.
MAX_DEGREE = 8

#: Default L1 mass allowed outside an effective-support ellipsoid.
EPS_SUPPORT = 1e-8


def _zero_index(d):
    return (0,) * d


def _unit(d, i):
    return tuple(1 if j == i else 0 for j in range(d))


def _add_index(a, b):
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class Poly:
    """Polynomial in d variables stored as sorted ``(multi_index, coeff)`` pairs."""

    dim: int
    terms: tuple = ()

    @classmethod
    def from_dict(cls, dim, coeffs, max_degree=MAX_DEGREE):
        items = []
        for alpha, c in coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or min(alpha, default=0) < 0:
                raise DomainError(f"bad multi-index {alpha!r} for dimension {dim}")
            c = complex(c)
            if c != 0:
                items.append((alpha, c))
        poly = cls(dim, tuple(sorted(items)))
        if max_degree is not None and poly.degree > max_degree:
            raise DomainError(
                f"polynomial degree {poly.degree} exceeds the cap of {max_degree}; "
                "raise max_degree explicitly to allow it"
            )
        return poly

    @classmethod
    def one(cls, dim):
        return cls(dim, ((_zero_index(dim), 1 + 0j),))

    def as_dict(self):
        return dict(self.terms)

    @property
    def degree(self):
        return max((sum(a) for a, _ in self.terms), default=0)

    def is_constant(self):
        return all(sum(a) == 0 for a, _ in self.terms)

    def __call__(self, y):
        y = np.asarray(y)
        out = np.zeros(y.shape[:-1], dtype=complex)
        for alpha, c in self.terms:
            term = np.full(y.shape[:-1], c, dtype=complex)
            for i, a in enumerate(alpha):
                if a:
                    term = term * y[..., i] ** a
            out = out + term
        return out

    def _combine(self, pairs, max_degree):
        acc = {}
        for alpha, c in pairs:
            acc[alpha] = acc.get(alpha, 0) + c
        return Poly.from_dict(self.dim, acc, max_degree=max_degree)

    def scaled(self, factor):
        return Poly(self.dim, tuple((a, c * factor) for a, c in self.terms))

    def conj(self):
        return Poly(self.dim, tuple((a, c.conjugate()) for a, c in self.terms))

    def add(self, other, max_degree=None):
        return self._combine(list(self.terms) + list(other.terms), max_degree)

    def times_linear(self, v, max_degree=MAX_DEGREE):
        """Multiply by the linear form ``sum_j v_j y_j``."""
        pairs = []
        for alpha, c in self.terms:
            for j, vj in enumerate(v):
                if vj != 0:
                    pairs.append((_add_index(alpha, _unit(self.dim, j)), c * vj))
        return self._combine(pairs, max_degree)

    def partial(self, nu):
        pairs = []
        for alpha, c in self.terms:
            if alpha[nu]:
                beta = list(alpha)
                beta[nu] -= 1
                pairs.append((tuple(beta), c * alpha[nu]))
        return self._combine(pairs, None)

    def rescale_args(self, s):
        """Return ``y -> P(s * y)``."""
        return Poly(self.dim, tuple((a, c * s ** sum(a)) for a, c in self.terms))

    def substitute(self, M, max_degree=MAX_DEGREE):
        """Return ``y -> P(M y)`` for a square matrix ``M``."""
        M = np.asarray(M, dtype=float)
        out = Poly(self.dim, ())
        for alpha, c in self.terms:
            term = Poly(self.dim, ((_zero_index(self.dim), c),))
            for i, a in enumerate(alpha):
                for _ in range(a):
                    term = term.times_linear(M[i], max_degree=None)
            out = out.add(term)
        return self._combine(out.terms, max_degree)

    def isclose(self, other, rtol=1e-12, atol=1e-14):
        a, b = self.as_dict(), other.as_dict()
        scale = max([abs(c) for c in a.values()] + [abs(c) for c in b.values()] + [0.0])
        for key in set(a) | set(b):
            if abs(a.get(key, 0) - b.get(key, 0)) > atol + rtol * scale:
                return False
        return True


@functools.lru_cache(maxsize=4096)
def _gaussian_moment(sigma, beta):
    """E[z^beta] for z ~ N(0, sigma); ``sigma`` is a tuple of row tuples."""
    if sum(beta) == 0:
        return 1.0
    if sum(beta) % 2:
        return 0.0
    i = next(k for k, b in enumerate(beta) if b)
    rest = list(beta)
    rest[i] -= 1
    total = 0.0
    for j, bj in enumerate(rest):
        if bj and sigma[i][j] != 0:
            lower = list(rest)
            lower[j] -= 1
            total += sigma[i][j] * bj * _gaussian_moment(sigma, tuple(lower))
    return total


@dataclass(frozen=True)
class Ellipsoid:
    """Region ``{x : (x - center)^T Q (x - center) <= 1}``."""

    center: tuple
    matrix: tuple

    @classmethod
    def ball(cls, center, radius):
        center = np.asarray(center, dtype=float)
        Q = np.eye(center.size) / radius**2
        return cls(tuple(center), tuple(map(tuple, Q)))

    @property
    def c(self):
        return np.array(self.center)

    @property
    def Q(self):
        return np.array(self.matrix)

    @property
    def semi_axes(self):
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.Q))

    def scaled(self, lam):
        return Ellipsoid(tuple(lam * self.c), tuple(map(tuple, self.Q / lam**2)))

    def contains(self, other, slack=1e-12):
        """Sufficient containment test ``other ⊂ self`` (exact for shared centers)."""
        root = _sqrtm_spd(self.Q)
        offset = np.linalg.norm(root @ (other.c - self.c))
        spread = np.linalg.norm(root @ np.linalg.inv(_sqrtm_spd(other.Q)), 2)
        return offset + spread <= 1 + slack


def _sqrtm_spd(M):
    vals, vecs = np.linalg.eigh(M)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class GaussianPacket:
    dim: int
    amplitude: complex
    center: tuple
    width_matrix: tuple
    modulation: tuple
    poly: Poly

    def __post_init__(self):
        A = np.array(self.width_matrix, dtype=float)
        if A.shape != (self.dim, self.dim) or not np.allclose(A, A.T, rtol=0, atol=1e-14 * np.abs(A).max()):
            raise DomainError("width matrix must be a symmetric d x d matrix")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise DomainError("width matrix must be positive definite") from None
        if self.poly.dim != self.dim:
            raise DomainError("polynomial dimension mismatch")

    @classmethod
    def diagonal(cls, center, widths, modulation=None, amplitude=1.0, poly=None, max_degree=MAX_DEGREE):
        center = np.asarray(center, dtype=float)
        d = check_dim(center.size)
        widths = check_vector(widths, d, "widths")
        if np.any(widths <= 0):
            raise DomainError("widths must be strictly positive")
        k0 = np.zeros(d) if modulation is None else check_vector(modulation, d, "modulation")
        if poly is None:
            poly = Poly.one(d)
        elif not isinstance(poly, Poly):
            poly = Poly.from_dict(d, dict(poly), max_degree=max_degree)
        A = np.diag(widths**2)
        return cls(d, complex(amplitude), tuple(center), tuple(map(tuple, A)), tuple(k0), poly)

    @cached_property
    def A(self):
        return np.array(self.width_matrix, dtype=float)

    @cached_property
    def Sigma(self):
        return np.linalg.inv(self.A)

    @cached_property
    def x0(self):
        return np.array(self.center, dtype=float)

    @cached_property
    def k0(self):
        return np.array(self.modulation, dtype=float)

    @cached_property
    def _norm(self):
        return (2 * np.pi) ** (self.dim / 2) / math.sqrt(np.linalg.det(self.A))

    @cached_property
    def _moment_poly(self):
        # Q(mu) = sum_alpha c_alpha E[(mu + z)^alpha], z ~ N(0, Sigma)
        if self.poly.is_constant():
            return self.poly
        sigma = tuple(map(tuple, self.Sigma))
        acc = {}
        for alpha, c in self.poly.terms:
            for beta in itertools.product(*(range(a + 1) for a in alpha)):
                m = _gaussian_moment(sigma, beta)
                if m == 0:
                    continue
                gamma = tuple(a - b for a, b in zip(alpha, beta))
                binom = math.prod(math.comb(a, b) for a, b in zip(alpha, beta))
                acc[gamma] = acc.get(gamma, 0) + c * binom * m
        return Poly.from_dict(self.dim, acc, max_degree=None)

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.x0
        quad = np.einsum("...i,ij,...j->...", y, self.A, y)
        phase = np.asarray(x, dtype=float) @ self.k0
        return self.amplitude * self.poly(y) * np.exp(-0.5 * quad + 1j * phase)

    def fourier_euclid(self, q):
        """Integral of exp(i q.x) times the packet, for q of shape (..., d)."""
        K = np.asarray(q, dtype=float) + self.k0
        SK = K @ self.Sigma
        expo = 1j * (K @ self.x0) - 0.5 * np.einsum("...i,...i->...", K, SK)
        out = (self.amplitude * self._norm) * np.exp(expo)
        mp = self._moment_poly
        if mp.is_constant():
            return out * (mp.terms[0][1] if mp.terms else 0.0)
        return out * mp(1j * SK)

    def scaled(self, lam):
        return GaussianPacket(
            self.dim,
            self.amplitude,
            tuple(lam * self.x0),
            tuple(map(tuple, self.A / lam**2)),
            tuple(self.k0 / lam),
            self.poly.rescale_args(1.0 / lam),
        )

    def translated(self, a):
        return GaussianPacket(
            self.dim,
            self.amplitude * np.exp(-1j * float(self.k0 @ a)),
            tuple(self.x0 + a),
            self.width_matrix,
            self.modulation,
            self.poly,
        )

    def transformed(self, L, max_degree=MAX_DEGREE):
        """Return ``x -> packet(L^{-1} x)`` for an invertible matrix ``L``."""
        M = np.linalg.inv(L)
        A = M.T @ self.A @ M
        A = 0.5 * (A + A.T)
        return GaussianPacket(
            self.dim,
            self.amplitude,
            tuple(L @ self.x0),
            tuple(map(tuple, A)),
            tuple(M.T @ self.k0),
            self.poly.substitute(M, max_degree=max_degree),
        )

    def partial(self, nu, max_degree=MAX_DEGREE):
        P = self.poly
        new = P.partial(nu).add(P.times_linear(-self.A[nu], max_degree=None))
        new = new.add(P.scaled(1j * self.k0[nu]))
        return GaussianPacket(
            self.dim,
            self.amplitude,
            self.center,
            self.width_matrix,
            self.modulation,
            Poly.from_dict(self.dim, new.as_dict(), max_degree=max_degree),
        )

    def conj(self):
        return GaussianPacket(
            self.dim,
            self.amplitude.conjugate(),
            self.center,
            self.width_matrix,
            tuple(-self.k0),
            self.poly.conj(),
        )

    def effective_support(self, eps=EPS_SUPPORT):
        # |P| e^{-q/2} tails behave like a chi distribution with d + deg(P) dof
        r2 = stats.chi2.isf(eps, self.dim + self.poly.degree)
        return Ellipsoid(self.center, tuple(map(tuple, self.A / r2)))

    def isclose(self, other, rtol=1e-12):
        if self.dim != other.dim:
            return False
        pa = self.poly.scaled(self.amplitude)
        pb = other.poly.scaled(other.amplitude)
        return (
            np.allclose(self.x0, other.x0, rtol=rtol, atol=rtol)
            and np.allclose(self.A, other.A, rtol=rtol, atol=rtol * np.abs(self.A).max())
            and np.allclose(self.k0, other.k0, rtol=rtol, atol=rtol)
            and pa.isclose(pb, rtol=rtol)
        )


@dataclass(frozen=True)
class TestFunction:
    """Finite linear combination of Gaussian packets."""

    __test__ = False  # not a pytest class

    dim: int
    terms: tuple = field(default=())

    @classmethod
    def gaussian(cls, center, widths, modulation=None, amplitude=1.0, poly=None, max_degree=MAX_DEGREE):
        p = GaussianPacket.diagonal(center, widths, modulation, amplitude, poly, max_degree)
        return cls(p.dim, (p,))

    @classmethod
    def from_packets(cls, packets):
        packets = tuple(packets)
        if not packets:
            raise DomainError("need at least one packet (use TestFunction(dim) for zero)")
        d = packets[0].dim
        if any(p.dim != d for p in packets):
            raise DomainError("packets must share the spacetime dimension")
        return cls(d, packets)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for p in self.terms:
            out = out + p(x)
        return out

    def _check_same_dim(self, other):
        if not isinstance(other, TestFunction) or other.dim != self.dim:
            raise DomainError("test functions must share the spacetime dimension")

    def __add__(self, other):
        self._check_same_dim(other)
        # packets sharing an envelope are merged, so exact cancellations vanish
        groups = {}
        for p in self.terms + other.terms:
            groups.setdefault((p.center, p.width_matrix, p.modulation), []).append(p)
        terms = []
        for (center, width, modulation), ps in groups.items():
            if len(ps) == 1:
                terms.append(ps[0])
                continue
            poly = Poly(self.dim, ())
            for p in ps:
                poly = poly.add(p.poly.scaled(p.amplitude))
            if poly.terms:
                terms.append(GaussianPacket(self.dim, 1 + 0j, center, width, modulation, poly))
        return TestFunction(self.dim, tuple(terms))

    def __neg__(self):
        return -1 * self

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        c = complex(c)
        return TestFunction(
            self.dim,
            tuple(
                GaussianPacket(p.dim, p.amplitude * c, p.center, p.width_matrix, p.modulation, p.poly)
                for p in self.terms
            ),
        )

    __rmul__ = __mul__

    def fourier_euclid(self, q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1], dtype=complex)
        for p in self.terms:
            out = out + p.fourier_euclid(q)
        return out

    @property
    def degree(self):
        return max((p.poly.degree for p in self.terms), default=0)

    def isclose(self, other, rtol=1e-12):
        return (
            isinstance(other, TestFunction)
            and self.dim == other.dim
            and len(self.terms) == len(other.terms)
            and all(a.isclose(b, rtol) for a, b in zip(self.terms, other.terms))
        )


def scale(f, lam):
    """``x -> f(x / lam)``."""
    lam = check_positive(lam, "scale factor")
    return TestFunction(f.dim, tuple(p.scaled(lam) for p in f.terms))


def translate(f, a):
    """``x -> f(x - a)``."""
    a = check_vector(a, f.dim, "translation")
    return TestFunction(f.dim, tuple(p.translated(a) for p in f.terms))


def is_lorentz(L, d, tol=1e-12):
    L = np.asarray(L, dtype=float)
    if L.shape != (d, d):
        return False
    eta = minkowski_metric(d)
    scale_ = max(1.0, np.abs(L).max() ** 2)
    return bool(np.abs(L.T @ eta @ L - eta).max() <= tol * scale_ and L[0, 0] > 0 and np.linalg.det(L) > 0)


def boost_matrix(d, rapidity, axis=1):
    """Boost mixing time with spatial ``axis``, ``[[ch, -sh], [-sh, ch]]``."""
    check_dim(d)
    if not 1 <= axis < d:
        raise DomainError(f"boost axis must be spatial, got {axis}")
    L = np.eye(d)
    ch, sh = math.cosh(rapidity), math.sinh(rapidity)
    L[0, 0] = L[axis, axis] = ch
    L[0, axis] = L[axis, 0] = -sh
    return L


def boost(f, L, max_degree=MAX_DEGREE):
    """``x -> f(L^{-1} x)`` for a proper orthochronous Lorentz matrix ``L``."""
    if not is_lorentz(L, f.dim):
        raise DomainError("matrix is not a proper orthochronous Lorentz transformation")
    L = np.asarray(L, dtype=float)
    return TestFunction(f.dim, tuple(p.transformed(L, max_degree) for p in f.terms))


def derivative(f, nu, max_degree=MAX_DEGREE):
    """Closed-form partial derivative along coordinate axis ``nu``."""
    nu = check_axis(nu, f.dim)
    return TestFunction(f.dim, tuple(p.partial(nu, max_degree) for p in f.terms))


def conj(f):
    return TestFunction(f.dim, tuple(p.conj() for p in f.terms))


def fourier(f, p):
    """Minkowski-convention Fourier transform at momentum ``p`` (shape (..., d))."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != f.dim:
        raise DomainError(f"momentum must have {f.dim} components")
    q = p * minkowski_metric(f.dim).diagonal()
    out = f.fourier_euclid(q)
    return complex(out) if out.ndim == 0 else out


def effective_support(f, eps=EPS_SUPPORT):
    """One ellipsoid per packet, each holding all but ``eps`` of that packet's L1 mass."""
    return [p.effective_support(eps) for p in f.terms]


def enclosing_region(f, eps=EPS_SUPPORT, margin=1e-6):
    """A ball containing every effective-support ellipsoid of ``f``."""
    ells = effective_support(f, eps)
    c = np.mean([e.c for e in ells], axis=0)
    r = max(np.linalg.norm(e.c - c) + e.semi_axes.max() for e in ells)
    return Ellipsoid.ball(c, r * (1 + margin))


def _envelope_key(p, digits=12):
    def r(v):
        return tuple(float(f"{x:.{digits}g}") + 0.0 for x in np.ravel(v))

    return r(p.x0), r(p.A), r(p.k0)


def is_real(f, rtol=1e-12):
    """True iff ``f`` equals its complex conjugate as a function."""
    groups = {}
    for p in f.terms:
        key = _envelope_key(p)
        poly = p.poly.scaled(p.amplitude)
        groups[key] = groups[key].add(poly) if key in groups else poly
    for (c, A, k), poly in groups.items():
        partner_key = (c, A, tuple(-x + 0.0 for x in k))
        partner = groups.get(partner_key, Poly(f.dim, ()))
        if not poly.isclose(partner.conj(), rtol=rtol, atol=1e-300):
            return False
    return True


def l2_norm(f):
    """Exact L2 norm via Gaussian overlap integrals of packet pairs."""
    total = 0.0
    for a, b in itertools.product(f.terms, repeat=2):
        total += _overlap(a, b)
    return math.sqrt(max(total.real, 0.0))


def _overlap(a, b):
    # integral of conj(a) b, combined into one packet and integrated via its Fourier value at 0
    A = a.A + b.A
    Sigma = np.linalg.inv(A)
    center = Sigma @ (a.A @ a.x0 + b.A @ b.x0)
    const = -0.5 * (a.x0 @ a.A @ a.x0 + b.x0 @ b.A @ b.x0 - center @ A @ center)
    # polynomials re-expressed around the combined center
    pa = a.poly.conj()
    prod = _shifted_product(pa, center - a.x0, b.poly, center - b.x0)
    packet = GaussianPacket(
        a.dim,
        a.amplitude.conjugate() * b.amplitude * np.exp(const),
        tuple(center),
        tuple(map(tuple, A)),
        tuple(b.k0 - a.k0),
        prod,
    )
    return packet.fourier_euclid(np.zeros(a.dim))


def _shift_poly(P, s):
    # y -> P(y + s)
    acc = {}
    for alpha, c in P.terms:
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            coef = c * math.prod(math.comb(a, b) * s[i] ** (a - b) for i, (a, b) in enumerate(zip(alpha, beta)))
            acc[beta] = acc.get(beta, 0) + coef
    return Poly.from_dict(P.dim, acc, max_degree=None)


def _shifted_product(P, sP, R, sR):
    P, R = _shift_poly(P, sP), _shift_poly(R, sR)
    acc = {}
    for a, ca in P.terms:
        for b, cb in R.terms:
            key = _add_index(a, b)
            acc[key] = acc.get(key, 0) + ca * cb
    return Poly.from_dict(P.dim, acc, max_degree=None)

