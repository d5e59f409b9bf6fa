"""Källén–Lehmann spectral measures for free and generalized free scalar fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_dim, check_nonnegative, check_positive
from .errors import DomainError, NumericalError

QUADRATURE_RULES = ("gl", "log-gl")


@dataclass(frozen=True)
class Density:
    """Continuous spectral density built from a small descriptor grammar.

    ``rho(m) = m**(2 a) * (1 + eps sin(2 pi ln(m / m_ref) / ln(tau))) * cutoff(m)``
    on ``[m_lo, m_hi]``, with ``cutoff(m) = exp(-(m / m_cut)**2)`` when
    ``m_cut`` is set.  Integrals over ``m`` use Gauss–Legendre in ``m``
    (``rule="gl"``) or in ``ln m`` (``rule="log-gl"``, for supports spanning
    many decades); the error estimate compares ``nodes`` against ``nodes // 2``.
    """

    m_lo: float
    m_hi: float
    a: float = 0.0
    eps: float = 0.0
    tau: float = math.e
    m_ref: float = 1.0
    m_cut: float | None = None
    nodes: int = 128
    rule: str = "gl"

    def __post_init__(self):
        check_nonnegative(self.m_lo, "m_lo")
        check_positive(self.m_hi, "m_hi")
        if not self.m_lo < self.m_hi:
            raise DomainError("density support needs m_lo < m_hi")
        if not 0 <= self.eps < 1:
            raise DomainError("log-periodic amplitude eps must lie in [0, 1)")
        if self.tau <= 1:
            raise DomainError("log-periodic base tau must exceed 1")
        check_positive(self.m_ref, "m_ref")
        if self.m_cut is not None:
            check_positive(self.m_cut, "m_cut")
        if self.rule not in QUADRATURE_RULES:
            raise DomainError(f"quadrature rule must be one of {QUADRATURE_RULES}")
        if self.rule == "log-gl" and self.m_lo <= 0:
            raise DomainError("log-gl quadrature needs m_lo > 0")
        if self.nodes < 4:
            raise DomainError("need at least 4 quadrature nodes")
        if self.m_lo == 0 and 2 * self.a <= -1:
            raise DomainError("density not integrable at m = 0 (need a > -1/2)")

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore"):
            out = m ** (2 * self.a)
            if self.eps:
                out = out * (1 + self.eps * np.sin(2 * np.pi * np.log(m / self.m_ref) / np.log(self.tau)))
        if self.m_cut is not None:
            out = out * np.exp(-((m / self.m_cut) ** 2))
        return np.where((m >= self.m_lo) & (m <= self.m_hi), out, 0.0)

    def rule_nodes(self, n):
        x, w = np.polynomial.legendre.leggauss(n)
        if self.rule == "gl":
            half = 0.5 * (self.m_hi - self.m_lo)
            m = self.m_lo + half * (x + 1)
            return m, half * w * self(m)
        lo, hi = math.log(self.m_lo), math.log(self.m_hi)
        half = 0.5 * (hi - lo)
        m = np.exp(lo + half * (x + 1))
        return m, half * w * m * self(m)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class SpectralMeasure:
    dim: int
    atoms: tuple = ()
    density: Density | None = None

    def __post_init__(self):
        check_dim(self.dim)
        if not self.atoms and self.density is None:
            raise DomainError("spectral measure is empty")
        for m, w in self.atoms:
            check_nonnegative(m, "atom mass")
            check_positive(w, "atom weight")
            if self.dim == 2 and m == 0:
                raise DomainError("no massless scalar Wightman field exists in d = 2 (atom at m = 0)")
        if self.density is not None:
            if self.dim == 2 and self.density.m_lo <= 0:
                raise DomainError("d = 2 densities need m_lo > 0 (massless field does not exist)")
            _, w = self.density.rule_nodes(self.density.nodes)
            if np.any(w < 0):
                raise DomainError("spectral density is negative at a quadrature node")

    @property
    def single_mass(self):
        """The mass of a one-atom measure, else ``None``."""
        if self.density is None and len(self.atoms) == 1:
            return self.atoms[0][0]
        return None

    def nodes(self):
        """Atoms plus fine and coarse density nodes.

        Returns ``(masses, fine_weights, coarse_weights)``; atoms carry equal
        weight in both rules so their contribution cancels in the error estimate.
        """
        ms = [m for m, _ in self.atoms]
        fine = [w for _, w in self.atoms]
        coarse = list(fine)
        if self.density is not None:
            n = self.density.nodes
            mf, wf = self.density.rule_nodes(n)
            mc, wc = self.density.rule_nodes(n // 2)
            ms += list(mf) + list(mc)
            fine += list(wf) + [0.0] * len(mc)
            coarse += [0.0] * len(mf) + list(wc)
        return np.array(ms, dtype=float), np.array(fine), np.array(coarse)

    def to_dict(self):
        return {
            "dim": self.dim,
            "atoms": [list(a) for a in self.atoms],
            "density": None if self.density is None else self.density.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        density = data.get("density")
        return cls(
            int(data["dim"]),
            tuple((float(m), float(w)) for m, w in data.get("atoms", ())),
            None if density is None else Density(**density),
        )


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    measure: SpectralMeasure
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.measure.dim != self.dim:
            raise DomainError("model and spectral measure dimensions differ")


def free_field(d, m, label=None):
    """Free scalar field of mass ``m``: a single unit atom."""
    d = check_dim(d)
    m = check_nonnegative(m, "mass")
    if d == 2 and m == 0:
        raise DomainError("free_field(2, 0): the massless scalar does not exist as a Wightman field in d = 2")
    return ModelSpec(d, SpectralMeasure(d, ((m, 1.0),)), label or f"free d={d} m={m:g}")


def log_periodic_gff(d, a, eps, tau, m_ref, support, nodes=128, rule="log-gl", m_cut=None, label=None):
    """Generalized free field with log-periodically modulated power-law density."""
    d = check_dim(d)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    lo, hi = support
    density = Density(float(lo), float(hi), float(a), float(eps), float(tau), float(m_ref), m_cut, int(nodes), rule)
    return ModelSpec(d, SpectralMeasure(d, (), density), label or f"log-periodic gff d={d} a={a:g} eps={eps:g} tau={tau:g}")


def integrate_mass(measure, kernel):
    """``(integral of kernel d rho, error estimate)`` for a vectorized ``kernel(m)``.

    Atoms contribute exactly; the density part uses the measure's quadrature
    rule and is error-estimated against the half-size rule.
    """
    ms, fine, coarse = measure.nodes()
    values = np.asarray(kernel(ms), dtype=complex)
    bad = ~np.isfinite(values)
    if np.any(bad):
        m_bad = float(ms[np.argmax(bad)])
        raise NumericalError(f"kernel is not finite at m = {m_bad!r}", mass=m_bad)
    value = complex(np.sum(fine * values))
    err = abs(value - complex(np.sum(coarse * values)))
    return value, err
