import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from scalinglab import wightman
from scalinglab.errors import DomainError
from scalinglab.spectral import Density, ModelSpec, SpectralMeasure, free_field, log_periodic_gff
from scalinglab.testfn import TestFunction, boost, boost_matrix, conj, translate

from conftest import random_packet, real_packet

M1 = free_field(4, 1.0)


def radial_oracle(d, m, x_f, x_g):
    """W_m for two unit-width Gaussians centred at x_f, x_g.

    conj(f^) g^ = (2 pi)^d exp(-|q|^2) exp(i q.(x_g - x_f)) with q = (omega, -p);
    the angular integral is done in closed form, the radial one by scipy quad.
    """
    D = np.asarray(x_g, float) - np.asarray(x_f, float)
    t, r = D[0], np.linalg.norm(D[1:])

    def angular(p):
        if d == 4:
            return 4 * np.pi * np.sinc(p * r / np.pi)
        return 2 * np.pi * special.j0(p * r)

    def integrand(p, part):
        om = math.sqrt(p * p + m * m)
        v = p ** (d - 2) / (2 * om) * np.exp(-(om * om + p * p)) * angular(p) * np.exp(1j * om * t)
        return v.real if part == 0 else v.imag

    re = integrate.quad(integrand, 0, 12, args=(0,), epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    im = integrate.quad(integrand, 0, 12, args=(1,), epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return (2 * np.pi) ** (d - (d - 1)) * complex(re, im)


@pytest.mark.parametrize("d,m,x_g", [
    (4, 1.0, [0.5, 2.0, 0.0, 0.0]),
    (4, 1.0, [0.0, 0.3, -0.4, 1.2]),
    (4, 0.0, [0.2, 1.0, 1.0, 0.0]),
    (3, 1.0, [0.5, 2.0, 0.0]),
    (3, 0.0, [0.0, 1.5, 0.5]),
])
def test_w2_mass_against_radial_oracle(d, m, x_g):
    x_f = np.zeros(d)
    f = TestFunction.gaussian(x_f, np.ones(d))
    g = TestFunction.gaussian(x_g, np.ones(d))
    tv = wightman.w2_mass(d, m, f, g)
    ref = radial_oracle(d, m, x_f, x_g)
    assert abs(tv.value - ref) <= 1e-6 * abs(ref)
    assert tv.abs_error <= 1e-8 * abs(ref)


def test_w2_mass_d2_against_quad():
    f = TestFunction.gaussian([0, 0], [1, 1])
    g = TestFunction.gaussian([0.5, 1.0], [1, 1])
    m = 0.7

    def h(chi, part):
        om, p = m * np.cosh(chi), m * np.sinh(chi)
        v = 0.5 * np.exp(-(om * om + p * p)) * np.exp(1j * (om * 0.5 - p * 1.0))
        return v.real if part == 0 else v.imag

    re = integrate.quad(h, -6, 6, args=(0,), epsabs=1e-15)[0]
    im = integrate.quad(h, -6, 6, args=(1,), epsabs=1e-15)[0]
    ref = (2 * np.pi) ** 2 / (2 * np.pi) * complex(re, im)
    assert wightman.w2_mass(2, m, f, g).value == pytest.approx(ref, rel=1e-8)


def test_w2_mass_positivity(rng):
    for d in (2, 3, 4):
        f = real_packet(rng, d)
        tv = wightman.w2_mass(d, 0.8, f, f)
        assert tv.value.real >= -tv.abs_error
        assert abs(tv.value.imag) <= tv.abs_error + 1e-15 * abs(tv.value)


def test_w2_mass_translation_invariance(rng):
    f, g = random_packet(rng, 4, poly_degree=1), random_packet(rng, 4)
    a = rng.normal(size=4)
    v = wightman.w2_mass(4, 1.0, f, g).value
    w = wightman.w2_mass(4, 1.0, translate(f, a), translate(g, a)).value
    assert abs(v - w) <= 1e-10 * abs(v)


def test_boost_invariance_d2(rng):
    f, g = random_packet(rng, 2, poly_degree=1), random_packet(rng, 2)
    L = boost_matrix(2, 0.4)
    v = wightman.w2_mass(2, 1.0, f, g).value
    w = wightman.w2_mass(2, 1.0, boost(f, L), boost(g, L)).value
    assert abs(v - w) <= 1e-8 * abs(v)


def test_w2_mass_domain():
    f = TestFunction.gaussian([0, 0], [1, 1])
    with pytest.raises(DomainError):
        wightman.w2_mass(2, 0.0, f, f)
    with pytest.raises(DomainError):
        wightman.w2_mass(4, -1.0, TestFunction.gaussian([0] * 4, [1] * 4), TestFunction.gaussian([0] * 4, [1] * 4))
    with pytest.raises(DomainError):
        wightman.w2_mass(3, 1.0, f, f)


def test_w2_single_atom_is_w2_mass(rng):
    f, g = random_packet(rng, 3), random_packet(rng, 3)
    assert wightman.w2(free_field(3, 0.5), f, g).value == wightman.w2_mass(3, 0.5, f, g).value


def test_w2_linear_in_atoms(rng):
    f, g = random_packet(rng, 4), random_packet(rng, 4)
    model = ModelSpec(4, SpectralMeasure(4, ((0.5, 2.0), (1.5, 0.3))))
    ref = 2.0 * wightman.w2_mass(4, 0.5, f, g).value + 0.3 * wightman.w2_mass(4, 1.5, f, g).value
    assert abs(wightman.w2(model, f, g).value - ref) <= 1e-12 * abs(ref)


def test_w2_log_periodic_refinement():
    f = TestFunction.gaussian([0, 0, 0], [1, 1, 1])
    g = translate(f, [0.5, 0.5, 0])
    kw = dict(d=3, a=0.25, eps=0.5, tau=4.0, m_ref=1.0, support=(1e-2, 1e2))
    coarse = wightman.w2(log_periodic_gff(nodes=128, **kw), f, g)
    fine = wightman.w2(log_periodic_gff(nodes=512, **kw), f, g)
    assert abs(coarse.value - fine.value) <= coarse.abs_error + fine.abs_error
    assert coarse.abs_error <= 1e-6 * abs(coarse.value)


def test_w2_amplitude_factoring(rng):
    f, g = random_packet(rng, 3), random_packet(rng, 3) + random_packet(rng, 3)
    v = wightman.w2(free_field(3, 1.0), f, g).value
    w = wightman.w2(free_field(3, 1.0), (2 - 1j) * f, 0.5j * g).value
    assert w == pytest.approx((2 + 1j) * 0.5j * v, rel=1e-13)


def test_w2_antilinear_in_first_argument(rng):
    f, g = random_packet(rng, 3), random_packet(rng, 3)
    model = free_field(3, 1.0)
    f2 = f + (1j * random_packet(rng, 3))
    lhs = wightman.w2(model, f2, g).value
    h = f2.terms[1]
    rhs = wightman.w2(model, f, g).value + wightman.w2(model, TestFunction(3, (h,)), g).value
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.fixture(scope="module")
def real_pair():
    rng = np.random.default_rng(7)
    return real_packet(rng, 4), real_packet(rng, 4)


def test_sigma_antisymmetric(real_pair):
    f, g = real_pair
    assert abs(wightman.commutator_sigma(M1, f, f)) <= 1e-14
    s = wightman.commutator_sigma(M1, f, g)
    assert abs(s + wightman.commutator_sigma(M1, g, f)) <= 1e-12 * abs(s)


def test_sigma_mu_reconstruct_w(real_pair):
    f, g = real_pair
    s, mu, _ = wightman.sigma_mu(M1, f, g)
    assert wightman.w2(M1, f, g).value == pytest.approx(mu + 0.5j * s, rel=1e-12)
    assert wightman.symmetric_mu(M1, f, g) == pytest.approx(wightman.symmetric_mu(M1, g, f), rel=1e-13)
    assert wightman.symmetric_mu(M1, f, f) == pytest.approx(wightman.w2(M1, f, f).value.real, rel=1e-13)
    assert wightman.symmetric_mu(M1, f, f) > 0


def test_sigma_microcausality():
    f = TestFunction.gaussian([0, 0, 0, 0], [1, 1, 1, 1])
    g = TestFunction.gaussian([0, 10, 0, 0], [1, 1, 1, 1])
    s = wightman.commutator_sigma(M1, f, g)
    scale = math.sqrt(wightman.w2(M1, f, f).value.real * wightman.w2(M1, g, g).value.real)
    assert abs(s) <= 1e-6 * scale
    h = TestFunction.gaussian([10, 0, 0, 0], [1, 1, 1, 1])
    assert abs(wightman.commutator_sigma(M1, f, h)) > 1e-3 * scale


def test_sigma_requires_real(rng):
    f = random_packet(rng, 4)
    with pytest.raises(DomainError):
        wightman.commutator_sigma(M1, f, f)


@given(st.integers(0, 2**32 - 1))
def test_hermiticity(seed):
    rng = np.random.default_rng(seed)
    model = free_field(3, rng.uniform(0, 2))
    f, g = real_packet(rng, 3), real_packet(rng, 3)
    a, b = wightman.w2(model, f, g), wightman.w2(model, g, f)
    assert abs(a.value - np.conj(b.value)) <= a.abs_error + b.abs_error + 1e-13 * abs(a.value)


@pytest.fixture(scope="module")
def mu_gram():
    rng = np.random.default_rng(11)
    model = free_field(3, 0.5)
    fs = [real_packet(rng, 3) for _ in range(4)]
    G = np.array([[wightman.symmetric_mu(model, f, g) for g in fs] for f in fs])
    return G


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_mu_positivity(mu_gram, c):
    c = np.asarray(c)
    assert c @ mu_gram @ c >= -1e-12 * np.abs(mu_gram).sum() * (c @ c)


def test_npoint_small_n(rng):
    fs = [random_packet(rng, 3) for _ in range(3)]
    model = free_field(3, 1.0)
    assert wightman.npoint_wick(model, []) == 1
    assert wightman.npoint_wick(model, fs[:1]) == 0
    assert wightman.npoint_wick(model, fs) == 0
    assert wightman.npoint_wick(model, fs[:2]) == wightman.w2(model, fs[0], fs[1]).value


def test_npoint_four_is_pairing_sum(rng):
    fs = [random_packet(rng, 3) for _ in range(4)]
    model = free_field(3, 1.0)
    W = {(i, j): wightman.w2(model, fs[i], fs[j]).value for i in range(4) for j in range(4)}
    ref = W[0, 1] * W[2, 3] + W[0, 2] * W[1, 3] + W[0, 3] * W[1, 2]
    assert wightman.npoint_wick(model, fs) == pytest.approx(ref, rel=1e-14)


def test_npoint_cap():
    f = TestFunction.gaussian([0, 0, 0], [1, 1, 1])
    with pytest.raises(DomainError):
        wightman.npoint_wick(free_field(3, 1.0), [f] * 14)


def weyl_fourth_derivative(model, fs, h=5e-3):
    """Mixed derivative d^4/ds_1..ds_4 of omega(W(s_1 f_1) ... W(s_4 f_4)) at 0, Richardson-extrapolated."""

    def D(step):
        total = 0j
        for signs in itertools.product((1, -1), repeat=4):
            word = [s * step * f for s, f in zip(signs, fs)]
            total += math.prod(signs) * wightman.weyl_correlator(model, word)
        return total / (16 * step**4)

    return (4 * D(h) - D(2 * h)) / 3


def test_wick_matches_weyl_generating_function():
    rng = np.random.default_rng(3)
    model = free_field(4, 1.0)
    fs = [TestFunction.gaussian(rng.uniform(-0.5, 0.5, 4), [rng.uniform(0.7, 1.5)] * 4) for _ in range(4)]
    wick = wightman.npoint_wick(model, fs)
    assert abs(weyl_fourth_derivative(model, fs) - wick) <= 1e-6 * abs(wick)


def test_weyl_trivial_words(real_pair):
    f, _ = real_pair
    assert wightman.weyl_correlator(M1, []) == 1
    mu = wightman.symmetric_mu(M1, f, f)
    assert wightman.weyl_correlator(M1, [f]) == pytest.approx(math.exp(-mu / 2), rel=1e-14)
    with pytest.raises(DomainError):
        wightman.WeylWord((TestFunction.gaussian([0] * 4, [1] * 4, amplitude=1j),))


def test_weyl_mixed_derivative_gives_w(real_pair):
    f, g = real_pair
    h = 1e-3

    def logF(s, t):
        return np.log(wightman.weyl_correlator(M1, [s * f, t * g]))

    d2 = (logF(h, h) - logF(h, -h) - logF(-h, h) + logF(-h, -h)) / (4 * h * h)
    assert abs(-d2 - wightman.w2(M1, f, g).value) <= 1e-5 * abs(wightman.w2(M1, f, g).value)


def test_weyl_ccr_composition(real_pair):
    f, g = real_pair
    lhs = wightman.weyl_correlator(M1, [f, g])
    sigma = wightman.commutator_sigma(M1, f, g)
    rhs = np.exp(-0.5j * sigma) * wightman.weyl_correlator(M1, [f + g])
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_vacuum_distance_small_field(real_pair):
    g, _ = real_pair
    a = np.array([0.3, 0.2, 0.0, -0.1])
    h = translate(g, a) - g
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3):
        dist = wightman.weyl_vacuum_distance(M1, eps * g, translate(eps * g, a))
        # two-term truncation W(g) Omega ~ Omega + i phi(g) Omega
        trunc = eps * math.sqrt(wightman.w2(M1, h, h).value.real)
        ratios.append(abs(dist / trunc - 1))
    assert ratios[-1] <= 1e-5
    assert ratios[0] > ratios[1] > ratios[2]


def test_vacuum_distance_formula(real_pair):
    g, _ = real_pair
    h = translate(g, [0.5, 0.5, 0, 0])
    direct = 2 - 2 * (wightman.weyl_correlator(M1, [-1 * g, h])).real
    assert wightman.weyl_vacuum_distance(M1, g, h) ** 2 == pytest.approx(direct, rel=1e-12)
    assert wightman.weyl_vacuum_distance(M1, g, g) == 0.0
