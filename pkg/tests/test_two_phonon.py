import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from giantatom.errors import ConfigurationError, DomainError
from giantatom.single_excitation import SystemParams
from giantatom.two_phonon import (
    DriveSettings,
    build_kernel,
    correlation_I,
    elastic_power_correction,
    g2_functions,
    g22_resonant_kinks,
    inelastic_closed_form,
    inelastic_spectrum,
    kernel_from_values as K,
    odd_part_M,
    pair_amplitude,
    spectrum_curvature,
    splitting_threshold,
    total_inelastic_power,
    transmittance_correction,
    vertex_F,
)


# --- drive and kernel -------------------------------------------------------------

def test_drive_settings_guards():
    p = SystemParams.with_phase(0.01, 20.0)
    with pytest.raises(ConfigurationError):
        DriveSettings(1.0, 0.0, 0.0, -0.1)
    with pytest.warns(UserWarning, match="nbar"):
        DriveSettings(1.0, 0.0, 0.0, 0.1, nbar=0.5)
    with pytest.raises(ConfigurationError):
        DriveSettings.for_params(p)
    d = DriveSettings.for_params(p, nbar=0.01, pulse_length=1e5)
    assert d.Omega == pytest.approx(math.sqrt(8 * p.gamma * 0.01 / 1e5))
    with pytest.warns(UserWarning, match="bandwidth"):
        DriveSettings.for_params(p, nbar=0.01, pulse_length=10.0)
    with pytest.raises(ConfigurationError):
        DriveSettings.for_params(p, Omega=1.0, nbar=0.01, pulse_length=1e5)


def test_drive_phase_is_exact():
    p = SystemParams.with_phase(1.0, 2000.0)
    d = DriveSettings.for_params(p, delta=0.0, Omega=0.1)
    assert d.phi_pi == 0.0
    k = build_kernel(p, d)
    assert k.s11 == 0 and k.s21 == -1


def test_build_kernel_needs_coupling():
    p = SystemParams(0.0, 100.0)
    with pytest.raises(ConfigurationError):
        build_kernel(p, DriveSettings.for_params(p, Omega=0.1))


@pytest.mark.parametrize("phi_pi", [0.0, 2.0, 4.0])
def test_resonant_bright_scattering(phi_pi):
    k = K(1.0, 1.0, 0.0, phi_pi)
    assert k.s11 == 0 and k.s21 == -1 and k.p == 0
    assert k.resonant_bright


@pytest.mark.parametrize("delta", [0.0, 0.7, -2.0])
def test_dark_phase_no_reflection(delta):
    k = K(1.0, 1.0, delta, 1.0)
    assert k.s21 == 0
    assert k.transmittance == 1


def test_unitarity_random():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        k = K(1.0, rng.uniform(0, 20), rng.normal() * 3, rng.uniform(0, 2))
        worst = max(worst, abs(abs(k.s11) ** 2 + abs(k.s21) ** 2 - 1))
        assert k.p.imag >= 0
        assert k.C_zero == -1
    assert worst <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(-10.0, 10.0), st.floats(0.0, 2.0))
def test_p_branch(gT, delta, phi_pi):
    k = K(1.0, gT, delta, phi_pi)
    assert k.p.imag > 0 or (k.p.imag == 0 and k.p.real >= 0)
    assert k.p ** 2 == pytest.approx(k.lam ** 2 + cmath.exp(2j * math.pi * phi_pi), abs=1e-12)


def test_kernel_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        K(0.0, 1.0, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        K(1.0, -1.0, 0.0, 0.0)


# --- vertex F ----------------------------------------------------------------------

def F_oracle(k, q):
    """F(q) from the two-phonon integral equation at E = omega = 0, by quadrature."""
    T, lam, e = k.T, k.lam, k.eiphi
    h = lambda a: e * np.exp(1j * a * T) / (lam - a)
    Fm = lambda a: vertex_F(k, -np.asarray(a, float))

    def f(a):
        a = np.asarray(a, float)
        return h(a) * (-1 / a + Fm(a)) / (q - a)

    Rq = h(q) * (-1 / q + Fm(q))
    R0 = h(0.0) / q
    w = min(abs(q) / 2, 0.5)

    def g(a):
        v = f(a)
        if abs(a - q) < w:
            v = v - Rq / (q - a)
        if abs(a) < w:
            v = v - R0 / (-a)
        return v

    A = 50 * max(k.gamma, abs(q), 1 / T)
    pts = sorted(set([-A, -w, 0, w, q - w, q, q + w, A] + list(np.arange(-A, A, math.pi / T))))
    core = 0j
    for a, b in zip(pts[:-1], pts[1:]):
        core += integrate.quad(lambda x: g(x).real, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        core += 1j * integrate.quad(lambda x: g(x).imag, a, b, epsabs=1e-14, epsrel=1e-12,
                                    limit=200)[0]
    # beyond |a| = A the integrand is B0(a) + B1(a) e^{iaT}
    pref = -1j * k.gamma * e / k.D0
    Cs = [(k.C_plus, k.p), (k.C_minus, -k.p), (-1.0, 0.0)]

    def B0(a):
        return e / ((lam - a) * (q - a)) * pref * sum(C / (s - a) for C, s in Cs)

    def B1(a):
        return e / ((lam - a) * (q - a)) * (
            -1 / a - pref * sum(C * cmath.exp(-1j * s * T) / (s - a) for C, s in Cs))

    tail = 0j
    for sgn in (1, -1):
        b0 = lambda x: B0(sgn * x)
        b1 = lambda x: B1(sgn * x)
        tail += integrate.quad(lambda x: b0(x).real, A, np.inf, epsabs=1e-15)[0]
        tail += 1j * integrate.quad(lambda x: b0(x).imag, A, np.inf, epsabs=1e-15)[0]
        for part, wt, fac in [(np.real, "cos", 1), (np.imag, "cos", 1j),
                              (np.real, "sin", 1j * sgn), (np.imag, "sin", -sgn)]:
            tail += fac * integrate.quad(lambda x: part(b1(x)), A, np.inf, weight=wt, wvar=T)[0]
    I = (core + tail - 1j * math.pi * h(0.0) / q + 1j * math.pi * h(q) / q
         - 1j * math.pi * h(q) * Fm(q))
    return k.gamma / (2 * math.pi) * I


@pytest.mark.parametrize("g,T,d,ph", [(1.0, 1.0, 0.4, 0.3), (1.0, 2.0, -0.8, 1.2)])
@pytest.mark.parametrize("q", [0.7, -1.9, 3.3])
def test_vertex_solves_integral_equation(g, T, d, ph, q):
    k = K(g, T, d, ph)
    assert abs(F_oracle(k, q) - vertex_F(k, q)) <= 1e-6


def test_vertex_small_atom_vanishes():
    q = np.linspace(-5, 5, 11)
    assert np.all(vertex_F(K(1.0, 0.0, 0.3, 0.2), q) == 0)
    assert np.max(np.abs(vertex_F(K(1.0, 1e-9, 0.3, 0.2), q))) < 1e-8


def test_vertex_removable_points():
    # q = 0 (sigma = 0 term) and p -> 0 are finite and continuous
    k = K(1.0, 1.0, 0.4, 0.3)
    assert vertex_F(k, 0.0) == pytest.approx(vertex_F(k, 1e-7), abs=1e-6)
    kb = K(1.0, 1.0, 0.0, 0.0)
    near = K(1.0, 1.0, 1e-9, 1e-9 / math.pi)
    q = np.array([-2.0, 0.0, 0.5])
    assert np.all(np.isfinite(vertex_F(kb, q)))
    assert np.allclose(vertex_F(kb, q), vertex_F(near, q), atol=1e-7)
    with pytest.raises(DomainError):
        vertex_F(K(1.0, 1.0, 0.0, 1.0), 0.3)


def test_odd_part_of_M_limit():
    k = K(1.0, 1.0, 0.4, 0.3)
    h = 1e-5
    deriv = (k.M_at(h) - k.M_at(-h)) / (2 * h)
    assert odd_part_M(k, 0.0) == pytest.approx(deriv, rel=1e-8)


# --- transmittance correction -----------------------------------------------------

@pytest.mark.parametrize("gT", [0.0, 0.5, 1.0, 5.0])
def test_delta_s11_resonant_bright(gT):
    k = K(1.0, gT, 0.0, 0.0)
    x = 0.1
    assert transmittance_correction(k, 0.2) == pytest.approx(0.5 * x * x / (1 + gT), rel=1e-13)


@pytest.mark.parametrize("d", [0.0, 0.3, -1.7])
def test_delta_s11_small_atom(d):
    T = 1e-4
    k = K(1.0, T, d, d * T / math.pi)
    x = 0.1
    ref = 0.5 * x * x * (1 + 1j * d / 2) / (1 + (d / 2) ** 2) ** 2
    assert abs(transmittance_correction(k, 0.2) - ref) <= 1e-6


@pytest.mark.parametrize("gT,d,ph", [(20, 0.5, 0.3), (80, -1.0, 1.5), (40, 2.0, 0.0)])
def test_delta_s11_large_atom(gT, d, ph):
    k = K(1.0, gT, d, ph)
    x = 0.1
    c = math.cos(math.pi * ph / 2)
    short = 0.5 * x * x * 8j * c ** 4 / (abs(k.D0) ** 2 * k.D0)
    assert transmittance_correction(k, 0.2) == pytest.approx(short * k.p / k.D0, rel=1e-9)


def test_delta_s11_validity_warning():
    with pytest.warns(UserWarning):
        transmittance_correction(K(1.0, 1.0, 0.0, 0.0), 2.5)


def test_two_phonon_transmittance_can_drop_below_linear():
    d = np.linspace(-3, 3, 121)
    diff = []
    for x in d:
        k = K(1.0, 2.0, x, 0.0 + 2.0 * x / math.pi)
        diff.append(abs(k.s11 + transmittance_correction(k, 0.6)) ** 2 - k.transmittance)
    diff = np.array(diff)
    assert diff.max() > 0 and diff.min() < 0
    # the small atom only enhances transmission
    small = [K(1.0, 0.02, x, 0.02 * x / math.pi) for x in d]
    assert all(abs(k.s11 + transmittance_correction(k, 0.6)) ** 2 >= k.transmittance for k in small)


# --- inelastic spectrum --------------------------------------------------------

def test_inelastic_small_atom():
    w = np.linspace(-30, 30, 2001)
    ref = (1 / (4 * math.pi)) * 0.15 ** 4 * (4 / (w ** 2 + 4)) ** 2
    assert np.allclose(inelastic_spectrum(K(1.0, 0.0, 0.0, 0.0), 0.3, w), ref, rtol=1e-12, atol=0)


@pytest.mark.parametrize("gT", [0.2, 0.5, 1.0, 2.0, 20.0])
def test_inelastic_closed_form(gT):
    w = np.linspace(-30, 30, 2001)
    a = inelastic_spectrum(K(1.0, gT, 0.0, 0.0), 0.3, w)
    b = inelastic_closed_form(1.0, gT, 0.3, w)
    assert np.max(np.abs(a - b) / b) <= 1e-10


def test_inelastic_zero_at_dark_phase():
    w = np.linspace(-10, 10, 101)
    assert np.all(inelastic_spectrum(K(1.0, 1.0, 0.4, 1.0), 0.3, w) == 0)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.01, 30.0), st.floats(-5.0, 5.0), st.floats(0.0, 2.0), st.floats(-40.0, 40.0))
def test_inelastic_non_negative(gT, delta, phi_pi, w):
    assert inelastic_spectrum(K(1.0, gT, delta, phi_pi), 0.3, w) >= 0


@pytest.mark.parametrize("d", [0.3, 1.1])
def test_inelastic_detuning_symmetry(d):
    w = np.linspace(-10, 10, 101)
    a = inelastic_spectrum(K(1.0, 5.0, d, 200 + 5 * d / math.pi), 1.0, w)
    b = inelastic_spectrum(K(1.0, 5.0, -d, 200 - 5 * d / math.pi), 1.0, w)
    assert np.max(np.abs(a - b)) <= 1e-12 * a.max()
    assert np.max(np.abs(a - a[::-1])) <= 1e-12 * a.max()


def test_peak_splitting_threshold():
    assert splitting_threshold() == pytest.approx(0.5, abs=1e-6)
    assert spectrum_curvature(K(1.0, 0.4, 0.0, 0.0)) < 0
    assert spectrum_curvature(K(1.0, 0.6, 0.0, 0.0)) > 0


# --- total power ---------------------------------------------------------------

@pytest.mark.parametrize("gT", [0.2, 1.0, 20.0])
def test_total_power_closed_vs_quadrature(gT):
    k = K(1.0, gT, 0.0, 0.0)
    assert total_inelastic_power(k, 0.3, method="quad") == pytest.approx(
        total_inelastic_power(k, 0.3), rel=1e-8)


def test_total_power_limits():
    x = 0.15
    assert total_inelastic_power(K(1.0, 1e-10, 0.0, 0.0), 0.3) == pytest.approx(x ** 4 / 4, rel=1e-9)
    T = 1e4
    assert total_inelastic_power(K(1.0, T, 0.0, 0.0), 0.3) == pytest.approx(x ** 4 / (4 * T), rel=2e-4)


@pytest.mark.parametrize("d", [0.5, -1.3, 0.0])
def test_power_balance(d):
    # P_C with a detuned drive; the drive phase follows omega_d T
    k = K(1.0, 1.0, d, 20 + d / math.pi + (0.3 if d == 0 else 0.0))
    e = elastic_power_correction(k, 0.3)
    q = total_inelastic_power(k, 0.3)
    assert abs(e + 2 * q) <= 1e-6 * abs(e)


def test_total_power_errors():
    with pytest.raises(DomainError):
        total_inelastic_power(K(1.0, 1.0, 0.5, 0.0), 0.3, method="closed")
    with pytest.raises(ConfigurationError):
        total_inelastic_power(K(1.0, 1.0, 0.0, 0.0), 0.3, method="simpson")
    assert total_inelastic_power(K(1.0, 1.0, 0.2, 1.0), 0.3) == 0


# --- pair amplitude ------------------------------------------------------------

def test_pair_amplitude_properties():
    k = K(1.0, 2.0, 0.3, 0.7)
    w = np.linspace(-8, 8, 401)
    psi = pair_amplitude(k, w)
    assert np.allclose(psi, psi[::-1], rtol=1e-12, atol=0)
    ratio = inelastic_spectrum(k, 0.3, w) / np.abs(psi) ** 2
    assert np.max(np.abs(ratio / ratio[0] - 1)) < 1e-12
    assert np.all(pair_amplitude(K(1.0, 2.0, 0.3, 1.0), w) == 0)
    assert pair_amplitude(k, 0.5, pulse_length=10.0) == pytest.approx(pair_amplitude(k, 0.5) / 10)
    with pytest.raises(ConfigurationError):
        pair_amplitude(k, 0.5, pulse_length=0.0)


# --- correlations --------------------------------------------------------------

def I0_quad(k, tau):
    """I0 from its Fourier integral; the integrand is even in q."""
    def h(q):
        q = np.asarray(q, float)
        return 2 * odd_part_M(k, q) + k.M_at(q) * vertex_F(k, q) + k.M_at(-q) * vertex_F(k, -q)

    def part(fn):
        return integrate.quad(lambda q: fn(h(q)), 0, np.inf, weight="cos", wvar=tau,
                              limlst=200)[0]

    return k.M_inv(0.0) / (math.pi * 1j) * (part(np.real) + 1j * part(np.imag))


@pytest.mark.parametrize("g,T,d,ph", [(1.0, 1.0, 0.4, 0.3), (1.0, 0.5, -0.8, 1.2),
                                     (2.0, 1.0, 0.1, 0.05)])
def test_I0_matches_fourier_integral(g, T, d, ph):
    k = K(g, T, d, ph)
    for tau in (0.3, 1.7, 3.2):
        a, _ = correlation_I(k, tau)
        assert abs(a - I0_quad(k, tau)) <= 1e-8


def test_I1_definition():
    k = K(1.0, 1.0, 0.4, 0.3)
    tau = np.linspace(0, 4, 41)
    I0, I1 = correlation_I(k, tau)
    lo, _ = correlation_I(k, tau - 1.0)
    hi, _ = correlation_I(k, tau + 1.0)
    assert np.allclose(I1, 0.5 * (lo + hi), atol=1e-14)
    assert np.allclose(correlation_I(k, -tau)[0], I0, atol=1e-14)


@pytest.mark.parametrize("gT,tol", [(1e-2, 4e-3), (1e-3, 4e-4)])
def test_I0_small_atom(gT, tol):
    k = K(1.0, gT, 0.4, 0.3)
    tau = np.array([0.5, 1.3])
    I0, I1 = correlation_I(k, tau)
    ref = np.exp(1j * (k.lam + 1j * k.gamma * k.eiphi) * tau)
    assert np.max(np.abs(I0 - ref)) < tol
    assert np.max(np.abs(I1 - ref)) < tol


def _i0_large(k, tau):
    p, lam, T = k.p, k.lam, k.T
    G = -1j * k.gamma * k.eiphi
    n = int(tau // T)
    z = tau - n * T
    fm = sum((-1j * z * (-p + lam)) ** m / math.factorial(m) for m in range(n + 1))
    fp = sum((-1j * z * (p + lam)) ** m / math.factorial(m) for m in range(n + 1))
    return G ** n * (cmath.exp(1j * p * z) / (-p + lam) ** n
                     + G * cmath.exp(-1j * p * (tau - (n + 1) * T)) / (p + lam) ** (n + 1)
                     - cmath.exp(1j * lam * z) * (fm / (-p + lam) ** n - fp / (p + lam) ** n))


def test_I0_large_atom_interval_structure():
    # |e^{ipT}| = 7.6e-12 here, so the terms dropped by the asymptotic form are tiny
    k = K(1.0, 20.0, 0.5, 0.3)
    for tau in (6.0, 30.0, 44.0, 74.0):
        a, _ = correlation_I(k, tau)
        assert abs(a - _i0_large(k, tau)) <= 1e-9 * max(1.0, abs(a))


def test_correlation_I_errors():
    with pytest.raises(DomainError, match="g22_resonant_kinks"):
        correlation_I(K(1.0, 1.0, 0.0, 0.0), 0.5)
    with pytest.raises(DomainError):
        correlation_I(K(1.0, 0.0, 0.4, 0.3), 0.5)


def test_g22_small_atom():
    tau = np.linspace(0, 5, 51)
    for d, ph in [(0.0, 0.0), (0.4, 0.3)]:
        k = K(1.0, 0.0, d, ph)
        r = g2_functions(k, tau, strict=False)
        phi = math.pi * ph
        ref = np.abs(1 - np.exp(1j * (d - math.sin(phi)) * tau)
                     * np.exp(-(1 + math.cos(phi)) * tau)) ** 2
        assert np.allclose(r.g22, ref, atol=1e-14)
        assert r.g22[0] == pytest.approx(0.0, abs=1e-28)


def test_g2_bright_resonance_G11_equals_G12():
    # near p = 0 the exact route applies and (1/4)|I0 + I1|^2 can be formed explicitly
    tau = np.linspace(0, 4, 21)
    for gT in (0.5, 2.0):
        d = 1e-6 / (2 * gT)
        k = K(gT, 1.0, d, d / math.pi)
        I0, I1 = correlation_I(k, tau)
        r = g2_functions(K(gT, 1.0, 0.0, 0.0), tau, strict=False)
        assert np.allclose(r.G11, r.G12, atol=1e-15)
        assert np.allclose(r.G11, 0.25 * np.abs(I0 + I1) ** 2, atol=1e-4)


def test_g2_dark_phase():
    r = g2_functions(K(1.0, 1.0, 0.0, 1.0), 0.0, strict=False)
    assert r.G11 == 1.0 and r.G12 == 0.0
    assert r.g22 is None and "kappa_22" in r.undefined


def test_g2_strict_names_coefficient():
    with pytest.raises(DomainError, match="kappa_11"):
        g2_functions(K(1.0, 1.0, 0.0, 0.0), [0.0, 1.0])
    with pytest.raises(DomainError, match="kappa_22"):
        g2_functions(K(1.0, 1.0, 0.5, 1.0), [0.0, 1.0])
    # delta = gamma sin(phi) away from resonance
    with pytest.raises(DomainError, match="kappa_12"):
        g2_functions(K(1.0, 1.0, math.sin(0.6 * math.pi), 0.6), [0.5])


def test_g2_transmitted_beats_cross_at_zero_delay():
    for gT in (0.2, 2.0, 20.0):
        for ph in np.linspace(0, 2, 81):
            r = g2_functions(K(gT, 1.0, 0.0, ph), 0.0, strict=False)
            assert r.G11 >= r.G12 - 1e-15


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-3.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 6.0))
def test_g2_non_negative(gT, delta, phi_pi, tau):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = g2_functions(K(1.0, gT, delta, phi_pi), tau, strict=False)
    for v in (r.g11, r.g22, r.g12, r.G11, r.G12):
        assert v is None or v >= 0


# --- kink series -----------------------------------------------------------------

def test_kinks_examples():
    assert g22_resonant_kinks(K(1.0, 1.0, 0.0, 0.0), 0.0) == pytest.approx(0.25, abs=1e-15)
    assert g22_resonant_kinks(K(1.0, 1e-9, 0.0, 0.0), 0.0) == pytest.approx(0.0, abs=1e-17)
    assert g22_resonant_kinks(K(1.0, 0.0, 0.0, 0.0), 0.0) == 0.0
    with pytest.raises(DomainError):
        g22_resonant_kinks(K(1.0, 1.0, 0.3, 0.0), 0.0)


def test_kinks_large_atom_shape():
    # the linearised kink shape is accurate to O(1/gamma T)
    gT = 40.0
    k = K(1.0, gT, 0.0, 0.0)
    z = np.linspace(0.05, 5.0, 50)
    for n in (1, 2, 3):
        Kn = (-1) ** (n + 1) * np.exp(-z) * z ** n / math.factorial(n)
        val = g22_resonant_kinks(k, n * gT + z) - 1
        assert np.max(np.abs(val - 2 / gT * Kn)) <= 0.05 * np.max(np.abs(2 / gT * Kn))
        assert np.sign(val[np.argmax(np.abs(val))]) == (-1) ** (n + 1)


@pytest.mark.parametrize("gT", [0.5, 1.0, 5.0])
def test_kinks_match_exact_route_near_p0(gT):
    d = optimize.brentq(lambda x: abs(K(gT, 1.0, x, x / math.pi).p) - 1e-3, 0.0, 1.0,
                        xtol=1e-300, rtol=1e-14)
    k = K(gT, 1.0, d, d / math.pi)
    assert abs(k.p) * k.T == pytest.approx(1e-3, rel=1e-9)
    tau = np.linspace(0, 6, 61)
    r = g2_functions(k, tau, strict=False)
    assert np.max(np.abs(r.g22 - g22_resonant_kinks(K(gT, 1.0, 0.0, 0.0), tau))) <= 1e-4


@pytest.mark.parametrize("x", [1e-7, 1e-9, 1e-69])
def test_g2_below_threshold_uses_limit(x):
    tau = np.linspace(0, 4, 9)
    near_bright = g2_functions(K(1.0, 1.0, x, 0.0), tau, strict=False)
    assert np.allclose(near_bright.G11, g2_functions(K(1.0, 1.0, 0.0, 0.0), tau, strict=False).G11,
                       atol=1e-6)
    near_dark = g2_functions(K(1.0, 1.0, 0.0, 1.0 - x), tau, strict=False)
    assert np.allclose(near_dark.G11, 1.0, atol=1e-6)
