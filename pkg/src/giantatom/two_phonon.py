"""Two-phonon scattering off a giant atom under weak coherent drive.

Frequencies are measured from the drive frequency omega_d, so the atom sits
at -delta with delta = omega_d - omega0, and phi = omega_d*T is the phase a
drive phonon picks up between the legs. Everything here is an analytic
evaluator over an immutable :class:`ScatteringKernel`.

Removable singularities are removed algebraically rather than by series
windows: the odd part of M uses

    [M(w) - M(-w)]/(2w) = M(w) M(-w) (gamma T e^{i phi} sinc(wT) - 1),

and the vertex F is written with phi1(z) = (e^z - 1)/z so that q = -sigma*p
needs no special casing.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .errors import ConfigurationError, DomainError, IntegrationError
from .numerics import expm1_ratio, segmented_quad, sinc
from .single_excitation import SystemParams, _unit_phase, _wrap_phase

__all__ = [
    "DriveSettings",
    "ScatteringKernel",
    "CorrelationResult",
    "build_kernel",
    "kernel_from_values",
    "vertex_F",
    "odd_part_M",
    "transmittance_correction",
    "inelastic_spectrum",
    "inelastic_closed_form",
    "total_inelastic_power",
    "elastic_power_correction",
    "spectrum_curvature",
    "splitting_threshold",
    "pair_amplitude",
    "correlation_I",
    "g2_functions",
    "g22_resonant_kinks",
    "EPS_P",
]

EPS_P = 1e-6            # |p| T below which the closed I0 form is not used
_RICHARDSON_PT = 1e-3   # |p| T below which E(p) is extrapolated in p^2
_NBAR_WARN = 0.2
_BANDWIDTH_WARN = 0.1   # warn when 2 pi v_g / d exceeds this fraction of gamma


@dataclass(frozen=True)
class DriveSettings:
    """Monochromatic coherent drive.

    ``phi_pi`` is omega_d*T/pi reduced to [0, 2); it is what the kernel
    uses, so the phase stays exact for large omega_d*T.
    """

    omega_d: float
    delta: float
    phi: float
    Omega: float
    nbar: Optional[float] = None
    pulse_length: Optional[float] = None
    phi_pi: float = field(default=None)

    def __post_init__(self):
        if not (math.isfinite(self.Omega) and self.Omega >= 0):
            raise ConfigurationError("Omega must be finite and non-negative")
        if self.phi_pi is None:
            object.__setattr__(self, "phi_pi", _wrap_phase(self.phi / math.pi))
        if self.nbar is not None and self.nbar > _NBAR_WARN:
            warnings.warn(f"nbar = {self.nbar} is not small; the two-phonon expansion "
                          "may be inaccurate", stacklevel=2)

    @classmethod
    def for_params(cls, params: SystemParams, delta: float = 0.0,
                   Omega: Optional[float] = None, nbar: Optional[float] = None,
                   pulse_length: Optional[float] = None) -> "DriveSettings":
        """Drive detuned by ``delta`` from ``params.omega0``.

        Give either ``Omega`` or both ``nbar`` and ``pulse_length`` (the flux
        is f = nbar/d and Omega = sqrt(8 gamma f)).
        """
        T = params.delay_T
        if Omega is None:
            if nbar is None or pulse_length is None:
                raise ConfigurationError("need Omega or both nbar and pulse_length")
            if pulse_length <= 0 or nbar < 0:
                raise ConfigurationError("nbar must be >= 0 and pulse_length > 0")
            Omega = math.sqrt(8.0 * params.gamma * nbar / pulse_length)
        elif nbar is not None and pulse_length is not None:
            expected = math.sqrt(8.0 * params.gamma * nbar / pulse_length)
            if not math.isclose(Omega, expected, rel_tol=1e-9, abs_tol=1e-300):
                raise ConfigurationError("Omega inconsistent with nbar and pulse_length")
        if pulse_length is not None and 2 * math.pi / pulse_length > _BANDWIDTH_WARN * params.gamma:
            warnings.warn("drive bandwidth 2 pi v_g/d is not small compared to gamma",
                          stacklevel=2)
        omega_d = params.omega0 + delta
        phi_pi = _wrap_phase(params.residual_phase + delta * T / math.pi)
        return cls(omega_d, float(delta), omega_d * T, float(Omega), nbar, pulse_length,
                   phi_pi=phi_pi)


class _Phase(NamedTuple):
    e: complex      # exp(i phi)
    half: complex   # exp(i phi/2)
    c: float        # cos(phi/2)
    s: float        # sin(phi/2)


def _phase(phi_pi: float) -> _Phase:
    half = _unit_phase(phi_pi / 2.0)
    c = 0.0 if phi_pi == 1.0 else half.real
    s = 0.0 if phi_pi == 0.0 else half.imag
    return _Phase(_unit_phase(phi_pi), half, c, s)


@dataclass(frozen=True)
class ScatteringKernel:
    """Derived scattering quantities for one (gamma, T, delta, phi).

    ``C_plus`` and ``C_minus`` are None when p = 0, where they diverge
    (only their combinations entering F, Lambda and I0 stay finite).
    ``Lambda`` is the elastic vertex factor of the O(Omega^4) term.
    """

    gamma: float
    T: float
    delta: float
    phi_pi: float
    lam: complex
    p: complex
    C_plus: Optional[complex]
    C_minus: Optional[complex]
    C_zero: complex
    s11: complex
    s21: complex
    Lambda: complex
    D0: complex = field(repr=False)
    D1: complex = field(repr=False)
    Dt: complex = field(repr=False)
    eiphi: complex = field(repr=False)
    c_half: float = field(repr=False)

    @property
    def phi(self) -> float:
        return math.pi * self.phi_pi

    @property
    def gammaT(self) -> float:
        return self.gamma * self.T

    @property
    def transmittance(self) -> float:
        return abs(self.s11) ** 2

    @property
    def reflectance(self) -> float:
        return abs(self.s21) ** 2

    @property
    def resonant_bright(self) -> bool:
        """delta = 0 and phi = 2 pi k, where p = 0 and s21 = -1."""
        return self.delta == 0.0 and self.phi_pi == 0.0

    def M_at(self, q):
        """M(q) = 1/(q + lambda + i gamma e^{i q T + i phi})."""
        q = np.asarray(q, dtype=float)
        out = 1.0 / (q + self.lam + 1j * self.gamma * self.eiphi * np.exp(1j * q * self.T))
        return out if out.ndim else complex(out)

    def M_inv(self, q):
        q = np.asarray(q, dtype=complex)
        out = q + self.lam + 1j * self.gamma * self.eiphi * np.exp(1j * q * self.T)
        return out if out.ndim else complex(out)


def kernel_from_values(gamma: float, T: float, delta: float, phi_pi: float) -> ScatteringKernel:
    """Kernel from raw values; ``phi_pi`` is phi/pi. ``T = 0`` gives the small atom."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise ConfigurationError("gamma must be positive")
    if not (math.isfinite(T) and T >= 0):
        raise ConfigurationError("T must be non-negative")
    if not math.isfinite(delta):
        raise ConfigurationError("delta must be finite")
    phi_pi = _wrap_phase(phi_pi)
    ph = _phase(phi_pi)
    g = gamma
    lam = complex(delta, g)
    D0 = lam + 1j * g * ph.e          # = delta + 2 i gamma cos(phi/2) e^{i phi/2}
    D1 = lam - 1j * g * ph.e
    p = cmath.sqrt(D0 * D1)
    if p.imag < 0 or (p.imag == 0 and p.real < 0):
        p = -p
    pT = p * T
    Dt = cmath.cos(pT) - 1j * lam * T * complex(sinc(pT))   # (p cos pT - i lam sin pT)/p

    if delta == 0.0:
        s11 = 1j * ph.s * ph.half.conjugate()
        s21 = -ph.c * ph.half.conjugate()
    else:
        den = delta + 2j * g * ph.c * ph.half
        s11 = (delta - g * ph.e.imag) / den
        s21 = -2j * g * ph.c ** 2 / den

    if p == 0:
        C_plus = C_minus = None
    else:
        C_plus = ((p - lam) * cmath.exp(1j * pT) - 1j * g * ph.e) / (2 * p * Dt)
        C_minus = -((-p - lam) * cmath.exp(-1j * pT) - 1j * g * ph.e) / (2 * p * Dt)

    # Lambda with the 1/p^2 cancelled analytically
    Lam = 1 + 1j * g * ph.e / Dt * (1j * T * complex(sinc(pT))
                                    + 0.5 * T * T * complex(sinc(pT / 2)) ** 2 * D1)
    return ScatteringKernel(g, float(T), float(delta), phi_pi, lam, p, C_plus, C_minus,
                            -1.0 + 0j, s11, s21, Lam, D0, D1, Dt, ph.e, ph.c)


def build_kernel(params: SystemParams, drive: DriveSettings) -> ScatteringKernel:
    if params.gamma <= 0:
        raise ConfigurationError("two-phonon scattering needs gamma > 0")
    return kernel_from_values(params.gamma, params.delay_T, drive.delta, drive.phi_pi)


# ---------------------------------------------------------------------------
# Vertex and spectra
# ---------------------------------------------------------------------------

def _phi1_prime(z):
    """d/dz (e^z - 1)/z."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    out = np.empty_like(z)
    if small.any():
        zs = z[small]
        acc = np.zeros_like(zs)
        term_fact = 1.0
        for n in range(1, 18):
            term_fact /= (n + 1)
            acc += n * term_fact * zs ** (n - 1)
        out[small] = acc
    big = ~small
    if big.any():
        zb = z[big]
        out[big] = (zb * np.exp(zb) - np.expm1(zb)) / (zb * zb)
    return out


def _E_even(k: ScatteringKernel, q: np.ndarray) -> np.ndarray:
    """[G(p) - G(-p)]/(2p) with G(s) = iT A(s) phi1(i(q+s)T)."""
    T, g, e = k.T, k.gamma, k.eiphi
    lam = k.lam

    def G(s):
        A = (s - lam) - 1j * g * e * np.exp(-1j * s * T)
        return 1j * T * A * expm1_ratio(1j * (q + s) * T)

    p = k.p
    if abs(p) * T >= _RICHARDSON_PT:
        return (G(p) - G(-p)) / (2 * p)
    z = 1j * q * T
    E0 = 1j * T * ((1 - g * T * e) * expm1_ratio(z) - k.D0 * 1j * T * _phi1_prime(z))
    if p == 0:
        return E0
    rho = p * (_RICHARDSON_PT / (abs(p) * T))
    Er = (G(rho) - G(-rho)) / (2 * rho)
    return E0 + (Er - E0) * (p / rho) ** 2


def vertex_F(kernel: ScatteringKernel, q):
    """Non-Markovian part F(q) of the two-phonon vertex at E = omega = 0."""
    k = kernel
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    if k.T == 0:
        out = np.zeros(q_arr.shape, dtype=complex)
    else:
        if k.D0 == 0:
            raise DomainError("vertex F is undefined at the dark point (delta = 0, phi = pi)")
        pref = -1j * k.gamma * k.eiphi / k.D0
        out = pref * (_E_even(k, q_arr) / k.Dt - 1j * k.T * expm1_ratio(1j * q_arr * k.T))
    return out if np.ndim(q) else complex(out[0])


def odd_part_M(kernel: ScatteringKernel, omega):
    """[M(w) - M(-w)]/(2w), exact at w = 0."""
    k = kernel
    w = np.asarray(omega, dtype=float)
    out = (k.M_at(w) * k.M_at(-w)
           * (k.gamma * k.T * k.eiphi * sinc(w * k.T) - 1.0))
    return out if np.ndim(out) else complex(out)


def _pair_bracket(k: ScatteringKernel, w: np.ndarray) -> np.ndarray:
    F = vertex_F(k, w)
    Fm = vertex_F(k, -w)
    return odd_part_M(k, w) + 0.5 * (k.M_at(w) * F + k.M_at(-w) * Fm)


def _cos_product(k: ScatteringKernel, w: np.ndarray) -> np.ndarray:
    # cos((wT + phi)/2) cos((-wT + phi)/2)
    return 0.5 * (k.eiphi.real + np.cos(w * k.T))


def inelastic_spectrum(kernel: ScatteringKernel, Omega: float, omega):
    """Leading O(Omega^4) inelastic power spectrum S_inel(omega)."""
    k = kernel
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if k.s21 == 0:
        out = np.zeros(w.shape)
    else:
        R = k.reflectance
        out = (Omega ** 4 / (4 * math.pi) * R * _cos_product(k, w) ** 2
               * np.abs(_pair_bracket(k, w)) ** 2)
    return out if np.ndim(omega) else float(out[0])


def inelastic_closed_form(gamma: float, T: float, Omega: float, omega):
    """Resonant bright-state spectrum in closed form (any T >= 0)."""
    w = np.asarray(omega, dtype=float)
    gT1 = 1.0 + gamma * T
    c = np.cos(w * T)
    frac = (1 + c) / ((w - gamma * np.sin(w * T)) ** 2 + gamma ** 2 * (1 + c) ** 2)
    out = Omega ** 4 / (16 * math.pi * gT1 ** 2) * frac ** 2
    return out if out.ndim else float(out)


def pair_amplitude(kernel: ScatteringKernel, omega, pulse_length: Optional[float] = None):
    """Phonon-pair amplitude psi(omega).

    Without ``pulse_length`` the result is in units of 2 v_g/d.
    """
    k = kernel
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    scale = 2.0 * k.gamma
    if pulse_length is not None:
        if pulse_length <= 0:
            raise ConfigurationError("pulse_length must be positive")
        scale /= pulse_length
    if k.s21 == 0:
        out = np.zeros(w.shape, dtype=complex)
    else:
        out = k.s21 * scale * _cos_product(k, w) * _pair_bracket(k, w)
    return out if np.ndim(omega) else complex(out[0])


def transmittance_correction(kernel: ScatteringKernel, Omega: float) -> complex:
    """First nonlinear correction delta s11 to the transmission amplitude."""
    k = kernel
    g = k.gamma
    x = Omega / (2 * g)
    if x >= 1:
        warnings.warn("Omega/(2 gamma) >= 1: the two-phonon expansion is not valid",
                      stacklevel=2)
    # cos^4(phi/2) / (|D0|^2 D0^2) with the dark-point limit taken exactly
    if k.delta == 0.0:
        ratio = -k.eiphi.conjugate() / (16 * g ** 4)
    else:
        ratio = k.c_half ** 4 / (abs(k.D0) ** 2 * k.D0 ** 2)
    pT = k.p * k.T
    p2 = k.D0 * k.D1
    numer = (k.lam * cmath.cos(pT) - 1j * p2 * k.T * complex(sinc(pT))
             + 1j * g * k.eiphi)
    return 0.5 * x * x * 8j * g ** 3 * ratio * numer / k.Dt


def elastic_power_correction(kernel: ScatteringKernel, Omega: float) -> float:
    """O(Omega^4) elastic term of the summed output power.

    Power conservation requires this plus twice the total inelastic power
    to vanish.
    """
    k = kernel
    if k.s21 == 0:
        return 0.0
    M0 = 1.0 / k.D0
    tot = (k.s11.conjugate() + k.s21.conjugate()) * k.Lambda * M0
    return -(Omega ** 4) / (16 * k.gamma ** 2) * k.reflectance * tot.imag


_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(32)


def total_inelastic_power(kernel: ScatteringKernel, Omega: float, method: str = "auto",
                          epsrel: float = 1e-12) -> float:
    """Integral of S_inel over all frequencies.

    ``method='auto'`` uses the closed form in the resonant bright case and
    quadrature otherwise; ``'closed'`` and ``'quad'`` force one route.
    """
    k = kernel
    if method not in ("auto", "closed", "quad"):
        raise ConfigurationError(f"unknown method {method!r}")
    if method == "closed" or (method == "auto" and k.resonant_bright):
        if not k.resonant_bright:
            raise DomainError("closed form needs delta = 0 and phi = 2 pi k")
        return (Omega / (2 * k.gamma)) ** 4 * k.gamma / (4 * (1 + k.gammaT))
    if k.s21 == 0:
        return 0.0
    return 2.0 * _half_line_integral(k, Omega, epsrel)


def _half_line_integral(k: ScatteringKernel, Omega: float, epsrel: float) -> float:
    g, T = k.gamma, k.T
    scale = max(g, abs(k.delta), 1.0 / T if T > 0 else g)
    W1 = 40.0 * scale
    if T > 0 and math.pi / T < W1 / 8:
        edges = list(np.arange(0.0, W1, math.pi / T)) + [W1]
        period = 2 * math.pi / T
    else:
        edges = list(np.linspace(0.0, W1, 65))
        period = W1 / 8
    if abs(k.delta) < W1:
        edges.append(abs(k.delta))
    f = lambda w: inelastic_spectrum(k, Omega, w)
    peak = max(f(0.0), float(np.max(inelastic_spectrum(k, Omega, np.asarray(edges)))))
    core, _ = segmented_quad(f, edges, epsabs=1e-14 * peak * W1, epsrel=epsrel,
                             limit=400, strict=False)

    # quasi-periodic tail: Gauss-Legendre per period, then a C/w^4 remainder
    W2 = 2000.0 * scale
    n_per = int(min(math.ceil((W2 - W1) / period), 20000))
    W2 = W1 + n_per * period
    starts = W1 + period * np.arange(n_per)
    nodes = starts[:, None] + 0.5 * period * (_GL16_X[None, :] + 1.0)
    vals = inelastic_spectrum(k, Omega, nodes.ravel()).reshape(nodes.shape)
    mid = 0.5 * period * (vals @ _GL16_W)
    C = np.sum(vals[-1] * nodes[-1] ** 4 * _GL16_W) * 0.5    # period mean of w^4 S
    tail = C / (3.0 * W2 ** 3)
    total = core + float(np.sum(mid)) + tail
    if not math.isfinite(total):
        raise IntegrationError("inelastic power quadrature produced a non-finite value")
    return total


def spectrum_curvature(kernel: ScatteringKernel, Omega: float = 1.0, h: Optional[float] = None) -> float:
    """d^2 S_inel/d omega^2 at omega = 0 by Richardson-extrapolated differences."""
    k = kernel
    if h is None:
        h = 2e-3 * min(k.gamma, 1.0 / k.T if k.T > 0 else k.gamma)
    s0 = inelastic_spectrum(k, Omega, 0.0)
    d1 = 2 * (inelastic_spectrum(k, Omega, h) - s0) / h ** 2
    d2 = 2 * (inelastic_spectrum(k, Omega, 2 * h) - s0) / (2 * h) ** 2
    return (4 * d1 - d2) / 3


def splitting_threshold(gamma: float = 1.0, bracket=(0.2, 1.0), xtol: float = 1e-12) -> float:
    """gamma*T at which the resonant bright spectrum develops two peaks."""
    def f(gT):
        return spectrum_curvature(kernel_from_values(gamma, gT / gamma, 0.0, 0.0))
    return optimize.brentq(f, *bracket, xtol=xtol, rtol=1e-14)


# ---------------------------------------------------------------------------
# Correlation functions
# ---------------------------------------------------------------------------

def _exp_split(w: complex, n: int):
    """(partial, tail) with partial = sum_{m<=n} w^m/m! and tail = e^w - partial.

    The smaller of the two is summed directly, so neither is formed by
    cancellation of much larger terms.
    """
    if abs(w) <= n + 1:
        if w == 0:
            return 1.0 + 0j, 0j
        term = cmath.exp(n * cmath.log(w) - gammaln(n + 1))
        tail = 0j
        m = n
        while True:
            term = term * w / (m + 1)
            m += 1
            tail += term
            if abs(term) <= 1e-17 * abs(tail) or term == 0 or m > n + 4000:
                break
        return cmath.exp(w) - tail, tail
    partial = 0j
    term = 1 + 0j
    for m in range(n + 1):
        if m:
            term = term * w / m
        partial += term
    return partial, cmath.exp(w) - partial


def _clog(x: complex) -> complex:
    return cmath.log(x) if x != 0 else complex(-math.inf, 0.0)


def _I0_branch(k: ScatteringKernel, a: float, s: complex, N: int) -> complex:
    """One p-branch (s = +p or -p) of the delay sum for I0 at |tau| = a.

    Term n is rho^n e^{i lam z_n} f_n(z_n) with rho = G/(s + lam) and
    z_n = a - nT. For n >= n0 it is rewritten as the geometric piece
    rho^n e^{-i s z_n} minus rho^n e^{i lam z_n} tail_n; the geometric pieces
    sum in closed form with the remainder term to M^{-1}(s) rho^{n0}
    e^{-i s (z_{n0} + T)}. n0 is chosen to keep every term as small as
    possible, which avoids the cancellation between large geometric terms
    when |rho| > 1.
    """
    T, lam = k.T, k.lam
    G = -1j * k.gamma * k.eiphi
    Lrho = _clog(G / (s + lam))
    Minv = k.M_inv(s)
    LP = _clog(cmath.exp(-1j * s * T) * Minv * Minv / (s + lam))
    Ldir = np.empty(N + 1, dtype=complex)
    Ltail = np.empty(N + 1, dtype=complex)
    for n in range(N + 1):
        z = a - n * T
        part, tail = _exp_split(-1j * z * (s + lam), n)
        base = LP + n * Lrho + 1j * lam * z
        Ldir[n] = base + _clog(part)
        Ltail[n] = base + _clog(tail)
    n0s = np.arange(N + 2)
    z0 = a - n0s * T
    Lleft = _clog(Minv) + n0s * Lrho - 1j * s * (z0 + T)
    # cost(n0) = largest magnitude among direct terms n < n0, tail terms n >= n0 and the remainder
    pre = np.concatenate([[-math.inf], np.maximum.accumulate(Ldir.real)])
    suf = np.concatenate([np.maximum.accumulate(Ltail.real[::-1])[::-1], [-math.inf]])
    cost = np.maximum(np.maximum(pre, suf), Lleft.real)
    n0 = int(np.argmin(cost))
    total = cmath.exp(Lleft[n0])
    total += sum(cmath.exp(x) for x in Ldir[:n0])
    total -= sum(cmath.exp(x) for x in Ltail[n0:])
    return total


def _I0_scalar(k: ScatteringKernel, tau: float) -> complex:
    a = abs(tau)
    N = int(math.floor(a / k.T)) if k.T > 0 else 0
    p = k.p
    return (_I0_branch(k, a, p, N) - _I0_branch(k, a, -p, N)) / (2 * p * k.Dt)


def correlation_I(kernel: ScatteringKernel, tau, eps_p: float = EPS_P):
    """(I0(tau), I1(tau)) entering the second-order correlations.

    Raises DomainError for |p| T <= ``eps_p``; use :func:`g22_resonant_kinks`
    in that case.
    """
    k = kernel
    if k.T == 0:
        raise DomainError("correlation_I needs T > 0; use the small-atom limit instead")
    if abs(k.p) * k.T <= eps_p:
        raise DomainError(f"|p| T = {abs(k.p) * k.T:.3e} <= {eps_p:g}: closed form is "
                          "degenerate, use g22_resonant_kinks")
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    I0 = np.array([_I0_scalar(k, x) for x in t])
    I1 = np.array([0.5 * (_I0_scalar(k, x - k.T) + _I0_scalar(k, x + k.T)) for x in t])
    if np.ndim(tau):
        return I0, I1
    return complex(I0[0]), complex(I1[0])


def _kink_sum(gamma: float, T: float, tau: np.ndarray) -> np.ndarray:
    """sum_n Theta(tau - nT) K_n(tau - nT)."""
    a = np.abs(tau)
    out = np.zeros(a.shape)
    N = int(np.floor(a.max() / T)) if a.size else 0
    for n in range(N + 1):
        z = a - n * T
        mask = z >= 0
        if not mask.any():
            continue
        zz = gamma * z[mask]
        if n == 0:
            mag = np.exp(-zz)
        else:
            with np.errstate(divide="ignore"):
                mag = np.exp(n * np.log(zz) - zz - gammaln(n + 1))
        out[mask] += (-1) ** (n + 1) * mag
    return out


def g22_resonant_kinks(kernel: ScatteringKernel, tau):
    """Reflected-channel g22 in the resonant bright case (p = 0) as a kink series."""
    k = kernel
    if not k.resonant_bright:
        raise DomainError("g22_resonant_kinks needs delta = 0 and phi = 2 pi k")
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if k.T == 0:
        out = (1 - np.exp(-2 * k.gamma * np.abs(t))) ** 2
    else:
        out = (1 + _kink_sum(k.gamma, k.T, t) / (1 + k.gammaT)) ** 2
    return out if np.ndim(tau) else float(out[0])


class CorrelationResult(NamedTuple):
    """Second-order correlations on a tau grid.

    ``G11`` and ``G12`` are the unnormalised leading-order correlations in
    units of the squared incoming flux. Normalised entries whose coefficient
    is singular for these parameters are None and listed in ``undefined``.
    """

    tau: np.ndarray
    g11: Optional[np.ndarray]
    g22: Optional[np.ndarray]
    g12: Optional[np.ndarray]
    G11: np.ndarray
    G12: np.ndarray
    undefined: tuple = ()


def _delay_mix(k: ScatteringKernel, t: np.ndarray, eps_p: float) -> np.ndarray:
    """X(tau) = cos(phi) I0 + I1."""
    if k.T == 0:
        return (1 + k.eiphi.real) * np.exp(1j * k.D0 * np.abs(t))
    if abs(k.p) * k.T <= eps_p:
        # p = 0 needs D1 = 0 (bright resonance) or D0 = 0 (dark point); X is analytic
        # in (delta, phi), so the limit at the nearer of the two is used
        if abs(k.D1) <= abs(k.D0):
            return -2 * _kink_sum(k.gamma, k.T, t) / (1 + k.gammaT) + 0j
        return np.zeros(t.shape, dtype=complex)
    I0, I1 = correlation_I(k, t, eps_p)
    return k.eiphi.real * I0 + I1


def g2_functions(kernel: ScatteringKernel, tau, strict: bool = True,
                 eps_p: float = EPS_P) -> CorrelationResult:
    """Normalised g11, g22, g12 and unnormalised G11, G12 at leading order.

    With ``strict`` a singular coefficient raises DomainError naming it;
    otherwise the affected entry is None.
    """
    k = kernel
    g = k.gamma
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    X = _delay_mix(k, t, eps_p)

    sin_phi = k.eiphi.imag
    one_cos = 2 * k.c_half ** 2
    a = k.delta - g * sin_phi
    den2 = k.delta ** 2 - 2 * k.delta * g * sin_phi + 2 * g * g * one_cos
    coef = 0.5 if k.delta == 0.0 else g * g * one_cos / den2
    sgn = 1.0 if a >= 0 else -1.0
    Tr = k.transmittance
    G11 = np.abs(Tr + coef * X) ** 2
    G12 = np.abs(math.sqrt(Tr * k.reflectance) + 1j * sgn * coef * X) ** 2

    undefined = []
    g11 = g12 = g22 = None
    if abs(a) <= 1e-14 * g:
        undefined += ["kappa_11", "kappa_12"]
    else:
        g11 = np.abs(1 + g * g * one_cos / a ** 2 * X) ** 2
        g12 = np.abs(1 + 1j * g / a * X) ** 2
    if one_cos == 0.0:
        undefined.append("kappa_22")
    else:
        g22 = np.abs(1 - X / one_cos) ** 2
    if strict and undefined:
        raise DomainError(f"coefficient pole: {', '.join(undefined)} singular for "
                          f"delta={k.delta}, phi/pi={k.phi_pi}")
    if not np.ndim(tau):
        pick = lambda v: None if v is None else float(v[0])
        return CorrelationResult(float(t[0]), pick(g11), pick(g22), pick(g12),
                                 float(G11[0]), float(G12[0]), tuple(undefined))
    return CorrelationResult(t, g11, g22, g12, G11, G12, tuple(undefined))
